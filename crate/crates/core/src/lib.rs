// `!(x > 0.0)` is used deliberately so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod demography;
pub mod grid;
pub mod harness;
pub mod infection;
pub mod linear;
pub mod model;
pub mod report;
pub mod sampling;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{l1_norm, AgeGrid, NodalProfile, StateField};
pub use model::{
    derive_constants, validate_hypotheses, ForceSpec, MixingKernel, Model, ModelConstants, MortalityModel,
    RateSet, ValidationReport,
};
