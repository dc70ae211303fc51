use thiserror::Error;

/// Errors raised by model construction, the linear operators and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs whose shapes do not fit together (array lengths, grid sizes).
    #[error("structural error in `{field}`: {detail}")]
    Structural { field: String, detail: String },

    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A hypothesis of the model is violated.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// A denominator or pivot too close to zero.
    #[error("conditioning error: {0}")]
    Conditioning(String),

    #[error("numerical failure at step {step}: {detail}")]
    Numerical { step: usize, detail: String },

    #[error("positivity failure at step {step}: minimum nodal value {value:e}")]
    Positivity { step: usize, value: f64 },

    #[error("Picard iteration did not converge in {iterations} iterations (last sup-delta {last_delta:e})")]
    NonConvergence { iterations: usize, last_delta: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn structural(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Structural {
            field: field.into(),
            detail: detail.into(),
        }
    }
}
