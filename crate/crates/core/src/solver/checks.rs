use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::demography::solve_mckendrick;
use crate::error::Result;
use crate::grid::StateField;
use crate::infection::{lambda_apply, XiClamp};
use crate::model::{MixingKernel, Model, ModelConstants};

use super::{simulate_direct, Trajectory};

#[derive(Debug, Clone, Serialize)]
pub struct TruncationReport {
    pub max_lambda: f64,
    pub z1: f64,
    pub margin: f64,
    pub passed: bool,
}

/// `max_{m,j} |Λ(a_j, i(t_m))| < z1`: the clamp never acted, so the truncated
/// system that was solved coincides with the original one.
pub fn truncation_inactive_check(traj: &Trajectory, kernel: &MixingKernel, clamp: &XiClamp) -> TruncationReport {
    let max_lambda = traj
        .fields
        .iter()
        .flat_map(|f| lambda_apply(kernel, &traj.grid, &f.i))
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let margin = clamp.z1 - max_lambda;
    TruncationReport {
        max_lambda,
        z1: clamp.z1,
        margin,
        passed: max_lambda < clamp.z1 || (max_lambda == 0.0 && clamp.z1 == 0.0),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GronwallReport {
    #[serde(serialize_with = "crate::report::number")]
    pub sup_norm: f64,
    #[serde(serialize_with = "crate::report::number")]
    pub radius: f64,
    pub passed: bool,
}

/// `sup_m ‖x(t_m)‖₁ < R` (`R̂` for a nonlinear force).
pub fn gronwall_check(traj: &Trajectory, constants: &ModelConstants, nonlinear: bool) -> GronwallReport {
    let sup_norm = traj.sup_norm();
    let radius = if nonlinear { constants.r_hat } else { constants.r };
    GronwallReport {
        sup_norm,
        radius,
        passed: sup_norm < radius,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    pub min_value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn positivity_check(traj: &Trajectory, tolerance: f64) -> PositivityReport {
    let min_value = traj.min_value();
    PositivityReport {
        min_value,
        tolerance,
        passed: min_value >= -tolerance,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MassReport {
    /// `max_m ‖(s+i+r)(t_m) - n(t_m)‖₁ / ‖n0‖₁`.
    pub max_relative_error: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Compares `s + i + r` with the renewal-equation solution for `n0 = s0 + i0 + r0`;
/// the bound is `5·da`.
pub fn mass_consistency_check(traj: &Trajectory, model: &Model) -> Result<MassReport> {
    let grid = traj.grid;
    let n0 = traj.initial().total();
    let horizon = traj.time(traj.steps());
    let history = solve_mckendrick(&n0, &model.rates, &model.mortality, horizon)?;
    let scale = grid.integrate(&n0.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let mut worst = 0.0_f64;
    for (field, n) in traj.fields.iter().zip(&history.densities) {
        let diff: f64 = field
            .total()
            .iter()
            .zip(n)
            .enumerate()
            .map(|(j, (a, b))| grid.weight(j) * (a - b).abs())
            .sum();
        worst = worst.max(diff);
    }
    let max_relative_error = if scale == 0.0 { worst } else { worst / scale };
    let bound = 5.0 * grid.step();
    Ok(MassReport {
        max_relative_error,
        bound,
        passed: max_relative_error <= bound,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DependenceTrial {
    pub scale: f64,
    pub perturbation_norm: f64,
    #[serde(serialize_with = "crate::report::number")]
    pub sup_distance: f64,
    /// `None` for a zero perturbation.
    #[serde(serialize_with = "crate::report::optional_number")]
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DependenceReport {
    pub trials: Vec<DependenceTrial>,
    /// `L · exp(L T (C_R + c))`, possibly infinite.
    #[serde(serialize_with = "crate::report::number")]
    pub bound: f64,
    pub violations: usize,
}

impl DependenceReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Lipschitz constant of the flow map, bounded by `L e^{L T (C_R + c)}`
/// (`Ĉ_R̂ + ĉ` for a nonlinear force).
pub fn dependence_bound(constants: &ModelConstants, nonlinear: bool) -> f64 {
    let (lip, shift) = if nonlinear {
        (constants.c_hat_rho(constants.r_hat), constants.c_hat)
    } else {
        (constants.c_rho(constants.r), constants.c)
    };
    constants.l * (constants.l * constants.horizon * (lip + shift)).exp()
}

/// Solves from `x0 + η_j` for seeded random nonnegative `η_j` with `‖η_j‖₁ = scale_j`
/// and reports `sup_m ‖x - x^j‖₁ / ‖η_j‖₁`.
pub fn continuous_dependence_probe(
    model: &Model,
    x0: &StateField,
    scales: &[f64],
    seed: u64,
) -> Result<DependenceReport> {
    let grid = model.grid;
    let base = simulate_direct(model, x0)?;
    let constants = model.constants_for(x0)?;
    let bound = dependence_bound(&constants, !model.force.is_identity());
    let trials = scales
        .par_iter()
        .enumerate()
        .map(|(k, &scale)| -> Result<DependenceTrial> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let n = grid.len();
            let mut draw = || (0..n).map(|_| rng.gen::<f64>()).collect::<Vec<_>>();
            let mut eta = StateField {
                s: draw(),
                i: draw(),
                r: draw(),
            };
            let raw = eta.l1_norm(&grid);
            eta = if raw > 0.0 { eta.scaled(scale / raw) } else { eta };
            let mut perturbed = x0.clone();
            perturbed.add_scaled(1.0, &eta);
            let traj = simulate_direct(model, &perturbed)?;
            let perturbation_norm = perturbed.difference(x0).l1_norm(&grid);
            let sup_distance = base.sup_distance(&traj);
            Ok(DependenceTrial {
                scale,
                perturbation_norm,
                sup_distance,
                ratio: (perturbation_norm > 0.0).then(|| sup_distance / perturbation_norm),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = trials
        .iter()
        .filter(|t| t.ratio.is_some_and(|r| !(r <= bound)))
        .count();
    Ok(DependenceReport {
        trials,
        bound,
        violations,
    })
}
