use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::StateField;
use crate::infection::{force_eval, ForceVariant, Truncation, XiClamp};
use crate::linear::{GeneratorPart, LinearPropagator};
use crate::model::Model;

use super::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// `x = S(t)x0 + ∫ S(t-s) f̂(x(s)) ds`.
    Unshifted,
    /// `x = e^{-ct}S(t)x0 + ∫ e^{-c(t-s)} S(t-s) (f̂ + c)(x(s)) ds`.
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// The linear orbit of `x0` (damped by the shift in the shifted formulation).
    SemigroupOrbit,
    Zero,
    /// `x(t_m) = x0` at every time.
    Frozen,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PicardSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub formulation: Formulation,
    pub initial_guess: InitialGuess,
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            formulation: Formulation::Unshifted,
            initial_guess: InitialGuess::SemigroupOrbit,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub trajectory: Trajectory,
    /// `sup_m ‖x_{k+1}(t_m) - x_k(t_m)‖₁` per iteration.
    pub deltas: Vec<f64>,
}

impl PicardOutcome {
    pub fn iterations(&self) -> usize {
        self.deltas.len()
    }

    /// Deltas never increase after the first iteration.
    pub fn is_contracting(&self) -> bool {
        self.deltas.iter().skip(1).zip(self.deltas.iter().skip(2)).all(|(a, b)| b <= a)
    }
}

/// Discrete propagation weights: the shift factor over one step and the
/// trapezoid weights at the two ends of a step.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepWeights {
    pub damping: f64,
    pub left: f64,
    pub right: f64,
}

impl StepWeights {
    /// Trapezoid rule in time paired with the Cayley factor
    /// `(1 - c dt/2) / (1 + c dt/2)` for `e^{-c dt}`. With this pairing the shifted
    /// and unshifted discrete equations have exactly the same solution.
    pub fn new(shift: f64, dt: f64) -> Result<Self> {
        let h = 0.5 * dt;
        if shift * h >= 1.0 {
            return Err(Error::Conditioning(format!(
                "shift {shift} too large for dt = {dt}: need c dt / 2 < 1"
            )));
        }
        Ok(Self {
            damping: (1.0 - shift * h) / (1.0 + shift * h),
            left: h / (1.0 - shift * h),
            right: h / (1.0 + shift * h),
        })
    }
}

/// `y_0 = x0`, `y_{m+1} = E·S(dt)(y_m + α F_m) + β F_{m+1}`.
///
/// Unrolled, this is `y_m = E^m S_m x0 + Σ_n w_n E^{m-n} S_{m-n} F_n` with trapezoid
/// weights, i.e. the mild-solution quadrature evaluated in O(steps) work.
pub(crate) fn mild_update(
    propagator: &LinearPropagator,
    x0: &StateField,
    forces: &[StateField],
    weights: StepWeights,
) -> Vec<StateField> {
    let mut out = Vec::with_capacity(forces.len());
    out.push(x0.clone());
    for m in 0..forces.len() - 1 {
        let mut arg = out[m].clone();
        arg.add_scaled(weights.left, &forces[m]);
        let mut next = propagator.step(&arg).scaled(weights.damping);
        next.add_scaled(weights.right, &forces[m + 1]);
        out.push(next);
    }
    out
}

pub fn picard_solve(model: &Model, x0: &StateField, settings: &PicardSettings) -> Result<PicardOutcome> {
    let grid = model.grid;
    if x0.len() != grid.len() {
        return Err(Error::structural(
            "x0",
            format!("expected {} nodes, got {}", grid.len(), x0.len()),
        ));
    }
    if !(settings.tol > 0.0) || settings.max_iter == 0 {
        return Err(Error::Domain("Picard settings need tol > 0 and max_iter >= 1".into()));
    }
    let constants = model.constants_for(x0)?;
    let clamp = XiClamp::from_constants(&constants);
    let truncation = match settings.formulation {
        Formulation::Unshifted => Truncation::Truncated,
        Formulation::Shifted => Truncation::Shifted,
    };
    let variant = ForceVariant::for_model(truncation, &model.force, &constants);
    let propagator = LinearPropagator::new(&model.rates, &model.mortality, GeneratorPart::Full)?;
    let weights = StepWeights::new(variant.shift, model.dt())?;

    let mut iterate: Vec<StateField> = match settings.initial_guess {
        InitialGuess::SemigroupOrbit => {
            let mut orbit = Vec::with_capacity(model.steps + 1);
            orbit.push(x0.clone());
            for m in 0..model.steps {
                let next = propagator.step(&orbit[m]).scaled(weights.damping);
                orbit.push(next);
            }
            orbit
        }
        InitialGuess::Zero => vec![StateField::zeros(grid.len()); model.steps + 1],
        InitialGuess::Frozen => vec![x0.clone(); model.steps + 1],
    };

    let force = |variant: &ForceVariant, fields: &[StateField]| -> Vec<StateField> {
        fields
            .par_iter()
            .enumerate()
            .map(|(m, x)| force_eval(variant, model.time(m), x, &model.kernel, &grid, &clamp))
            .collect()
    };

    let mut deltas = Vec::new();
    loop {
        let forces = force(&variant, &iterate);
        let next = mild_update(&propagator, x0, &forces, weights);
        let delta = next
            .iter()
            .zip(&iterate)
            .map(|(a, b)| a.difference(b).l1_norm(&grid))
            .fold(0.0, f64::max);
        if !delta.is_finite() {
            return Err(Error::Numerical {
                step: deltas.len() + 1,
                detail: "Picard iterate is not finite".into(),
            });
        }
        deltas.push(delta);
        iterate = next;
        if delta < settings.tol {
            break;
        }
        if deltas.len() >= settings.max_iter {
            return Err(Error::NonConvergence {
                iterations: deltas.len(),
                last_delta: delta,
            });
        }
    }
    Ok(PicardOutcome {
        trajectory: Trajectory { grid, fields: iterate },
        deltas,
    })
}
