use crate::error::{Error, Result};
use crate::grid::StateField;
use crate::infection::{lambda_apply, ForceVariant, Truncation, XiClamp};
use crate::linear::{GeneratorPart, LinearPropagator};
use crate::model::Model;

use super::Trajectory;

/// Values below this are reported as a positivity failure.
const POSITIVITY_TOLERANCE: f64 = -1e-10;

/// Marches the shifted, truncated system along characteristics.
///
/// Each step is the linear step `S(dt)` (half reaction, survival, half reaction,
/// renewal) followed by the infection flow with the shifted weight
/// `h = (1 - e^{-c dt}) / c`: `s -= h w s`, `i += h w s`, where the rate
/// `w = ℓ(Ξ(Λ))` is taken at the midpoint of each characteristic segment. Since
/// `w ≤ c` and `h c < 1` every substep keeps the state in the cone.
pub fn simulate_direct(model: &Model, x0: &StateField) -> Result<Trajectory> {
    let grid = model.grid;
    if x0.len() != grid.len() {
        return Err(Error::structural(
            "x0",
            format!("expected {} nodes, got {}", grid.len(), x0.len()),
        ));
    }
    if !x0.is_nonnegative() {
        return Err(Error::Domain("initial state must lie in the nonnegative cone".into()));
    }
    let constants = model.constants_for(x0)?;
    let clamp = XiClamp::from_constants(&constants);
    let variant = ForceVariant::for_model(Truncation::Shifted, &model.force, &constants);
    let propagator = LinearPropagator::new(&model.rates, &model.mortality, GeneratorPart::Full)?;
    let dt = model.dt();
    let da = grid.step();
    let h = if variant.shift > 0.0 {
        -(-variant.shift * dt).exp_m1() / variant.shift
    } else {
        dt
    };

    let mut fields = Vec::with_capacity(model.steps + 1);
    fields.push(x0.clone());
    let mut lambda_old = lambda_apply(&model.kernel, &grid, &x0.i);
    for m in 0..model.steps {
        let mut y = propagator.step(&fields[m]);
        let lambda_new = lambda_apply(&model.kernel, &grid, &y.i);
        let t_mid = model.time(m) + 0.5 * dt;
        for j in 1..grid.len() {
            let z = 0.5 * (lambda_old[j - 1] + lambda_new[j]);
            let w = variant.rate(&clamp, t_mid, grid.node(j) - 0.5 * da, z);
            let flow = h * w * y.s[j];
            y.s[j] -= flow;
            y.i[j] += flow;
        }
        propagator.renew_boundary(&mut y);

        if !y.is_finite() {
            return Err(Error::Numerical {
                step: m + 1,
                detail: "non-finite value in state".into(),
            });
        }
        let min = y.min_value();
        if min < POSITIVITY_TOLERANCE {
            return Err(Error::Positivity { step: m + 1, value: min });
        }
        lambda_old = lambda_apply(&model.kernel, &grid, &y.i);
        fields.push(y);
    }
    Ok(Trajectory { grid, fields })
}
