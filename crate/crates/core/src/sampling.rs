//! Seeded random fields for the property suites.
//!
//! Every trial uses its own `ChaCha8Rng` seeded with `seed + trial`, so results
//! do not depend on the order in which parallel trials run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{AgeGrid, StateField};

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial))
}

fn field_from(mut draw: impl FnMut() -> f64, len: usize) -> StateField {
    let mut v = || (0..len).map(|_| draw()).collect::<Vec<_>>();
    let s = v();
    let i = v();
    let r = v();
    StateField { s, i, r }
}

/// Independent uniform `[0, 1)` nodal values.
pub fn nonnegative_field(rng: &mut ChaCha8Rng, grid: &AgeGrid) -> StateField {
    field_from(|| rng.gen::<f64>(), grid.len())
}

/// Independent uniform `[-1, 1)` nodal values.
pub fn signed_field(rng: &mut ChaCha8Rng, grid: &AgeGrid) -> StateField {
    field_from(|| rng.gen_range(-1.0..1.0), grid.len())
}

/// Random trigonometric polynomial `c0 + Σ_k c_k cos(kπa/ω + φ_k)`, `k ≤ 3`,
/// shifted to be nonnegative when `nonnegative` is set.
pub fn smooth_field(rng: &mut ChaCha8Rng, grid: &AgeGrid, nonnegative: bool) -> StateField {
    let mut component = || -> Vec<f64> {
        let c0: f64 = rng.gen_range(0.0..1.0);
        let modes: Vec<(f64, f64)> = (1..=3)
            .map(|_| (rng.gen_range(-0.5..0.5), rng.gen_range(0.0..std::f64::consts::TAU)))
            .collect();
        let vals: Vec<f64> = grid
            .nodes()
            .map(|a| {
                let x = std::f64::consts::PI * a / grid.omega();
                c0 + modes
                    .iter()
                    .enumerate()
                    .map(|(k, (c, ph))| c * ((k + 1) as f64 * x + ph).cos())
                    .sum::<f64>()
            })
            .collect();
        if nonnegative {
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
            vals.into_iter().map(|v| v - lo).collect()
        } else {
            vals
        }
    };
    let s = component();
    let i = component();
    let r = component();
    StateField { s, i, r }
}

/// Rescales `field` to the given L¹ norm (no-op for the zero field).
pub fn with_norm(field: StateField, grid: &AgeGrid, norm: f64) -> StateField {
    let current = field.l1_norm(grid);
    if current == 0.0 {
        field
    } else {
        field.scaled(norm / current)
    }
}
