//! Force of infection, the smooth clamp Ξ and the six force variants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::grid::{AgeGrid, StateField};
use crate::model::{ForceSpec, MixingKernel, ModelConstants};

/// `Λ(a_j) = ∫ k(a_j, σ) i(σ) dσ`.
pub fn lambda_apply(kernel: &MixingKernel, grid: &AgeGrid, infected: &[f64]) -> Vec<f64> {
    kernel.apply(grid, infected)
}

/// Smooth saturation of `Λ`: the identity on `[-z1, z1]`, bounded by `z2`,
/// with `0 ≤ Ξ' ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiClamp {
    pub z1: f64,
    pub z2: f64,
}

impl XiClamp {
    pub fn new(z1: f64, z2: f64) -> Self {
        Self { z1, z2 }
    }

    pub fn from_constants(c: &ModelConstants) -> Self {
        Self::new(c.z1, c.z2)
    }

    /// `(Ξ(z), Ξ'(z))`.
    pub fn eval(&self, z: f64) -> (f64, f64) {
        let (z1, z2) = (self.z1, self.z2);
        let az = z.abs();
        if az <= z1 {
            return (z, 1.0);
        }
        let width = z2 - z1;
        if width <= 0.0 {
            // Degenerate band: hard clamp (zero everywhere when z1 = z2 = 0).
            return (z.signum() * z1, 0.0);
        }
        let th = ((az - z1) / width).tanh();
        (z.signum() * (z1 + width * th), 1.0 - th * th)
    }

    pub fn value(&self, z: f64) -> f64 {
        self.eval(z).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    Raw,
    Truncated,
    Shifted,
}

#[derive(Debug, Clone)]
pub enum Shape {
    /// `ℓ(t, a, y) = y`.
    Linear,
    Nonlinear(ForceSpec),
}

/// One of `f`, `f̂`, `f̂ + c𝕀` (linear shape) or `f̃`, `ĝ`, `ĝ + ĉ𝕀` (nonlinear shape).
#[derive(Debug, Clone)]
pub struct ForceVariant {
    pub truncation: Truncation,
    pub shape: Shape,
    pub shift: f64,
}

impl ForceVariant {
    /// Uses `c` as the shift for the linear shape and `ĉ` for the nonlinear one.
    pub fn new(truncation: Truncation, shape: Shape, constants: &ModelConstants) -> Self {
        let shift = match (truncation, &shape) {
            (Truncation::Shifted, Shape::Linear) => constants.c,
            (Truncation::Shifted, Shape::Nonlinear(_)) => constants.c_hat,
            _ => 0.0,
        };
        Self {
            truncation,
            shape,
            shift,
        }
    }

    /// Linear shape when the model force is the identity family.
    pub fn for_model(truncation: Truncation, force: &ForceSpec, constants: &ModelConstants) -> Self {
        let shape = if force.is_identity() {
            Shape::Linear
        } else {
            Shape::Nonlinear(force.clone())
        };
        Self::new(truncation, shape, constants)
    }

    pub fn label(&self) -> String {
        let t = match self.truncation {
            Truncation::Raw => "raw",
            Truncation::Truncated => "truncated",
            Truncation::Shifted => "shifted",
        };
        match &self.shape {
            Shape::Linear => format!("{t}-linear"),
            Shape::Nonlinear(f) => format!("{t}-{}", f.name()),
        }
    }

    /// Infection rate `w(a) = ℓ(t, a, Ξ(z))` from a value `z` of the force of infection.
    #[inline]
    pub fn rate(&self, clamp: &XiClamp, t: f64, a: f64, z: f64) -> f64 {
        let y = match self.truncation {
            Truncation::Raw => z,
            _ => clamp.value(z),
        };
        match &self.shape {
            Shape::Linear => y,
            Shape::Nonlinear(f) => f.eval(t, a, y),
        }
    }
}

/// Everything needed to evaluate a force variant on the grid.
#[derive(Debug, Clone, Copy)]
pub struct InfectionContext<'a> {
    pub grid: &'a AgeGrid,
    pub kernel: &'a MixingKernel,
    pub clamp: XiClamp,
}

impl InfectionContext<'_> {
    /// `(-w s, w s, 0) + shift · (s, i, r)`.
    pub fn force_eval(&self, variant: &ForceVariant, t: f64, state: &StateField) -> StateField {
        force_eval(variant, t, state, self.kernel, self.grid, &self.clamp)
    }
}

pub fn force_eval(
    variant: &ForceVariant,
    t: f64,
    state: &StateField,
    kernel: &MixingKernel,
    grid: &AgeGrid,
    clamp: &XiClamp,
) -> StateField {
    let lambda = lambda_apply(kernel, grid, &state.i);
    let mut out = state.scaled(variant.shift);
    for (j, z) in lambda.iter().enumerate() {
        let flow = variant.rate(clamp, t, grid.node(j), *z) * state.s[j];
        out.s[j] -= flow;
        out.i[j] += flow;
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub variant: String,
    pub radius: f64,
    pub trials: usize,
    /// Largest `‖F(ψ) - F(φ)‖₁ / ‖ψ - φ‖₁` over pairs with `ψ ≠ φ`.
    #[serde(serialize_with = "crate::report::number")]
    pub max_ratio: f64,
    #[serde(serialize_with = "crate::report::number")]
    pub lipschitz_bound: f64,
    /// Largest `‖F(ψ)‖₁ / ‖ψ‖₁` over nonzero `ψ`.
    #[serde(serialize_with = "crate::report::number")]
    pub max_growth: f64,
    /// `None` for variants without a global linear growth bound.
    #[serde(serialize_with = "crate::report::optional_number")]
    pub growth_bound: Option<f64>,
    pub violations: usize,
}

impl LipschitzReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Lipschitz constant on the ball of radius `ρ` for the variant.
///
/// Truncated: `C_ρ` (linear) or `Ĉ_ρ` (nonlinear). Shifted adds the shift.
/// Raw: `4 H ρ ‖k‖∞`, valid on the ball since `|ℓ(y)| ≤ |y|` and `|Λ| ≤ ‖k‖∞ ρ`.
pub fn lipschitz_bound(variant: &ForceVariant, constants: &ModelConstants, radius: f64) -> f64 {
    let truncated = match variant.shape {
        Shape::Linear => constants.c_rho(radius),
        Shape::Nonlinear(_) => constants.c_hat_rho(radius),
    };
    match variant.truncation {
        Truncation::Raw => 4.0 * constants.h_r * constants.k_inf * radius,
        Truncation::Truncated => truncated,
        Truncation::Shifted => truncated + variant.shift.abs(),
    }
}

/// Linear growth bound: `2c` truncated, `3c` shifted (`ĉ` for the nonlinear shape).
pub fn growth_bound(variant: &ForceVariant, constants: &ModelConstants) -> Option<f64> {
    let base = match variant.shape {
        Shape::Linear => constants.c,
        Shape::Nonlinear(_) => constants.c_hat,
    };
    match variant.truncation {
        Truncation::Raw => None,
        Truncation::Truncated => Some(2.0 * base),
        Truncation::Shifted => Some(3.0 * base),
    }
}

fn random_field(rng: &mut ChaCha8Rng, grid: &AgeGrid, norm: f64, signed: bool) -> StateField {
    let n = grid.len();
    let mut draw = || -> Vec<f64> {
        (0..n)
            .map(|_| if signed { rng.gen_range(-1.0..1.0) } else { rng.gen::<f64>() })
            .collect()
    };
    let f = StateField {
        s: draw(),
        i: draw(),
        r: draw(),
    };
    let current = f.l1_norm(grid);
    if current == 0.0 {
        f
    } else {
        f.scaled(norm / current)
    }
}

/// Empirical Lipschitz and growth constants over seeded random pairs in the ball of radius `ρ`.
///
/// Half the pairs are independent draws; the other half are small perturbations
/// of the first point, which probe the local slope.
pub fn lipschitz_probe(
    variant: &ForceVariant,
    ctx: &InfectionContext<'_>,
    constants: &ModelConstants,
    radius: f64,
    trials: usize,
    seed: u64,
) -> LipschitzReport {
    let grid = ctx.grid;
    let bound = lipschitz_bound(variant, constants, radius);
    let growth = growth_bound(variant, constants);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio = 0.0_f64;
    let mut max_growth = 0.0_f64;
    let mut violations = 0;
    for trial in 0..trials.max(1) {
        let signed = trial % 4 >= 2;
        let t = rng.gen::<f64>() * constants.horizon;
        let phi_norm = radius * rng.gen::<f64>();
        let phi = random_field(&mut rng, grid, phi_norm, signed);
        let psi = if trial % 2 == 0 {
            let norm = radius * rng.gen::<f64>();
            random_field(&mut rng, grid, norm, signed)
        } else {
            let eps = 10f64.powf(-rng.gen_range(1.0..6.0)) * radius;
            let mut p = phi.clone();
            p.add_scaled(1.0, &random_field(&mut rng, grid, eps, true));
            p
        };
        let f_phi = ctx.force_eval(variant, t, &phi);
        let f_psi = ctx.force_eval(variant, t, &psi);
        let dist = psi.difference(&phi).l1_norm(grid);
        if dist > 0.0 && psi.l1_norm(grid) <= radius {
            let ratio = f_psi.difference(&f_phi).l1_norm(grid) / dist;
            max_ratio = max_ratio.max(ratio);
            if ratio > bound {
                violations += 1;
            }
        }
        for (x, fx) in [(&phi, &f_phi), (&psi, &f_psi)] {
            let nx = x.l1_norm(grid);
            if nx > 0.0 {
                let g = fx.l1_norm(grid) / nx;
                max_growth = max_growth.max(g);
                if growth.is_some_and(|b| g > b) {
                    violations += 1;
                }
            }
        }
    }
    LipschitzReport {
        variant: variant.label(),
        radius,
        trials,
        max_ratio,
        lipschitz_bound: bound,
        max_growth,
        growth_bound: growth,
        violations,
    }
}
