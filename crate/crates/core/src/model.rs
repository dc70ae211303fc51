//! Model data: vital rates, mortality with its singular tail, the mixing kernel,
//! the infection-force family, the standing-hypothesis checks and every
//! derived constant used by the a-priori estimates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{AgeGrid, NodalProfile, StateField};

/// Survival values below this threshold are treated as extinct cohorts.
pub const EXTINCTION_THRESHOLD: f64 = 1e-300;

/// Safety factor applied to the sampled maximum of the infection force.
pub const FORCE_MAX_SAFETY: f64 = 1.01;

/// Death rate `mu(a) = mu_reg(a) + theta / (omega - a)`.
///
/// The regular part is a piecewise-linear table; the singular tail makes
/// `∫ mu = +∞` whenever `theta > 0`, so nobody survives to `omega`.
/// Survival then has the closed form
/// `Π(a) = exp(-∫₀^a mu_reg) · ((omega - a) / omega)^theta`.
#[derive(Debug, Clone)]
pub struct MortalityModel {
    grid: AgeGrid,
    regular: NodalProfile,
    tail_weight: f64,
    cumulative: Vec<f64>,
}

impl MortalityModel {
    pub fn new(grid: AgeGrid, regular: Vec<f64>, tail_weight: f64) -> Result<Self> {
        if regular.len() != grid.len() {
            return Err(Error::structural(
                "mortality.regular",
                format!("expected {} nodal values, got {}", grid.len(), regular.len()),
            ));
        }
        if regular.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain("regular mortality must be finite and nonnegative".into()));
        }
        if !(tail_weight.is_finite() && tail_weight >= 0.0) {
            return Err(Error::Domain(format!(
                "mortality tail weight must be nonnegative, got {tail_weight}"
            )));
        }
        let da = grid.step();
        let mut cumulative = Vec::with_capacity(grid.len());
        cumulative.push(0.0);
        for j in 1..grid.len() {
            let prev = cumulative[j - 1];
            cumulative.push(prev + 0.5 * da * (regular[j - 1] + regular[j]));
        }
        Ok(Self {
            grid,
            regular: NodalProfile::new(regular, grid.omega()),
            tail_weight,
            cumulative,
        })
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    pub fn regular(&self) -> &NodalProfile {
        &self.regular
    }

    pub fn tail_weight(&self) -> f64 {
        self.tail_weight
    }

    /// Lower bound for the essential infimum of `mu`: `min mu_reg + theta / omega`.
    pub fn mu0(&self) -> f64 {
        self.regular.min() + self.tail_weight / self.grid.omega()
    }

    /// `mu(a)`; infinite at `a = omega` when the tail is active.
    pub fn rate(&self, a: f64) -> f64 {
        let gap = self.grid.omega() - a;
        let tail = if self.tail_weight == 0.0 {
            0.0
        } else if gap <= 0.0 {
            f64::INFINITY
        } else {
            self.tail_weight / gap
        };
        self.regular.at(a) + tail
    }

    pub fn rate_node(&self, j: usize) -> f64 {
        self.rate(self.grid.node(j))
    }

    /// Exact integral of the piecewise-linear regular part over `[0, a]`.
    fn regular_integral(&self, a: f64) -> f64 {
        let da = self.grid.step();
        let cells = self.grid.cells();
        let x = (a / da).max(0.0);
        let cell = (x.floor() as usize).min(cells - 1);
        let frac = (x - cell as f64).clamp(0.0, 1.0);
        if frac == 0.0 {
            return self.cumulative[cell];
        }
        let v0 = self.regular.node(cell);
        let v1 = self.regular.node(cell + 1);
        let va = v0 + frac * (v1 - v0);
        self.cumulative[cell] + 0.5 * frac * da * (v0 + va)
    }

    fn regular_integral_node(&self, j: usize) -> f64 {
        self.cumulative[j]
    }

    /// Probability of surviving to age `a`.
    pub fn survival(&self, a: f64) -> Result<f64> {
        let omega = self.grid.omega();
        if !(0.0..=omega).contains(&a) {
            return Err(Error::Domain(format!("age {a} outside [0, {omega}]")));
        }
        Ok(self.survival_unchecked(a, self.regular_integral(a)))
    }

    pub fn survival_node(&self, j: usize) -> f64 {
        self.survival_unchecked(self.grid.node(j), self.regular_integral_node(j))
    }

    fn survival_unchecked(&self, a: f64, integral: f64) -> f64 {
        let omega = self.grid.omega();
        let tail = if self.tail_weight == 0.0 {
            1.0
        } else {
            ((omega - a) / omega).max(0.0).powf(self.tail_weight)
        };
        let p = (-integral).exp() * tail;
        if p < EXTINCTION_THRESHOLD {
            0.0
        } else {
            p
        }
    }

    /// `Π(to) / Π(from)` for `from <= to`, evaluated in closed form so that
    /// no near-zero survival is ever divided by another.
    pub fn survival_ratio(&self, from: f64, to: f64) -> f64 {
        self.ratio_from_integrals(from, to, self.regular_integral(to) - self.regular_integral(from))
    }

    pub fn survival_ratio_nodes(&self, from: usize, to: usize) -> f64 {
        self.ratio_from_integrals(
            self.grid.node(from),
            self.grid.node(to),
            self.regular_integral_node(to) - self.regular_integral_node(from),
        )
    }

    fn ratio_from_integrals(&self, from: f64, to: f64, integral: f64) -> f64 {
        if to <= from {
            return 1.0;
        }
        if self.survival_unchecked(to, self.regular_integral(to)) == 0.0 {
            return 0.0;
        }
        let omega = self.grid.omega();
        let tail = if self.tail_weight == 0.0 {
            1.0
        } else {
            ((omega - to) / (omega - from)).max(0.0).powf(self.tail_weight)
        };
        (-integral).exp() * tail
    }
}

/// Birth, recovery and removal rates with the newborn allocation fractions.
#[derive(Debug, Clone)]
pub struct RateSet {
    pub beta: NodalProfile,
    pub gamma: NodalProfile,
    pub delta: NodalProfile,
    pub p: f64,
    pub q: f64,
}

impl RateSet {
    pub fn new(
        grid: &AgeGrid,
        beta: Vec<f64>,
        gamma: Vec<f64>,
        delta: Vec<f64>,
        p: f64,
        q: f64,
    ) -> Result<Self> {
        for (name, table) in [("beta", &beta), ("gamma", &gamma), ("delta", &delta)] {
            if table.len() != grid.len() {
                return Err(Error::structural(
                    format!("rates.{name}"),
                    format!("expected {} nodal values, got {}", grid.len(), table.len()),
                ));
            }
            if table.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Domain(format!("rate table {name} must be finite and nonnegative")));
            }
        }
        for (name, v) in [("p", p), ("q", q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!(
                    "newborn allocation requires p, q in [0, 1]; got {name} = {v}"
                )));
            }
        }
        let omega = grid.omega();
        Ok(Self {
            beta: NodalProfile::new(beta, omega),
            gamma: NodalProfile::new(gamma, omega),
            delta: NodalProfile::new(delta, omega),
            p,
            q,
        })
    }

    pub fn beta0(&self) -> f64 {
        self.beta.min()
    }
    pub fn gamma0(&self) -> f64 {
        self.gamma.min()
    }
    pub fn delta0(&self) -> f64 {
        self.delta.min()
    }
    pub fn beta_inf(&self) -> f64 {
        self.beta.max()
    }
    pub fn gamma_inf(&self) -> f64 {
        self.gamma.max()
    }
    pub fn delta_inf(&self) -> f64 {
        self.delta.max()
    }

    fn len(&self) -> usize {
        self.beta.len()
    }
}

/// Contact kernel `k(a, sigma)` sampled on the grid.
#[derive(Debug, Clone)]
pub enum MixingKernel {
    Constant { value: f64, len: usize },
    /// `k(a, sigma) = row(a) * col(sigma)`.
    Separable { row: Vec<f64>, col: Vec<f64> },
    /// Full `(J+1) x (J+1)` table, row-major, row index = age `a`.
    Matrix { values: Vec<f64>, len: usize },
}

impl MixingKernel {
    pub fn constant(value: f64, grid: &AgeGrid) -> Self {
        MixingKernel::Constant {
            value,
            len: grid.len(),
        }
    }

    pub fn separable(row: Vec<f64>, col: Vec<f64>) -> Result<Self> {
        if row.len() != col.len() {
            return Err(Error::structural(
                "kernel",
                format!("separable factors differ in length: {} vs {}", row.len(), col.len()),
            ));
        }
        Ok(MixingKernel::Separable { row, col })
    }

    pub fn matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        let len = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != len) {
            return Err(Error::structural(
                "kernel.values",
                format!("row {bad} has {} entries, expected {len}", rows[bad].len()),
            ));
        }
        Ok(MixingKernel::Matrix {
            values: rows.into_iter().flatten().collect(),
            len,
        })
    }

    pub fn len(&self) -> usize {
        match self {
            MixingKernel::Constant { len, .. } | MixingKernel::Matrix { len, .. } => *len,
            MixingKernel::Separable { row, .. } => row.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entry(&self, a: usize, sigma: usize) -> f64 {
        match self {
            MixingKernel::Constant { value, .. } => *value,
            MixingKernel::Separable { row, col } => row[a] * col[sigma],
            MixingKernel::Matrix { values, len } => values[a * len + sigma],
        }
    }

    /// `‖k‖∞`, the largest entry in absolute value.
    pub fn k_inf(&self) -> f64 {
        match self {
            MixingKernel::Constant { value, .. } => value.abs(),
            MixingKernel::Separable { row, col } => {
                let m = |v: &[f64]| v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
                m(row) * m(col)
            }
            MixingKernel::Matrix { values, .. } => values.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())),
        }
    }

    pub fn min_entry(&self) -> f64 {
        match self {
            MixingKernel::Constant { value, .. } => *value,
            MixingKernel::Separable { row, col } => {
                let mut lo = f64::INFINITY;
                for &u in row {
                    for &v in col {
                        lo = lo.min(u * v);
                    }
                }
                lo
            }
            MixingKernel::Matrix { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            MixingKernel::Constant { value, .. } => value.is_finite(),
            MixingKernel::Separable { row, col } => row.iter().chain(col).all(|v| v.is_finite()),
            MixingKernel::Matrix { values, .. } => values.iter().all(|v| v.is_finite()),
        }
    }

    /// `Λ(a_j) = ∫ k(a_j, σ) i(σ) dσ` by the trapezoid rule.
    pub fn apply(&self, grid: &AgeGrid, infected: &[f64]) -> Vec<f64> {
        let n = grid.len();
        match self {
            MixingKernel::Constant { value, .. } => vec![value * grid.integrate(infected); n],
            MixingKernel::Separable { row, col } => {
                let weighted: f64 = (0..n).map(|j| grid.weight(j) * col[j] * infected[j]).sum();
                row.iter().map(|u| u * weighted).collect()
            }
            MixingKernel::Matrix { values, len } => {
                let w: Vec<f64> = (0..n).map(|j| grid.weight(j) * infected[j]).collect();
                values
                    .chunks_exact(*len)
                    .map(|row| row.iter().zip(&w).map(|(k, x)| k * x).sum())
                    .collect()
            }
        }
    }
}

/// Built-in families for the infection-force wrapper `ℓ(t, a, y)`.
///
/// Each family is C¹, vanishes at `y = 0`, is nonnegative for `y > 0`, odd in `y`,
/// and has `|∂ℓ/∂y| ≤ 1` with the maximum at `y = 0`.
#[derive(Debug, Clone)]
pub enum ForceSpec {
    /// `ℓ = y`, the bilinear mass-action force.
    Identity,
    /// `ℓ = y / (1 + σ(t, a) |y|)` with `σ(t, a) = σ(a) (1 + ε sin(2π t / P))`.
    Saturating {
        sigma: NodalProfile,
        amplitude: f64,
        period: f64,
    },
    /// `ℓ = y (1 + y²)^((ρ - 1) / 2)`, `ρ ∈ (0, 1]`.
    Power { exponent: f64 },
}

impl ForceSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ForceSpec::Identity => Ok(()),
            ForceSpec::Saturating {
                sigma,
                amplitude,
                period,
            } => {
                if sigma.values().iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Domain("saturation profile sigma must be nonnegative".into()));
                }
                if !(0.0..1.0).contains(amplitude) {
                    return Err(Error::Domain(format!(
                        "saturation time amplitude must lie in [0, 1), got {amplitude}"
                    )));
                }
                if !(period.is_finite() && *period > 0.0) {
                    return Err(Error::Domain(format!("saturation period must be positive, got {period}")));
                }
                Ok(())
            }
            ForceSpec::Power { exponent } => {
                if !(*exponent > 0.0 && *exponent <= 1.0) {
                    return Err(Error::Domain(format!(
                        "power-law exponent must lie in (0, 1], got {exponent}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, ForceSpec::Identity)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ForceSpec::Identity => "identity",
            ForceSpec::Saturating { .. } => "saturating",
            ForceSpec::Power { .. } => "power",
        }
    }

    pub fn eval(&self, t: f64, a: f64, y: f64) -> f64 {
        match self {
            ForceSpec::Identity => y,
            ForceSpec::Saturating {
                sigma,
                amplitude,
                period,
            } => {
                let s = sigma.at(a) * (1.0 + amplitude * (std::f64::consts::TAU * t / period).sin());
                y / (1.0 + s * y.abs())
            }
            ForceSpec::Power { exponent } => y * (1.0 + y * y).powf(0.5 * (exponent - 1.0)),
        }
    }

    /// `H_r`: Lipschitz constant of `y ↦ ℓ(t, a, y)` on `[-r, r]`.
    ///
    /// For every family the derivative is even in `y`, nonincreasing in `|y|`
    /// and equal to 1 at the origin, so the bound is 1 for every radius.
    pub fn lipschitz_bound(&self, _radius: f64) -> f64 {
        1.0
    }
}

/// Structural and hypothesis check outcome for one named condition.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    #[serde(serialize_with = "crate::report::number")]
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<HypothesisCheck>,
    pub warnings: Vec<String>,
    /// Net reproduction number `∫ β Π`, diagnostic only.
    #[serde(serialize_with = "crate::report::number")]
    pub reproduction_number: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Checks positivity of the rate infima, of the mortality infimum, and
/// nonnegativity/boundedness of the kernel.
pub fn validate_hypotheses(
    rates: &RateSet,
    mortality: &MortalityModel,
    kernel: &MixingKernel,
) -> Result<ValidationReport> {
    let grid = mortality.grid();
    let n = grid.len();
    if rates.len() != n {
        return Err(Error::structural(
            "rates",
            format!("rate tables have {} nodes, grid has {n}", rates.len()),
        ));
    }
    if kernel.len() != n {
        return Err(Error::structural(
            "kernel",
            format!("kernel has {} nodes, grid has {n}", kernel.len()),
        ));
    }

    let positive = |name: &str, symbol: &str, value: f64| HypothesisCheck {
        name: name.to_string(),
        passed: value > 0.0,
        value,
        detail: if value > 0.0 {
            format!("{symbol} = {value}")
        } else {
            format!("{symbol} = {value} must be > 0")
        },
    };

    let mut checks = vec![
        positive("birth_rate_infimum", "beta0", rates.beta0()),
        positive("removal_rate_infimum", "gamma0", rates.gamma0()),
        positive("recovery_rate_infimum", "delta0", rates.delta0()),
        positive("mortality_infimum", "mu0", mortality.mu0()),
    ];
    let k_min = kernel.min_entry();
    checks.push(HypothesisCheck {
        name: "kernel_nonnegative".into(),
        passed: k_min >= 0.0,
        value: k_min,
        detail: format!("min k = {k_min}"),
    });
    let k_inf = kernel.k_inf();
    checks.push(HypothesisCheck {
        name: "kernel_bounded".into(),
        passed: kernel.is_finite(),
        value: k_inf,
        detail: format!("max k = {k_inf}"),
    });
    let pq_ok = (0.0..=1.0).contains(&rates.p) && (0.0..=1.0).contains(&rates.q);
    checks.push(HypothesisCheck {
        name: "allocation_fractions".into(),
        passed: pq_ok,
        value: rates.p.max(rates.q),
        detail: format!("p = {}, q = {}", rates.p, rates.q),
    });
    // Nonnegative inverse of the implicit newborn solve.
    let implicit = 0.5 * grid.step() * rates.beta.node(0);
    checks.push(HypothesisCheck {
        name: "renewal_step_resolvable".into(),
        passed: implicit < 1.0,
        value: implicit,
        detail: format!("da * beta(0) / 2 = {implicit} must be < 1"),
    });

    let mut warnings = Vec::new();
    if mortality.tail_weight() == 0.0 {
        warnings.push("survival positive at omega: mortality tail weight is 0".to_string());
    }

    let integrand: Vec<f64> = (0..n)
        .map(|j| rates.beta.node(j) * mortality.survival_node(j))
        .collect();
    Ok(ValidationReport {
        checks,
        warnings,
        reproduction_number: grid.integrate(&integrand),
    })
}

/// Every constant the a-priori estimates use, for a given `‖x0‖₁` and horizon.
#[derive(Debug, Clone, Serialize)]
pub struct ModelConstants {
    #[serde(serialize_with = "crate::report::number")]
    pub horizon: f64,
    #[serde(serialize_with = "crate::report::number")]
    pub x0_norm: f64,
    #[serde(serialize_with = "crate::report::number")]
    pub k_inf: f64,
    /// Total-population growth bound `exp(‖β‖∞ T)`.
    #[serde(serialize_with = "crate::report::number")]
    pub m: f64,
    /// Semigroup bound `exp((‖β‖∞ + ‖γ‖∞ + ‖δ‖∞ + μ₀) T)`.
    #[serde(serialize_with = "crate::report::number")]
    pub l: f64,
    /// Growth constant `‖k‖∞ M (‖x0‖₁ + 2)`.
    #[serde(serialize_with = "crate::report::number")]
    pub c: f64,
    #[serde(serialize_with = "crate::report::number")]
    pub z1: f64,
    #[serde(serialize_with = "crate::report::number")]
    pub z2: f64,
    /// A-priori radius `L (‖x0‖₁ + 1) exp(3 c L T)`.
    #[serde(serialize_with = "crate::report::number")]
    pub r: f64,
    /// Sampled maximum of `|ℓ|` over `|y| ≤ z2`, times the safety factor.
    #[serde(serialize_with = "crate::report::number")]
    pub c_hat: f64,
    /// Radius for the nonlinear force, `L (‖x0‖₁ + 1) exp(3 ĉ L T)`.
    #[serde(serialize_with = "crate::report::number")]
    pub r_hat: f64,
    /// `H_r` at `r = z2`.
    #[serde(serialize_with = "crate::report::number")]
    pub h_r: f64,
}

impl ModelConstants {
    /// `C_ρ = 2 (c + 2 ρ ‖k‖∞)`, Lipschitz constant of the truncated linear force.
    pub fn c_rho(&self, rho: f64) -> f64 {
        2.0 * (self.c + 2.0 * rho * self.k_inf)
    }

    /// `Ĉ_ρ = 2 ĉ + 4 H_r ‖k‖∞ ρ`, Lipschitz constant of the truncated nonlinear force.
    pub fn c_hat_rho(&self, rho: f64) -> f64 {
        2.0 * self.c_hat + 4.0 * self.h_r * self.k_inf * rho
    }
}

pub fn derive_constants(
    rates: &RateSet,
    mortality: &MortalityModel,
    kernel: &MixingKernel,
    force: &ForceSpec,
    x0_norm: f64,
    horizon: f64,
) -> Result<ModelConstants> {
    if !(x0_norm.is_finite() && x0_norm >= 0.0) {
        return Err(Error::Domain(format!("initial norm must be nonnegative, got {x0_norm}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    let k_inf = kernel.k_inf();
    let m = (rates.beta_inf() * horizon).exp();
    let l = ((rates.beta_inf() + rates.gamma_inf() + rates.delta_inf() + mortality.mu0()) * horizon).exp();
    let c = k_inf * m * (x0_norm + 2.0);
    let z1 = k_inf * m * (x0_norm + 1.0);
    let z2 = c;
    let r = l * (x0_norm + 1.0) * (3.0 * c * l * horizon).exp();
    let c_hat = FORCE_MAX_SAFETY * sample_force_max(force, mortality.grid(), horizon, z2);
    let r_hat = l * (x0_norm + 1.0) * (3.0 * c_hat * l * horizon).exp();
    Ok(ModelConstants {
        horizon,
        x0_norm,
        k_inf,
        m,
        l,
        c,
        z1,
        z2,
        r,
        c_hat,
        r_hat,
        h_r: force.lipschitz_bound(z2),
    })
}

/// Max of `|ℓ(t, a, y)|` over a sample of `[0, T] × [0, ω] × [-radius, radius]`
/// that includes the endpoints of every range.
fn sample_force_max(force: &ForceSpec, grid: &AgeGrid, horizon: f64, radius: f64) -> f64 {
    if radius == 0.0 {
        return 0.0;
    }
    const TIME_SAMPLES: usize = 32;
    const Y_SAMPLES: usize = 256;
    let age_samples = 2 * grid.cells();
    let mut best = 0.0_f64;
    for it in 0..=TIME_SAMPLES {
        let t = horizon * it as f64 / TIME_SAMPLES as f64;
        for ia in 0..=age_samples {
            let a = grid.omega() * ia as f64 / age_samples as f64;
            for iy in 0..=Y_SAMPLES {
                let y = -radius + 2.0 * radius * iy as f64 / Y_SAMPLES as f64;
                best = best.max(force.eval(t, a, y).abs());
            }
            if force.is_identity() {
                return best;
            }
        }
    }
    best
}

/// A fully discretized scenario: grid, horizon, rates, mortality, kernel and force.
#[derive(Debug, Clone)]
pub struct Model {
    pub grid: AgeGrid,
    pub horizon: f64,
    pub steps: usize,
    pub rates: RateSet,
    pub mortality: MortalityModel,
    pub kernel: MixingKernel,
    pub force: ForceSpec,
}

impl Model {
    pub fn new(
        grid: AgeGrid,
        horizon: f64,
        rates: RateSet,
        mortality: MortalityModel,
        kernel: MixingKernel,
        force: ForceSpec,
    ) -> Result<Self> {
        let steps = grid.time_steps(horizon)?;
        if mortality.grid() != &grid {
            return Err(Error::structural("mortality", "mortality table lives on a different grid"));
        }
        if rates.len() != grid.len() {
            return Err(Error::structural("rates", "rate tables do not match the grid"));
        }
        if kernel.len() != grid.len() {
            return Err(Error::structural("kernel", "kernel does not match the grid"));
        }
        force.validate()?;
        Ok(Self {
            grid,
            horizon,
            steps,
            rates,
            mortality,
            kernel,
            force,
        })
    }

    pub fn dt(&self) -> f64 {
        self.grid.step()
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt()
    }

    pub fn validate(&self) -> Result<ValidationReport> {
        validate_hypotheses(&self.rates, &self.mortality, &self.kernel)
    }

    pub fn constants(&self, x0_norm: f64) -> Result<ModelConstants> {
        derive_constants(
            &self.rates,
            &self.mortality,
            &self.kernel,
            &self.force,
            x0_norm,
            self.horizon,
        )
    }

    pub fn constants_for(&self, x0: &StateField) -> Result<ModelConstants> {
        self.constants(x0.l1_norm(&self.grid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> AgeGrid {
        AgeGrid::new(1.0, 10).unwrap()
    }

    fn unit_rates(g: &AgeGrid) -> RateSet {
        let n = g.len();
        RateSet::new(g, vec![1.0; n], vec![1.0; n], vec![1.0; n], 0.5, 0.5).unwrap()
    }

    #[test]
    fn all_hypotheses_pass_for_unit_scenario() {
        let g = grid();
        let mort = MortalityModel::new(g, vec![0.5; g.len()], 1.0).unwrap();
        let report = validate_hypotheses(&unit_rates(&g), &mort, &MixingKernel::constant(1.0, &g)).unwrap();
        assert!(report.passed());
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn zero_removal_node_fails_naming_gamma0() {
        let g = grid();
        let mut gamma = vec![1.0; g.len()];
        gamma[3] = 0.0;
        let rates = RateSet::new(&g, vec![1.0; g.len()], gamma, vec![1.0; g.len()], 0.5, 0.5).unwrap();
        let mort = MortalityModel::new(g, vec![0.5; g.len()], 1.0).unwrap();
        let report = validate_hypotheses(&rates, &mort, &MixingKernel::constant(1.0, &g)).unwrap();
        let failed: Vec<_> = report.failures().collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].name, "removal_rate_infimum");
        assert!(failed[0].detail.contains("gamma0 = 0"));
    }

    #[test]
    fn missing_tail_passes_with_warning() {
        let g = grid();
        let mort = MortalityModel::new(g, vec![0.5; g.len()], 0.0).unwrap();
        let report = validate_hypotheses(&unit_rates(&g), &mort, &MixingKernel::constant(1.0, &g)).unwrap();
        assert!(report.passed());
        assert!(report.warnings[0].contains("survival positive at omega"));
    }

    #[test]
    fn mismatched_kernel_is_structural() {
        let g = grid();
        let mort = MortalityModel::new(g, vec![0.5; g.len()], 1.0).unwrap();
        let kernel = MixingKernel::constant(1.0, &AgeGrid::new(1.0, 20).unwrap());
        assert!(matches!(
            validate_hypotheses(&unit_rates(&g), &mort, &kernel),
            Err(Error::Structural { .. })
        ));
    }

    #[test]
    fn allocation_fraction_out_of_range_is_domain_error() {
        let g = grid();
        let n = g.len();
        let err = RateSet::new(&g, vec![1.0; n], vec![1.0; n], vec![1.0; n], 1.5, 0.5).unwrap_err();
        assert!(err.to_string().contains("p, q in [0, 1]"));
    }

    #[test]
    fn semigroup_constant_matches_closed_form() {
        let g = grid();
        let n = g.len();
        let rates = RateSet::new(&g, vec![2.0; n], vec![1.0; n], vec![1.0; n], 0.5, 0.5).unwrap();
        let mort = MortalityModel::new(g, vec![0.5; n], 0.0).unwrap();
        let k = MixingKernel::constant(1.0, &g);
        let c = derive_constants(&rates, &mort, &k, &ForceSpec::Identity, 1.0, 1.0).unwrap();
        assert!((c.l - 4.5_f64.exp()).abs() < 1e-12);
        assert!((c.l - 90.0171).abs() < 1e-4);
        assert!((c.m - 2.0_f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn zero_kernel_collapses_constants() {
        let g = grid();
        let mort = MortalityModel::new(g, vec![0.5; g.len()], 1.0).unwrap();
        let k = MixingKernel::constant(0.0, &g);
        let c = derive_constants(&unit_rates(&g), &mort, &k, &ForceSpec::Identity, 3.0, 1.0).unwrap();
        assert_eq!(c.c, 0.0);
        assert_eq!(c.z1, 0.0);
        assert_eq!(c.z2, 0.0);
        assert!((c.r - c.l * 4.0).abs() < 1e-12 * c.r);
    }

    #[test]
    fn identity_force_max_is_z2_with_safety() {
        let g = grid();
        let n = g.len();
        // beta_inf = 0 is not allowed by the hypotheses, but makes M = 1 so z2 = k (x0 + 2) = 3.
        let rates = RateSet::new(&g, vec![0.0; n], vec![1.0; n], vec![1.0; n], 0.5, 0.5).unwrap();
        let mort = MortalityModel::new(g, vec![0.5; n], 1.0).unwrap();
        let k = MixingKernel::constant(1.0, &g);
        let c = derive_constants(&rates, &mort, &k, &ForceSpec::Identity, 1.0, 1.0).unwrap();
        assert_eq!(c.z2, 3.0);
        assert!((c.c_hat - 3.0 * 1.01).abs() < 1e-12);
    }

    #[test]
    fn survival_examples() {
        let g = AgeGrid::new(4.0, 40).unwrap();
        let mort = MortalityModel::new(g, vec![1.0; g.len()], 0.0).unwrap();
        assert!((mort.survival(2.0).unwrap() - (-2.0_f64).exp()).abs() < 1e-15);
        assert_eq!(mort.survival(0.0).unwrap(), 1.0);
        assert!(mort.survival(4.5).is_err());
        assert!(mort.survival(-0.1).is_err());

        let g = grid();
        let tail = MortalityModel::new(g, vec![0.0; g.len()], 1.0).unwrap();
        assert!((tail.survival(0.75).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(tail.survival(1.0).unwrap(), 0.0);
        assert_eq!(tail.survival_node(g.cells()), 0.0);
    }

    #[test]
    fn survival_between_nodes_integrates_linear_regular_part() {
        let g = AgeGrid::new(1.0, 4).unwrap();
        // mu_reg(a) = a, so ∫0^a mu = a²/2 exactly.
        let mort = MortalityModel::new(g, g.nodes().collect(), 0.0).unwrap();
        for a in [0.1, 0.3, 0.62, 0.99] {
            let expected = (-a * a / 2.0_f64).exp();
            assert!((mort.survival(a).unwrap() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn survival_ratio_is_consistent_with_survival() {
        let g = AgeGrid::new(2.0, 20).unwrap();
        let reg: Vec<f64> = g.nodes().map(|a| 0.2 + 0.1 * a).collect();
        let mort = MortalityModel::new(g, reg, 0.7).unwrap();
        for (from, to) in [(0, 5), (3, 17), (10, 19)] {
            let direct = mort.survival_node(to) / mort.survival_node(from);
            assert!((mort.survival_ratio_nodes(from, to) - direct).abs() < 1e-14);
        }
        assert_eq!(mort.survival_ratio_nodes(4, g.cells()), 0.0);
    }

    #[test]
    fn kernel_apply_matches_closed_forms() {
        let g = grid();
        let k = MixingKernel::constant(1.0, &g);
        let lam = k.apply(&g, &vec![2.0; g.len()]);
        assert!(lam.iter().all(|v| (v - 2.0).abs() < 1e-15));

        let nodes: Vec<f64> = g.nodes().collect();
        let sep = MixingKernel::separable(nodes.clone(), nodes.clone()).unwrap();
        let lam = sep.apply(&g, &vec![1.0; g.len()]);
        for (a, v) in nodes.iter().zip(&lam) {
            assert!((v - a / 2.0).abs() < 1e-15);
        }

        let rows = nodes.iter().map(|a| nodes.iter().map(|s| a * s).collect()).collect();
        let mat = MixingKernel::matrix(rows).unwrap();
        let lam2 = mat.apply(&g, &vec![1.0; g.len()]);
        for (x, y) in lam.iter().zip(&lam2) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn force_families_satisfy_basic_shape() {
        let g = grid();
        let sat = ForceSpec::Saturating {
            sigma: NodalProfile::constant(2.0, &g),
            amplitude: 0.5,
            period: 1.0,
        };
        let pow = ForceSpec::Power { exponent: 0.5 };
        for f in [ForceSpec::Identity, sat, pow] {
            f.validate().unwrap();
            assert_eq!(f.eval(0.3, 0.4, 0.0), 0.0);
            for y in [0.1, 1.0, 7.0] {
                assert!(f.eval(0.3, 0.4, y) > 0.0);
                assert!(f.eval(0.3, 0.4, y) <= y + 1e-15);
            }
        }
        assert!(ForceSpec::Power { exponent: 1.5 }.validate().is_err());
    }
}
