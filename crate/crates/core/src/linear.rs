//! Linear part of the model: boundary operator, reaction exponential,
//! transport and full semigroups, resolvent and a discrete generator.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{AgeGrid, StateField};
use crate::model::{MortalityModel, RateSet};

/// Below this value of `δ + γ` the reaction exponential uses its series form.
const SMALL_RATE: f64 = 1e-14;

/// `G(a)` acting on `(s, i, r)`; every column sums to zero.
pub fn reaction_matrix(rates: &RateSet, j: usize) -> [[f64; 3]; 3] {
    let d = rates.delta.node(j);
    let g = rates.gamma.node(j);
    [[0.0, d, 0.0], [0.0, -(d + g), 0.0], [0.0, g, 0.0]]
}

/// `B(a)`; every column sums to `β(a)`.
pub fn boundary_matrix(rates: &RateSet, j: usize) -> [[f64; 3]; 3] {
    let b = rates.beta.node(j);
    let (p, q) = (rates.p, rates.q);
    [[b, (1.0 - p) * b, (1.0 - q) * b], [0.0, p * b, 0.0], [0.0, 0.0, q * b]]
}

/// `𝓑ψ = ∫ B(a) ψ(a) da`.
pub fn boundary_apply(field: &StateField, rates: &RateSet, grid: &AgeGrid) -> [f64; 3] {
    let mut out = [0.0; 3];
    for j in 0..grid.len() {
        let w = grid.weight(j) * rates.beta.node(j);
        let [s, i, r] = field.node(j);
        out[0] += w * (s + (1.0 - rates.p) * i + (1.0 - rates.q) * r);
        out[1] += w * rates.p * i;
        out[2] += w * rates.q * r;
    }
    out
}

/// Closed form of `exp(τ G)` at one node, stored as the three numbers it needs.
#[derive(Debug, Clone, Copy)]
struct ReactionStep {
    decay: f64,
    to_s: f64,
    to_r: f64,
}

impl ReactionStep {
    fn new(delta: f64, gamma: f64, tau: f64) -> Self {
        let m = delta + gamma;
        let (decay, f) = if m < SMALL_RATE {
            (1.0 - m * tau, tau - 0.5 * m * tau * tau)
        } else {
            ((-m * tau).exp(), -(-m * tau).exp_m1() / m)
        };
        Self {
            decay,
            to_s: delta * f,
            to_r: gamma * f,
        }
    }

    #[inline]
    fn apply(&self, [s, i, r]: [f64; 3]) -> [f64; 3] {
        [s + self.to_s * i, self.decay * i, r + self.to_r * i]
    }
}

/// `e^{Gt}ψ`, node by node.
pub fn reaction_exponential(psi: &StateField, t: f64, rates: &RateSet) -> StateField {
    let mut out = psi.clone();
    for j in 0..psi.len() {
        let step = ReactionStep::new(rates.delta.node(j), rates.gamma.node(j), t);
        out.set_node(j, step.apply(psi.node(j)));
    }
    out
}

/// Which pieces of the linear operator are propagated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorPart {
    /// Aging, mortality and renewal boundary (`S¹`, `A₁ + A₂`).
    Transport,
    /// Additionally the recovery/removal exchange (`S`, `A₁ + A₂ + A₃`).
    Full,
}

/// One `dt = da` step of the linear semigroup, with everything precomputed.
///
/// Each interior node is fed from its left neighbour: half a reaction step at the
/// old age, the exact survival factor over the cell, and half a reaction step at
/// the new age. The newborn node then solves the implicit trapezoid renewal
/// `(I - (da/2) B(0)) y₀ = Σ_{j≥1} w_j B(a_j) y_j`.
#[derive(Debug, Clone)]
pub struct LinearPropagator {
    grid: AgeGrid,
    part: GeneratorPart,
    ratio: Vec<f64>,
    half: Vec<ReactionStep>,
    beta_w: Vec<f64>,
    p: f64,
    q: f64,
    diag: [f64; 3],
    h_beta0: f64,
}

impl LinearPropagator {
    pub fn new(rates: &RateSet, mortality: &MortalityModel, part: GeneratorPart) -> Result<Self> {
        let grid = *mortality.grid();
        let n = grid.len();
        if rates.beta.len() != n {
            return Err(Error::structural("rates", "rate tables do not match the grid"));
        }
        let dt = grid.step();
        let mut ratio = vec![0.0; n];
        for (j, r) in ratio.iter_mut().enumerate().skip(1) {
            *r = mortality.survival_ratio_nodes(j - 1, j);
        }
        let half = (0..n)
            .map(|j| match part {
                GeneratorPart::Full => ReactionStep::new(rates.delta.node(j), rates.gamma.node(j), 0.5 * dt),
                GeneratorPart::Transport => ReactionStep::new(0.0, 0.0, 0.0),
            })
            .collect();
        let beta_w = (0..n).map(|j| grid.weight(j) * rates.beta.node(j)).collect();
        let h_beta0 = 0.5 * dt * rates.beta.node(0);
        let diag = [1.0 - h_beta0, 1.0 - h_beta0 * rates.p, 1.0 - h_beta0 * rates.q];
        if diag[0] <= 0.0 {
            return Err(Error::Conditioning(format!(
                "implicit renewal solve singular: da beta(0) / 2 = {h_beta0} >= 1"
            )));
        }
        Ok(Self {
            grid,
            part,
            ratio,
            half,
            beta_w,
            p: rates.p,
            q: rates.q,
            diag,
            h_beta0,
        })
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    pub fn part(&self) -> GeneratorPart {
        self.part
    }

    /// Interior update only; node 0 is left for [`Self::renew_boundary`].
    fn advance_interior(&self, x: &StateField, out: &mut StateField) {
        for j in (1..self.grid.len()).rev() {
            let mut v = self.half[j - 1].apply(x.node(j - 1));
            let rho = self.ratio[j];
            v = [v[0] * rho, v[1] * rho, v[2] * rho];
            out.set_node(j, self.half[j].apply(v));
        }
    }

    /// Sets node 0 of `y` from the implicit trapezoid renewal condition.
    pub fn renew_boundary(&self, y: &mut StateField) {
        let mut rhs = [0.0; 3];
        for j in 1..self.grid.len() {
            let w = self.beta_w[j];
            let [s, i, r] = y.node(j);
            rhs[0] += w * (s + (1.0 - self.p) * i + (1.0 - self.q) * r);
            rhs[1] += w * self.p * i;
            rhs[2] += w * self.q * r;
        }
        let y1 = rhs[1] / self.diag[1];
        let y2 = rhs[2] / self.diag[2];
        let y0 = (rhs[0] + self.h_beta0 * ((1.0 - self.p) * y1 + (1.0 - self.q) * y2)) / self.diag[0];
        y.set_node(0, [y0, y1, y2]);
    }

    pub fn step(&self, x: &StateField) -> StateField {
        let mut out = StateField::zeros(x.len());
        self.advance_interior(x, &mut out);
        self.renew_boundary(&mut out);
        out
    }

    pub fn advance(&self, x: &StateField, steps: usize) -> StateField {
        let mut y = x.clone();
        for _ in 0..steps {
            y = self.step(&y);
        }
        y
    }

    /// `[x, S(dt)x, …, S(steps·dt)x]`.
    pub fn orbit(&self, x: &StateField, steps: usize) -> Vec<StateField> {
        let mut out = Vec::with_capacity(steps + 1);
        out.push(x.clone());
        for m in 0..steps {
            let next = self.step(&out[m]);
            out.push(next);
        }
        out
    }
}

/// Number of `dt = da` steps in `t ∈ [0, horizon]`.
fn grid_steps(grid: &AgeGrid, t: f64, horizon: f64) -> Result<usize> {
    if !(t >= 0.0 && t <= horizon * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!("time {t} outside [0, {horizon}]")));
    }
    if t == 0.0 {
        Ok(0)
    } else {
        grid.time_steps(t)
    }
}

fn check_len(psi: &StateField, grid: &AgeGrid) -> Result<()> {
    if psi.len() != grid.len() {
        return Err(Error::structural(
            "psi",
            format!("expected {} nodes, got {}", grid.len(), psi.len()),
        ));
    }
    Ok(())
}

/// `S¹(t)ψ`: aging with mortality and the renewal boundary, no reaction exchange.
pub fn transport_semigroup_apply(
    psi: &StateField,
    t: f64,
    horizon: f64,
    rates: &RateSet,
    mortality: &MortalityModel,
) -> Result<StateField> {
    semigroup_apply(psi, t, horizon, rates, mortality, GeneratorPart::Transport)
}

/// `S(t)ψ` for the full linear system.
pub fn full_semigroup_apply(
    psi: &StateField,
    t: f64,
    horizon: f64,
    rates: &RateSet,
    mortality: &MortalityModel,
) -> Result<StateField> {
    semigroup_apply(psi, t, horizon, rates, mortality, GeneratorPart::Full)
}

fn semigroup_apply(
    psi: &StateField,
    t: f64,
    horizon: f64,
    rates: &RateSet,
    mortality: &MortalityModel,
    part: GeneratorPart,
) -> Result<StateField> {
    let grid = mortality.grid();
    check_len(psi, grid)?;
    let steps = grid_steps(grid, t, horizon)?;
    Ok(LinearPropagator::new(rates, mortality, part)?.advance(psi, steps))
}

/// Smallest admissible resolvent parameter is strictly above `‖β‖∞ - μ₀`.
pub fn resolvent_threshold(rates: &RateSet, mortality: &MortalityModel) -> f64 {
    rates.beta_inf() - mortality.mu0()
}

/// `R(λ, A₁ + A₂)φ` in closed form:
/// `ψ_i(a) = C_i e^{-λa} Π(a) + ∫₀^a φ_i(α) e^{-λ(a-α)} Π(a)/Π(α) dα`,
/// with the constants `C_i` fixed by `ψ(0) = 𝓑ψ`.
pub fn resolvent_apply(
    phi: &StateField,
    lambda: f64,
    rates: &RateSet,
    mortality: &MortalityModel,
) -> Result<StateField> {
    let grid = *mortality.grid();
    check_len(phi, &grid)?;
    let threshold = resolvent_threshold(rates, mortality);
    if !(lambda > threshold) {
        return Err(Error::Domain(format!(
            "resolvent parameter {lambda} must exceed ||beta||_inf - mu0 = {threshold}"
        )));
    }
    let n = grid.len();
    let da = grid.step();
    let decay = (-lambda * da).exp();

    let mut kernel = vec![0.0; n];
    let mut conv = StateField::zeros(n);
    kernel[0] = 1.0;
    for j in 1..n {
        let rho = mortality.survival_ratio_nodes(j - 1, j);
        let factor = decay * rho;
        kernel[j] = kernel[j - 1] * factor;
        let prev = conv.node(j - 1);
        let f0 = phi.node(j - 1);
        let f1 = phi.node(j);
        let mut v = [0.0; 3];
        for c in 0..3 {
            v[c] = factor * (prev[c] + 0.5 * da * f0[c]) + 0.5 * da * f1[c];
        }
        conv.set_node(j, v);
    }
    for k in kernel.iter_mut() {
        if *k < crate::model::EXTINCTION_THRESHOLD {
            *k = 0.0;
        }
    }

    let beta_w: Vec<f64> = (0..n).map(|j| grid.weight(j) * rates.beta.node(j)).collect();
    let k_int: f64 = (0..n).map(|j| beta_w[j] * kernel[j]).sum();
    let j_int = |c: &[f64]| -> f64 { (0..n).map(|j| beta_w[j] * c[j]).sum() };
    let (j1, j2, j3) = (j_int(&conv.s), j_int(&conv.i), j_int(&conv.r));

    let denominators = [1.0 - k_int, 1.0 - rates.p * k_int, 1.0 - rates.q * k_int];
    if let Some(d) = denominators.iter().find(|d| d.abs() < 1e-10) {
        return Err(Error::Conditioning(format!(
            "resolvent boundary denominator {d:e} is too close to zero"
        )));
    }
    // ∫β ψ₂ = J₂ / (1 - pK), ∫β ψ₃ = J₃ / (1 - qK).
    let int2 = j2 / denominators[1];
    let int3 = j3 / denominators[2];
    let c2 = rates.p * int2;
    let c3 = rates.q * int3;
    let c1 = (j1 + (1.0 - rates.p) * int2 + (1.0 - rates.q) * int3) / denominators[0];

    let mut out = conv;
    for (j, k) in kernel.iter().enumerate() {
        let [s, i, r] = out.node(j);
        out.set_node(j, [s + c1 * k, i + c2 * k, r + c3 * k]);
    }
    Ok(out)
}

/// Operator bound `1 / (λ - ‖β‖∞ - μ₀)`; infinite (vacuous) when the
/// denominator is not positive.
pub fn resolvent_norm_bound(lambda: f64, rates: &RateSet, mortality: &MortalityModel) -> f64 {
    let gap = lambda - rates.beta_inf() - mortality.mu0();
    if gap > 0.0 {
        1.0 / gap
    } else {
        f64::INFINITY
    }
}

/// Discrete `Aψ` on the grid and the boundary residual `ψ(0) - 𝓑ψ`.
#[derive(Debug, Clone)]
pub struct GeneratorOutput {
    pub interior: StateField,
    pub boundary_residual: [f64; 3],
}

/// `-ψ' - μψ (+ Gψ)` with second-order one-sided differences for `ψ'`.
///
/// The last node is set to zero when `μ(ω) = ∞`.
pub fn generator_apply(
    psi: &StateField,
    rates: &RateSet,
    mortality: &MortalityModel,
    part: GeneratorPart,
) -> Result<GeneratorOutput> {
    let grid = *mortality.grid();
    check_len(psi, &grid)?;
    let n = grid.len();
    let da = grid.step();
    let mut interior = StateField::zeros(n);
    for j in 0..n {
        let mu = mortality.rate_node(j);
        if !mu.is_finite() {
            continue;
        }
        let d = |c: usize| -> f64 {
            let v = |k: usize| psi.node(k)[c];
            if j >= 2 {
                (3.0 * v(j) - 4.0 * v(j - 1) + v(j - 2)) / (2.0 * da)
            } else {
                (-3.0 * v(j) + 4.0 * v(j + 1) - v(j + 2)) / (2.0 * da)
            }
        };
        let x = psi.node(j);
        let mut out = [0.0; 3];
        for c in 0..3 {
            out[c] = -d(c) - mu * x[c];
        }
        if part == GeneratorPart::Full {
            let g = reaction_matrix(rates, j);
            for (c, o) in out.iter_mut().enumerate() {
                *o += g[c][0] * x[0] + g[c][1] * x[1] + g[c][2] * x[2];
            }
        }
        interior.set_node(j, out);
    }
    let b = boundary_apply(psi, rates, &grid);
    let x0 = psi.node(0);
    Ok(GeneratorOutput {
        interior,
        boundary_residual: [x0[0] - b[0], x0[1] - b[1], x0[2] - b[2]],
    })
}

/// Trapezoid L¹ norm of a residual restricted to ages `a ≤ ω - tail_cells·da`.
pub fn truncated_l1_norm(field: &StateField, grid: &AgeGrid, tail_cells: usize) -> f64 {
    let last = grid.cells().saturating_sub(tail_cells);
    let da = grid.step();
    (0..=last)
        .map(|j| {
            let w = if j == 0 || j == last { 0.5 * da } else { da };
            let [s, i, r] = field.node(j);
            w * (s.abs() + i.abs() + r.abs())
        })
        .sum()
}

/// `‖(λ - A)R(λ)φ - φ‖₁` away from the last `tail_cells` cells.
pub fn resolvent_residual(
    phi: &StateField,
    lambda: f64,
    rates: &RateSet,
    mortality: &MortalityModel,
    tail_cells: usize,
) -> Result<(f64, [f64; 3])> {
    let psi = resolvent_apply(phi, lambda, rates, mortality)?;
    let gen = generator_apply(&psi, rates, mortality, GeneratorPart::Transport)?;
    let mut residual = psi.scaled(lambda);
    residual.add_scaled(-1.0, &gen.interior);
    residual.add_scaled(-1.0, phi);
    Ok((
        truncated_l1_norm(&residual, mortality.grid(), tail_cells),
        gen.boundary_residual,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(cells: usize, theta: f64) -> (AgeGrid, RateSet, MortalityModel) {
        let g = AgeGrid::new(1.0, cells).unwrap();
        let beta: Vec<f64> = g.nodes().map(|a| 1.0 + 0.5 * a).collect();
        let gamma: Vec<f64> = g.nodes().map(|a| 0.8 + 0.2 * a).collect();
        let delta: Vec<f64> = g.nodes().map(|a| 0.5 + 0.3 * (1.0 - a)).collect();
        let rates = RateSet::new(&g, beta, gamma, delta, 0.7, 0.4).unwrap();
        let mort = MortalityModel::new(g, g.nodes().map(|a| 0.2 + 0.1 * a).collect(), theta).unwrap();
        (g, rates, mort)
    }

    fn smooth_field(g: &AgeGrid) -> StateField {
        StateField::new(
            g.nodes().map(|a| 1.0 + (3.0 * a).sin()).collect(),
            g.nodes().map(|a| 0.5 + a * (1.0 - a)).collect(),
            g.nodes().map(|a| (a * 2.0).cos().abs()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn boundary_examples() {
        let g = AgeGrid::new(1.0, 10).unwrap();
        let n = g.len();
        let ones = StateField::new(vec![1.0; n], vec![1.0; n], vec![1.0; n]).unwrap();
        let rates = RateSet::new(&g, vec![2.0; n], vec![1.0; n], vec![1.0; n], 1.0, 1.0).unwrap();
        let b = boundary_apply(&ones, &rates, &g);
        for v in b {
            assert!((v - 2.0).abs() < 1e-14);
        }

        let rates = RateSet::new(&g, vec![1.0; n], vec![1.0; n], vec![1.0; n], 0.0, 0.3).unwrap();
        assert_eq!(boundary_apply(&ones, &rates, &g)[1], 0.0);

        let lin = StateField::new(g.nodes().collect(), vec![0.0; n], vec![0.0; n]).unwrap();
        let b = boundary_apply(&lin, &rates, &g);
        assert!((b[0] - 0.5).abs() < 1e-15 && b[1] == 0.0 && b[2] == 0.0);
    }

    #[test]
    fn matrices_have_expected_column_sums() {
        let (g, rates, _) = scenario(10, 1.0);
        for j in 0..g.len() {
            let gm = reaction_matrix(&rates, j);
            let bm = boundary_matrix(&rates, j);
            for c in 0..3 {
                let gs: f64 = (0..3).map(|r| gm[r][c]).sum();
                let bs: f64 = (0..3).map(|r| bm[r][c]).sum();
                assert!(gs.abs() < 1e-15);
                assert!((bs - rates.beta.node(j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn reaction_identity_cases() {
        let (g, rates, _) = scenario(10, 1.0);
        let psi = smooth_field(&g);
        assert_eq!(reaction_exponential(&psi, 0.0, &rates), psi);
        let n = g.len();
        let still = RateSet::new(&g, vec![1.0; n], vec![0.0; n], vec![0.0; n], 0.5, 0.5).unwrap();
        assert_eq!(reaction_exponential(&psi, 3.7, &still), psi);
    }

    #[test]
    fn transport_examples() {
        let g = AgeGrid::new(1.0, 10).unwrap();
        let n = g.len();
        let rates = RateSet::new(&g, vec![0.0; n], vec![1.0; n], vec![1.0; n], 0.5, 0.5).unwrap();
        let mort = MortalityModel::new(g, vec![0.6; n], 0.0).unwrap();
        let psi = smooth_field(&g);
        assert_eq!(transport_semigroup_apply(&psi, 0.0, 1.0, &rates, &mort).unwrap(), psi);
        let out = transport_semigroup_apply(&psi, g.step(), 1.0, &rates, &mort).unwrap();
        assert_eq!(out.node(0), [0.0; 3]);
        let f = (-0.6 * g.step()).exp();
        for j in 1..n {
            for c in 0..3 {
                assert!((out.node(j)[c] - f * psi.node(j - 1)[c]).abs() < 1e-15);
            }
        }
        assert!(transport_semigroup_apply(&psi, 1.5, 1.0, &rates, &mort).is_err());
        assert!(transport_semigroup_apply(&psi, -0.1, 1.0, &rates, &mort).is_err());
    }

    #[test]
    fn full_semigroup_composes() {
        let (g, rates, mort) = scenario(40, 1.0);
        let psi = smooth_field(&g);
        let dt = g.step();
        let two = full_semigroup_apply(&psi, 2.0 * dt, 1.0, &rates, &mort).unwrap();
        let one = full_semigroup_apply(&psi, dt, 1.0, &rates, &mort).unwrap();
        let comp = full_semigroup_apply(&one, dt, 1.0, &rates, &mort).unwrap();
        assert!(two.difference(&comp).l1_norm(&g) < 1e-12);
        assert_eq!(full_semigroup_apply(&psi, 0.0, 1.0, &rates, &mort).unwrap(), psi);
    }

    #[test]
    fn semigroup_satisfies_discrete_boundary_condition() {
        let (g, rates, mort) = scenario(40, 1.0);
        let out = full_semigroup_apply(&smooth_field(&g), 0.5, 1.0, &rates, &mort).unwrap();
        let b = boundary_apply(&out, &rates, &g);
        for c in 0..3 {
            assert!((out.node(0)[c] - b[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn resolvent_of_zero_is_zero() {
        let (g, rates, mort) = scenario(20, 1.0);
        let lambda = resolvent_threshold(&rates, &mort) + 1.0;
        let psi = resolvent_apply(&StateField::zeros(g.len()), lambda, &rates, &mort).unwrap();
        assert_eq!(psi.l1_norm(&g), 0.0);
    }

    #[test]
    fn resolvent_rejects_small_lambda() {
        let (g, rates, mort) = scenario(20, 1.0);
        let t = resolvent_threshold(&rates, &mort);
        assert!(matches!(
            resolvent_apply(&smooth_field(&g), t, &rates, &mort),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn resolvent_satisfies_boundary_condition_exactly() {
        let (g, rates, mort) = scenario(50, 1.0);
        let lambda = resolvent_threshold(&rates, &mort) + 2.0;
        let psi = resolvent_apply(&smooth_field(&g), lambda, &rates, &mort).unwrap();
        let gen = generator_apply(&psi, &rates, &mort, GeneratorPart::Transport).unwrap();
        for r in gen.boundary_residual {
            assert!(r.abs() < 1e-12, "{r}");
        }
    }

    #[test]
    fn resolvent_residual_shrinks_under_refinement() {
        let mut res = Vec::new();
        for cells in [50, 100, 200] {
            let (g, rates, mort) = scenario(cells, 1.0);
            let lambda = resolvent_threshold(&rates, &mort) + 1.0;
            res.push(resolvent_residual(&smooth_field(&g), lambda, &rates, &mort, 5).unwrap().0);
        }
        assert!(res[0] / res[1] > 1.8 && res[1] / res[2] > 1.8, "{res:?}");
    }

    #[test]
    fn generator_of_zero_is_zero() {
        let (g, rates, mort) = scenario(10, 1.0);
        let out = generator_apply(&StateField::zeros(g.len()), &rates, &mort, GeneratorPart::Full).unwrap();
        assert_eq!(out.interior.l1_norm(&g), 0.0);
        assert_eq!(out.boundary_residual, [0.0; 3]);
    }
}
