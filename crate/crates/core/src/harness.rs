//! Property suites behind the command-line subcommands.
//!
//! Every suite returns a [`Report`] of named assertions; a suite passes iff all
//! of its assertions hold. Randomized checks draw from per-trial seeded
//! generators, so reports are reproducible byte for byte.

use rayon::prelude::*;

use crate::demography::{population_bound_check, solve_mckendrick};
use crate::error::Result;
use crate::grid::{NodalProfile, StateField};
use crate::infection::{lipschitz_probe, ForceVariant, InfectionContext, Shape, Truncation, XiClamp};
use crate::linear::{
    full_semigroup_apply, reaction_exponential, reaction_matrix, resolvent_apply, resolvent_norm_bound,
    resolvent_residual, resolvent_threshold, transport_semigroup_apply,
};
use crate::model::{ForceSpec, Model, ModelConstants};
use crate::report::{Assertion, Relation, Report};
use crate::sampling::{nonnegative_field, signed_field, smooth_field, trial_rng};
use crate::scenario::{Scenario, ScenarioConfig};
use crate::solver::{
    continuous_dependence_probe, gronwall_check, mass_consistency_check, picard_solve, positivity_check,
    simulate_direct, truncation_inactive_check, Formulation, InitialGuess, PicardSettings, Trajectory,
};

/// Claims the `validate` suite must exercise at least once.
pub const COVERAGE_MANIFEST: &[&str] = &[
    "hypotheses",
    "xi_contract",
    "reaction_exponential",
    "semigroup_bound",
    "transport_semigroup_bound",
    "cone_invariance",
    "resolvent_bound",
    "resolvent_identity",
    "mass_balance",
    "population_bound",
    "gronwall_radius",
    "truncation_inactive",
    "shift_equivalence",
    "picard_contraction",
    "uniqueness",
    "lipschitz",
    "growth",
    "continuous_dependence",
    "solver_agreement",
];

/// Randomized trial counts.
pub const RANDOM_TRIALS: usize = 100;
pub const SMOOTH_TRIALS: usize = 20;
pub const LIPSCHITZ_PAIRS: usize = 200;
pub const LIPSCHITZ_RADIUS: f64 = 5.0;
pub const XI_SAMPLES: usize = 1000;
pub const DEPENDENCE_SCALES: [f64; 3] = [1e-2, 1e-3, 1e-4];
/// Tail cells excluded from resolvent residual norms.
pub const RESOLVENT_TAIL_CELLS: usize = 5;
/// Required residual reduction per grid doubling.
pub const RESOLVENT_REDUCTION: f64 = 1.8;
/// Required observed order in refinement studies.
pub const MIN_ORDER: f64 = 0.9;
pub const POSITIVITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default)]
pub struct SuiteOptions {
    /// Grid size override (`--grid`).
    pub cells: Option<usize>,
    /// Seed override (`--seed`).
    pub seed: Option<u64>,
}

struct Setup {
    scenario: Scenario,
    constants: ModelConstants,
    seed: u64,
    cells: usize,
}

fn prepare(config: &ScenarioConfig, opts: &SuiteOptions) -> Result<Setup> {
    let scenario = config.discretize(opts.cells)?;
    let constants = scenario.model.constants_for(&scenario.x0)?;
    let seed = opts.seed.unwrap_or(scenario.seed);
    let cells = scenario.model.grid.cells();
    Ok(Setup {
        scenario,
        constants,
        seed,
        cells,
    })
}

fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::INFINITY, f64::min)
}

/// Grid times closest to `T/4`, `T/2`, `T`.
fn probe_times(model: &Model) -> Vec<f64> {
    [4usize, 2, 1]
        .iter()
        .map(|d| ((model.steps as f64 / *d as f64).round() as usize).max(1) as f64 * model.dt())
        .collect()
}

pub fn hypothesis_assertions(model: &Model) -> Result<Vec<Assertion>> {
    let report = model.validate()?;
    Ok(report
        .checks
        .iter()
        .map(|c| {
            Assertion::new(
                format!("hypothesis:{}", c.name),
                "hypotheses",
                if c.passed { 1.0 } else { 0.0 },
                Relation::AtLeast,
                1.0,
                c.detail.clone(),
            )
        })
        .collect())
}

/// Identity on `[-z1, z1]`, `|Ξ| ≤ z2`, `Ξ' ∈ [0, 2]`, and the returned derivative
/// against central differences.
pub fn xi_assertions(clamp: &XiClamp) -> Vec<Assertion> {
    let scale = if clamp.z2 > 0.0 { clamp.z2 } else { 1.0 };
    let samples: Vec<f64> = (0..XI_SAMPLES)
        .map(|k| -10.0 * scale + 20.0 * scale * k as f64 / (XI_SAMPLES - 1) as f64)
        .collect();
    let inner: Vec<f64> = (0..XI_SAMPLES)
        .map(|k| -clamp.z1 + 2.0 * clamp.z1 * k as f64 / (XI_SAMPLES - 1) as f64)
        .collect();
    let identity_err = max_of(inner.iter().map(|z| {
        let (v, d) = clamp.eval(*z);
        (v - z).abs().max((d - 1.0).abs())
    }));
    let max_abs = max_of(samples.iter().map(|z| clamp.value(*z).abs()));
    let derivs: Vec<f64> = samples.iter().map(|z| clamp.eval(*z).1).collect();
    let h = 1e-6 * scale;
    let fd_err = max_of(samples.iter().map(|z| {
        let fd = (clamp.value(z + h) - clamp.value(z - h)) / (2.0 * h);
        (fd - clamp.eval(*z).1).abs()
    }));
    let degenerate = clamp.z2 <= clamp.z1;
    let mut out = vec![
        Assertion::new(
            "xi:identity_on_inner_band",
            "xi_contract",
            identity_err,
            Relation::AtMost,
            0.0,
            format!("{XI_SAMPLES} samples in [-z1, z1], z1 = {}", clamp.z1),
        ),
        Assertion::new(
            "xi:bounded_by_z2",
            "xi_contract",
            max_abs,
            Relation::AtMost,
            clamp.z2,
            format!("{XI_SAMPLES} samples in [-10 z2, 10 z2]"),
        ),
        Assertion::new(
            "xi:derivative_nonnegative",
            "xi_contract",
            min_of(derivs.iter().copied()),
            Relation::AtLeast,
            0.0,
            "min of returned derivative",
        ),
        Assertion::new(
            "xi:derivative_at_most_two",
            "xi_contract",
            max_of(derivs.iter().copied()),
            Relation::AtMost,
            2.0,
            "max of returned derivative",
        ),
    ];
    if !degenerate {
        out.push(Assertion::new(
            "xi:derivative_matches_differences",
            "xi_contract",
            fd_err,
            Relation::AtMost,
            1e-6,
            format!("central differences with h = {h:e}"),
        ));
    }
    out
}

/// Reference `exp(tG)` by Taylor series with scaling and squaring.
fn expm3(g: [[f64; 3]; 3], t: f64) -> [[f64; 3]; 3] {
    let norm = g.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max) * t;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let s = t / 2f64.powi(squarings as i32);
    let mul = |a: [[f64; 3]; 3], b: [[f64; 3]; 3]| {
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        c
    };
    let mut result = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut term = result;
    let a = g.map(|r| r.map(|x| x * s));
    for k in 1..=30 {
        term = mul(term, a).map(|r| r.map(|x| x / k as f64));
        for i in 0..3 {
            for j in 0..3 {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = mul(result, result);
    }
    result
}

pub fn reaction_assertions(model: &Model, seed: u64) -> Vec<Assertion> {
    let grid = model.grid;
    let results: Vec<(f64, f64, f64)> = (0..RANDOM_TRIALS as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(seed, k);
            let psi = signed_field(&mut rng, &grid);
            let t = model.horizon * (k as f64 + 1.0) / RANDOM_TRIALS as f64;
            let out = reaction_exponential(&psi, t, &model.rates);
            let mass = max_of((0..grid.len()).map(|j| {
                let a = psi.node(j).iter().sum::<f64>();
                let b = out.node(j).iter().sum::<f64>();
                (a - b).abs() / a.abs().max(1.0)
            }));
            let oracle = max_of((0..grid.len()).map(|j| {
                let e = expm3(reaction_matrix(&model.rates, j), t);
                let x = psi.node(j);
                let y = out.node(j);
                max_of((0..3).map(|c| (y[c] - (0..3).map(|k| e[c][k] * x[k]).sum::<f64>()).abs()))
            }));
            let nonneg = reaction_exponential(&nonnegative_field(&mut rng, &grid), t, &model.rates).min_value();
            (mass, oracle, nonneg)
        })
        .collect();
    vec![
        Assertion::new(
            "reaction:matches_series_exponential",
            "reaction_exponential",
            max_of(results.iter().map(|r| r.1)),
            Relation::AtMost,
            1e-12,
            format!("{RANDOM_TRIALS} random states, every node"),
        ),
        Assertion::new(
            "reaction:conserves_total",
            "reaction_exponential",
            max_of(results.iter().map(|r| r.0)),
            Relation::AtMost,
            1e-14,
            "pointwise |Δ(s+i+r)|",
        ),
        Assertion::new(
            "reaction:cone_invariance",
            "cone_invariance",
            min_of(results.iter().map(|r| r.2)),
            Relation::AtLeast,
            -POSITIVITY_TOLERANCE,
            "min nodal value of e^{Gt} on nonnegative input",
        ),
    ]
}

pub fn semigroup_assertions(model: &Model, constants: &ModelConstants, seed: u64) -> Result<Vec<Assertion>> {
    let grid = model.grid;
    let times = probe_times(model);
    let rates = &model.rates;
    let mort = &model.mortality;
    let growth = rates.beta_inf() + mort.mu0();
    let trials: Vec<(f64, f64, f64)> = (0..RANDOM_TRIALS as u64)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64, f64)> {
            let mut rng = trial_rng(seed, k);
            let signed = signed_field(&mut rng, &grid);
            let nonneg = nonnegative_field(&mut rng, &grid);
            let (mut full_ratio, mut transport_ratio, mut min_value) = (0.0_f64, 0.0_f64, f64::INFINITY);
            for &t in &times {
                for psi in [&signed, &nonneg] {
                    let n = psi.l1_norm(&grid);
                    let full = full_semigroup_apply(psi, t, model.horizon, rates, mort)?;
                    full_ratio = full_ratio.max(full.l1_norm(&grid) / (constants.l * n));
                }
                let full = full_semigroup_apply(&nonneg, t, model.horizon, rates, mort)?;
                let tr = transport_semigroup_apply(&nonneg, t, model.horizon, rates, mort)?;
                let bound = (growth * t).exp() * nonneg.l1_norm(&grid);
                transport_ratio = transport_ratio.max(tr.l1_norm(&grid) / bound);
                min_value = min_value.min(full.min_value()).min(tr.min_value());
            }
            Ok((full_ratio, transport_ratio, min_value))
        })
        .collect::<Result<_>>()?;
    Ok(vec![
        Assertion::new(
            "semigroup:norm_within_L",
            "semigroup_bound",
            max_of(trials.iter().map(|t| t.0)),
            Relation::AtMost,
            1.0,
            format!(
                "max ||S(t)psi|| / (L ||psi||), L = {}, t in {times:?}, {RANDOM_TRIALS} trials",
                sci(constants.l)
            ),
        ),
        Assertion::new(
            "semigroup:transport_growth",
            "transport_semigroup_bound",
            max_of(trials.iter().map(|t| t.1)),
            Relation::AtMost,
            1.0,
            "max ||S1(t)psi|| / (e^{(||beta|| + mu0) t} ||psi||)",
        ),
        Assertion::new(
            "semigroup:cone_invariance",
            "cone_invariance",
            min_of(trials.iter().map(|t| t.2)),
            Relation::AtLeast,
            -POSITIVITY_TOLERANCE,
            "min nodal value of S(t)psi and S1(t)psi on nonnegative input",
        ),
    ])
}

/// `λ` values where the operator bound is informative.
pub fn resolvent_bound_lambdas(model: &Model) -> Vec<f64> {
    let base = model.rates.beta_inf() + model.mortality.mu0();
    vec![base + 0.25, base + 1.0, base + 2.0]
}

pub fn resolvent_bound_assertions(model: &Model, seed: u64) -> Result<Vec<Assertion>> {
    let grid = model.grid;
    let lambdas = resolvent_bound_lambdas(model);
    let trials: Vec<(f64, f64)> = (0..RANDOM_TRIALS as u64)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64)> {
            let mut rng = trial_rng(seed, k);
            let phi = nonnegative_field(&mut rng, &grid);
            let n = phi.l1_norm(&grid);
            let mut worst = 0.0_f64;
            let mut min_value = f64::INFINITY;
            for &lambda in &lambdas {
                let psi = resolvent_apply(&phi, lambda, &model.rates, &model.mortality)?;
                let bound = resolvent_norm_bound(lambda, &model.rates, &model.mortality);
                worst = worst.max(psi.l1_norm(&grid) / (bound * n));
                min_value = min_value.min(psi.min_value());
            }
            Ok((worst, min_value))
        })
        .collect::<Result<_>>()?;
    Ok(vec![
        Assertion::new(
            "resolvent:norm_bound",
            "resolvent_bound",
            max_of(trials.iter().map(|t| t.0)),
            Relation::AtMost,
            1.0,
            format!(
                "max ||R(l)phi|| (l - ||beta|| - mu0) / ||phi||, l in {lambdas:?}, {RANDOM_TRIALS} trials"
            ),
        ),
        Assertion::new(
            "resolvent:cone_invariance",
            "cone_invariance",
            min_of(trials.iter().map(|t| t.1)),
            Relation::AtLeast,
            -POSITIVITY_TOLERANCE,
            "min nodal value of R(l)phi on nonnegative input",
        ),
    ])
}

/// Residual of `(λ - A)R(λ)φ = φ` on the grid and on the doubled grid.
pub fn resolvent_identity_assertions(config: &ScenarioConfig, cells: usize, seed: u64) -> Result<Vec<Assertion>> {
    let coarse = config.discretize(Some(cells))?.model;
    let fine = config.discretize(Some(2 * cells))?.model;
    let threshold = resolvent_threshold(&coarse.rates, &coarse.mortality);
    let lambdas = [threshold + 1.0, threshold + 2.0, threshold + 5.0];
    let trials: Vec<(f64, f64)> = (0..SMOOTH_TRIALS as u64)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64)> {
            let mut worst_reduction = f64::INFINITY;
            let mut worst_boundary = 0.0_f64;
            for &lambda in &lambdas {
                let mut res = [0.0; 2];
                for (slot, model) in [&coarse, &fine].into_iter().enumerate() {
                    // Same smooth function on both grids.
                    let mut rng = trial_rng(seed, k);
                    let phi = smooth_field(&mut rng, &model.grid, false);
                    let (r, b) = resolvent_residual(&phi, lambda, &model.rates, &model.mortality, RESOLVENT_TAIL_CELLS)?;
                    res[slot] = r;
                    worst_boundary = worst_boundary.max(max_of(b.iter().map(|v| v.abs())));
                }
                worst_reduction = worst_reduction.min(res[0] / res[1]);
            }
            Ok((worst_reduction, worst_boundary))
        })
        .collect::<Result<_>>()?;
    Ok(vec![
        Assertion::new(
            "resolvent:residual_reduction",
            "resolvent_identity",
            min_of(trials.iter().map(|t| t.0)),
            Relation::AtLeast,
            RESOLVENT_REDUCTION,
            format!(
                "min over {SMOOTH_TRIALS} smooth phi and l - threshold in {{1, 2, 5}} of residual(J)/residual(2J), J = {cells}"
            ),
        ),
        Assertion::new(
            "resolvent:boundary_condition",
            "resolvent_identity",
            max_of(trials.iter().map(|t| t.1)),
            Relation::AtMost,
            1e-12,
            "max |psi(0) - B psi|",
        ),
    ])
}

/// Positivity, mass balance, population bound, a-priori radius and truncation
/// inactivity for one direct run.
pub fn trajectory_assertions(model: &Model, traj: &Trajectory, constants: &ModelConstants) -> Result<Vec<Assertion>> {
    let clamp = XiClamp::from_constants(constants);
    let pos = positivity_check(traj, POSITIVITY_TOLERANCE);
    let mass = mass_consistency_check(traj, model)?;
    let pop = population_bound_check(
        &solve_mckendrick(&traj.initial().total(), &model.rates, &model.mortality, model.horizon)?,
        constants,
    );
    let gron = gronwall_check(traj, constants, !model.force.is_identity());
    let trunc = truncation_inactive_check(traj, &model.kernel, &clamp);
    Ok(vec![
        Assertion::new(
            "trajectory:positivity",
            "cone_invariance",
            pos.min_value,
            Relation::AtLeast,
            -POSITIVITY_TOLERANCE,
            "min nodal value over components and times",
        ),
        Assertion::new(
            "trajectory:mass_balance",
            "mass_balance",
            mass.max_relative_error,
            Relation::AtMost,
            mass.bound,
            "max_t ||(s+i+r) - n||_1 / ||n0||_1 against the renewal solver, bound 5 da",
        ),
        Assertion::new(
            "trajectory:population_bound",
            "population_bound",
            pop.max_ratio,
            Relation::AtMost,
            pop.bound,
            format!("max_t ||n(t)||_1 / ||n0||_1 vs M; margin {}", sci(pop.margin)),
        ),
        Assertion::new(
            "trajectory:gronwall_radius",
            "gronwall_radius",
            gron.sup_norm,
            Relation::Less,
            gron.radius,
            "sup_t ||x(t)||_1 vs a-priori radius",
        ),
        Assertion::new(
            "trajectory:truncation_inactive",
            "truncation_inactive",
            trunc.max_lambda,
            Relation::Less,
            trunc.z1,
            format!("max |Lambda| vs z1; margin {}", sci(trunc.margin)),
        ),
    ])
}

/// Direct runs from seeded random nonnegative data: positivity and the a-priori radius.
pub fn random_run_assertions(model: &Model, x0_norm: f64, seed: u64) -> Result<Vec<Assertion>> {
    let grid = model.grid;
    let runs: Vec<(f64, f64, f64, f64)> = (0..RANDOM_TRIALS as u64)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64, f64, f64)> {
            let mut rng = trial_rng(seed, k);
            let x0 = crate::sampling::with_norm(nonnegative_field(&mut rng, &grid), &grid, x0_norm);
            let traj = simulate_direct(model, &x0)?;
            let c = model.constants_for(&x0)?;
            let gron = gronwall_check(&traj, &c, !model.force.is_identity());
            let trunc = truncation_inactive_check(&traj, &model.kernel, &XiClamp::from_constants(&c));
            Ok((traj.min_value(), gron.sup_norm / gron.radius, trunc.max_lambda / trunc.z1, 0.0))
        })
        .collect::<Result<_>>()?;
    Ok(vec![
        Assertion::new(
            "random_runs:positivity",
            "cone_invariance",
            min_of(runs.iter().map(|r| r.0)),
            Relation::AtLeast,
            -POSITIVITY_TOLERANCE,
            format!("{RANDOM_TRIALS} seeded nonnegative initial states"),
        ),
        Assertion::new(
            "random_runs:gronwall_radius",
            "gronwall_radius",
            max_of(runs.iter().map(|r| r.1)),
            Relation::Less,
            1.0,
            "max sup_t ||x(t)||_1 / R",
        ),
        Assertion::new(
            "random_runs:truncation_inactive",
            "truncation_inactive",
            max_of(runs.iter().map(|r| r.2)),
            Relation::Less,
            1.0,
            "max |Lambda| / z1",
        ),
    ])
}

pub fn picard_assertions(model: &Model, x0: &StateField, settings: &PicardSettings) -> Result<Vec<Assertion>> {
    let unshifted = picard_solve(model, x0, &PicardSettings { formulation: Formulation::Unshifted, ..*settings })?;
    let shifted = picard_solve(model, x0, &PicardSettings { formulation: Formulation::Shifted, ..*settings })?;
    let from_zero = picard_solve(
        model,
        x0,
        &PicardSettings {
            initial_guess: InitialGuess::Zero,
            ..*settings
        },
    )?;
    let frozen = picard_solve(
        model,
        x0,
        &PicardSettings {
            initial_guess: InitialGuess::Frozen,
            ..*settings
        },
    )?;
    let monotone = |d: &[f64]| -> f64 {
        // Largest growth factor between consecutive deltas after the first.
        max_of(d.windows(2).skip(1).map(|w| w[1] / w[0]).chain(std::iter::once(0.0)))
    };
    let tol10 = 10.0 * settings.tol;
    Ok(vec![
        Assertion::new(
            "picard:shift_equivalence",
            "shift_equivalence",
            unshifted.trajectory.sup_distance(&shifted.trajectory),
            Relation::AtMost,
            tol10,
            format!(
                "sup_t distance; iterations unshifted {} / shifted {}",
                unshifted.iterations(),
                shifted.iterations()
            ),
        ),
        Assertion::new(
            "picard:contraction_unshifted",
            "picard_contraction",
            monotone(&unshifted.deltas),
            Relation::AtMost,
            1.0,
            format!("max delta ratio after the first iteration; deltas {:?}", unshifted.deltas),
        ),
        Assertion::new(
            "picard:contraction_shifted",
            "picard_contraction",
            monotone(&shifted.deltas),
            Relation::AtMost,
            1.0,
            format!("max delta ratio after the first iteration over {} iterations", shifted.iterations()),
        ),
        Assertion::new(
            "picard:uniqueness_zero_start",
            "uniqueness",
            from_zero.trajectory.sup_distance(&unshifted.trajectory),
            Relation::AtMost,
            tol10,
            "zero initial iterate vs semigroup orbit",
        ),
        Assertion::new(
            "picard:uniqueness_frozen_start",
            "uniqueness",
            frozen.trajectory.sup_distance(&unshifted.trajectory),
            Relation::AtMost,
            tol10,
            "constant-in-time initial iterate vs semigroup orbit",
        ),
    ])
}

/// Force variants probed for the Lipschitz and growth estimates: the linear
/// shape plus each nonlinear family.
pub fn probe_shapes(model: &Model) -> Vec<Shape> {
    let grid = model.grid;
    let mut shapes = vec![
        Shape::Linear,
        Shape::Nonlinear(ForceSpec::Saturating {
            sigma: NodalProfile::constant(1.0, &grid),
            amplitude: 0.5,
            period: model.horizon,
        }),
        Shape::Nonlinear(ForceSpec::Power { exponent: 0.5 }),
    ];
    if !model.force.is_identity() {
        shapes.push(Shape::Nonlinear(model.force.clone()));
    }
    shapes
}

pub fn lipschitz_assertions(model: &Model, seed: u64) -> Result<Vec<Assertion>> {
    let mut out = Vec::new();
    for (s, shape) in probe_shapes(model).into_iter().enumerate() {
        let force = match &shape {
            Shape::Linear => ForceSpec::Identity,
            Shape::Nonlinear(f) => f.clone(),
        };
        let constants = crate::model::derive_constants(
            &model.rates,
            &model.mortality,
            &model.kernel,
            &force,
            1.0,
            model.horizon,
        )?;
        let ctx = InfectionContext {
            grid: &model.grid,
            kernel: &model.kernel,
            clamp: XiClamp::from_constants(&constants),
        };
        for (t, truncation) in [Truncation::Raw, Truncation::Truncated, Truncation::Shifted].into_iter().enumerate() {
            let variant = ForceVariant::new(truncation, shape.clone(), &constants);
            let report = lipschitz_probe(
                &variant,
                &ctx,
                &constants,
                LIPSCHITZ_RADIUS,
                LIPSCHITZ_PAIRS,
                seed.wrapping_add(1000 * (3 * s + t) as u64),
            );
            out.push(Assertion::new(
                format!("lipschitz:{}", report.variant),
                "lipschitz",
                report.max_ratio,
                Relation::AtMost,
                report.lipschitz_bound,
                format!("{LIPSCHITZ_PAIRS} pairs, radius {LIPSCHITZ_RADIUS}"),
            ));
            if let Some(bound) = report.growth_bound {
                out.push(Assertion::new(
                    format!("growth:{}", report.variant),
                    "growth",
                    report.max_growth,
                    Relation::AtMost,
                    bound,
                    "max ||F(psi)||_1 / ||psi||_1",
                ));
            }
        }
    }
    Ok(out)
}

pub fn dependence_assertions(model: &Model, x0: &StateField, seed: u64) -> Result<(Vec<Assertion>, crate::solver::DependenceReport)> {
    let report = continuous_dependence_probe(model, x0, &DEPENDENCE_SCALES, seed)?;
    let worst = max_of(report.trials.iter().filter_map(|t| t.ratio));
    let assertion = Assertion::new(
        "dependence:flow_lipschitz",
        "continuous_dependence",
        worst,
        Relation::AtMost,
        report.bound,
        format!(
            "ratios {:?} for scales {:?}",
            report.trials.iter().map(|t| t.ratio).collect::<Vec<_>>(),
            DEPENDENCE_SCALES
        ),
    );
    Ok((vec![assertion], report))
}

/// Observed order `log2(e_coarse / e_fine)`.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Direct and Picard trajectories on `J, 2J, 4J`.
pub struct Ladder {
    pub cells: Vec<usize>,
    pub direct: Vec<Trajectory>,
    pub picard: Vec<Trajectory>,
}

pub fn refinement_ladder(config: &ScenarioConfig, cells: usize, levels: usize) -> Result<Ladder> {
    let grids: Vec<usize> = (0..levels).map(|k| cells << k).collect();
    let runs: Vec<(Trajectory, Trajectory)> = grids
        .par_iter()
        .map(|&j| -> Result<(Trajectory, Trajectory)> {
            let sc = config.discretize(Some(j))?;
            let direct = simulate_direct(&sc.model, &sc.x0)?;
            let picard = picard_solve(&sc.model, &sc.x0, &sc.picard)?.trajectory;
            Ok((direct, picard))
        })
        .collect::<Result<_>>()?;
    let (direct, picard) = runs.into_iter().unzip();
    Ok(Ladder {
        cells: grids,
        direct,
        picard,
    })
}

pub fn agreement_assertions(ladder: &Ladder) -> Result<(Vec<Assertion>, Vec<f64>)> {
    let distances: Vec<f64> = ladder
        .direct
        .iter()
        .zip(&ladder.picard)
        .map(|(d, p)| d.sup_distance(p))
        .collect();
    let out = distances
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            Assertion::new(
                format!("agreement:order_{}_{}", ladder.cells[k], ladder.cells[k + 1]),
                "solver_agreement",
                observed_order(w[0], w[1]),
                Relation::AtLeast,
                MIN_ORDER,
                format!("sup-L1 distance direct vs Picard: {} -> {}", sci(w[0]), sci(w[1])),
            )
        })
        .collect();
    Ok((out, distances))
}

/// Errors of every coarser level against the finest, compared on coarse nodes.
pub fn self_convergence(runs: &[Trajectory]) -> Result<Vec<f64>> {
    let finest = runs.last().expect("non-empty ladder");
    runs[..runs.len() - 1]
        .iter()
        .map(|coarse| {
            let stride = finest.grid.cells() / coarse.grid.cells();
            Ok(coarse.sup_distance(&finest.coarsen(stride)?))
        })
        .collect()
}

fn finish(mut report: Report, setup: &Setup) -> Result<Report> {
    report.attach("constants", &setup.constants)?;
    Ok(report)
}

pub fn validate_suite(config: &ScenarioConfig, opts: &SuiteOptions) -> Result<Report> {
    let setup = prepare(config, opts)?;
    let model = &setup.scenario.model;
    let x0 = &setup.scenario.x0;
    let mut report = Report::new("validate", setup.cells, setup.seed);
    let validation = model.validate()?;
    report.extend(hypothesis_assertions(model)?);
    report.extend(xi_assertions(&XiClamp::from_constants(&setup.constants)));
    report.extend(reaction_assertions(model, setup.seed));
    report.extend(semigroup_assertions(model, &setup.constants, setup.seed)?);
    report.extend(resolvent_bound_assertions(model, setup.seed)?);
    report.extend(resolvent_identity_assertions(config, setup.cells, setup.seed)?);
    let traj = simulate_direct(model, x0)?;
    report.extend(trajectory_assertions(model, &traj, &setup.constants)?);
    report.extend(random_run_assertions(model, x0.l1_norm(&model.grid), setup.seed)?);
    report.extend(picard_assertions(model, x0, &setup.scenario.picard)?);
    report.extend(lipschitz_assertions(model, setup.seed)?);
    let (dep, _) = dependence_assertions(model, x0, setup.seed)?;
    report.extend(dep);
    let ladder = refinement_ladder(config, setup.cells, 2)?;
    let (agree, distances) = agreement_assertions(&ladder)?;
    report.extend(agree);
    report.attach("direct_picard_distances", &distances)?;
    report.attach("warnings", &validation.warnings)?;
    report.attach("reproduction_number", &validation.reproduction_number)?;

    let missing: Vec<&str> = COVERAGE_MANIFEST
        .iter()
        .copied()
        .filter(|claim| !report.assertions.iter().any(|a| a.claim == *claim))
        .collect();
    report.push(Assertion::new(
        "coverage:manifest",
        "coverage",
        missing.len() as f64,
        Relation::AtMost,
        0.0,
        if missing.is_empty() {
            format!("all {} claims exercised", COVERAGE_MANIFEST.len())
        } else {
            format!("missing claims: {missing:?}")
        },
    ));
    finish(report, &setup)
}

pub fn resolvent_suite(config: &ScenarioConfig, opts: &SuiteOptions) -> Result<Report> {
    let setup = prepare(config, opts)?;
    let model = &setup.scenario.model;
    let mut report = Report::new("resolvent-check", setup.cells, setup.seed);
    report.extend(resolvent_bound_assertions(model, setup.seed)?);
    report.extend(resolvent_identity_assertions(config, setup.cells, setup.seed)?);
    report.attach("bound_lambdas", &resolvent_bound_lambdas(model))?;
    report.attach("threshold", &resolvent_threshold(&model.rates, &model.mortality))?;
    finish(report, &setup)
}

pub fn semigroup_suite(config: &ScenarioConfig, opts: &SuiteOptions) -> Result<Report> {
    let setup = prepare(config, opts)?;
    let model = &setup.scenario.model;
    let mut report = Report::new("semigroup-check", setup.cells, setup.seed);
    report.extend(semigroup_assertions(model, &setup.constants, setup.seed)?);
    report.extend(reaction_assertions(model, setup.seed));
    report.attach("times", &probe_times(model))?;
    finish(report, &setup)
}

pub fn equivalence_suite(config: &ScenarioConfig, opts: &SuiteOptions) -> Result<Report> {
    let setup = prepare(config, opts)?;
    let mut report = Report::new("equivalence-check", setup.cells, setup.seed);
    report.extend(picard_assertions(
        &setup.scenario.model,
        &setup.scenario.x0,
        &setup.scenario.picard,
    )?);
    finish(report, &setup)
}

pub fn convergence_suite(config: &ScenarioConfig, opts: &SuiteOptions) -> Result<Report> {
    let setup = prepare(config, opts)?;
    let mut report = Report::new("convergence", setup.cells, setup.seed);
    let ladder = refinement_ladder(config, setup.cells, 3)?;
    let (agree, distances) = agreement_assertions(&ladder)?;
    report.extend(agree);
    for (name, runs) in [("direct", &ladder.direct), ("picard", &ladder.picard)] {
        let errors = self_convergence(runs)?;
        report.push(Assertion::new(
            format!("convergence:{name}_against_finest"),
            "solver_agreement",
            observed_order(errors[0], errors[1]),
            Relation::AtLeast,
            MIN_ORDER,
            format!(
                "errors vs {} cells: {} ({} cells), {} ({} cells)",
                ladder.cells[2],
                sci(errors[0]),
                ladder.cells[0],
                sci(errors[1]),
                ladder.cells[1]
            ),
        ));
        report.attach(&format!("{name}_errors_against_finest"), &errors)?;
    }
    report.attach("cells", &ladder.cells)?;
    report.attach("direct_picard_distances", &distances)?;
    finish(report, &setup)
}

pub fn dependence_suite(config: &ScenarioConfig, opts: &SuiteOptions) -> Result<Report> {
    let setup = prepare(config, opts)?;
    let mut report = Report::new("depend", setup.cells, setup.seed);
    let (assertions, probe) = dependence_assertions(&setup.scenario.model, &setup.scenario.x0, setup.seed)?;
    report.extend(assertions);
    report.attach("probe", &probe)?;
    finish(report, &setup)
}

/// Direct trajectory with its positivity and truncation checks.
pub fn simulate(config: &ScenarioConfig, opts: &SuiteOptions) -> Result<(Trajectory, Report)> {
    let setup = prepare(config, opts)?;
    let model = &setup.scenario.model;
    let traj = simulate_direct(model, &setup.scenario.x0)?;
    let mut report = Report::new("simulate", setup.cells, setup.seed);
    report.extend(trajectory_assertions(model, &traj, &setup.constants)?);
    Ok((traj, finish(report, &setup)?))
}

/// Picard trajectory (unshifted formulation) and its iteration log.
pub fn picard(config: &ScenarioConfig, opts: &SuiteOptions) -> Result<(crate::solver::PicardOutcome, Report)> {
    let setup = prepare(config, opts)?;
    let model = &setup.scenario.model;
    let outcome = picard_solve(model, &setup.scenario.x0, &setup.scenario.picard)?;
    let mut report = Report::new("picard", setup.cells, setup.seed);
    report.extend(trajectory_assertions(model, &outcome.trajectory, &setup.constants)?);
    report.attach("deltas", &outcome.deltas)?;
    Ok((outcome, finish(report, &setup)?))
}

/// Iteration log CSV with columns `iteration, sup_delta`.
pub fn write_iteration_log<W: std::io::Write>(deltas: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "sup_delta"])?;
    for (k, d) in deltas.iter().enumerate() {
        w.write_record([(k + 1).to_string(), d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
