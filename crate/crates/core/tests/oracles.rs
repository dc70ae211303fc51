//! Cross-checks against independent discretizations: a dense upwind solve of
//! the resolvent equation and a brute-force renewal (Volterra) integration.

use agesirs::demography::solve_mckendrick;
use agesirs::linear::{boundary_matrix, resolvent_apply};
use agesirs::model::MortalityModel;
use agesirs::{AgeGrid, RateSet, StateField};
use nalgebra::{DMatrix, DVector};

const OMEGA: f64 = 1.0;

fn beta(a: f64) -> f64 {
    0.8 + 0.5 * (std::f64::consts::PI * a).sin()
}

fn mu_reg(a: f64) -> f64 {
    0.1 + 0.2 * a
}

/// `Π(a)` for `mu_reg` above and tail weight `theta`, in closed form.
fn survival(a: f64, theta: f64) -> f64 {
    (-(0.1 * a + 0.1 * a * a)).exp() * ((OMEGA - a) / OMEGA).powf(theta)
}

fn rates(grid: &AgeGrid) -> RateSet {
    let n = grid.len();
    RateSet::new(
        grid,
        grid.nodes().map(beta).collect(),
        grid.nodes().map(|a| 0.6 + 0.2 * a).collect(),
        vec![0.4; n],
        0.7,
        0.4,
    )
    .unwrap()
}

fn phi(grid: &AgeGrid) -> StateField {
    StateField::new(
        grid.nodes().map(|a| 1.0 + (3.0 * a).cos()).collect(),
        grid.nodes().map(|a| a * (1.0 - a) + 0.2).collect(),
        grid.nodes().map(|a| (2.0 * a).exp() * 0.1).collect(),
    )
    .unwrap()
}

/// Implicit upwind for `λψ + ψ' + μψ = φ`, `ψ(0) = ∫ B ψ`, assembled densely.
fn dense_resolvent(grid: &AgeGrid, rates: &RateSet, lambda: f64) -> StateField {
    let n = grid.len();
    let da = grid.step();
    let f = phi(grid);
    let mut m = DMatrix::<f64>::zeros(3 * n, 3 * n);
    let mut rhs = DVector::<f64>::zeros(3 * n);
    for c in 0..3 {
        m[(c, c)] = 1.0;
    }
    for j in 0..n {
        let b = boundary_matrix(rates, j);
        let w = if j == 0 || j == n - 1 { 0.5 * da } else { da };
        for r in 0..3 {
            for c in 0..3 {
                m[(r, 3 * j + c)] -= w * b[r][c];
            }
        }
    }
    for j in 1..n {
        let diag = 1.0 / da + lambda + mu_reg(grid.node(j));
        let fj = f.node(j);
        for c in 0..3 {
            m[(3 * j + c, 3 * j + c)] = diag;
            m[(3 * j + c, 3 * (j - 1) + c)] = -1.0 / da;
            rhs[3 * j + c] = fj[c];
        }
    }
    let x = m.lu().solve(&rhs).expect("nonsingular resolvent system");
    let pick = |c: usize| (0..n).map(|j| x[3 * j + c]).collect::<Vec<_>>();
    StateField::new(pick(0), pick(1), pick(2)).unwrap()
}

fn resolvent_gap(cells: usize, lambda: f64) -> f64 {
    let grid = AgeGrid::new(OMEGA, cells).unwrap();
    let rates = rates(&grid);
    let mort = MortalityModel::new(grid, grid.nodes().map(mu_reg).collect(), 0.0).unwrap();
    let closed = resolvent_apply(&phi(&grid), lambda, &rates, &mort).unwrap();
    let dense = dense_resolvent(&grid, &rates, lambda);
    closed.difference(&dense).l1_norm(&grid) / dense.l1_norm(&grid)
}

#[test]
fn resolvent_matches_dense_upwind_solve() {
    for lambda in [1.5, 3.0] {
        let coarse = resolvent_gap(50, lambda);
        let fine = resolvent_gap(100, lambda);
        assert!(coarse < 1e-2, "lambda {lambda}: relative gap {coarse}");
        // The upwind solve is first order, so the gap halves with the grid.
        let ratio = coarse / fine;
        assert!((1.7..2.3).contains(&ratio), "lambda {lambda}: ratio {ratio}");
    }
}

fn n0(a: f64) -> f64 {
    1.0 + 0.5 * a - 0.8 * a * a
}

/// Births from the Volterra equation on a grid with step `h`, trapezoid in age,
/// using the closed-form survival.
fn brute_force_births(h: f64, steps: usize, theta: f64) -> Vec<f64> {
    let cells = (OMEGA / h).round() as usize;
    let node = |j: usize| j as f64 * h;
    let mut b = vec![n0(0.0)];
    for k in 1..=steps {
        let t = node(k);
        let mut rhs = 0.0;
        for j in 1..=cells {
            let a = node(j);
            let w = if j == cells { 0.5 * h } else { h };
            let density = if j < k {
                b[k - j] * survival(a, theta)
            } else {
                let pa = survival(a, theta);
                let pb = survival(a - t, theta);
                if pb > 0.0 { n0(a - t) * pa / pb } else { 0.0 }
            };
            rhs += w * beta(a) * density;
        }
        b.push(rhs / (1.0 - 0.5 * h * beta(0.0)));
    }
    b
}

fn births_gap(cells: usize, theta: f64) -> f64 {
    let grid = AgeGrid::new(OMEGA, cells).unwrap();
    let mort = MortalityModel::new(grid, grid.nodes().map(mu_reg).collect(), theta).unwrap();
    let n0_nodes: Vec<f64> = grid.nodes().map(n0).collect();
    let history = solve_mckendrick(&n0_nodes, &rates(&grid), &mort, 1.0).unwrap();
    let oracle = brute_force_births(grid.step() / 2.0, 2 * cells, theta);
    history
        .births
        .b
        .iter()
        .enumerate()
        .map(|(m, b)| (b - oracle[2 * m]).abs() / oracle[2 * m])
        .fold(0.0, f64::max)
}

#[test]
fn births_match_brute_force_volterra_at_double_resolution() {
    for theta in [0.0, 2.0] {
        let coarse = births_gap(50, theta);
        let fine = births_gap(100, theta);
        assert!(coarse < 3e-3, "theta {theta}: relative gap {coarse}");
        assert!(fine < coarse / 1.7, "theta {theta}: {coarse} -> {fine}");
    }
}
