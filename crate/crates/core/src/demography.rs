//! Total population `n = s + i + r` from the renewal equation, solved
//! independently of the compartmental march.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::AgeGrid;
use crate::model::{ModelConstants, MortalityModel, RateSet};

/// `Π(a)`; see [`MortalityModel::survival`].
pub fn survival(mortality: &MortalityModel, a: f64) -> Result<f64> {
    mortality.survival(a)
}

/// Newborn density `b(t_m) = n(0, t_m)` at every time node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BirthHistory {
    pub b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PopulationHistory {
    pub grid: AgeGrid,
    pub births: BirthHistory,
    /// `densities[m][j] = n(a_j, t_m)`.
    pub densities: Vec<Vec<f64>>,
}

impl PopulationHistory {
    pub fn dt(&self) -> f64 {
        self.grid.step()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.densities
            .iter()
            .map(|n| (0..self.grid.len()).map(|j| self.grid.weight(j) * n[j].abs()).sum())
            .collect()
    }

    /// CSV with columns `t, a, n`.
    pub fn write_density_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "a", "n"])?;
        for (m, n) in self.densities.iter().enumerate() {
            let t = (m as f64 * self.dt()).to_string();
            for (j, v) in n.iter().enumerate() {
                w.write_record([t.as_str(), &self.grid.node(j).to_string(), &v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with columns `t, b`.
    pub fn write_births_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "b"])?;
        for (m, b) in self.births.b.iter().enumerate() {
            w.write_record([(m as f64 * self.dt()).to_string(), b.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Marches the renewal equation
/// `b(t) = ∫₀^min(t,ω) β Π b(t-a) da + ∫_t^ω β(a) n0(a-t) Π(a)/Π(a-t) da`
/// with trapezoid weights; the implicit `a = 0` term is solved algebraically.
pub fn solve_mckendrick(
    n0: &[f64],
    rates: &RateSet,
    mortality: &MortalityModel,
    horizon: f64,
) -> Result<PopulationHistory> {
    let grid = *mortality.grid();
    let len = grid.len();
    if n0.len() != len {
        return Err(Error::structural(
            "n0",
            format!("expected {len} nodal values, got {}", n0.len()),
        ));
    }
    if let Some(v) = n0.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Domain(format!("initial population must be nonnegative, found {v}")));
    }
    let steps = grid.time_steps(horizon)?;
    let cells = grid.cells();

    let beta: Vec<f64> = (0..len).map(|j| rates.beta.node(j)).collect();
    let surv: Vec<f64> = (0..len).map(|j| mortality.survival_node(j)).collect();
    let diag = 1.0 - 0.5 * grid.step() * beta[0] * surv[0];
    if diag <= 0.0 {
        return Err(Error::Conditioning(format!(
            "renewal step unresolvable: 1 - da beta(0)/2 = {diag}"
        )));
    }

    let mut b = Vec::with_capacity(steps + 1);
    b.push(n0[0]);
    let mut densities = Vec::with_capacity(steps + 1);
    densities.push(n0.to_vec());
    for m in 1..=steps {
        let mut n = vec![0.0; len];
        for (j, nj) in n.iter_mut().enumerate().skip(1) {
            *nj = if j < m {
                b[m - j] * surv[j]
            } else {
                n0[j - m] * mortality.survival_ratio_nodes(j - m, j)
            };
        }
        let rhs: f64 = (1..=cells).map(|j| grid.weight(j) * beta[j] * n[j]).sum();
        let bm = rhs / diag;
        n[0] = bm;
        b.push(bm);
        densities.push(n);
    }
    Ok(PopulationHistory {
        grid,
        births: BirthHistory { b },
        densities,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PopulationBoundReport {
    /// `max_m ‖n(t_m)‖₁ / ‖n0‖₁`, defined as 0 for zero data.
    #[serde(serialize_with = "crate::report::number")]
    pub max_ratio: f64,
    #[serde(serialize_with = "crate::report::number")]
    pub bound: f64,
    #[serde(serialize_with = "crate::report::number")]
    pub margin: f64,
    pub passed: bool,
}

/// Checks `‖n(t)‖₁ ≤ M ‖n0‖₁` at every time node.
pub fn population_bound_check(history: &PopulationHistory, constants: &ModelConstants) -> PopulationBoundReport {
    let norms = history.norms();
    let initial = norms[0];
    let max_ratio = if initial == 0.0 {
        0.0
    } else {
        norms.iter().fold(0.0_f64, |acc, n| acc.max(n / initial))
    };
    PopulationBoundReport {
        max_ratio,
        bound: constants.m,
        margin: constants.m - max_ratio,
        passed: max_ratio <= constants.m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(beta: f64, mu: f64, theta: f64, cells: usize) -> (AgeGrid, RateSet, MortalityModel) {
        let g = AgeGrid::new(1.0, cells).unwrap();
        let n = g.len();
        let rates = RateSet::new(&g, vec![beta; n], vec![1.0; n], vec![1.0; n], 0.5, 0.5).unwrap();
        let mort = MortalityModel::new(g, vec![mu; n], theta).unwrap();
        (g, rates, mort)
    }

    #[test]
    fn zero_data_stays_zero() {
        let (g, rates, mort) = setup(1.0, 0.5, 1.0, 20);
        let h = solve_mckendrick(&vec![0.0; g.len()], &rates, &mort, 1.0).unwrap();
        assert!(h.births.b.iter().all(|b| *b == 0.0));
        assert!(h.densities.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn no_births_transports_exactly() {
        let (g, rates, mort) = setup(0.0, 0.7, 0.0, 20);
        let n0: Vec<f64> = g.nodes().map(|a| 1.0 + a * a).collect();
        let h = solve_mckendrick(&n0, &rates, &mort, 0.5).unwrap();
        for (m, n) in h.densities.iter().enumerate() {
            let t = m as f64 * g.step();
            for j in m..g.len() {
                let expected = n0[j - m] * (-0.7 * t).exp();
                assert!((n[j] - expected).abs() <= 1e-14 * expected.max(1.0));
            }
        }
        let norms = h.norms();
        assert!(norms.windows(2).all(|w| w[1] <= w[0]));
        assert!(h.births.b[1..].iter().all(|b| *b == 0.0));
    }

    #[test]
    fn negative_data_is_rejected() {
        let (g, rates, mort) = setup(1.0, 0.5, 1.0, 10);
        let mut n0 = vec![1.0; g.len()];
        n0[4] = -1e-3;
        assert!(matches!(
            solve_mckendrick(&n0, &rates, &mort, 0.5),
            Err(Error::Domain(_))
        ));
    }

    /// Closed-form births for constant β, μ, θ = 0, n0 ≡ 1, t ≤ ω:
    /// `b = βB + g` with `g = β(ω - t)e^{-μt}` and
    /// `B(t) = β e^{(β-μ)t} ∫₀^t (ω-s) e^{-βs} ds`.
    fn analytic_births(beta: f64, mu: f64, omega: f64, t: f64) -> f64 {
        let int = omega / beta * (1.0 - (-beta * t).exp())
            - ((1.0 - (-beta * t).exp() * (1.0 + beta * t)) / (beta * beta));
        let big_b = beta * ((beta - mu) * t).exp() * int;
        beta * big_b + beta * (omega - t) * (-mu * t).exp()
    }

    #[test]
    fn births_converge_to_closed_form() {
        let mut errors = Vec::new();
        for cells in [50, 100, 200] {
            let (g, rates, mort) = setup(1.3, 0.4, 0.0, cells);
            let h = solve_mckendrick(&vec![1.0; g.len()], &rates, &mort, 1.0).unwrap();
            let err = h
                .births
                .b
                .iter()
                .enumerate()
                .skip(1)
                .map(|(m, b)| (b - analytic_births(1.3, 0.4, 1.0, m as f64 * g.step())).abs())
                .fold(0.0_f64, f64::max);
            errors.push(err);
        }
        // The data jump between n0(0) and b(0) makes the march first order.
        assert!(errors[2] < 5e-3, "{errors:?}");
        assert!(errors[0] / errors[1] > 1.9 && errors[1] / errors[2] > 1.9, "{errors:?}");
    }

    #[test]
    fn population_bound_holds() {
        let (g, rates, mort) = setup(1.5, 0.3, 1.0, 40);
        let n0: Vec<f64> = g.nodes().map(|a| 2.0 - a).collect();
        let h = solve_mckendrick(&n0, &rates, &mort, 1.0).unwrap();
        let k = crate::model::MixingKernel::constant(1.0, &g);
        let c = crate::model::derive_constants(
            &rates,
            &mort,
            &k,
            &crate::model::ForceSpec::Identity,
            g.integrate(&n0),
            1.0,
        )
        .unwrap();
        let report = population_bound_check(&h, &c);
        assert!(report.passed && report.margin > 0.0);

        let zero = solve_mckendrick(&vec![0.0; g.len()], &rates, &mort, 1.0).unwrap();
        assert_eq!(population_bound_check(&zero, &c).max_ratio, 0.0);
    }

    #[test]
    fn csv_exports_have_headers_and_rows() {
        let (g, rates, mort) = setup(1.0, 0.5, 1.0, 4);
        let h = solve_mckendrick(&vec![1.0; g.len()], &rates, &mort, 0.5).unwrap();
        let mut buf = Vec::new();
        h.write_density_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,a,n\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 5);
        let mut buf = Vec::new();
        h.write_births_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
