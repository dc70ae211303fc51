//! Trajectories of the nonlinear system by direct stepping and by Picard
//! iteration on the mild-solution equation, plus the a-posteriori checks.

mod checks;
mod direct;
mod picard;

use std::io::Write;

use crate::error::Result;
use crate::grid::{AgeGrid, StateField};

pub use checks::{
    continuous_dependence_probe, gronwall_check, mass_consistency_check, positivity_check,
    truncation_inactive_check, DependenceReport, DependenceTrial, GronwallReport, MassReport,
    PositivityReport, TruncationReport,
};
pub use direct::simulate_direct;
pub use picard::{picard_solve, Formulation, InitialGuess, PicardOutcome, PicardSettings};

/// State fields at `t_m = m·dt`, `m = 0..=steps`, with `dt = da`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: AgeGrid,
    pub fields: Vec<StateField>,
}

impl Trajectory {
    pub fn dt(&self) -> f64 {
        self.grid.step()
    }

    pub fn steps(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt()
    }

    pub fn initial(&self) -> &StateField {
        &self.fields[0]
    }

    pub fn last(&self) -> &StateField {
        &self.fields[self.fields.len() - 1]
    }

    pub fn norms(&self) -> Vec<f64> {
        self.fields.iter().map(|f| f.l1_norm(&self.grid)).collect()
    }

    /// `sup_m ‖x(t_m)‖₁`.
    pub fn sup_norm(&self) -> f64 {
        self.norms().into_iter().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.fields.iter().map(StateField::min_value).fold(f64::INFINITY, f64::min)
    }

    /// `sup_m ‖x(t_m) - y(t_m)‖₁` for trajectories on the same grid.
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        self.fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.difference(b).l1_norm(&self.grid))
            .fold(0.0, f64::max)
    }

    /// Restriction of a trajectory on a grid `stride` times finer to the nodes
    /// and times of the coarse grid.
    pub fn coarsen(&self, stride: usize) -> Result<Trajectory> {
        let grid = AgeGrid::new(self.grid.omega(), self.grid.cells() / stride)?;
        if grid.cells() * stride != self.grid.cells() {
            return Err(crate::error::Error::structural(
                "trajectory",
                format!("{} cells cannot be coarsened by {stride}", self.grid.cells()),
            ));
        }
        Ok(Trajectory {
            grid,
            fields: self.fields.iter().step_by(stride).map(|f| f.every_nth(stride)).collect(),
        })
    }

    /// CSV with columns `t, a, s, i, r`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "a", "s", "i", "r"])?;
        for (m, f) in self.fields.iter().enumerate() {
            let t = self.time(m).to_string();
            for j in 0..f.len() {
                let [s, i, r] = f.node(j);
                w.write_record([
                    t.clone(),
                    self.grid.node(j).to_string(),
                    s.to_string(),
                    i.to_string(),
                    r.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
