//! Uniform age grid, piecewise-linear nodal profiles and the `(s, i, r)` state field.
//!
//! All integrals over age use the composite trapezoid rule on the grid nodes,
//! which is exact for the piecewise-linear data the model is built from.

use crate::error::{Error, Result};

/// Uniform discretization of `[0, omega]` into `cells` cells.
///
/// Time stepping always uses `dt = da`, so grid nodes travel exactly along
/// the characteristics of the aging operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeGrid {
    omega: f64,
    cells: usize,
    da: f64,
}

impl AgeGrid {
    pub fn new(omega: f64, cells: usize) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::Domain(format!("maximum age must be positive, got {omega}")));
        }
        if cells < 2 {
            return Err(Error::Domain(format!("grid needs at least 2 cells, got {cells}")));
        }
        Ok(Self {
            omega,
            cells,
            da: omega / cells as f64,
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Number of cells `J`.
    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Number of nodes, `J + 1`.
    pub fn len(&self) -> usize {
        self.cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell width, also the time step.
    pub fn step(&self) -> f64 {
        self.da
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.cells {
            self.omega
        } else {
            j as f64 * self.da
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|j| self.node(j))
    }

    /// Trapezoid weight of node `j`.
    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.cells {
            0.5 * self.da
        } else {
            self.da
        }
    }

    /// Composite trapezoid integral of nodal values over `[0, omega]`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let inner: f64 = values[1..self.cells].iter().sum();
        self.da * (inner + 0.5 * (values[0] + values[self.cells]))
    }

    /// Number of `dt = da` steps that make up `horizon`.
    ///
    /// The horizon must be a whole number of steps (relative slack `1e-9`).
    pub fn time_steps(&self, horizon: f64) -> Result<usize> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        let steps = (horizon / self.da).round();
        if steps < 1.0 || (steps * self.da - horizon).abs() > 1e-9 * horizon.max(1.0) {
            return Err(Error::Domain(format!(
                "horizon {horizon} is not a whole number of age steps (da = {})",
                self.da
            )));
        }
        Ok(steps as usize)
    }

    /// Piecewise-linear resampling of nodal values onto another grid of the same `omega`.
    pub fn resample(&self, values: &[f64], target: &AgeGrid) -> Vec<f64> {
        let profile = NodalProfile::new(values.to_vec(), self.omega);
        target.nodes().map(|a| profile.at(a)).collect()
    }
}

/// A continuous piecewise-linear function given by its values on uniform nodes of `[0, omega]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalProfile {
    values: Vec<f64>,
    spacing: f64,
}

impl NodalProfile {
    pub fn new(values: Vec<f64>, omega: f64) -> Self {
        assert!(values.len() >= 2, "a nodal profile needs at least two nodes");
        let spacing = omega / (values.len() - 1) as f64;
        Self { values, spacing }
    }

    pub fn constant(value: f64, grid: &AgeGrid) -> Self {
        Self::new(vec![value; grid.len()], grid.omega())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at age `a`, clamped to the end nodes outside `[0, omega]`.
    pub fn at(&self, a: f64) -> f64 {
        let last = self.values.len() - 1;
        let x = (a / self.spacing).max(0.0);
        let cell = (x.floor() as usize).min(last - 1);
        let frac = (x - cell as f64).clamp(0.0, 1.0);
        self.values[cell] * (1.0 - frac) + self.values[cell + 1] * frac
    }

    /// Essential infimum, which for a piecewise-linear table is its nodal minimum.
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Essential supremum (nodal maximum).
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The triple `(s, i, r)` of age densities on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
}

impl StateField {
    pub fn zeros(len: usize) -> Self {
        Self {
            s: vec![0.0; len],
            i: vec![0.0; len],
            r: vec![0.0; len],
        }
    }

    pub fn new(s: Vec<f64>, i: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        if s.len() != i.len() || s.len() != r.len() {
            return Err(Error::structural(
                "state",
                format!("component lengths differ: {} / {} / {}", s.len(), i.len(), r.len()),
            ));
        }
        Ok(Self { s, i, r })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn node(&self, j: usize) -> [f64; 3] {
        [self.s[j], self.i[j], self.r[j]]
    }

    pub fn set_node(&mut self, j: usize, v: [f64; 3]) {
        self.s[j] = v[0];
        self.i[j] = v[1];
        self.r[j] = v[2];
    }

    pub fn components(&self) -> [&[f64]; 3] {
        [&self.s, &self.i, &self.r]
    }

    /// Total density `n = s + i + r` at each node.
    pub fn total(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.s[j] + self.i[j] + self.r[j]).collect()
    }

    pub fn l1_norm(&self, grid: &AgeGrid) -> f64 {
        l1_norm(self, grid)
    }

    /// Smallest nodal value over the three components.
    pub fn min_value(&self) -> f64 {
        self.components()
            .iter()
            .flat_map(|c| c.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// Membership in the cone of nonnegative fields.
    pub fn is_nonnegative(&self) -> bool {
        self.min_value() >= 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &StateField) {
        for (dst, src) in [
            (&mut self.s, &other.s),
            (&mut self.i, &other.i),
            (&mut self.r, &other.r),
        ] {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += alpha * s);
        }
    }

    pub fn scaled(&self, alpha: f64) -> StateField {
        let mul = |v: &[f64]| v.iter().map(|x| alpha * x).collect();
        StateField {
            s: mul(&self.s),
            i: mul(&self.i),
            r: mul(&self.r),
        }
    }

    pub fn difference(&self, other: &StateField) -> StateField {
        let mut out = self.clone();
        out.add_scaled(-1.0, other);
        out
    }

    /// Sub-sample every `stride`-th node (used to compare a fine grid with a coarse one).
    pub fn every_nth(&self, stride: usize) -> StateField {
        let pick = |v: &[f64]| v.iter().step_by(stride).copied().collect();
        StateField {
            s: pick(&self.s),
            i: pick(&self.i),
            r: pick(&self.r),
        }
    }
}

/// Trapezoid L¹ norm of `|s| + |i| + |r|`.
pub fn l1_norm(field: &StateField, grid: &AgeGrid) -> f64 {
    (0..grid.len())
        .map(|j| grid.weight(j) * (field.s[j].abs() + field.i[j].abs() + field.r[j].abs()))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_has_zero_norm() {
        let grid = AgeGrid::new(1.0, 10).unwrap();
        assert_eq!(l1_norm(&StateField::zeros(grid.len()), &grid), 0.0);
    }

    #[test]
    fn constant_susceptibles_integrate_to_omega() {
        let grid = AgeGrid::new(2.0, 16).unwrap();
        let mut f = StateField::zeros(grid.len());
        f.s.iter_mut().for_each(|v| *v = 1.0);
        assert!((l1_norm(&f, &grid) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn linear_integrand_is_exact() {
        let grid = AgeGrid::new(1.0, 10).unwrap();
        let mut f = StateField::zeros(grid.len());
        f.s = grid.nodes().collect();
        assert!((l1_norm(&f, &grid) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn horizon_must_align_with_steps() {
        let grid = AgeGrid::new(1.0, 10).unwrap();
        assert_eq!(grid.time_steps(0.5).unwrap(), 5);
        assert!(grid.time_steps(0.55).is_err());
        assert!(grid.time_steps(-1.0).is_err());
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(AgeGrid::new(0.0, 10).is_err());
        assert!(AgeGrid::new(1.0, 1).is_err());
    }

    #[test]
    fn profile_interpolates_linearly() {
        let p = NodalProfile::new(vec![0.0, 2.0, 0.0], 2.0);
        assert_eq!(p.at(0.5), 1.0);
        assert_eq!(p.at(1.5), 1.0);
        assert_eq!(p.at(2.0), 0.0);
        assert_eq!(p.max(), 2.0);
    }

    #[test]
    fn resampling_preserves_piecewise_linear_data() {
        let coarse = AgeGrid::new(1.0, 4).unwrap();
        let fine = AgeGrid::new(1.0, 8).unwrap();
        let v = vec![0.0, 1.0, 3.0, 2.0, 2.0];
        let w = coarse.resample(&v, &fine);
        assert_eq!(w.len(), 9);
        assert_eq!(w[2], 1.0);
        assert_eq!(w[3], 2.0);
        assert!((fine.integrate(&w) - coarse.integrate(&v)).abs() < 1e-15);
    }
}
