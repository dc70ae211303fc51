//! TOML scenario files.
//!
//! ```toml
//! [grid]
//! omega = 1.0        # maximum age
//! cells = 100        # J; default 200
//! horizon = 1.0      # T, a whole number of steps
//!
//! [rates]            # each table: a number (constant) or J+1 nodal values
//! beta = 1.2
//! gamma = [ ... ]
//! delta = 0.9
//! p = 0.8
//! q = 0.6
//!
//! [mortality]
//! regular = 0.2      # table
//! theta = 1.0        # weight of the singular tail theta / (omega - a)
//!
//! [kernel]           # kind = "constant" (value) | "separable" (row, col) | "matrix" (values)
//! kind = "separable"
//! row = [ ... ]
//! col = [ ... ]
//!
//! [force]            # family = "identity" | "saturating" (sigma, amplitude, period) | "power" (exponent)
//! family = "identity"
//!
//! [initial]          # tables
//! s = [ ... ]
//! i = [ ... ]
//! r = 0.0
//!
//! [solver]           # all optional
//! tol = 1e-8
//! max_iter = 200
//! seed = 42
//! output = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::{AgeGrid, NodalProfile, StateField};
use crate::model::{ForceSpec, MixingKernel, Model, MortalityModel, RateSet};
use crate::solver::PicardSettings;

pub const DEFAULT_CELLS: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_SEED: u64 = 0;

/// A number (constant table) or nodal values.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Table {
    Constant(f64),
    Nodal(Vec<f64>),
}

impl Table {
    fn check(&self, field: &str, len: usize) -> Result<()> {
        match self {
            Table::Nodal(v) if v.len() != len => Err(Error::structural(
                field,
                format!("expected {len} nodal values (cells + 1), got {}", v.len()),
            )),
            _ => Ok(()),
        }
    }

    /// Nodal values on `target`, resampled piecewise-linearly from `base`.
    fn on(&self, base: &AgeGrid, target: &AgeGrid) -> Vec<f64> {
        match self {
            Table::Constant(c) => vec![*c; target.len()],
            Table::Nodal(v) => base.resample(v, target),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub omega: f64,
    #[serde(default = "default_cells")]
    pub cells: usize,
    pub horizon: f64,
}

fn default_cells() -> usize {
    DEFAULT_CELLS
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub beta: Table,
    pub gamma: Table,
    pub delta: Table,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MortalityConfig {
    pub regular: Table,
    #[serde(default)]
    pub theta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Constant { value: f64 },
    Separable { row: Table, col: Table },
    /// Row-major, row index = age of the infected-by individual.
    Matrix { values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForceConfig {
    Identity,
    Saturating {
        sigma: Table,
        #[serde(default)]
        amplitude: f64,
        #[serde(default = "default_period")]
        period: f64,
    },
    Power { exponent: f64 },
}

fn default_period() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub s: Table,
    pub i: Table,
    pub r: Table,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            seed: DEFAULT_SEED,
            output: None,
        }
    }
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridConfig,
    pub rates: RatesConfig,
    pub mortality: MortalityConfig,
    pub kernel: KernelConfig,
    #[serde(default = "default_force")]
    pub force: ForceConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_force() -> ForceConfig {
    ForceConfig::Identity
}

/// A scenario discretized on a concrete grid.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: Model,
    pub x0: StateField,
    pub picard: PicardSettings,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.check_shapes()?;
        Ok(config)
    }

    pub fn base_grid(&self) -> Result<AgeGrid> {
        AgeGrid::new(self.grid.omega, self.grid.cells)
    }

    fn check_shapes(&self) -> Result<()> {
        let len = self.grid.cells + 1;
        self.rates.beta.check("rates.beta", len)?;
        self.rates.gamma.check("rates.gamma", len)?;
        self.rates.delta.check("rates.delta", len)?;
        self.mortality.regular.check("mortality.regular", len)?;
        match &self.kernel {
            KernelConfig::Constant { .. } => {}
            KernelConfig::Separable { row, col } => {
                row.check("kernel.row", len)?;
                col.check("kernel.col", len)?;
            }
            KernelConfig::Matrix { values } => {
                if values.len() != len {
                    return Err(Error::structural(
                        "kernel.values",
                        format!("expected {len} rows, got {}", values.len()),
                    ));
                }
                if let Some((k, row)) = values.iter().enumerate().find(|(_, r)| r.len() != len) {
                    return Err(Error::structural(
                        "kernel.values",
                        format!("row {k} has {} entries, expected {len}", row.len()),
                    ));
                }
            }
        }
        if let ForceConfig::Saturating { sigma, .. } = &self.force {
            sigma.check("force.sigma", len)?;
        }
        self.initial.s.check("initial.s", len)?;
        self.initial.i.check("initial.i", len)?;
        self.initial.r.check("initial.r", len)?;
        Ok(())
    }

    /// Builds the model on `cells` cells (the file's own grid when `None`),
    /// resampling nodal tables piecewise-linearly.
    pub fn discretize(&self, cells: Option<usize>) -> Result<Scenario> {
        let base = self.base_grid()?;
        let grid = AgeGrid::new(self.grid.omega, cells.unwrap_or(self.grid.cells))?;
        let rates = RateSet::new(
            &grid,
            self.rates.beta.on(&base, &grid),
            self.rates.gamma.on(&base, &grid),
            self.rates.delta.on(&base, &grid),
            self.rates.p,
            self.rates.q,
        )?;
        let mortality = MortalityModel::new(grid, self.mortality.regular.on(&base, &grid), self.mortality.theta)?;
        let kernel = match &self.kernel {
            KernelConfig::Constant { value } => MixingKernel::constant(*value, &grid),
            KernelConfig::Separable { row, col } => {
                MixingKernel::separable(row.on(&base, &grid), col.on(&base, &grid))?
            }
            KernelConfig::Matrix { values } => MixingKernel::matrix(resample_matrix(values, &base, &grid))?,
        };
        let force = match &self.force {
            ForceConfig::Identity => ForceSpec::Identity,
            ForceConfig::Saturating {
                sigma,
                amplitude,
                period,
            } => ForceSpec::Saturating {
                sigma: NodalProfile::new(sigma.on(&base, &grid), grid.omega()),
                amplitude: *amplitude,
                period: *period,
            },
            ForceConfig::Power { exponent } => ForceSpec::Power { exponent: *exponent },
        };
        let model = Model::new(grid, self.grid.horizon, rates, mortality, kernel, force)?;
        let x0 = StateField::new(
            self.initial.s.on(&base, &grid),
            self.initial.i.on(&base, &grid),
            self.initial.r.on(&base, &grid),
        )?;
        if !x0.is_nonnegative() {
            return Err(Error::Domain("initial data must be nonnegative".into()));
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err(Error::Domain("solver needs tol > 0 and max_iter >= 1".into()));
        }
        Ok(Scenario {
            model,
            x0,
            picard: PicardSettings {
                tol: self.solver.tol,
                max_iter: self.solver.max_iter,
                ..PicardSettings::default()
            },
            seed: self.solver.seed,
        })
    }

    /// Structural checks, discretization on the file's grid, and the hypothesis checks.
    pub fn validate(&self) -> Result<Scenario> {
        let scenario = self.discretize(None)?;
        let report = scenario.model.validate()?;
        if let Some(bad) = report.failures().next() {
            return Err(Error::Hypothesis(format!("{}: {}", bad.name, bad.detail)));
        }
        Ok(scenario)
    }
}

/// Bilinear resampling of a square nodal table.
fn resample_matrix(values: &[Vec<f64>], base: &AgeGrid, target: &AgeGrid) -> Vec<Vec<f64>> {
    let rows: Vec<Vec<f64>> = values.iter().map(|row| base.resample(row, target)).collect();
    let n = target.len();
    let mut out = vec![vec![0.0; n]; n];
    for col in 0..n {
        let column: Vec<f64> = rows.iter().map(|r| r[col]).collect();
        for (row, v) in base.resample(&column, target).into_iter().enumerate() {
            out[row][col] = v;
        }
    }
    out
}

/// Reads and fully validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let config = ScenarioConfig::parse(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    config.validate()?;
    Ok(config)
}
