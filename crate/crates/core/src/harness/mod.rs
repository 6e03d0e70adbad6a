//! End-to-end experiments: data generation, CSV ingestion, path-norm vs NTK rate
//! sweeps, and slope fitting.

mod split;
mod sweep;
mod synthetic;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::arrangement::{
    enumerate_patterns, exact_region_count, matrix_rank, EnumerationMode, PatternSet,
};
use crate::convex_solver::{assemble, solve, BlockSolution, ConvexProgram, SolverConfig, SolverDiagnostics};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{path_norm_objective, reconstruct, TwoLayerNet};
use crate::ntk::{gram, krr_fit, krr_predict};
use crate::stats::ols_slope;

pub use split::{load_csv, split_table, CsvSplit, Standardization};
pub use sweep::{
    format_sweep_csv, median_by_n, rate_sweep, read_sweep_csv, slopes_by_method, write_sweep_csv, SweepRecord,
    CSV_HEADER,
};
pub use synthetic::{gen_synthetic, SingleReluTarget, SyntheticData};

/// Held-out size used when `large_test` is set on a synthetic sweep.
pub const LARGE_TEST_SIZE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pathnorm,
    Ntk,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pathnorm => "pathnorm",
            Method::Ntk => "ntk",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pathnorm" => Ok(Method::Pathnorm),
            "ntk" => Ok(Method::Ntk),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// How activation patterns are produced for a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternPolicy {
    /// Exact when the generic region count fits in the budget and no row is zero,
    /// sampled otherwise.
    #[default]
    Auto,
    Exact,
    Sampled,
}

impl FromStr for PatternPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(PatternPolicy::Auto),
            "exact" => Ok(PatternPolicy::Exact),
            "sampled" => Ok(PatternPolicy::Sampled),
            other => Err(Error::Config(format!("unknown pattern policy `{other}`"))),
        }
    }
}

pub fn select_patterns(
    data: &Dataset,
    policy: PatternPolicy,
    budget: usize,
    seed: u64,
) -> Result<PatternSet> {
    let mode = match policy {
        PatternPolicy::Exact => EnumerationMode::Exact,
        PatternPolicy::Sampled => EnumerationMode::Sampled,
        PatternPolicy::Auto => {
            let count = exact_region_count(data.n(), matrix_rank(data.x()));
            if count <= budget as f64 && data.zero_rows().is_empty() {
                EnumerationMode::Exact
            } else {
                EnumerationMode::Sampled
            }
        }
    };
    enumerate_patterns(data, mode, budget, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic {
        n_grid: Vec<usize>,
        d: usize,
        seed_list: Vec<u64>,
    },
    Csv {
        path: PathBuf,
        #[serde(default = "default_label")]
        label_column: String,
        split_fraction: f64,
        n_grid: Vec<usize>,
        seed_list: Vec<u64>,
    },
}

fn default_label() -> String {
    "target".into()
}

impl DataSource {
    pub fn n_grid(&self) -> &[usize] {
        match self {
            DataSource::Synthetic { n_grid, .. } | DataSource::Csv { n_grid, .. } => n_grid,
        }
    }

    pub fn seed_list(&self) -> &[u64] {
        match self {
            DataSource::Synthetic { seed_list, .. } | DataSource::Csv { seed_list, .. } => {
                seed_list
            }
        }
    }
}

fn default_lambda() -> f64 {
    1e-8
}
fn default_lambda_tilde() -> f64 {
    1e-10
}
fn default_budget() -> usize {
    10_000
}
fn default_n_test() -> usize {
    20
}
fn default_methods() -> Vec<Method> {
    vec![Method::Pathnorm, Method::Ntk]
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    /// Weight on the path norm (and the kernel ridge weight for the NTK rows).
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_lambda_tilde")]
    pub lambda_tilde: f64,
    #[serde(default)]
    pub pattern_mode: PatternPolicy,
    #[serde(default = "default_budget")]
    pub pattern_budget: usize,
    /// Clamp predictions to `[-B, B]` before scoring.
    #[serde(default)]
    pub truncation: Option<f64>,
    /// Synthetic held-out size. CSV sources use their whole test split.
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    /// Replace `n_test` with [`LARGE_TEST_SIZE`] for synthetic sources.
    #[serde(default)]
    pub large_test: bool,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// When false `wall_ms` is written as 0 so reruns produce identical files.
    #[serde(default = "default_true")]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn synthetic(n_grid: Vec<usize>, d: usize, seed_list: Vec<u64>) -> Self {
        ExperimentConfig {
            source: DataSource::Synthetic {
                n_grid,
                d,
                seed_list,
            },
            lambda: default_lambda(),
            lambda_tilde: default_lambda_tilde(),
            pattern_mode: PatternPolicy::Auto,
            pattern_budget: default_budget(),
            truncation: None,
            n_test: default_n_test(),
            large_test: false,
            methods: default_methods(),
            solver: SolverConfig::default(),
            output: None,
            timing: true,
        }
    }

    /// Load from `.toml` or `.json` by extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            _ => toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.source.n_grid();
        if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("n_grid must be nonempty, positive and strictly increasing".into()));
        }
        if self.source.seed_list().is_empty() {
            return Err(Error::Config("seed_list must be nonempty".into()));
        }
        match &self.source {
            DataSource::Synthetic { d, .. } if *d == 0 => {
                return Err(Error::Config("d must be >= 1".into()))
            }
            DataSource::Csv { split_fraction, .. }
                if !(*split_fraction > 0.0 && *split_fraction < 1.0) =>
            {
                return Err(Error::Config("split_fraction must lie in (0, 1)".into()))
            }
            _ => {}
        }
        if !(self.lambda >= 0.0 && self.lambda_tilde >= 0.0) {
            return Err(Error::Config("lambda and lambda_tilde must be >= 0".into()));
        }
        if self.pattern_budget == 0 {
            return Err(Error::Config("pattern_budget must be >= 1".into()));
        }
        if let Some(b) = self.truncation {
            if b.is_nan() || b < 1.0 {
                return Err(Error::Config("truncation must be >= 1".into()));
            }
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must be nonempty".into()));
        }
        self.solver.validate()
    }

    pub fn test_size(&self) -> usize {
        if self.large_test {
            LARGE_TEST_SIZE
        } else {
            self.n_test
        }
    }
}

/// Settings for a single path-norm fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub lambda: f64,
    pub lambda_tilde: f64,
    pub pattern_mode: PatternPolicy,
    pub pattern_budget: usize,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            lambda: default_lambda(),
            lambda_tilde: default_lambda_tilde(),
            pattern_mode: PatternPolicy::Auto,
            pattern_budget: default_budget(),
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PathNormFit {
    pub patterns: PatternSet,
    pub program: ConvexProgram,
    pub solution: BlockSolution,
    pub diagnostics: SolverDiagnostics,
    pub net: TwoLayerNet,
    /// Convex objective without the ridge term.
    pub convex_objective: f64,
    pub network_objective: f64,
}

impl PathNormFit {
    pub fn duality_gap(&self) -> f64 {
        (self.convex_objective - self.network_objective).abs()
    }
}

/// Enumerate patterns, solve the convex program, and rebuild the network. Every block
/// with a nonzero weight becomes a neuron, so the reconstruction is exact.
pub fn fit_path_norm(train: &Dataset, options: &FitOptions) -> Result<PathNormFit> {
    let patterns = select_patterns(
        train,
        options.pattern_mode,
        options.pattern_budget,
        options.seed,
    )?;
    let program = assemble(train, &patterns, options.lambda, options.lambda_tilde)?;
    let (solution, diagnostics) = solve(&program, &options.solver)?;
    let net = reconstruct(&solution, &program, 0.0);
    let convex_objective = program.objective_without_ridge(&solution)?;
    let network_objective = path_norm_objective(&net, train, options.lambda)?;
    Ok(PathNormFit {
        patterns,
        program,
        solution,
        diagnostics,
        net,
        convex_objective,
        network_objective,
    })
}

/// Kernel ridge regression with the NTK; returns `(train predictions, test predictions)`.
pub fn fit_ntk(train: &Dataset, test: &Dataset, lambda: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    let mut kernel = gram(train.x());
    let alpha = krr_fit(&mut kernel, train.y(), lambda)?;
    let train_pred = krr_predict(&alpha, train.x(), train.x())?;
    let test_pred = krr_predict(&alpha, train.x(), test.x())?;
    Ok((train_pred, test_pred))
}

/// Least-squares slope of `log(mse)` against `log(n)`.
pub fn fit_slope(ns: &[usize], mses: &[f64]) -> Result<f64> {
    if ns.len() != mses.len() {
        return Err(Error::mismatch(ns.len(), mses.len()));
    }
    if ns.len() < 3 {
        return Err(Error::domain(format!("need at least 3 points, got {}", ns.len())));
    }
    if let Some(bad) = mses.iter().find(|&&m| !(m > 0.0 && m.is_finite())) {
        return Err(Error::domain(format!("mse values must be positive, got {bad}")));
    }
    if ns.contains(&0) || ns.iter().all(|&n| n == ns[0]) {
        return Err(Error::domain("n values must be positive and not all equal"));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = mses.iter().map(|m| m.ln()).collect();
    Ok(ols_slope(&xs, &ys))
}
