use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    fit_ntk, fit_path_norm, fit_slope, gen_synthetic, split_table, DataSource, ExperimentConfig,
    FitOptions, Method,
};
use crate::arrangement::EnumerationMode;
use crate::convex_solver::SolverStatus;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::io::read_table;
use crate::network::{mse, truncate};
use crate::stats::median;

pub const CSV_HEADER: &str = "n,seed,method,train_mse,test_mse,path_norm,width,iters,duality_gap,wall_ms";

/// One `(n, seed, method)` cell. Failed cells carry `error` and no metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub n: usize,
    pub seed: u64,
    pub method: Method,
    pub train_mse: Option<f64>,
    pub test_mse: Option<f64>,
    pub path_norm: Option<f64>,
    pub width: Option<usize>,
    pub iters: Option<usize>,
    pub duality_gap: Option<f64>,
    pub wall_ms: f64,
    pub status: Option<SolverStatus>,
    pub pattern_mode: Option<EnumerationMode>,
    pub num_patterns: Option<usize>,
    pub nonzero_parameters: Option<usize>,
    pub convex_objective: Option<f64>,
    pub test_size: usize,
    pub error: Option<String>,
}

impl SweepRecord {
    fn empty(n: usize, seed: u64, method: Method, test_size: usize) -> Self {
        SweepRecord {
            n,
            seed,
            method,
            train_mse: None,
            test_mse: None,
            path_norm: None,
            width: None,
            iters: None,
            duality_gap: None,
            wall_ms: 0.0,
            status: None,
            pattern_mode: None,
            num_patterns: None,
            nonzero_parameters: None,
            convex_objective: None,
            test_size,
            error: None,
        }
    }

    fn failed(n: usize, seed: u64, method: Method, err: &Error) -> Self {
        let mut r = SweepRecord::empty(n, seed, method, 0);
        r.error = Some(err.to_string());
        r
    }

    pub fn is_failed(&self) -> bool {
        self.train_mse.is_none() || self.test_mse.is_none()
    }

    fn csv_line(&self) -> String {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(ToString::to_string).unwrap_or_default()
        }
        let mse = |v: &Option<f64>| v.map_or_else(|| "failed".to_string(), |m| m.to_string());
        format!(
            "{},{},{},{},{},{},{},{},{},{:.3}",
            self.n,
            self.seed,
            self.method,
            mse(&self.train_mse),
            mse(&self.test_mse),
            opt(&self.path_norm),
            opt(&self.width),
            opt(&self.iters),
            opt(&self.duality_gap),
            self.wall_ms
        )
    }
}

struct Pool {
    train: Dataset,
    test: Dataset,
}

fn build_pools(config: &ExperimentConfig) -> Result<Vec<(u64, Result<Pool>)>> {
    let max_n = *config.source.n_grid().last().unwrap_or(&0);
    let mut seeds = config.source.seed_list().to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    match &config.source {
        DataSource::Synthetic { d, .. } => Ok(seeds
            .into_iter()
            .map(|seed| {
                let pool = gen_synthetic(max_n + config.test_size(), *d, seed).map(|s| {
                    let rows: Vec<usize> = (max_n..s.data.n()).collect();
                    Pool {
                        train: s.data.head(max_n),
                        test: s.data.select_rows(&rows),
                    }
                });
                (seed, pool)
            })
            .collect()),
        DataSource::Csv {
            path,
            label_column,
            split_fraction,
            ..
        } => {
            let table = read_table(path)?;
            Ok(seeds
                .into_iter()
                .map(|seed| {
                    let pool = split_table(&table, label_column, *split_fraction, seed).map(|s| {
                        Pool {
                            train: s.train,
                            test: s.test,
                        }
                    });
                    (seed, pool)
                })
                .collect())
        }
    }
}

fn score(pred: &nalgebra::DVector<f64>, y: &nalgebra::DVector<f64>, bound: Option<f64>) -> Result<f64> {
    match bound {
        Some(b) => mse(&truncate(pred, b)?, y),
        None => mse(pred, y),
    }
}

fn run_cell(
    config: &ExperimentConfig,
    pool: &Pool,
    n: usize,
    seed: u64,
    method: Method,
) -> Result<SweepRecord> {
    if n > pool.train.n() {
        return Err(Error::InvalidData(format!(
            "n = {n} exceeds the training pool of {} rows",
            pool.train.n()
        )));
    }
    let train = pool.train.head(n);
    let mut record = SweepRecord::empty(n, seed, method, pool.test.n());
    let start = Instant::now();
    match method {
        Method::Pathnorm => {
            let options = FitOptions {
                lambda: config.lambda,
                lambda_tilde: config.lambda_tilde,
                pattern_mode: config.pattern_mode,
                pattern_budget: config.pattern_budget,
                seed,
                solver: config.solver.clone(),
            };
            let fit = fit_path_norm(&train, &options)?;
            let train_pred = fit.net.forward(train.x())?;
            let test_pred = fit.net.forward(pool.test.x())?;
            record.train_mse = Some(score(&train_pred, train.y(), config.truncation)?);
            record.test_mse = Some(score(&test_pred, pool.test.y(), config.truncation)?);
            record.path_norm = Some(fit.net.path_norm().path_norm);
            record.width = Some(fit.net.width());
            record.iters = Some(fit.diagnostics.iterations);
            record.duality_gap = Some(fit.duality_gap());
            record.status = Some(fit.diagnostics.status);
            record.pattern_mode = Some(fit.patterns.mode);
            record.num_patterns = Some(fit.patterns.len());
            record.nonzero_parameters = Some(fit.net.nonzero_parameters());
            record.convex_objective = Some(fit.convex_objective);
        }
        Method::Ntk => {
            let (train_pred, test_pred) = fit_ntk(&train, &pool.test, config.lambda)?;
            record.train_mse = Some(score(&train_pred, train.y(), config.truncation)?);
            record.test_mse = Some(score(&test_pred, pool.test.y(), config.truncation)?);
        }
    }
    if config.timing {
        record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    }
    Ok(record)
}

/// Run every `(n, seed, method)` cell. Cells that fail are kept as failed records.
/// Output is ordered by `(n, seed, method)` and also written to `config.output` if set.
pub fn rate_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let pools = build_pools(config)?;
    let mut methods = config.methods.clone();
    methods.sort_unstable();
    methods.dedup();
    let mut records = Vec::new();
    for &n in config.source.n_grid() {
        for (seed, pool) in &pools {
            for &method in &methods {
                let record = match pool {
                    Ok(pool) => run_cell(config, pool, n, *seed, method)
                        .unwrap_or_else(|e| SweepRecord::failed(n, *seed, method, &e)),
                    Err(e) => SweepRecord::failed(n, *seed, method, e),
                };
                records.push(record);
            }
        }
    }
    if let Some(path) = &config.output {
        write_sweep_csv(path, &records)?;
    }
    Ok(records)
}

pub fn format_sweep_csv(records: &[SweepRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

pub fn write_sweep_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    std::fs::write(path, format_sweep_csv(records))?;
    Ok(())
}

/// Read the fixed CSV columns back. Columns outside the schema are left empty.
pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Config(format!(
            "unexpected sweep header `{}`",
            header.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let bad = |col: usize| Error::Parse {
            path: path.to_path_buf(),
            row: line,
            column: header[col].clone(),
            message: format!("cannot parse `{}`", &row[col]),
        };
        let num = |col: usize| -> Result<Option<f64>> {
            match &row[col] {
                "" | "failed" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(col)),
            }
        };
        let int = |col: usize| -> Result<Option<usize>> {
            match &row[col] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(col)),
            }
        };
        let mut record = SweepRecord::empty(
            row[0].parse().map_err(|_| bad(0))?,
            row[1].parse().map_err(|_| bad(1))?,
            row[2].parse().map_err(|_| bad(2))?,
            0,
        );
        record.train_mse = num(3)?;
        record.test_mse = num(4)?;
        record.path_norm = num(5)?;
        record.width = int(6)?;
        record.iters = int(7)?;
        record.duality_gap = num(8)?;
        record.wall_ms = num(9)?.unwrap_or(0.0);
        out.push(record);
    }
    Ok(out)
}

/// Median test MSE per `n` over successful records of one method.
pub fn median_by_n(records: &[SweepRecord], method: Method) -> Vec<(usize, f64)> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.method == method) {
        if let Some(m) = r.test_mse {
            groups.entry(r.n).or_default().push(m);
        }
    }
    groups.into_iter().map(|(n, v)| (n, median(&v))).collect()
}

/// Slope of the per-`n` median test MSE for each method present in `records`.
pub fn slopes_by_method(records: &[SweepRecord]) -> Vec<(Method, Result<f64>)> {
    let mut methods: Vec<Method> = records.iter().map(|r| r.method).collect();
    methods.sort_unstable();
    methods.dedup();
    methods
        .into_iter()
        .map(|m| {
            let (ns, mses): (Vec<usize>, Vec<f64>) = median_by_n(records, m).into_iter().unzip();
            (m, fit_slope(&ns, &mses))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweep_bookkeeping_and_csv_round_trip() {
        let mut config = ExperimentConfig::synthetic(vec![10, 20], 3, vec![0]);
        config.timing = false;
        let records = rate_sweep(&config).unwrap();
        assert_eq!(records.len(), 4);
        let keys: Vec<(usize, Method)> = records.iter().map(|r| (r.n, r.method)).collect();
        assert_eq!(
            keys,
            vec![
                (10, Method::Pathnorm),
                (10, Method::Ntk),
                (20, Method::Pathnorm),
                (20, Method::Ntk)
            ]
        );
        for r in &records {
            assert!(r.train_mse.unwrap().is_finite() && r.test_mse.unwrap().is_finite());
            assert_eq!(r.test_size, 20);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        write_sweep_csv(&path, &records).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        let back = read_sweep_csv(&path).unwrap();
        assert_eq!(back.len(), 4);
        assert_eq!(back[0].train_mse, records[0].train_mse);
        assert_eq!(back[1].path_norm, None);
    }

    #[test]
    fn oversized_n_yields_failed_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.csv");
        std::fs::write(&path, "a,b,target\n1,2,0\n2,1,1\n0.5,3,0\n4,1,1\n3,3,0\n").unwrap();
        let mut config = ExperimentConfig::synthetic(vec![2, 50], 2, vec![0]);
        config.source = DataSource::Csv {
            path: path.clone(),
            label_column: "target".into(),
            split_fraction: 0.8,
            n_grid: vec![2, 50],
            seed_list: vec![0],
        };
        config.methods = vec![Method::Ntk];
        config.timing = false;
        let records = rate_sweep(&config).unwrap();
        assert!(!records[0].is_failed());
        assert!(records[1].is_failed());
        let out = dir.path().join("out.csv");
        write_sweep_csv(&out, &records).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.lines().nth(2).unwrap().starts_with("50,0,ntk,failed,failed,"));
    }
}
