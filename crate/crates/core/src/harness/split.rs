use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::io::{read_table, Table};

/// Per-column z-score parameters fitted on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    /// Standard deviations; constant columns store 1.
    pub scale: Vec<f64>,
}

impl Standardization {
    pub fn fit(columns: Vec<String>, x: &DMatrix<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let s = var.sqrt();
            mean.push(m);
            scale.push(if s > 0.0 { s } else { 1.0 });
        }
        Standardization {
            columns,
            mean,
            scale,
        }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.mean[j]) / self.scale[j]
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSplit {
    pub train: Dataset,
    pub test: Dataset,
    /// Original (0-based data row) indices in shuffled order.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub standardization: Standardization,
}

/// Read a CSV with a header and split it into standardized train/test sets.
pub fn load_csv(
    path: &Path,
    label_column: &str,
    split_fraction: f64,
    seed: u64,
) -> Result<CsvSplit> {
    split_table(&read_table(path)?, label_column, split_fraction, seed)
}

/// Shuffle rows with the seed's stream, put the first `floor(fraction * N)` in the
/// training set, and z-score features using training statistics only.
pub fn split_table(
    table: &Table,
    label_column: &str,
    split_fraction: f64,
    seed: u64,
) -> Result<CsvSplit> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction must lie in (0, 1), got {split_fraction}"
        )));
    }
    let label = table
        .column_index(label_column)
        .ok_or_else(|| Error::MissingLabel(label_column.to_string()))?;
    let total = table.rows.len();
    let n_train = (split_fraction * total as f64).floor() as usize;
    if n_train == 0 || n_train == total {
        return Err(Error::InvalidData(format!(
            "split of {total} rows at {split_fraction} leaves an empty side"
        )));
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train_rows, test_rows) = order.split_at(n_train);

    let features: Vec<usize> = (0..table.headers.len()).filter(|&j| j != label).collect();
    let build = |rows: &[usize]| {
        let x = DMatrix::from_fn(rows.len(), features.len(), |i, j| {
            table.rows[rows[i]][features[j]]
        });
        let y: Vec<f64> = rows.iter().map(|&i| table.rows[i][label]).collect();
        (x, y)
    };
    let (x_train, y_train) = build(train_rows);
    let (x_test, y_test) = build(test_rows);
    let names = features.iter().map(|&j| table.headers[j].clone()).collect();
    let standardization = Standardization::fit(names, &x_train);
    Ok(CsvSplit {
        train: Dataset::new(standardization.apply(&x_train), y_train.into())?,
        test: Dataset::new(standardization.apply(&x_test), y_test.into())?,
        train_rows: train_rows.to_vec(),
        test_rows: test_rows.to_vec(),
        standardization,
    })
}
