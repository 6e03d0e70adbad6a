//! File formats: dataset CSVs, pattern JSON, solution JSON, model JSON.

use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::arrangement::{mask_from_str, mask_to_string, EnumerationMode, PatternSet};
use crate::convex_solver::{BlockSolution, ConvexProgram, Orientation, SolverConfig, SolverDiagnostics};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{ModelFile, TwoLayerNet};

/// A numeric CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Split into a dataset using `label` as the target column. Without a label the
    /// last column is the target.
    pub fn into_dataset(self, label: Option<&str>) -> Result<Dataset> {
        let label_idx = match label {
            Some(name) => self
                .column_index(name)
                .ok_or_else(|| Error::MissingLabel(name.to_string()))?,
            None => self
                .headers
                .len()
                .checked_sub(1)
                .ok_or_else(|| Error::MissingLabel("<last column>".into()))?,
        };
        let n = self.rows.len();
        let d = self.headers.len() - 1;
        let x = DMatrix::from_fn(n, d, |i, j| {
            let col = if j < label_idx { j } else { j + 1 };
            self.rows[i][col]
        });
        let y = DVector::from_iterator(n, self.rows.iter().map(|r| r[label_idx]));
        Dataset::new(x, y)
    }

    /// All columns as features, except `label` when present.
    pub fn features(&self, label: &str) -> DMatrix<f64> {
        let keep: Vec<usize> = (0..self.headers.len())
            .filter(|&j| self.headers[j] != label)
            .collect();
        DMatrix::from_fn(self.rows.len(), keep.len(), |i, j| self.rows[i][keep[j]])
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        // Header is line 1.
        let line = i + 2;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: line,
                column: format!("#{}", record.len()),
                message: format!("expected {} fields", headers.len()),
            });
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        row: line,
                        column: headers[j].clone(),
                        message: format!("`{cell}` is not a finite number"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { headers, rows })
}

/// Read a dataset CSV. The target is the `label` column, or the last column.
pub fn read_dataset_csv(path: &Path, label: Option<&str>) -> Result<Dataset> {
    read_table(path)?.into_dataset(label)
}

/// Write `x1..xd,y`.
pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=data.d()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    writer.write_record(&header)?;
    for i in 0..data.n() {
        let mut row: Vec<String> = data.x().row(i).iter().map(|v| v.to_string()).collect();
        row.push(data.y()[i].to_string());
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_column_csv(path: &Path, name: &str, values: &DVector<f64>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([name])?;
    for v in values.iter() {
        writer.write_record([v.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEntry {
    pub mask: String,
    pub witness: Vec<f64>,
    #[serde(default)]
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternFile {
    pub n: usize,
    pub d: usize,
    pub rank: usize,
    pub mode: EnumerationMode,
    pub budget: usize,
    pub seed: u64,
    #[serde(default)]
    pub degenerate_rows: Vec<usize>,
    pub patterns: Vec<PatternEntry>,
}

impl PatternFile {
    pub fn new(set: &PatternSet, d: usize) -> Self {
        PatternFile {
            n: set.patterns.first().map_or(0, |p| p.mask.len()),
            d,
            rank: set.rank,
            mode: set.mode,
            budget: set.sample_budget,
            seed: set.seed,
            degenerate_rows: set.degenerate_rows.clone(),
            patterns: set
                .patterns
                .iter()
                .map(|p| PatternEntry {
                    mask: p.mask_string(),
                    witness: p.witness.iter().copied().collect(),
                    degenerate: p.degenerate,
                })
                .collect(),
        }
    }

    pub fn masks(&self) -> Result<Vec<Vec<bool>>> {
        self.patterns.iter().map(|p| mask_from_str(&p.mask)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub mask: String,
    pub orientation: Orientation,
    pub u: Vec<f64>,
}

/// Solver output: per-block weights, diagnostics, and the resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub n: usize,
    pub d: usize,
    pub lambda: f64,
    pub lambda_tilde: f64,
    pub config: SolverConfig,
    pub diagnostics: SolverDiagnostics,
    pub blocks: Vec<BlockEntry>,
}

impl SolutionFile {
    pub fn new(
        program: &ConvexProgram,
        solution: &BlockSolution,
        config: &SolverConfig,
        diagnostics: &SolverDiagnostics,
    ) -> Self {
        SolutionFile {
            n: program.n(),
            d: program.d(),
            lambda: program.lambda,
            lambda_tilde: program.lambda_tilde,
            config: config.clone(),
            diagnostics: diagnostics.clone(),
            blocks: (0..program.num_blocks())
                .map(|b| BlockEntry {
                    mask: mask_to_string(program.block_mask(b)),
                    orientation: program.orientation(b),
                    u: solution.block(b).iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn solution(&self) -> Result<BlockSolution> {
        let blocks: Vec<DVector<f64>> = self
            .blocks
            .iter()
            .map(|b| DVector::from_vec(b.u.clone()))
            .collect();
        BlockSolution::from_blocks(&blocks)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path)?;
    serde_json::to_writer_pretty(file, value)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

pub fn read_model(path: &Path) -> Result<TwoLayerNet> {
    TwoLayerNet::try_from(read_json::<ModelFile>(path)?)
}

pub fn write_model(path: &Path, net: &TwoLayerNet) -> Result<()> {
    write_json(path, &ModelFile::from(net))
}
