use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("exact enumeration needs up to {required} regions but the budget is {budget}")]
    BudgetExceeded { required: f64, budget: usize },

    #[error("row {row} of the data matrix is all zeros")]
    DegenerateRow { row: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("pattern set is empty")]
    EmptyPatternSet,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("linear system stayed singular after jitter up to {jitter:e}")]
    SingularSystem { jitter: f64 },

    #[error("epsilon grid must be strictly decreasing and inside (0, 1]")]
    Grid,

    #[error("{}: parse error at row {row}, column {column}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("label column `{0}` not found")]
    MissingLabel(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn mismatch(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { expected, found }
    }
}
