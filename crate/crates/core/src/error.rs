use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = OteError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum OteError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("label column has {found} distinct values, expected exactly 2")]
    LabelClasses { found: usize },
    #[error("positive label `{0}` does not occur in the label column")]
    UnknownPositiveLabel(String),
    #[error("missing value at row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },
    #[error("cannot parse `{value}` at row {row}, column `{column}` as a number")]
    BadNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("row has {found} features, tree expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("{0} is undefined for this input")]
    Undefined(&'static str),
    #[error("no tree has a non-empty assessment set")]
    NoAssessableTrees,
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("test rows leaked into training for repetition {repetition}")]
    Leakage { repetition: usize },
    #[error("malformed ensemble file at line {line}: {reason}")]
    Format { line: usize, reason: String },
}

impl OteError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        OteError::Io {
            path: path.into(),
            source,
        }
    }
}
