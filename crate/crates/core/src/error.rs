//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("{path}: row {row}, column {column:?}: {reason}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        reason: String,
    },

    #[error("{path}: row {row}: label must be 0 or 1, got {value:?}")]
    Label {
        path: PathBuf,
        row: usize,
        value: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Sink failure mid-generation; `rows_written` rows made it out before the abort.
    #[error("sink failed after {rows_written} rows: {source}")]
    Sink {
        rows_written: u64,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad file format: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}: truncated: expected {expected} bytes of row data, found {found}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("feature index {index} out of range (must be < {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),

    #[error("ensemble member references unknown dataset id {0:?}")]
    MissingDataset(String),

    #[error("model file error: {0}")]
    Model(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
