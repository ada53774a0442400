use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error at row {row}, column {column:?}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("descriptor mismatch for {name:?}: expected {expected}, found {found}")]
    DescriptorMismatch {
        name: String,
        expected: String,
        found: String,
    },

    #[error("label column {0:?} not found in header")]
    MissingLabelColumn(String),

    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("labels must contain both classes: {0}")]
    SingleClass(String),

    #[error("parameter grid is empty")]
    EmptyGrid,

    #[error("weighted least-squares system is singular after regularization")]
    SingularSystem,

    #[error("unknown plot kind {0:?}")]
    UnknownPlotKind(String),

    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
}

pub type Result<T> = std::result::Result<T, Error>;
