use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated .bed file: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("variants missing from genotype matrix: {}", .0.join(","))]
    MissingVariants(Vec<String>),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("collinear design: column(s) {} linearly dependent on earlier columns", .0.join(","))]
    Collinear(Vec<String>),

    #[error("perfect separation in logistic regression: {0}")]
    Separation(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("empty cell: {0}")]
    EmptyCell(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable class name.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format(_) => "format",
            Error::Truncated { .. } => "truncated",
            Error::Integrity(_) => "integrity",
            Error::Validation(_) => "validation",
            Error::Degenerate(_) => "degenerate",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Config(_) => "config",
            Error::MissingVariants(_) => "missing-variant",
            Error::Numeric(_) => "numeric",
            Error::Collinear(_) => "collinear",
            Error::Separation(_) => "separation",
            Error::Schema(_) => "schema",
            Error::EmptyCell(_) => "empty-cell",
            Error::Json(_) => "json",
        }
    }
}
