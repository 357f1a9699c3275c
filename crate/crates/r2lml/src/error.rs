//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by dataset handling, training and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path} at row {row}, column {col}: {message}")]
    Csv {
        path: String,
        /// 1-based data row (header excluded).
        row: usize,
        /// 1-based column.
        col: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("singular value decomposition failed: {0}")]
    SvdFailure(String),

    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),

    #[error("infeasible coefficients: {0}")]
    InfeasibleCoefficients(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("model file error: {0}")]
    ModelFile(String),

    #[error("unsupported model schema version {found:?} (expected {expected:?})")]
    SchemaVersion { found: String, expected: String },
}

pub type Result<T> = std::result::Result<T, Error>;
