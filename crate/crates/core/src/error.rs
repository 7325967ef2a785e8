//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Cholesky factorization hit a non-positive pivot.
    #[error("matrix is not symmetric positive-definite: {0}")]
    NotSpd(String),

    /// Operand shapes do not conform.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input file violates the documented schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A single data row is malformed; `line` is 1-based and counts the header.
    #[error("row error at line {line}: {reason}")]
    Row { line: usize, reason: String },

    /// Invalid configuration value or combination.
    #[error("config error: {0}")]
    Config(String),

    /// Episode sampling preconditions not met.
    #[error("sampling error: {0}")]
    Sampling(String),

    /// Too few samples to compute rank statistics.
    #[error("degenerate episode: {0}")]
    DegenerateEpisode(String),

    /// Graph construction failure (isolated node with fallback disabled, bad k).
    #[error("graph error: {0}")]
    Graph(String),

    /// Non-finite value where the pipeline requires finite arithmetic.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// ROC/AUC undefined because only one class is present.
    #[error("undefined AUC: {0}")]
    UndefinedAuc(String),

    /// Model file rejected (bad version, missing tensor, shape mismatch).
    #[error("model file error: {0}")]
    ModelFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
