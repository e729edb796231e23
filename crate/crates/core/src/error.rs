use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value at node {node:?}")]
    NonFinite { node: Vec<usize> },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("frequency {freq} on axis {axis} outside table range [{lo}, {hi}]")]
    OutOfRange { axis: usize, freq: i64, lo: i64, hi: i64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cost guard: {0}")]
    CostGuard(String),

    #[error("model violation: {0}")]
    ModelViolation(String),

    #[error("unknown {kind} '{name}'; available: {available}")]
    Unknown {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
