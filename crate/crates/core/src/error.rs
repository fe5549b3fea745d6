use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("zero-norm {what} row {row}")]
    ZeroNorm { what: &'static str, row: usize },

    #[error("no relevant source classes above similarity threshold {threshold}")]
    NoRelevantSourceClasses { threshold: f64 },

    #[error("marginal sums differ: {row_sum} vs {col_sum}")]
    MarginalMismatch { row_sum: f64, col_sum: f64 },

    #[error("negative marginal entry {0}")]
    NegativeMarginal(f64),

    #[error("sinkhorn did not converge after {iterations} iterations (marginal residual {residual:e})")]
    SinkhornNotConverged { iterations: usize, residual: f64 },

    #[error("transport simplex exceeded {0} pivots")]
    PivotLimit(usize),

    #[error("mass fraction {0} outside (0, 1]")]
    MassFraction(f64),

    #[error("source gap row {0} is missing but carries transport weight")]
    MissingGapRow(usize),

    #[error("normal equations are rank deficient; use a positive ridge coefficient")]
    RankDeficient,

    #[error("NaN value in {0}")]
    NaN(&'static str),

    #[error("missing assets: {}", .0.join(", "))]
    MissingAssets(Vec<String>),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
