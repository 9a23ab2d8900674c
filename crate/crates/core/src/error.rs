use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the approximation pipelines and their file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("rejected input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("exhausted: {0}")]
    Exhausted(String),

    #[error("barycentric denominator vanishes at z = {0}")]
    PoleHit(Complex64),

    #[error("full-grid validation failed: residual {residual:e} exceeds {limit:e}")]
    FullGridValidation { residual: f64, limit: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
