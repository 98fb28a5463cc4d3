//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("time {t} outside schedule domain [{lo}, {hi}]")]
    ScheduleDomain { t: f64, lo: f64, hi: f64 },

    #[error("hardware limit exceeded: {0}")]
    HardwareLimit(String),

    #[error("coherence budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("degenerate correlation spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("system too large: {n_sites} sites exceeds limit {limit}")]
    SizeLimit { n_sites: usize, limit: usize },

    #[error("too few samples: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
