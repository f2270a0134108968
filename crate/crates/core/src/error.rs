use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("distribution must have at least one outcome")]
    EmptyDistribution,

    #[error("invalid weight at index {index}: {value}")]
    InvalidWeight { index: usize, value: f64 },

    #[error("weights sum to {0}, outside [1 - 1e-6, 1 + 1e-6]")]
    NotNormalized(f64),

    #[error("clamp epsilon {0} outside (0, 1e-6)")]
    InvalidEpsilon(f64),

    #[error("{what} = {value} is outside the domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("oracle supports d <= {max}, got {got}")]
    OracleDimension { got: usize, max: usize },

    #[error("squared amplitudes sum to {0}, expected 1")]
    AmplitudesNotNormalized(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("non-finite gradient at particle {0}")]
    NonFiniteGradient(usize),

    #[error("non-finite {0}")]
    NonFinite(&'static str),

    #[error("sinkhorn scaling became non-finite (reg = {0}); try a larger reg")]
    SinkhornUnderflow(f64),

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by numerics during a run rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteGradient(_) | Error::NonFinite(_) | Error::SinkhornUnderflow(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
