use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geodetic sample at index {index}: {reason}")]
    InvalidGeoSample { index: usize, reason: String },

    #[error("{path}: row {row}: {reason}")]
    CsvRow { path: PathBuf, row: usize, reason: String },

    #[error("{path}: {reason}")]
    CsvFormat { path: PathBuf, reason: String },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("timestamps must be strictly increasing (index {index})")]
    NonMonotoneTime { index: usize },

    #[error("kernel matrix is ill-conditioned even with jitter {jitter:e}")]
    IllConditionedKernel { jitter: f64 },

    #[error("no bank model yields a finite likelihood for this window")]
    BankSelection,

    #[error("kernel bank is empty")]
    EmptyBank,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("transmission rate {rate_hz} Hz does not divide the {source_hz} Hz sample grid")]
    InvalidRate { rate_hz: f64, source_hz: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
