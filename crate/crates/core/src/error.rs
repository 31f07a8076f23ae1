use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("invalid level set: {0}")]
    InvalidLevels(String),
    #[error("record integrity: {0}")]
    Integrity(String),
    #[error("grid alignment: {0}")]
    Alignment(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("rejection sampler acceptance rate {rate:.2e} below 1e-3; use finer level spacing or the ensemble estimator")]
    RejectionInefficient { rate: f64 },
    #[error("hazard overflow guard: survival {0:e} below 1e-300")]
    Overflow(f64),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
