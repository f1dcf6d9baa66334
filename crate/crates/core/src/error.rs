use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RwmError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("quadrature did not reach tolerance {tolerance:e}; best estimate {estimate} (error ~{error:e})")]
    Convergence {
        estimate: f64,
        error: f64,
        tolerance: f64,
    },
    #[error("covariance factorization failed after jitter {jitter:e}")]
    Conditioning { jitter: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for RwmError {
    fn from(e: std::io::Error) -> Self {
        RwmError::Io(e.to_string())
    }
}

impl From<csv::Error> for RwmError {
    fn from(e: csv::Error) -> Self {
        RwmError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for RwmError {
    fn from(e: serde_json::Error) -> Self {
        RwmError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, RwmError>;
