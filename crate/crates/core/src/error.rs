use thiserror::Error;

/// Errors raised by the models, solvers and diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sample index {index} out of range for {n} samples")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("solver diverged at epoch {epoch}: objective {objective:e}")]
    Diverged { epoch: usize, objective: f64 },

    #[error("constraint root-finding did not converge after {iterations} iterations (residual {residual:e})")]
    RootFinding { iterations: usize, residual: f64 },

    #[error("no convergence certificate: {0}")]
    NoCertificate(String),

    #[error("missing parameter `{0}`")]
    MissingParameter(&'static str),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
