use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    /// Invalid configuration or input; exit code 2.
    #[error("{0}")]
    Validation(String),

    /// Failure while running; exit code 1.
    #[error("{0}")]
    Runtime(String),

    #[error(transparent)]
    Core(#[from] proxsvrg::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl BenchError {
    pub fn validation(msg: impl Into<String>) -> Self {
        BenchError::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        BenchError::Runtime(msg.into())
    }

    /// Process exit code: 2 for validation problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        use proxsvrg::Error as E;
        match self {
            BenchError::Validation(_) => 2,
            BenchError::Core(
                E::InvalidParameter(_)
                | E::InvalidDataset(_)
                | E::Configuration(_)
                | E::MissingParameter(_)
                | E::DimensionMismatch { .. }
                | E::Parse { .. },
            ) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
