use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("{file}: {message}")]
    Format { file: String, message: String },

    #[error("arity mismatch in {what}: expected {expected}, got {got}")]
    Arity {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("dataset rank {rank} is below the requested {requested} components")]
    RankDeficient { rank: usize, requested: usize },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("empty mask: no affordance match in this view")]
    EmptyMask,

    #[error("all camera views failed ({0})")]
    AllViewsFailed(String),

    #[error("{quantity} became non-finite at step {step}")]
    NumericalFault {
        quantity: &'static str,
        step: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(file: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            file: file.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
