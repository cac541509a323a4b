use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the operation's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input from a user or a configuration file.
    #[error("usage error: {0}")]
    Usage(String),

    /// Two routes that must agree did not.
    #[error("internal inconsistency: {0}")]
    Inconsistency(String),

    /// A retry, iteration or size budget ran out.
    #[error("budget exhausted: {message}")]
    Budget { message: String, achieved: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn budget(message: impl Into<String>, achieved: usize) -> Self {
        Error::Budget {
            message: message.into(),
            achieved,
        }
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Usage(_) => 2,
            Error::Inconsistency(_) => 3,
            Error::Budget { .. } | Error::Quadrature(_) => 4,
            Error::Io(_) | Error::Json(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
