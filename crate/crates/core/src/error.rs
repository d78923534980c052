use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid point ({x}, {y}): must be finite with y > 0")]
    InvalidPoint { x: f64, y: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A documented precondition of the callee was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("infeasible configuration: expected {expected:.3e} points exceeds cap {cap:.3e}")]
    Infeasible { expected: f64, cap: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("runaway trajectory: more than {limit} events")]
    Runaway { limit: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
