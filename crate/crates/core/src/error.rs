use thiserror::Error;

/// Errors raised by the simulator, the optimizers and the codec.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("architecture mismatch: {0}")]
    Architecture(String),

    #[error("replay buffer holds {have} experiences, {need} required")]
    InsufficientBuffer { have: usize, need: usize },

    #[error("insufficient rank: {rank} of {needed}")]
    InsufficientRank { rank: usize, needed: usize },

    #[error("inconsistent payload lengths")]
    PayloadLength,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
