use thiserror::Error;

use crate::station::ProtocolError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("slot {slot}: {message}")]
    Simulation { slot: usize, message: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("state cap of {cap} exceeded while exploring n={n}")]
    StateCap { n: usize, cap: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
