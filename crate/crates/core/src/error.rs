use alloc::string::String;
use core::fmt;

use crate::assignment::BoundViolation;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Malformed arguments: non-finite data, dimension mismatch, out-of-range parameters.
    InvalidInput(String),
    /// The per-record count bounds admit no total assignment.
    InfeasibleBounds(BoundViolation),
    /// Exhaustive search space exceeds the configured limit.
    TooLarge { size: u128, limit: u128 },
    /// Model selection was handed an empty candidate list.
    NoCandidates,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::InfeasibleBounds(v) => write!(f, "infeasible bounds: {v}"),
            Error::TooLarge { size, limit } => {
                write!(f, "search space of {size} maps exceeds limit {limit}")
            }
            Error::NoCandidates => write!(f, "no candidate models to select from"),
        }
    }
}

impl core::error::Error for Error {}
