use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed input: bad profile, out-of-range parameter, wrong lengths.
    #[error("validation error: {0}")]
    Validation(String),

    /// The exhaustive matching oracle refuses instances above its size guard.
    #[error("oracle too large: {what} = {size} exceeds the limit of {limit}")]
    OracleTooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    /// An online algorithm produced an illegal decision.
    #[error("invalid online decision at arrival {arrival}: {reason}")]
    InvalidDecision { arrival: usize, reason: String },

    /// A hard per-trial invariant did not hold.
    #[error("invariant violated (seed {seed}): {what}")]
    Invariant { seed: u64, what: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Validation(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
