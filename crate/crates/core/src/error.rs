use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("ring parameter mismatch")]
    ParamMismatch,
    #[error("representation mismatch: expected {expected}, found {found}")]
    FormMismatch { expected: &'static str, found: &'static str },
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("level mismatch: {0} vs {1}")]
    LevelMismatch(usize, usize),
    #[error("ciphertext has {found} parts, expected {expected}")]
    WrongDegree { expected: usize, found: usize },
    #[error("no remaining modulus level to drop")]
    NoRemainingLevels,
    #[error("missing relinearization key")]
    MissingRelinKey,
    #[error("insufficient noise headroom: bound {bound} exceeds limit {limit}")]
    InsufficientHeadroom { bound: String, limit: String },
    #[error("field too small: {0}")]
    FieldTooSmall(String),
    #[error("scheduler overflow: {0}")]
    SchedulerOverflow(String),
    #[error("malformed circuit: {0}")]
    MalformedCircuit(String),
    #[error("trace does not match circuit: {0}")]
    TraceMismatch(String),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("encoding budget exceeded: {used} of {max}")]
    BudgetExceeded { used: usize, max: usize },
    #[error("malformed input: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
