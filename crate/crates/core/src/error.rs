use thiserror::Error;

/// Errors raised anywhere in the emulation pipeline.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("value out of range for {format}: {context}")]
    Overflow { format: &'static str, context: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("moduli count {0} outside [2, 49]")]
    ModuliCount(usize),

    #[error("{a} and {p} are not coprime")]
    NotCoprime { a: String, p: u64 },

    #[error("bit count {0} must be in [1, 53]")]
    BitCount(i64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("inner dimension k = {0} exceeds 2^17")]
    InnerDimension(usize),

    #[error("row {0} of A is identically zero")]
    ZeroRow(usize),

    #[error("column {0} of B is identically zero")]
    ZeroColumn(usize),

    #[error("entry ({row}, {col}) is not an integer")]
    NonInteger { row: usize, col: usize },

    #[error("mode mismatch: expected {expected}, got {got}")]
    ModeMismatch { expected: String, got: String },

    #[error("exponent {0} does not fit a 16-bit signed integer")]
    ExponentRange(i64),

    #[error("quotient estimate at ({row}, {col}) sits exactly on a half-integer")]
    QuotientTie { row: usize, col: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
