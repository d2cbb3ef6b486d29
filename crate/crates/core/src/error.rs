use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,

    #[error("{k} is not coprime to the cyclotomic order {n}")]
    NotCoprime { k: u64, n: u64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A resource cap was hit; the computation was abandoned rather than truncated.
    #[error("resource cap exceeded: {what} (cap {cap})")]
    Overflow { what: String, cap: u64 },

    /// A hypothesis of the underlying boundedness statement does not hold.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A rigorous enclosure was too wide to decide a comparison or to take a logarithm.
    #[error("insufficient precision: {0}")]
    Precision(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parse(column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line: 1,
            column,
            message: message.into(),
        }
    }

    pub fn overflow(what: impl Into<String>, cap: u64) -> Self {
        Error::Overflow {
            what: what.into(),
            cap,
        }
    }
}
