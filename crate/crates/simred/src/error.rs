use std::fmt;

/// Errors produced by the library.
#[derive(Debug)]
pub enum Error {
    /// Input violated a precondition (non-finite entries, dimension mismatch,
    /// malformed spec).
    InvalidInput(String),
    /// A numerical routine failed to converge or produced non-finite values.
    NumericalFailure(String),
    /// A brute-force oracle was asked for a problem above its size cap.
    SizeLimit { limit: usize, requested: usize },
    /// An internal invariant was violated; indicates a bug.
    InvariantViolation(String),
    /// An argument fell outside the mathematical domain of the operation.
    Domain(String),
    /// Configuration file could not be parsed or failed validation.
    Config(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::NumericalFailure(msg) => write!(f, "numerical failure: {msg}"),
            Error::SizeLimit { limit, requested } => {
                write!(f, "problem size {requested} exceeds brute-force limit {limit}")
            }
            Error::InvariantViolation(msg) => write!(f, "invariant violation: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
