use thiserror::Error;

/// Errors raised anywhere in the solve/verify pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("hypothesis violated ({condition}): {detail}")]
    HypothesisViolation { condition: String, detail: String },

    #[error("U = u/t = {value} exceeds the comparison cap {cap} at t = {t}")]
    DomainViolation { t: f64, value: f64, cap: f64 },

    #[error("tail integral unavailable: {0}")]
    TailUnavailable(String),

    #[error("non-finite integrand value {value} at t = {t}")]
    NonFinite { t: f64, value: f64 },

    #[error("exponent overflow in cumulative integral at t = {t}")]
    Overflow { t: f64 },

    #[error("profile too short: {0}")]
    ProfileTooShort(String),

    #[error("configuration error at `{path}`: {detail}")]
    Config { path: String, detail: String },

    #[error("{module}::{operation}: {source}")]
    Context {
        module: &'static str,
        operation: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn in_op(self, module: &'static str, operation: &'static str) -> Self {
        Error::Context {
            module,
            operation,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
