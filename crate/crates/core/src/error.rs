use thiserror::Error;

use crate::exprparse::{EvalError, ParseError};

/// Errors produced anywhere in the toolkit.
///
/// Variants fall into three groups that the command-line front end maps onto
/// distinct exit codes: configuration problems, violated numerical
/// preconditions, and internal consistency failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("failed to parse expression for `{key}`: {source}")]
    Expression {
        key: String,
        #[source]
        source: ParseError,
    },

    #[error("coefficient evaluation failed at x = {x}: {source}")]
    Evaluation {
        x: f64,
        #[source]
        source: EvalError,
    },

    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("CFL violation: dt * lambda* = {product} exceeds 1 (dt = {dt}, lambda* = {lambda_star})")]
    Cfl {
        dt: f64,
        lambda_star: f64,
        product: f64,
    },

    #[error("uniformization rate {lambda} is below max(alpha + beta) = {lambda_star}")]
    RateTooSmall { lambda: f64, lambda_star: f64 },

    #[error("series needs {required} terms but the limit is {limit} (lambda*T = {lambda_t})")]
    SeriesTooLong {
        required: usize,
        limit: usize,
        lambda_t: f64,
    },

    #[error("numerical precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("internal assertion failed: {0}")]
    Internal(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 2 config, 3 numerical precondition, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Expression { .. } | Error::Domain(_) => 2,
            Error::Evaluation { .. }
            | Error::LengthMismatch { .. }
            | Error::Cfl { .. }
            | Error::RateTooSmall { .. }
            | Error::SeriesTooLong { .. }
            | Error::Precondition(_)
            | Error::Numerical(_) => 3,
            Error::Internal(_) | Error::Io { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}
