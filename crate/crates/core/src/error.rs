//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by parsing, validation, and numerical routines.
#[derive(Debug, Error)]
pub enum CodaError {
    /// A line of an input file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The parsed data violates a structural requirement (year gaps,
    /// non-contiguous ages, ragged tables).
    #[error("structural error: {0}")]
    Structure(String),

    /// An argument or value is outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CodaError {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        CodaError::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        CodaError::Domain(message.into())
    }

    pub fn structure(message: impl Into<String>) -> Self {
        CodaError::Structure(message.into())
    }
}

pub type Result<T> = std::result::Result<T, CodaError>;
