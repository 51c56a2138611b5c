use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A request exceeded one of the configured resource caps.
    #[error("`{cap}` cap exceeded: requested {requested}, limit {limit}")]
    CapExceeded {
        cap: &'static str,
        limit: u64,
        requested: u64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serialization(String),
}

/// Coarse error categories; the CLI maps them onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Cap,
    Numeric,
    Io,
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::CapExceeded { .. } => ErrorCategory::Cap,
            Error::InvalidInput(_) => ErrorCategory::Usage,
            Error::NotConverged { .. } | Error::Numeric(_) => ErrorCategory::Numeric,
            Error::Io { .. } | Error::Serialization(_) => ErrorCategory::Io,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub(crate) fn check_cap(cap: &'static str, limit: u64, requested: u64) -> Result<()> {
    if requested > limit {
        Err(Error::CapExceeded {
            cap,
            limit,
            requested,
        })
    } else {
        Ok(())
    }
}
