use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid sizes, dimensions or hyperparameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed input file. `offset` is a byte offset for binary formats
    /// and a 1-based line number for text formats.
    #[error("parse error in {path} at {location}: {message}")]
    Parse {
        path: PathBuf,
        location: Location,
        message: String,
    },

    /// An operation was invoked on data that lacks what it needs
    /// (e.g. binarizing a dataset without targets).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    /// Non-finite values, divergence or solver failure.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Broken protocol invariant: leakage, mixed fingerprints, corrupt state.
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("leakage: {0}")]
    Leakage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Byte(u64),
    Line(usize),
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Location::Byte(b) => write!(f, "byte offset {b}"),
            Location::Line(l) => write!(f, "line {l}"),
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse_at_byte(path: impl Into<PathBuf>, offset: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            location: Location::Byte(offset),
            message: message.into(),
        }
    }

    pub fn parse_at_line(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            location: Location::Line(line),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end:
    /// 2 configuration, 3 data, 4 numeric, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) | Error::Shape { .. } => 2,
            Error::Parse { .. } | Error::Io { .. } | Error::Json(_) | Error::Csv(_) => 3,
            Error::Numeric(_) => 4,
            Error::Integrity(_) | Error::Leakage(_) => 1,
        }
    }
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn check_width(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape { expected, actual })
    }
}
