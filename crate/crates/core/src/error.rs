//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed caller input: out-of-range ids, mismatched lengths, bad values.
    #[error("invalid input: {0}")]
    Input(String),

    /// A configuration file or value is inconsistent (missing bias transform, empty reference group, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A file did not follow the expected CSV or key-value layout.
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    /// An instance is too large for an exact routine, or violates a construction's size bounds.
    #[error("size error: {0}")]
    Size(String),

    /// A structural precondition (disjointness, two-type structure, ...) does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A normalization is undefined (zero reference value).
    #[error("undefined normalized latent utility: {0}")]
    UndefinedNlu(String),

    /// Data-level failure, e.g. no user passes the activity filter.
    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end: 2 for input and
    /// format problems, 3 for size and precondition violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Size(_) | Error::Precondition(_) => 3,
            _ => 2,
        }
    }
}
