//! Crate-wide error type with CLI exit-code classification.

use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Filesystem failure while reading or writing `path`.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// A data file violated its format contract.
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// An in-memory input violated an operation precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Configuration file missing, unparsable, or out of range.
    #[error("configuration error: {0}")]
    Config(String),

    /// Centered data has fewer independent directions than requested.
    #[error("rank deficiency: eigenvalue {value:.3e} of direction {index} below {min:.3e}")]
    RankDeficient { index: usize, value: f64, min: f64 },

    /// A numerical routine produced non-finite values or could not proceed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A condition that plan construction should have made impossible.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn malformed(
        path: impl Into<PathBuf>,
        line: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Malformed {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Malformed { .. } | Error::InvalidInput(_) => 3,
            Error::RankDeficient { .. } | Error::Numerical(_) | Error::Internal(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
