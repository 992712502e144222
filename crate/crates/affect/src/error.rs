use std::io;
use std::path::{Path, PathBuf};

/// Errors raised by the file formats and the command-line driver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] affect_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: corrupt file: {message}")]
    Integrity { path: PathBuf, message: String },
    #[error("gradient check failed: {0}")]
    GradCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn integrity(path: &Path, message: impl Into<String>) -> Self {
        Error::Integrity {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    /// 1 for usage and configuration problems, 3 for numeric failures, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config { .. } | Error::Core(affect_core::Error::Config(_)) => 1,
            Error::Core(affect_core::Error::NonFinite { .. }) | Error::GradCheck(_) => 3,
            _ => 2,
        }
    }
}
