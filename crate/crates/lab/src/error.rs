use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes shared by every subcommand.
pub mod exit {
    pub const OK: i32 = 0;
    pub const TEST_FAILED: i32 = 1;
    pub const NOT_VIOLATED: i32 = 2;
    pub const USAGE: i32 = 64;
    pub const DATA_FORMAT: i32 = 65;
    pub const IO: i32 = 74;
}

#[derive(Debug, Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: format error: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: integrity error: {message}")]
    Integrity { path: PathBuf, message: String },
    #[error("replay source {path} depleted after {consumed} bits")]
    Depleted { path: PathBuf, consumed: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Core(#[from] chshrng_core::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        LabError::Format { path: path.into(), message: message.into() }
    }

    pub fn integrity(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        LabError::Integrity { path: path.into(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        use chshrng_core::Error as E;
        match self {
            LabError::Config(_) => exit::USAGE,
            LabError::Format { .. } | LabError::Integrity { .. } | LabError::Depleted { .. } => exit::DATA_FORMAT,
            LabError::Io { .. } => exit::IO,
            LabError::Core(E::Length { .. } | E::InvalidBit(_) | E::Depleted { .. }) => exit::DATA_FORMAT,
            LabError::Core(_) => exit::USAGE,
        }
    }
}
