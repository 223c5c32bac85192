use std::path::PathBuf;

use flowmap_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    /// Process exit status: 2 for usage/configuration problems, 1 for
    /// numeric or IO failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Read { .. } | CliError::Format { .. } => 2,
            CliError::Core(e) => match e {
                CoreError::Contract { .. } | CoreError::Capacity { .. } | CoreError::Unsupported(_) => 2,
                _ => 1,
            },
            CliError::Write { .. } | CliError::Numeric(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
