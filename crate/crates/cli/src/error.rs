use std::path::PathBuf;

use ctm_core::CtmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CtmError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read config file {path}: {reason}")]
    ConfigFile { path: PathBuf, reason: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io { context: context.into(), source }
    }

    /// 2 for bad input, 1 for numerical or I/O failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CtmError::Usage(_) | CtmError::Config(_) | CtmError::Parse(_) | CtmError::Domain(_)) => 2,
            CliError::ConfigFile { .. } => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
