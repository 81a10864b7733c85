use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("missing input artifact {path}; it is produced by {stage}")]
    Dependency { path: PathBuf, stage: &'static str },

    #[error("run incomplete: {pending} item(s) pending; rerun the same command to resume")]
    Partial { pending: usize },

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] dialex_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for usage errors, 3 for missing upstream artifacts, 4 for runs
    /// left partial, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Dependency { .. } => 3,
            CliError::Partial { .. } => 4,
            CliError::Core(dialex_core::Error::Partial { .. }) => 4,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
