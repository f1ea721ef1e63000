use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },

    #[error("integrity check failed for {}: {detail}", path.display())]
    Integrity { path: PathBuf, detail: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status: 2 invalid config, 3 stage failure, 4 integrity error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Stage { .. } | Self::Io { .. } => 3,
            Self::Integrity { .. } => 4,
        }
    }

    pub fn stage(stage: &str, e: impl std::fmt::Display) -> Self {
        Self::Stage { stage: stage.to_string(), message: e.to_string() }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io { context: context.into(), source }
    }
}
