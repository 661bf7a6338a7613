use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("config key `{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("cannot read config {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] cascade_core::Error),
    #[error("{context}: {source}")]
    Point {
        context: String,
        #[source]
        source: cascade_core::Error,
    },
    #[error("{failed} of {total} points failed; see the manifest")]
    PointsFailed { failed: usize, total: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("cannot write manifest: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for configuration problems, 1 for everything that went wrong while
    /// running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Syntax { .. } | CliError::Invalid { .. } | CliError::ConfigRead { .. } => 2,
            _ => 1,
        }
    }
}
