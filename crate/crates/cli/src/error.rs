use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("invalid config {}: {reason}", path.display())]
    Config { path: PathBuf, reason: String },
    #[error("{stage} stage failed: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },
    #[error("cannot write {}: {reason}", path.display())]
    Io { path: PathBuf, reason: String },
}

impl CliError {
    pub fn stage(stage: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Stage {
            stage,
            message: e.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::MissingFile(_) => "missing_file",
            CliError::Config { .. } => "invalid_config",
            CliError::Stage { .. } => "stage_failed",
            CliError::Io { .. } => "io",
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json_line(&self) -> String {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            CliError::MissingFile(p)
            | CliError::Config { path: p, .. }
            | CliError::Io { path: p, .. } => {
                v["path"] = json!(p.display().to_string());
            }
            CliError::Stage { stage, .. } => v["stage"] = json!(stage),
        }
        v.to_string()
    }
}
