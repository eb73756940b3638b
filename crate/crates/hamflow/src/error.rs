use std::path::PathBuf;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot parse expression {source_text:?} at offset {offset}: {message}")]
    Expr { source_text: String, offset: usize, message: String },
    #[error("unknown criterion {name:?}; available: {}", available.join(", "))]
    UnknownCriterion { name: String, available: Vec<String> },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("experiment {experiment:?} failed: {source}")]
    Experiment {
        experiment: String,
        #[source]
        source: hamflow_core::Error,
    },
    #[error(transparent)]
    Core(#[from] hamflow_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn expr(src: &str, offset: usize, message: &str) -> Self {
        Error::Expr { source_text: src.to_string(), offset, message: message.to_string() }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Configuration problems exit with 2; everything else is a run failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Expr { .. } | Error::UnknownCriterion { .. } | Error::Json(_) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Expr { .. } => "expression",
            Error::UnknownCriterion { .. } => "unknown_criterion",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Experiment { .. } => "experiment",
            Error::Core(_) => "numerics",
        }
    }

    /// Machine-readable form written to stderr by the binary.
    pub fn report(&self) -> ErrorReport {
        let available = match self {
            Error::UnknownCriterion { available, .. } => available.clone(),
            _ => Vec::new(),
        };
        ErrorReport { error: self.kind(), message: self.to_string(), exit_code: self.exit_code(), available }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub available: Vec<String>,
}
