use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}, field `{field}`: {message}")]
    Field { line: usize, field: String, message: String },
    #[error("missing field `{field}` in [{section}]")]
    Missing { section: String, field: String },
}

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("invalid record {path}: {message}")]
    Record { path: PathBuf, message: String },
    #[error("{0}")]
    Core(#[from] orbitmatch_core::Error),
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> LabError {
        let path = path.into();
        move |source| LabError::Io { path, source }
    }

    pub fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> LabError {
        let path = path.into();
        move |source| LabError::Csv { path, source }
    }

    pub fn json(path: impl Into<PathBuf>) -> impl FnOnce(serde_json::Error) -> LabError {
        let path = path.into();
        move |source| LabError::Json { path, source }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
