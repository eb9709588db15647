use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing required input `{0}`: pass it as a flag or set it in the manifest")]
    MissingInput(String),
    #[error("invalid value {value:?} for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("cannot read {}: {source}", path.display())]
    UnreadableFile { path: PathBuf, source: std::io::Error },
    #[error("cannot write {}: {source}", path.display())]
    UnwritableFile { path: PathBuf, source: std::io::Error },
    #[error("manifest {}, line {line}: {message}", path.display())]
    Manifest { path: PathBuf, line: usize, message: String },
    #[error("bad graph source {spec:?}: {reason}")]
    GraphSource { spec: String, reason: String },
    #[error("{}, line {line}: {message}", path.display())]
    MalformedCsv { path: PathBuf, line: usize, message: String },
    #[error("audit failed: {violations} admissibility violations, {suboptimal} suboptimal paths")]
    AuditFailed { violations: usize, suboptimal: usize },
    #[error(transparent)]
    Core(#[from] landmark_astar::Error),
}

impl CliError {
    pub fn invalid(key: &str, value: impl ToString, reason: impl ToString) -> Self {
        Self::InvalidValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        }
    }

    /// Process exit status: 2 for a failed audit, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::AuditFailed { .. } => 2,
            _ => 1,
        }
    }
}

/// Lifts any library error into [`CliError::Core`].
pub trait CoreExt<T> {
    fn core(self) -> Result<T, CliError>;
}

impl<T, E: Into<landmark_astar::Error>> CoreExt<T> for Result<T, E> {
    fn core(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Core(e.into()))
    }
}
