use caden::CadenError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    /// The run aborted after `rounds_completed`; a partial trace was written.
    #[error("run aborted after {rounds_completed} rounds: {source}")]
    Aborted { rounds_completed: usize, source: CadenError },
    #[error(transparent)]
    Core(#[from] CadenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
