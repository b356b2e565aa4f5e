use thiserror::Error;

#[derive(Debug, Error)]
pub enum CadenError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is disconnected (second-smallest Laplacian eigenvalue {lambda2:e})")]
    Disconnected { lambda2: f64 },

    #[error("no connected graph after {attempts} samples; edge probability too small for m")]
    GraphSamplingFailed { attempts: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Lipschitz estimate undefined: every probe step was below 1e-15")]
    LipschitzUndefined,

    #[error("measured contraction rate r = {r} is not below 1; increase probe iterations or mu_z")]
    NoContraction { r: f64 },

    #[error("agent {agent} produced a non-finite model in round {round}")]
    Diverged { agent: usize, round: usize },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CadenError> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(CadenError::DimensionMismatch { expected, found })
    }
}
