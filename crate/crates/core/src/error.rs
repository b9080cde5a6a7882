use thiserror::Error;

use crate::process::RunSummary;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("process already dispersed: no unhappy particle left to move")]
    AlreadyDispersed,

    #[error("step cap of {cap} exceeded before dispersion")]
    CappedRun { cap: u64, partial: Box<RunSummary> },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("quadrature did not reach tolerance {tol:e}: best value {value} with error estimate {error:e}")]
    Quadrature { value: f64, error: f64, tol: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LabError::InvalidArgument(msg.into())
    }
}
