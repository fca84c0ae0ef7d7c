use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    #[error("plan violates {} constraint(s): {}", .0.len(), .0.join("; "))]
    PlanViolations(Vec<String>),

    #[error("AR fit failed: {0}")]
    Fit(String),

    #[error("reconstruction failed: {0}")]
    Reconstruction(String),

    #[error("metrology failed: {0}")]
    Metrology(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
