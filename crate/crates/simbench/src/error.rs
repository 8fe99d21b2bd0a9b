use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("correlation is undefined when an input has zero variance")]
    CorrelationUndefined,
    #[error(transparent)]
    Model(#[from] nomix::Error),
}
