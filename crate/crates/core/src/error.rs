use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("spike probability {0} is degenerate; the mixture has a single component")]
    DegenerateMixture(f64),

    #[error("support indicators of components {first} and {second} both accept x = {x}")]
    OverlappingSupport { first: usize, second: usize, x: f64 },

    #[error("absolute continuity violated: {0}")]
    AbsoluteContinuityViolation(String),

    #[error("numerical divergence at {location}: {detail}")]
    NumericalDivergence { location: String, detail: String },

    #[error("matrix has rank below {k}")]
    RankDeficient { k: usize },

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("matrix is not positive semidefinite")]
    NotPositiveSemidefinite,
}

impl Error {
    pub(crate) fn divergence(location: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::NumericalDivergence {
            location: location.into(),
            detail: detail.into(),
        }
    }
}
