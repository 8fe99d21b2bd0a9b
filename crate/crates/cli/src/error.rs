use std::path::PathBuf;

use nomix_simbench::SimError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<nomix::Error> for CliError {
    fn from(e: nomix::Error) -> Self {
        use nomix::Error as E;
        match e {
            E::NumericalDivergence { .. } | E::SingularMatrix | E::RankDeficient { .. } => {
                CliError::Numerical(e.to_string())
            }
            E::InvalidParameter(_)
            | E::DimensionMismatch(_)
            | E::DegenerateMixture(_)
            | E::OverlappingSupport { .. }
            | E::AbsoluteContinuityViolation(_)
            | E::NotPositiveSemidefinite => CliError::Input(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Model(inner) => inner.into(),
            SimError::CorrelationUndefined => CliError::Numerical(e.to_string()),
            SimError::InvalidConfig(_) | SimError::DimensionMismatch(_) => CliError::Input(e.to_string()),
        }
    }
}
