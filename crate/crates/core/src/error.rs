use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("matrix is not Hermitian ({context}): defect {defect:e}")]
    NotHermitian { context: &'static str, defect: f64 },

    #[error("singular system in {0}")]
    Singular(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible weights: {0}")]
    Infeasible(String),

    #[error("degenerate Lorentzian denominator at omega = {omega:e}")]
    DegenerateResponse { omega: f64 },

    #[error("zero output power on microstrip {strip}, bin {bin}")]
    ZeroPower { strip: usize, bin: usize },

    #[error("target vector has zero norm")]
    ZeroTarget,

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("trial {trial} failed after {attempts} attempts: {reason}")]
    TrialFailed {
        trial: usize,
        attempts: usize,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
