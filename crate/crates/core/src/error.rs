use std::io;

use thiserror::Error;

/// Errors produced anywhere in the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum NettError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("operator annihilated: every singular value is below sigma_star = {sigma_star:e}")]
    OperatorAnnihilated { sigma_star: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("svd failed to converge")]
    SvdFailed,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("sampling failure at level {level}: no admissible draws with R_n(x) <= {bound}")]
    SamplingFailure { level: usize, bound: f64 },
    #[error("insufficient points for fit: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("bad file format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl NettError {
    pub(crate) fn dims(context: &'static str, expected: usize, got: usize) -> Self {
        NettError::DimensionMismatch {
            context,
            expected,
            got,
        }
    }

    /// True for errors caused by the user-supplied configuration rather than
    /// by numerics or I/O.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            NettError::Config { .. } | NettError::InvalidParameter(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, NettError>;
