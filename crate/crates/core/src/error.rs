use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    /// The operator handed to CG is not symmetric positive definite.
    #[error("operator contract violated at CG iterate {iterate}: {reason}")]
    OperatorContract { iterate: usize, reason: String },

    #[error("denoiser lacks capability: {0}")]
    Capability(String),

    #[error("external denoiser failed: {message}{}", diagnostics_suffix(.diagnostics))]
    ExternalDenoiser {
        message: String,
        diagnostics: String,
    },

    #[error("denoiser protocol error: {0}")]
    Protocol(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("sampler failed at step {step}: {source}")]
    SamplerStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

fn diagnostics_suffix(diag: &str) -> String {
    if diag.is_empty() {
        String::new()
    } else {
        format!(" (stderr: {})", diag.trim())
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(expected: &[usize], actual: &[usize]) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        }
    }

    /// Innermost error, unwrapping any step context.
    pub fn root(&self) -> &Error {
        match self {
            Error::SamplerStep { source, .. } => source.root(),
            other => other,
        }
    }
}
