use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("free parameter count {got} does not match order {order} (expected {expected})")]
    FreeParamLength {
        order: u8,
        expected: usize,
        got: usize,
    },

    #[error("invalid nodes: {0}")]
    InvalidNodes(String),

    #[error("malformed stencil file: {0}")]
    StencilFormat(String),

    #[error("malformed trajectory file: {0}")]
    TrajectoryFormat(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical instability detected at step {step} (max |u| = {max_abs:e})")]
    Unstable { step: usize, max_abs: f64 },

    #[error("stencil has no wave support (symbol is non-negative everywhere)")]
    DegenerateStencil,

    #[error("wavenumber must be positive")]
    ZeroWavenumber,

    #[error("request needs {needed} bytes, above the {limit} byte memory guard")]
    MemoryGuard { needed: usize, limit: usize },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
