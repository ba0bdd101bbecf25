use thiserror::Error;

/// Errors raised by the simulation, estimation and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported dimension {0}; only d = 1, 2, 3 are implemented")]
    UnsupportedDimension(usize),

    #[error("determinantal point process is not admissible: spectral peak {peak:.6} > 1 (largest admissible intensity is {max_intensity:.6})")]
    DppInadmissible { peak: f64, max_intensity: f64 },

    #[error("covariance matrix of size {size} is not factorizable even with jitter {jitter:e}")]
    NotFactorizable { size: usize, jitter: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("memory cap exceeded: {0}")]
    MemoryCap(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
