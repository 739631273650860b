use thiserror::Error;

/// Errors raised by the tomography engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("basis mismatch: {0} vs {1}")]
    BasisMismatch(String, String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid effect: {0}")]
    InvalidEffect(String),

    #[error("channel is not trace preserving (deviation {0:.3e})")]
    NotTracePreserving(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "prior mean has minimum eigenvalue {lambda_min:.3e}, at or below the floor {floor:.0e}; \
         mix the mean with the maximally mixed state before building the prior"
    )]
    BoundaryMean { lambda_min: f64, floor: f64 },

    #[error("sampled matrix was numerically singular after {0} attempts")]
    SingularSample(usize),

    #[error("degenerate Bayes update: every particle assigns zero likelihood to the datum")]
    DegenerateUpdate,

    #[error("cannot project onto the state set: no positive eigenvalues")]
    DegenerateProjection,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
