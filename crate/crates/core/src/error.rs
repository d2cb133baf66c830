use thiserror::Error;

/// Errors produced by the scoring engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("size guard: {0}")]
    Guard(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("reconstruction {index} failed: {source}")]
    Reconstructor {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
