use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A quadrature or sampling grid is too coarse for the requested accuracy.
    #[error("refinement required: {0}")]
    RefinementRequired(String),

    /// A model precondition (noise class, geometry) does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unstable trajectory at step {step} (t = {time}): {detail}")]
    Instability {
        step: usize,
        time: f64,
        detail: String,
    },

    #[error("rate fit undefined: {0}")]
    UndefinedFit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
