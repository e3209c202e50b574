use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes do not fit the operation.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A parameter is outside its valid domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A byte payload does not follow its file format.
    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },
    /// A weight bundle lacks a tensor the model needs, or holds it with the wrong shape.
    #[error("weight `{name}`: {reason}")]
    Weight { name: String, reason: String },
    /// Evaluation over a mask with no valid pixel.
    #[error("validity mask selects no pixel")]
    EmptyMask,
    /// Operation invoked in the wrong update phase.
    #[error("phase violation: expected {expected}, state is in {actual}")]
    Phase {
        expected: &'static str,
        actual: &'static str,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}

pub(crate) fn format_err(format: &'static str, reason: impl Into<String>) -> Error {
    Error::Format {
        format,
        reason: reason.into(),
    }
}
