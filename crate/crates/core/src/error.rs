use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },

    #[error("time index {t} out of range 0..={max}")]
    TimeOutOfRange { t: usize, max: usize },

    #[error("singular time t = {0}: marginal variance is zero")]
    SingularTime(usize),

    #[error("kernel of size {kernel} too large for a {height}x{width} image")]
    KernelTooLarge {
        kernel: usize,
        height: usize,
        width: usize,
    },

    #[error("malformed operation log: {0}")]
    MalformedLog(String),

    #[error("noise predictor failed: {0}")]
    Predictor(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
