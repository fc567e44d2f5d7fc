use thiserror::Error;

/// Errors produced by the GDConv library.
#[derive(Debug, Error)]
pub enum Error {
    /// A buffer length did not match the declared dimensions.
    #[error("size mismatch: expected {expected} elements, got {actual}")]
    Size { expected: usize, actual: usize },

    /// Two objects that must agree in shape did not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A scalar argument was outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// Wrong number of items (support points, kernel taps, frames).
    #[error("arity error: {0}")]
    Arity(String),

    /// An index (channel, frame, parameter) was out of bounds.
    #[error("index error: {0}")]
    Index(String),

    /// A value was NaN or infinite where finite data is required.
    #[error("non-finite value at element {0}")]
    NonFinite(usize),

    /// Malformed on-disk data.
    #[error("format error: {0}")]
    Format(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
