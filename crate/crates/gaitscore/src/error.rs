//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GaitError>;

#[derive(Debug, Error)]
pub enum GaitError {
    /// Geometrically meaningless input, e.g. a skeleton with zero torso length.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Sequence shorter than the minimum the operation can work with.
    #[error("sequence too short: {got} frames, need at least {min}")]
    TooShort { got: usize, min: usize },

    /// Tensor shape disagreement, naming the offending branch or tensor.
    #[error("shape mismatch in {place}: expected {expected}, got {got}")]
    ShapeMismatch {
        place: String,
        expected: String,
        got: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no detections")]
    NoDetections,

    #[error("no participant track")]
    NoParticipant,

    /// Text-format parse failure with a 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GaitError {
    pub fn shape(place: impl Into<String>, expected: impl ToString, got: impl ToString) -> Self {
        GaitError::ShapeMismatch {
            place: place.into(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
