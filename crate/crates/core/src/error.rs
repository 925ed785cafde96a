//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible tensor or parameter shapes; carries both offenders.
    #[error("dimension mismatch in {context}: {left:?} vs {right:?}")]
    DimensionMismatch {
        context: String,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    /// A class label outside `[0, num_classes)`.
    #[error("label {label} at index {index} out of range for {num_classes} classes")]
    InvalidLabel {
        index: usize,
        label: usize,
        num_classes: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    /// Malformed IDX file; `offset` is the byte position of the problem.
    #[error("IDX format error at byte {offset}: {message}")]
    IdxFormat { offset: usize, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("diagnostic error: {0}")]
    Diagnostic(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn dim_mismatch(context: impl Into<String>, left: &[usize], right: &[usize]) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}
