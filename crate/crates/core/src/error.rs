use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    Shape {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("incompatible checkpoint: {0}")]
    Compatibility(String),
    #[error("missing coverage: {0}")]
    Coverage(String),
    #[error("non-finite loss at step {step}: {detail}")]
    NonFinite { step: usize, detail: String },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn shape_err(expected: &[usize], found: &[usize]) -> Error {
    Error::Shape {
        expected: expected.to_vec(),
        found: found.to_vec(),
    }
}
