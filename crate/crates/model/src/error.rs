use cxr_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bad image: {0}")]
    BadImageShape(String),
    #[error("sequence length {length} exceeds max context {max}")]
    ContextOverflow { length: usize, max: usize },
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;
