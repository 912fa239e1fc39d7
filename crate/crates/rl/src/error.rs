use genctrl_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RlError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("input width {got} does not match network input {expected}")]
    Width { expected: usize, got: usize },
    #[error("network architectures differ")]
    Architecture,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RlError>;
