use thiserror::Error;

use crate::autodiff::AdError;

#[derive(Debug, Error)]
pub enum NutmError {
    #[error(transparent)]
    Autodiff(#[from] AdError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid task parameters: {0}")]
    Task(String),
    #[error("invalid PCA input: {0}")]
    Pca(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("training diverged at iteration {iteration}: loss {loss}")]
    Diverged { iteration: usize, loss: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = NutmError> = std::result::Result<T, E>;
