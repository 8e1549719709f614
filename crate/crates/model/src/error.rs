use gazeforge_core::sio::SioError;
use gazeforge_tinynn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Sio(#[from] SioError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("dataset: {0}")]
    Data(String),
    #[error("config: {0}")]
    Config(String),
    #[error("non-finite {term} at epoch {epoch}, batch {batch}")]
    NonFinite {
        term: String,
        epoch: usize,
        batch: usize,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("sequences have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("empty sequence")]
    Empty,
    #[error("batch of {got} is below the minimum of {min}")]
    BatchTooSmall { got: usize, min: usize },
    #[error("loss term `{0}` is not finite")]
    NonFinite(&'static str),
}
