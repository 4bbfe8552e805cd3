//! From-scratch encoder-decoder LSTM sequence labeller.

pub mod checkpoint;
pub mod lstm;
pub mod model;
pub mod tagger;
pub mod tensor;
pub mod train;

use thiserror::Error;

pub use model::{DecodeMode, Example, ModelConfig, Params, Seq2Seq};
pub use tagger::Tagger;
pub use train::{grid_search, train, EarlyStopping, GridOutcome, GridSpec, History, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("training diverged in epoch {epoch} with learning rate {learning_rate}: non-finite {what}")]
    Diverged { epoch: usize, learning_rate: f64, what: String },
    #[error("invalid training config: {0}")]
    Train(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl NeuralError {
    /// Numeric failures as opposed to malformed input or configuration.
    pub fn is_numeric(&self) -> bool {
        matches!(self, NeuralError::NonFinite(_) | NeuralError::Diverged { .. })
    }
}
