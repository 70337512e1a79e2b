//! Transformer-encoder classifier over abstract token sequences, trained from
//! scratch in 64-bit floating point.

mod archive;
pub mod matrix;
mod model;
mod train;

use thiserror::Error;

use crate::tokens::Truncate;

pub use archive::{load_model, read_model, save_model, write_model, ArchiveError, Model};
pub use model::{
    attention, attention_weights, backprop, backprop_into, class_probs, embed, encode,
    encoder_layer, forward, layer_norm, loss, EncoderParameters, LayerParams, Prediction,
    TensorRef, PROB_FLOOR,
};
pub use train::{
    gradient_check, predict, predict_batch, train, Adam, EpochLog, TrainingLog, INIT_SCALE,
    MIN_TRAINING_INSTANCES,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub num_layers: usize,
    pub d_model: usize,
    pub num_heads: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
    pub ln_epsilon: f64,
    pub truncate: Truncate,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            num_layers: 2,
            d_model: 64,
            num_heads: 4,
            d_ff: 256,
            max_len: crate::tokens::MAX_INPUT_LEN,
            batch_size: 16,
            learning_rate: 1e-3,
            max_epochs: 15,
            patience: 5,
            val_fraction: 0.2,
            seed: 0,
            ln_epsilon: 1e-5,
            truncate: Truncate::Tail,
        }
    }
}

impl Hyperparams {
    /// The 12-layer, 768-wide shape with the fine-tuning learning rate.
    /// Far too large to train here; useful for shape checks.
    pub fn base_shape() -> Self {
        Self {
            num_layers: 12,
            d_model: 768,
            num_heads: 12,
            d_ff: 3072,
            learning_rate: 1e-6,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: &str| Err(EncoderError::InvalidHyperparams(m.to_string()));
        if self.d_model == 0 || self.num_heads == 0 || self.d_ff == 0 {
            return bad("d_model, num_heads and d_ff must be positive");
        }
        if self.d_model % self.num_heads != 0 {
            return bad("num_heads must divide d_model");
        }
        if self.max_len < 2 {
            return bad("max_len must be at least 2");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("val_fraction must lie strictly between 0 and 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.ln_epsilon > 0.0) {
            return bad("ln_epsilon must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncoderError {
    #[error("token id {id} is outside a vocabulary of {vocab_size}")]
    IdOutOfRange { id: u32, vocab_size: usize },
    #[error("sequence of {len} tokens exceeds max_len {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("attention row {0} has no unmasked key")]
    AllMaskedRow(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("degenerate training corpus: {0}")]
    DegenerateCorpus(String),
}
