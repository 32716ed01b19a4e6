//! The sequence model: a small self-attention encoder over image blocks and
//! tokens, the denoising stages from [`crate::aed`], fusion, and a pointer
//! decoder that emits `(begin, end, polarity)` triples.

mod metrics;
mod model;
mod params;

pub use metrics::{evaluate, MetricsReport, Prediction, Task};
pub use model::{fuse, sinusoid, AspectSource, GroupCheck, Model};
pub use params::{
    AttentionParams, DecoderLayerParams, EncoderLayerParams, FeedForwardParams, ModelParams, ParamGroup, Shape,
    TensorRef, Vocab,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aed::AedError;
use crate::datamodel::DecodeError;
use crate::numerics::NumericsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeqError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Aed(#[from] AedError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("target sequence: {0}")]
    Decode(#[from] DecodeError),
}

/// Architecture and optimiser settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: usize,
    /// Image block dimension; taken from the data when absent.
    pub d_img: Option<usize>,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub gcn_layers: usize,
    pub alpha_1: f64,
    pub alpha_2: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Dependency-distance cutoff for text–text association edges.
    pub threshold: u32,
    /// Greedy decoding stops after this many aspects.
    pub max_aspects: usize,
    /// Skip aspect attention and lexicon enhancement (identity pass-through).
    pub bypass_aesa: bool,
    /// Aspect tokens used for the association matrix when computing the loss.
    pub loss_aspects: AspectSource,
    /// Rescale the batch gradient to at most this global L2 norm.
    pub grad_clip: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            d_img: None,
            encoder_layers: 1,
            decoder_layers: 1,
            gcn_layers: 2,
            alpha_1: 0.5,
            alpha_2: 0.5,
            learning_rate: 0.05,
            batch_size: 8,
            epochs: 40,
            seed: 0,
            threshold: crate::aed::DEFAULT_THRESHOLD,
            max_aspects: 8,
            bypass_aesa: false,
            loss_aspects: AspectSource::Gold,
            grad_clip: Some(5.0),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), SeqError> {
        let bad = |msg: String| Err(SeqError::Contract(msg));
        if self.hidden == 0 || self.d_img == Some(0) || self.batch_size == 0 || self.max_aspects == 0 {
            return bad("hidden, d_img, batch_size and max_aspects must be at least 1".into());
        }
        if self.alpha_2 > 0.0 && self.gcn_layers == 0 {
            return bad("alpha_2 > 0 needs at least one GCN layer".into());
        }
        if !(self.alpha_1 >= 0.0 && self.alpha_2 >= 0.0 && self.alpha_1 + self.alpha_2 > 0.0) {
            return bad(format!(
                "fusion weights must be non-negative with a positive sum, got {} and {}",
                self.alpha_1, self.alpha_2
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return bad("grad_clip must be positive".into());
        }
        Ok(())
    }
}
