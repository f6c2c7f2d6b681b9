//! Attention distillation: a small attention predictor whose frozen base is
//! adapted through LoRA factors, trained against a blend of a pretrained
//! model's attention and VLM-derived supervision maps.

mod gradcheck;
mod loss;
mod model;
mod model_file;
mod train;

pub use gradcheck::{finite_difference_check, GradCheckReport};
pub use loss::{
    blended_loss, cosine_distance, cosine_distance_grad, loss_cosine, loss_ssim, loss_total,
};
pub use model::{
    AttentionModel, BaseWeights, ImageSequence, LoraAdapter, LoraGradients, Matrix, ModelConfig,
    LORA_INIT_STD,
};
pub use model_file::{
    decode_model, encode_model, load_model, save_model, VLAD_MAGIC, VLAD_VERSION,
};
pub use train::{export_distilled, train, TrainReport, TrainingSample};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costmap::CostmapError;

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("model config error: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("non-finite loss {loss} at step {step} (record {record})")]
    NonFiniteLoss {
        step: usize,
        record: String,
        loss: f64,
    },
    #[error("model file error at byte {offset}: {reason}")]
    ModelFormat { offset: usize, reason: String },
    #[error(transparent)]
    Costmap(#[from] CostmapError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DistillError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistillConfig {
    /// Weight of the VLM term; `1 - lambda_vlm` goes to the pretrained term.
    pub lambda_vlm: f64,
    pub learning_rate: f64,
    pub rank: usize,
    pub steps: usize,
    pub batch_size: usize,
    /// Floor on the cosine denominator.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            lambda_vlm: 0.5,
            learning_rate: 2.0,
            rank: 4,
            steps: 200,
            batch_size: 4,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda_vlm) {
            return Err(DistillError::Config("lambda_vlm must lie in [0, 1]".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(DistillError::Config(
                "learning rate must be finite and >= 0".into(),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(DistillError::Config("epsilon must be positive".into()));
        }
        if self.rank == 0 || self.batch_size == 0 {
            return Err(DistillError::Config(
                "rank and batch size must be positive".into(),
            ));
        }
        Ok(())
    }
}
