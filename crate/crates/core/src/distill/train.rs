use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{mean_gradients, AttentionModel, ImageSequence};
use super::{DistillConfig, DistillError, Result};
use crate::costmap::{save_grid, AttentionMap};

/// One supervision record: input sequence and the two target maps.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub id: String,
    pub sequence: ImageSequence,
    pub a_pretrained: AttentionMap,
    pub a_vlm: AttentionMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss before each update.
    pub loss_history: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }
}

/// Plain SGD on the adapter parameters. Step `s` uses samples
/// `s * batch .. s * batch + batch` (cyclically), so the run is a pure
/// function of the model, data order and config.
pub fn train(
    model: &mut AttentionModel,
    data: &[TrainingSample],
    cfg: &DistillConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(DistillError::EmptyDataset);
    }
    let targets: Vec<(Vec<f64>, Vec<f64>)> = data
        .iter()
        .map(|s| (s.a_pretrained.values_f64(), s.a_vlm.values_f64()))
        .collect();
    let mut history = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let mut grads = Vec::with_capacity(cfg.batch_size);
        let mut loss_sum = 0.0;
        for k in 0..cfg.batch_size {
            let idx = (step * cfg.batch_size + k) % data.len();
            let (pre, vlm) = &targets[idx];
            let (loss, g) = model.loss_and_gradients(
                &data[idx].sequence,
                pre,
                vlm,
                cfg.lambda_vlm,
                cfg.epsilon,
            )?;
            if !loss.is_finite() {
                return Err(DistillError::NonFiniteLoss {
                    step,
                    record: data[idx].id.clone(),
                    loss,
                });
            }
            loss_sum += loss;
            grads.push(g);
        }
        history.push(loss_sum / cfg.batch_size as f64);
        let g = mean_gradients(model, &grads).flatten();
        let mut offset = 0;
        for params in model.adapter_params_mut() {
            for p in params.iter_mut() {
                *p -= cfg.learning_rate * g[offset];
                offset += 1;
            }
        }
        model.round_adapters_to_f32();
    }
    Ok(TrainReport {
        loss_history: history,
    })
}

/// Runs the model and writes its map as `.agrid`.
pub fn export_distilled(
    model: &AttentionModel,
    seq: &ImageSequence,
    path: impl AsRef<Path>,
) -> Result<AttentionMap> {
    let map = model.forward(seq)?;
    save_grid(&map, path)?;
    Ok(map)
}
