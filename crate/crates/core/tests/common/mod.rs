#![allow(dead_code)]

pub mod frechet_oracle;
pub mod planner_world;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use vilad_core::costmap::{AttentionMap, MapFrame, MapRole};
use vilad_core::distill::{AttentionModel, ImageSequence, ModelConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_sequence(cfg: &ModelConfig, seed: u64) -> ImageSequence {
    let mut r = rng(seed);
    let n = cfg.input_width() * cfg.input_height();
    let frames = (0..cfg.frames())
        .map(|_| (0..n).map(|_| r.random::<f64>()).collect())
        .collect();
    ImageSequence::new(cfg.input_width(), cfg.input_height(), frames).unwrap()
}

pub fn random_map(w: usize, h: usize, seed: u64) -> AttentionMap {
    let mut r = rng(seed);
    let v: Vec<f64> = (0..w * h).map(|_| r.random::<f64>()).collect();
    AttentionMap::from_f64(w, h, &v, MapRole::Vlm, MapFrame::Image).unwrap()
}

/// Frontier-style target: zero above the horizon, three bands below.
pub fn band_pattern(w: usize, h: usize) -> AttentionMap {
    let mut v = vec![0.0f32; w * h];
    for i in h / 2..h {
        for j in 0..w {
            v[i * w + j] = if j < w / 3 {
                0.2
            } else if j < 2 * w / 3 {
                0.7
            } else {
                0.4
            };
        }
    }
    AttentionMap::new(w, h, v, MapRole::Vlm, MapFrame::Image).unwrap()
}

pub fn tiny_config(grid: usize, rank: usize, history: usize) -> ModelConfig {
    ModelConfig {
        grid_width: grid,
        grid_height: grid,
        patch: 2,
        history,
        hidden: 6,
        rank,
    }
}

/// Model with every adapter entry nonzero so all gradient paths are live.
pub fn perturbed_model(cfg: ModelConfig, seed: u64) -> AttentionModel {
    let mut m = AttentionModel::new(cfg, seed).unwrap();
    let mut r = rng(seed ^ 0xA5A5);
    let n = Normal::new(0.0, 0.3).unwrap();
    for block in m.adapter_params_mut() {
        for p in block.iter_mut() {
            *p = n.sample(&mut r);
        }
    }
    m
}
