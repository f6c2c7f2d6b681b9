//! Patch-embedding attention predictor with frozen base weights and LoRA
//! adapters on both weight matrices.
//!
//! For each grid cell `c` with stacked grayscale patch `x_c` (all frames of
//! the sequence):
//!
//! ```text
//! z_c = (W_e + B_e A_e) x_c + b_e + p_c
//! h_c = tanh(z_c)
//! s_c = (w_a + B_a A_a) . h_c + b_a
//! y_c = sigmoid(s_c)
//! ```
//!
//! `p_c` is a fixed positional bias (sinusoids of the cell position mixed
//! through random weights). Everything except the adapters is frozen.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DistillError, Result};
use crate::costmap::{AttentionMap, MapFrame, MapRole};
use crate::frame::ImageFrame;

/// Standard deviation of the LoRA down-projection init.
pub const LORA_INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub grid_width: usize,
    pub grid_height: usize,
    /// Side of the square input patch per cell, in input pixels.
    pub patch: usize,
    /// Number of past frames `n`; the model sees `n + 1` frames.
    pub history: usize,
    pub hidden: usize,
    pub rank: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            grid_width: 32,
            grid_height: 24,
            patch: 2,
            history: 2,
            hidden: 64,
            rank: 4,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_width == 0
            || self.grid_height == 0
            || self.patch == 0
            || self.hidden == 0
            || self.rank == 0
        {
            return Err(DistillError::Config(
                "model dimensions must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.grid_width * self.patch
    }

    pub fn input_height(&self) -> usize {
        self.grid_height * self.patch
    }

    pub fn frames(&self) -> usize {
        self.history + 1
    }

    pub fn cells(&self) -> usize {
        self.grid_width * self.grid_height
    }

    /// Length of one stacked patch vector.
    pub fn patch_dim(&self) -> usize {
        self.frames() * self.patch * self.patch
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other.at(k, c);
                }
            }
        }
        out
    }

    /// `self^T * other`.
    pub fn t_matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows);
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            for r in 0..self.cols {
                let a = self.at(k, r);
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other.at(k, c);
                }
            }
        }
        out
    }

    /// `self * other^T`.
    pub fn matmul_t(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols);
        Matrix::from_fn(self.rows, other.rows, |r, c| {
            (0..self.cols).map(|k| self.at(r, k) * other.at(c, k)).sum()
        })
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.shape(), other.shape());
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    fn round_to_f32(&mut self) {
        for v in &mut self.data {
            *v = *v as f32 as f64;
        }
    }
}

/// Frozen weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseWeights {
    /// `hidden x patch_dim`
    pub embed: Matrix,
    pub embed_bias: Vec<f64>,
    /// `cells x hidden`
    pub position_bias: Matrix,
    /// `1 x hidden`
    pub head: Matrix,
    pub head_bias: f64,
}

/// Low-rank update `up * down` for one weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraAdapter {
    /// `rank x in`, Gaussian init.
    pub down: Matrix,
    /// `out x rank`, zero init.
    pub up: Matrix,
}

impl LoraAdapter {
    fn init(out_dim: usize, in_dim: usize, rank: usize, rng: &mut ChaCha8Rng) -> Self {
        let normal = Normal::new(0.0, LORA_INIT_STD).unwrap();
        Self {
            down: Matrix::from_fn(rank, in_dim, |_, _| normal.sample(rng) as f32 as f64),
            up: Matrix::zeros(out_dim, rank),
        }
    }

    pub fn delta(&self) -> Matrix {
        self.up.matmul(&self.down)
    }

    pub fn param_count(&self) -> usize {
        self.down.data.len() + self.up.data.len()
    }
}

/// Gradients for the trainable parameters only; shapes mirror the adapters.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraGradients {
    pub embed: LoraAdapter,
    pub head: LoraAdapter,
}

impl LoraGradients {
    fn zeros_like(model: &AttentionModel) -> Self {
        let z = |a: &LoraAdapter| LoraAdapter {
            down: Matrix::zeros(a.down.rows, a.down.cols),
            up: Matrix::zeros(a.up.rows, a.up.cols),
        };
        Self {
            embed: z(&model.embed_lora),
            head: z(&model.head_lora),
        }
    }

    /// Flattened in the same order as [`AttentionModel::adapter_params_mut`].
    pub fn flatten(&self) -> Vec<f64> {
        [
            &self.embed.down,
            &self.embed.up,
            &self.head.down,
            &self.head.up,
        ]
        .iter()
        .flat_map(|m| m.data.iter().copied())
        .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.flatten().iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    fn add_scaled(&mut self, other: &LoraGradients, k: f64) {
        for (a, b) in [
            (&mut self.embed.down, &other.embed.down),
            (&mut self.embed.up, &other.embed.up),
            (&mut self.head.down, &other.head.down),
            (&mut self.head.up, &other.head.up),
        ] {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += k * y;
            }
        }
    }
}

/// `n + 1` grayscale frames at the model's input resolution, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSequence {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<Vec<f64>>,
}

impl ImageSequence {
    pub fn new(width: usize, height: usize, frames: Vec<Vec<f64>>) -> Result<Self> {
        if frames.is_empty() {
            return Err(DistillError::Config("image sequence is empty".into()));
        }
        if let Some(bad) = frames.iter().position(|f| f.len() != width * height) {
            return Err(DistillError::Config(format!(
                "frame {bad} does not match {width}x{height}"
            )));
        }
        Ok(Self {
            width,
            height,
            frames,
        })
    }

    /// Downsamples RGB frames (oldest first) to the model's input resolution.
    pub fn from_frames(frames: &[ImageFrame], cfg: &ModelConfig) -> Result<Self> {
        let (w, h) = (cfg.input_width(), cfg.input_height());
        Self::new(w, h, frames.iter().map(|f| f.gray_resized(w, h)).collect())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Intermediate values kept for the backward pass.
struct ForwardTrace {
    /// `cells x patch_dim`
    patches: Matrix,
    /// `cells x hidden`
    hidden: Matrix,
    output: Vec<f64>,
    head_eff: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionModel {
    pub config: ModelConfig,
    pub base: BaseWeights,
    pub embed_lora: LoraAdapter,
    pub head_lora: LoraAdapter,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl AttentionModel {
    /// Seeded base weights and freshly initialised adapters. All parameters
    /// are rounded to binary32, the model file precision.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (e, d) = (config.hidden, config.patch_dim());
        let embed_std = 0.5 / (d as f64).sqrt();
        let normal = |std: f64| Normal::new(0.0, std).unwrap();
        let embed = Matrix::from_fn(e, d, |_, _| normal(embed_std).sample(&mut rng));
        let embed_bias: Vec<f64> = (0..e).map(|_| normal(0.1).sample(&mut rng)).collect();

        // Sinusoidal position features mixed into the hidden width.
        let features: Vec<(f64, f64, f64)> = (0..e)
            .map(|_| {
                (
                    rng.random_range(-12.0..12.0),
                    rng.random_range(-12.0..12.0),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        let position_bias = Matrix::from_fn(config.cells(), e, |c, k| {
            let (fi, fj, phase) = features[k];
            let i = (c / config.grid_width) as f64 / config.grid_height as f64;
            let j = (c % config.grid_width) as f64 / config.grid_width as f64;
            1.5 * (fi * i + fj * j + phase).sin()
        });
        let head = Matrix::from_fn(1, e, |_, _| {
            normal(2.0 / (e as f64).sqrt()).sample(&mut rng)
        });

        let mut base = BaseWeights {
            embed,
            embed_bias,
            position_bias,
            head,
            head_bias: 0.0,
        };
        base.embed.round_to_f32();
        base.position_bias.round_to_f32();
        base.head.round_to_f32();
        for b in &mut base.embed_bias {
            *b = *b as f32 as f64;
        }
        let embed_lora = LoraAdapter::init(e, d, config.rank, &mut rng);
        let head_lora = LoraAdapter::init(1, e, config.rank, &mut rng);
        Ok(Self {
            config,
            base,
            embed_lora,
            head_lora,
        })
    }

    /// A copy with the adapters' up-projections zeroed: the frozen base model.
    pub fn base_model(&self) -> Self {
        let mut m = self.clone();
        m.embed_lora.up = Matrix::zeros(m.embed_lora.up.rows, m.embed_lora.up.cols);
        m.head_lora.up = Matrix::zeros(m.head_lora.up.rows, m.head_lora.up.cols);
        m
    }

    pub fn trainable_params(&self) -> usize {
        self.embed_lora.param_count() + self.head_lora.param_count()
    }

    /// Mutable views of the adapter parameters in a fixed order.
    pub fn adapter_params_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [
            &mut self.embed_lora.down.data,
            &mut self.embed_lora.up.data,
            &mut self.head_lora.down.data,
            &mut self.head_lora.up.data,
        ]
    }

    pub(crate) fn round_adapters_to_f32(&mut self) {
        self.embed_lora.down.round_to_f32();
        self.embed_lora.up.round_to_f32();
        self.head_lora.down.round_to_f32();
        self.head_lora.up.round_to_f32();
    }

    fn check_input(&self, seq: &ImageSequence) -> Result<()> {
        let c = &self.config;
        if seq.width != c.input_width() || seq.height != c.input_height() {
            return Err(DistillError::Config(format!(
                "input {}x{} does not match model input {}x{}",
                seq.height,
                seq.width,
                c.input_height(),
                c.input_width()
            )));
        }
        if seq.len() != c.frames() {
            return Err(DistillError::Config(format!(
                "sequence has {} frames, model expects {}",
                seq.len(),
                c.frames()
            )));
        }
        Ok(())
    }

    fn patches(&self, seq: &ImageSequence) -> Matrix {
        let c = &self.config;
        let p = c.patch;
        Matrix::from_fn(c.cells(), c.patch_dim(), |cell, k| {
            let (gi, gj) = (cell / c.grid_width, cell % c.grid_width);
            let f = k / (p * p);
            let (dy, dx) = ((k % (p * p)) / p, k % p);
            seq.frames[f][(gi * p + dy) * seq.width + gj * p + dx]
        })
    }

    fn trace(&self, seq: &ImageSequence) -> Result<ForwardTrace> {
        self.check_input(seq)?;
        let embed_eff = self.base.embed.add(&self.embed_lora.delta());
        let head_eff = self.base.head.add(&self.head_lora.delta());
        let patches = self.patches(seq);
        // cells x hidden
        let mut hidden = patches.matmul_t(&embed_eff);
        for (k, v) in hidden.data.iter_mut().enumerate() {
            let e = k % self.config.hidden;
            *v = (*v + self.base.embed_bias[e] + self.base.position_bias.data[k]).tanh();
        }
        let output = (0..self.config.cells())
            .map(|c| {
                let s: f64 = (0..self.config.hidden)
                    .map(|e| head_eff.data[e] * hidden.at(c, e))
                    .sum();
                sigmoid(s + self.base.head_bias)
            })
            .collect();
        Ok(ForwardTrace {
            patches,
            hidden,
            output,
            head_eff,
        })
    }

    /// Per-cell attention in `(0, 1)` at full precision.
    pub fn forward_raw(&self, seq: &ImageSequence) -> Result<Vec<f64>> {
        Ok(self.trace(seq)?.output)
    }

    pub fn forward(&self, seq: &ImageSequence) -> Result<AttentionMap> {
        let raw = self.forward_raw(seq)?;
        Ok(AttentionMap::from_f64(
            self.config.grid_width,
            self.config.grid_height,
            &raw,
            MapRole::Distilled,
            MapFrame::Image,
        )?)
    }

    /// Blended cosine loss and its exact gradient with respect to every
    /// adapter entry. Base weights get no gradient.
    pub fn loss_and_gradients(
        &self,
        seq: &ImageSequence,
        a_pre: &[f64],
        a_vlm: &[f64],
        lambda: f64,
        eps: f64,
    ) -> Result<(f64, LoraGradients)> {
        let t = self.trace(seq)?;
        let cells = self.config.cells();
        if a_pre.len() != cells || a_vlm.len() != cells {
            return Err(DistillError::Shape(format!(
                "targets must have {cells} cells, got {} and {}",
                a_pre.len(),
                a_vlm.len()
            )));
        }
        let loss = super::loss::blended_loss(&t.output, a_pre, a_vlm, lambda, eps);

        let mut d_out = vec![0.0; cells];
        super::loss::cosine_distance_grad(&t.output, a_pre, eps, 1.0 - lambda, &mut d_out);
        super::loss::cosine_distance_grad(&t.output, a_vlm, eps, lambda, &mut d_out);

        let hid = self.config.hidden;
        // dL/ds_c
        let d_score: Vec<f64> = d_out
            .iter()
            .zip(&t.output)
            .map(|(g, y)| g * y * (1.0 - y))
            .collect();
        // dL/d(head_eff): 1 x hidden
        let mut d_head = Matrix::zeros(1, hid);
        for c in 0..cells {
            for e in 0..hid {
                d_head.data[e] += d_score[c] * t.hidden.at(c, e);
            }
        }
        // dL/dz: cells x hidden
        let d_pre = Matrix::from_fn(cells, hid, |c, e| {
            let h = t.hidden.at(c, e);
            d_score[c] * t.head_eff.data[e] * (1.0 - h * h)
        });
        // dL/d(embed_eff): hidden x patch_dim
        let d_embed = d_pre.t_matmul(&t.patches);

        let mut grads = LoraGradients::zeros_like(self);
        // W_eff = W + B A  =>  dB = G A^T, dA = B^T G
        grads.embed.up = d_embed.matmul_t(&self.embed_lora.down);
        grads.embed.down = self.embed_lora.up.t_matmul(&d_embed);
        grads.head.up = d_head.matmul_t(&self.head_lora.down);
        grads.head.down = self.head_lora.up.t_matmul(&d_head);
        Ok((loss, grads))
    }

    /// Serialized base weights (binary32 LE), used to check they stay frozen.
    pub fn base_weight_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        super::model_file::write_base(&mut out, &self.base);
        out
    }
}

/// Averages per-sample gradients in the given order.
pub(crate) fn mean_gradients(model: &AttentionModel, parts: &[LoraGradients]) -> LoraGradients {
    let mut acc = LoraGradients::zeros_like(model);
    let k = 1.0 / parts.len().max(1) as f64;
    for g in parts {
        acc.add_scaled(g, k);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            grid_width: 4,
            grid_height: 4,
            patch: 2,
            history: 1,
            hidden: 6,
            rank: 2,
        }
    }

    fn seq(cfg: &ModelConfig, seed: u64) -> ImageSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = cfg.input_width() * cfg.input_height();
        ImageSequence::new(
            cfg.input_width(),
            cfg.input_height(),
            (0..cfg.frames())
                .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_adapters_equal_base() {
        let cfg = tiny();
        let m = AttentionModel::new(cfg, 3).unwrap();
        let s = seq(&cfg, 1);
        assert_eq!(
            m.forward_raw(&s).unwrap(),
            m.base_model().forward_raw(&s).unwrap()
        );
    }

    #[test]
    fn black_input_zero_biases_gives_half() {
        let cfg = tiny();
        let mut m = AttentionModel::new(cfg, 3).unwrap();
        m.base.embed_bias.iter_mut().for_each(|b| *b = 0.0);
        m.base.position_bias.data.iter_mut().for_each(|b| *b = 0.0);
        m.base.head_bias = 0.0;
        let n = cfg.input_width() * cfg.input_height();
        let black =
            ImageSequence::new(cfg.input_width(), cfg.input_height(), vec![vec![0.0; n]; 2])
                .unwrap();
        let out = m.forward(&black).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn forward_is_deterministic() {
        let cfg = tiny();
        let m = AttentionModel::new(cfg, 9).unwrap();
        let s = seq(&cfg, 2);
        let first = m.forward(&s).unwrap();
        for _ in 0..100 {
            assert_eq!(m.forward(&s).unwrap(), first);
        }
        assert_eq!(AttentionModel::new(cfg, 9).unwrap(), m);
    }

    #[test]
    fn shape_mismatch_is_config_error() {
        let cfg = tiny();
        let m = AttentionModel::new(cfg, 1).unwrap();
        let bad = ImageSequence::new(3, 3, vec![vec![0.0; 9]; 2]).unwrap();
        assert!(matches!(m.forward(&bad), Err(DistillError::Config(_))));
        let short = ImageSequence::new(8, 8, vec![vec![0.0; 64]]).unwrap();
        assert!(matches!(m.forward(&short), Err(DistillError::Config(_))));
    }

    #[test]
    fn gradient_shapes_match_adapters() {
        let cfg = tiny();
        let m = AttentionModel::new(cfg, 1).unwrap();
        let s = seq(&cfg, 4);
        let t = vec![0.5; 16];
        let (_, g) = m.loss_and_gradients(&s, &t, &t, 0.5, 1e-8).unwrap();
        assert_eq!(g.embed.down.shape(), m.embed_lora.down.shape());
        assert_eq!(g.embed.up.shape(), m.embed_lora.up.shape());
        assert_eq!(g.head.down.shape(), m.head_lora.down.shape());
        assert_eq!(g.head.up.shape(), m.head_lora.up.shape());
        assert_eq!(g.flatten().len(), m.trainable_params());
    }

    #[test]
    fn gradient_vanishes_at_targets() {
        let cfg = tiny();
        let m = AttentionModel::new(cfg, 5).unwrap();
        let s = seq(&cfg, 6);
        let pred = m.forward_raw(&s).unwrap();
        let (loss, g) = m.loss_and_gradients(&s, &pred, &pred, 0.3, 1e-8).unwrap();
        assert!(loss.abs() < 1e-12);
        assert!(g.max_abs() < 1e-12);
    }
}
