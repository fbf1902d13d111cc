//! The trainable irradiance field: input encodings feeding a four-layer
//! ReLU MLP, trained by hand-written backpropagation against the
//! relative-L2 loss.
//!
//! All parameters live in one flat `f32` vector — hash-table entries first
//! (level-major), then each layer's row-major weights and biases. The flat
//! layout is shared by the optimizer, the serialized `NIVM` blob and the
//! finite-difference tests.

pub mod backprop;
pub mod encoding;
pub mod gradcheck;
pub mod io;
pub mod optim;
pub mod train;

use glam::Vec3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::rgb::Rgb;
use crate::rng::{stream_rng, Stream};
use crate::scene::Aabb;
use encoding::{HashGridConfig, LevelLayout};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("model configuration error: {0}")]
    Config(String),
    #[error("model expects {expected} extra parameters, dataset has {got}")]
    ParamArity { expected: u32, got: u32 },
    #[error("non-finite loss at iteration {iteration}; checkpoint retains the last finite state")]
    NonFiniteLoss { iteration: u32 },
    #[error("non-finite gradient in parameter block '{0}'")]
    NonFiniteGradient(&'static str),
    #[error("invalid training config: {0}")]
    TrainConfig(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a NIV model file")]
    BadMagic,
    #[error("unsupported NIVM version {0}")]
    BadVersion(u32),
    #[error("truncated model file")]
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PositionEncoding {
    Frequency { bands: u32 },
    HashGrid(HashGridConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    /// `ln(1 + e^x)`: smooth, strictly positive, keeps the relative-L2
    /// denominator well behaved.
    Softplus,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetQuantity {
    Irradiance,
    IncidentRadiance,
}

/// Architecture description; everything needed to rebuild the layer shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub position_encoding: PositionEncoding,
    /// 0 feeds the raw direction vector only; `B > 0` appends `B` bands.
    pub direction_freq_bands: u32,
    /// Extra variable scene parameters (0..=2).
    pub param_count: u32,
    /// Frequency bands applied to extra parameters (0 = raw).
    pub param_freq_bands: u32,
    pub hidden_width: u32,
    pub output_activation: OutputActivation,
    pub target_quantity: TargetQuantity,
}

impl ModelConfig {
    /// Hash-grid model at the published defaults.
    pub fn hash(levels: u32, table_size_log2: u32, hidden_width: u32) -> ModelConfig {
        ModelConfig {
            position_encoding: PositionEncoding::HashGrid(HashGridConfig {
                levels,
                table_size_log2,
                ..Default::default()
            }),
            direction_freq_bands: 0,
            param_count: 0,
            param_freq_bands: 4,
            hidden_width,
            output_activation: OutputActivation::Softplus,
            target_quantity: TargetQuantity::Irradiance,
        }
    }

    /// Frequency-encoded model (the small end of the capacity ladder).
    pub fn frequency(bands: u32, hidden_width: u32) -> ModelConfig {
        ModelConfig {
            position_encoding: PositionEncoding::Frequency { bands },
            direction_freq_bands: 0,
            param_count: 0,
            param_freq_bands: 4,
            hidden_width,
            output_activation: OutputActivation::Softplus,
            target_quantity: TargetQuantity::Irradiance,
        }
    }

    pub fn position_dim(&self) -> usize {
        match self.position_encoding {
            PositionEncoding::Frequency { bands } => 6 * bands as usize,
            PositionEncoding::HashGrid(cfg) => cfg.output_dim(),
        }
    }

    pub fn direction_dim(&self) -> usize {
        3 + 6 * self.direction_freq_bands as usize
    }

    pub fn param_dim(&self) -> usize {
        let k = self.param_count as usize;
        if self.param_freq_bands > 0 {
            k * 2 * self.param_freq_bands as usize
        } else {
            k
        }
    }

    pub fn input_dim(&self) -> usize {
        self.position_dim() + self.direction_dim() + self.param_dim()
    }

    /// `(in, out)` per layer: three hidden layers plus the RGB head.
    pub fn layer_dims(&self) -> [(usize, usize); 4] {
        let w = self.hidden_width as usize;
        [(self.input_dim(), w), (w, w), (w, w), (w, 3)]
    }

    fn validate(&self) -> Result<(), FieldError> {
        if self.param_count > 2 {
            return Err(FieldError::Config("at most 2 extra parameters".into()));
        }
        if !matches!(self.hidden_width, 16 | 32 | 64) {
            return Err(FieldError::Config(format!(
                "hidden width {} not in {{16, 32, 64}}",
                self.hidden_width
            )));
        }
        if let PositionEncoding::HashGrid(cfg) = self.position_encoding {
            if !(2..=8).contains(&cfg.levels) {
                return Err(FieldError::Config(format!(
                    "hash levels {} outside [2, 8]",
                    cfg.levels
                )));
            }
        }
        if let PositionEncoding::Frequency { bands } = self.position_encoding {
            if bands == 0 {
                return Err(FieldError::Config("frequency bands must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Offsets of the parameter blocks inside the flat vector.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    /// Scalars in the hash table (0 for frequency models).
    pub hash_len: usize,
    /// Per layer: (weights offset, bias offset).
    pub layers: [(usize, usize); 4],
    pub total: usize,
}

fn param_layout(config: &ModelConfig) -> ParamLayout {
    let hash_len = match config.position_encoding {
        PositionEncoding::HashGrid(cfg) => cfg.total_entries() * cfg.feature_dim as usize,
        PositionEncoding::Frequency { .. } => 0,
    };
    let mut offset = hash_len;
    let mut layers = [(0usize, 0usize); 4];
    for (i, (ind, outd)) in config.layer_dims().iter().enumerate() {
        layers[i] = (offset, offset + ind * outd);
        offset += ind * outd + outd;
    }
    ParamLayout {
        hash_len,
        layers,
        total: offset,
    }
}

#[derive(Debug, Clone)]
pub struct NeuralFieldModel {
    pub config: ModelConfig,
    /// Static scene bounds the positions were normalized by.
    pub bbox: Aabb,
    pub layout: ParamLayout,
    pub levels: Vec<LevelLayout>,
    /// Flat parameters: hash table (level-major, `feature_dim` scalars per
    /// entry), then per layer row-major weights and biases.
    pub params: Vec<f32>,
    /// Seed of the dataset this model was trained on (0 before training).
    pub data_seed: u64,
    pub train_seed: u64,
}

impl NeuralFieldModel {
    /// Builds a model with He-uniform MLP weights, zero biases and the hash
    /// table near zero, all drawn deterministically from `seed`.
    pub fn new(config: ModelConfig, bbox: Aabb, seed: u64) -> Result<NeuralFieldModel, FieldError> {
        config.validate()?;
        let layout = param_layout(&config);
        let levels = match config.position_encoding {
            PositionEncoding::HashGrid(cfg) => cfg.layouts(),
            PositionEncoding::Frequency { .. } => vec![],
        };
        let mut params = vec![0.0f32; layout.total];
        let mut rng = stream_rng(seed, Stream::ModelInit, 0);
        for p in &mut params[..layout.hash_len] {
            *p = rng.gen_range(-1e-4..1e-4);
        }
        for (i, (ind, outd)) in config.layer_dims().iter().enumerate() {
            let limit = (6.0 / *ind as f32).sqrt();
            let (wo, bo) = layout.layers[i];
            for p in &mut params[wo..wo + ind * outd] {
                *p = rng.gen_range(-limit..limit);
            }
            // biases at [bo..] stay zero
            debug_assert_eq!(bo, wo + ind * outd);
        }
        Ok(NeuralFieldModel {
            config,
            bbox,
            layout,
            levels,
            params,
            data_seed: 0,
            train_seed: 0,
        })
    }

    pub fn hash_table(&self) -> &[f32] {
        &self.params[..self.layout.hash_len]
    }

    /// Serialized payload size at the given storage precision; equals the
    /// `NIVM` file size minus its header.
    pub fn memory_bytes(&self, precision: io::Precision) -> usize {
        self.params.len() * precision.bytes_per_param()
    }

    /// Writes the encoded input for `(position, direction, params)` into
    /// `out` (cleared first). `position` is in unit-cube coordinates.
    pub fn encode_input(&self, position: Vec3, direction: Vec3, extra: &[f32], out: &mut Vec<f32>) {
        out.clear();
        match self.config.position_encoding {
            PositionEncoding::Frequency { bands } => {
                encoding::freq_encode(&position.to_array(), bands, out)
            }
            PositionEncoding::HashGrid(cfg) => {
                encoding::hash_encode(&cfg, &self.levels, self.hash_table(), position, out)
            }
        }
        out.extend_from_slice(&direction.to_array());
        if self.config.direction_freq_bands > 0 {
            encoding::freq_encode(&direction.to_array(), self.config.direction_freq_bands, out);
        }
        let k = self.config.param_count as usize;
        if self.config.param_freq_bands > 0 {
            encoding::freq_encode(&extra[..k], self.config.param_freq_bands, out);
        } else {
            out.extend_from_slice(&extra[..k]);
        }
        debug_assert_eq!(out.len(), self.config.input_dim());
    }

    pub(crate) fn weights(&self, layer: usize) -> (&[f32], &[f32]) {
        let (ind, outd) = self.config.layer_dims()[layer];
        let (wo, bo) = self.layout.layers[layer];
        (
            &self.params[wo..wo + ind * outd],
            &self.params[bo..bo + outd],
        )
    }

    /// Deterministic forward pass; `position` in the unit cube.
    pub fn forward(&self, position: Vec3, direction: Vec3, extra: &[f32]) -> Rgb {
        let mut scratch = backprop::Scratch::new(&self.config);
        self.forward_cached(position, direction, extra, &mut scratch)
    }

    pub(crate) fn forward_cached(
        &self,
        position: Vec3,
        direction: Vec3,
        extra: &[f32],
        scratch: &mut backprop::Scratch,
    ) -> Rgb {
        let mut input = std::mem::take(&mut scratch.activations[0]);
        self.encode_input(position, direction, extra, &mut input);
        scratch.activations[0] = input;
        for layer in 0..4 {
            let (w, b) = self.weights(layer);
            let (ind, outd) = self.config.layer_dims()[layer];
            let (prev, rest) = scratch.activations.split_at_mut(layer + 1);
            let prev = &prev[layer];
            let next = &mut rest[0];
            next.clear();
            for o in 0..outd {
                let row = &w[o * ind..(o + 1) * ind];
                let acc = b[o] + dot(prev, row);
                // Hidden layers are ReLU; the head keeps its pre-activation
                // for the output nonlinearity below.
                next.push(if layer < 3 { acc.max(0.0) } else { acc });
            }
        }
        let z = &scratch.activations[4];
        match self.config.output_activation {
            OutputActivation::Softplus => Rgb::new(softplus(z[0]), softplus(z[1]), softplus(z[2])),
            OutputActivation::Identity => Rgb::new(z[0], z[1], z[2]),
        }
    }

    /// Batched read-only inference, parallel over the inputs.
    pub fn infer_batch(&self, inputs: &[(Vec3, Vec3, [f32; 2])]) -> Vec<Rgb> {
        inputs
            .par_iter()
            .map_init(
                || backprop::Scratch::new(&self.config),
                |scratch, (p, d, e)| self.forward_cached(*p, *d, e, scratch),
            )
            .collect()
    }
}

/// Dot product with four fixed partial sums. The summation order is part of
/// the determinism contract; the unroll exists so the compiler can keep the
/// lanes in SIMD registers.
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let (x, y) = (&a[i * 4..i * 4 + 4], &b[i * 4..i * 4 + 4]);
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn softplus(x: f32) -> f32 {
    if x > 20.0 {
        x
    } else if x < -20.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

impl crate::render::IrradianceProvider for NeuralFieldModel {
    fn irradiance(&self, position: Vec3, n: Vec3, params: &[f32], _rng: &mut ChaCha8Rng) -> Rgb {
        let mut extra = [0.0f32; 2];
        let k = params.len().min(2);
        extra[..k].copy_from_slice(&params[..k]);
        self.forward(position, n, &extra)
    }

    fn param_count(&self) -> usize {
        self.config.param_count as usize
    }

    fn label(&self) -> &'static str {
        "niv"
    }
}

/// The `epsilon` in the relative-L2 denominator.
pub const LOSS_EPSILON: f32 = 0.01;

/// Relative L2 loss of a prediction against its target:
/// `mean_c (p_c - t_c)^2 / (sg(p_c)^2 + 0.01)`. The denominator is a
/// constant to the gradient (the stop-gradient of the formulation).
pub fn loss_relative_l2(pred: Rgb, target: Rgb) -> f32 {
    let mut sum = 0.0;
    for c in 0..3 {
        let d = pred.channel(c) - target.channel(c);
        sum += d * d / (pred.channel(c) * pred.channel(c) + LOSS_EPSILON);
    }
    sum / 3.0
}

/// Denominator variant; the formulation is ambiguous between per-channel
/// and per-sample normalization, per-channel being the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossNormalization {
    PerChannel,
    /// One shared denominator per sample: `mean_c sg(p_c^2) + epsilon`.
    PerSample,
}

#[cfg(test)]
mod tests;
