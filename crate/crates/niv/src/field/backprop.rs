//! Hand-written backpropagation.
//!
//! The batch gradient is assembled from fixed-size chunks: each chunk is
//! processed by one task into private buffers, and the buffers are merged
//! serially in chunk order. The reduction order is therefore independent
//! of thread count, which keeps training bit-deterministic.


use rayon::prelude::*;

use super::encoding::corner_weights;
use super::{
    sigmoid, FieldError, LossNormalization, ModelConfig, NeuralFieldModel, OutputActivation,
    PositionEncoding, LOSS_EPSILON,
};
use crate::dataset::IrradianceSample;
use crate::rgb::Rgb;

/// Samples per gradient chunk; fixed so results never depend on the worker
/// count.
const CHUNK: usize = 512;

/// Per-thread forward/backward workspace.
pub struct Scratch {
    /// `[encoded input, a1, a2, a3, z_out]`.
    pub activations: Vec<Vec<f32>>,
    deltas: Vec<Vec<f32>>,
    d_input: Vec<f32>,
}

impl Scratch {
    pub fn new(config: &ModelConfig) -> Scratch {
        let dims = config.layer_dims();
        let mut activations = Vec::with_capacity(5);
        activations.push(Vec::with_capacity(config.input_dim()));
        for (_, outd) in dims {
            activations.push(Vec::with_capacity(outd));
        }
        Scratch {
            activations,
            deltas: dims.iter().map(|(_, o)| vec![0.0; *o]).collect(),
            d_input: vec![0.0; config.input_dim()],
        }
    }
}

/// Gradient contributions of one chunk of samples.
pub struct ChunkGrads {
    /// Dense gradients for everything after the hash table.
    mlp: Vec<f32>,
    /// Sparse hash-table contributions: `(entry index, feature grads)`.
    /// Collided entries simply accumulate when merged.
    hash: Vec<(u32, [f32; 4])>,
    loss_sum: f64,
    count: usize,
}

impl ChunkGrads {
    fn new(model: &NeuralFieldModel) -> ChunkGrads {
        ChunkGrads {
            mlp: vec![0.0; model.layout.total - model.layout.hash_len],
            hash: Vec::new(),
            loss_sum: 0.0,
            count: 0,
        }
    }

    fn reset(&mut self) {
        self.mlp.fill(0.0);
        self.hash.clear();
        self.loss_sum = 0.0;
        self.count = 0;
    }
}

/// Flat gradient vector mirroring the model's parameter layout.
pub struct Gradients {
    pub flat: Vec<f32>,
}

impl Gradients {
    pub fn new(model: &NeuralFieldModel) -> Gradients {
        Gradients {
            flat: vec![0.0; model.layout.total],
        }
    }
}

/// Reusable buffers for batched gradient evaluation.
pub struct BatchWorkspace {
    chunks: Vec<ChunkGrads>,
}

impl BatchWorkspace {
    pub fn new(model: &NeuralFieldModel, batch_size: usize) -> BatchWorkspace {
        let n = batch_size.div_ceil(CHUNK);
        BatchWorkspace {
            chunks: (0..n).map(|_| ChunkGrads::new(model)).collect(),
        }
    }
}

fn loss_and_output_grad(pred: Rgb, target: Rgb, norm: LossNormalization) -> (f32, [f32; 3]) {
    let mut loss = 0.0f32;
    let mut grad = [0.0f32; 3];
    match norm {
        LossNormalization::PerChannel => {
            for c in 0..3 {
                let p = pred.channel(c);
                let d = p - target.channel(c);
                let denom = p * p + LOSS_EPSILON;
                loss += d * d / denom;
                grad[c] = 2.0 * d / (denom * 3.0);
            }
            loss /= 3.0;
        }
        LossNormalization::PerSample => {
            let denom = (pred.r * pred.r + pred.g * pred.g + pred.b * pred.b) / 3.0 + LOSS_EPSILON;
            for c in 0..3 {
                let d = pred.channel(c) - target.channel(c);
                loss += d * d / denom;
                grad[c] = 2.0 * d / (denom * 3.0);
            }
            loss /= 3.0;
        }
    }
    (loss, grad)
}

/// Forward + backward for one sample, accumulating into `chunk`.
fn backward_sample(
    model: &NeuralFieldModel,
    sample: &IrradianceSample,
    norm: LossNormalization,
    scratch: &mut Scratch,
    chunk: &mut ChunkGrads,
) -> f32 {
    let pred = model.forward_cached(
        sample.position,
        sample.direction,
        &sample.extra_params,
        scratch,
    );
    let (loss, d_out) = loss_and_output_grad(pred, sample.target, norm);

    let dims = model.config.layer_dims();
    let hash_len = model.layout.hash_len;

    // Head nonlinearity.
    {
        let z = &scratch.activations[4];
        let delta = &mut scratch.deltas[3];
        for c in 0..3 {
            let dact = match model.config.output_activation {
                OutputActivation::Softplus => sigmoid(z[c]),
                OutputActivation::Identity => 1.0,
            };
            delta[c] = d_out[c] * dact;
        }
    }

    // Walk the layers backward: accumulate weight/bias grads, then push the
    // delta through the transpose. For hidden layers the pushed delta is
    // masked by ReLU'; layer 0 pushes into the encoded-input gradient.
    for layer in (0..4).rev() {
        let (ind, outd) = dims[layer];
        let (wo, bo) = model.layout.layers[layer];
        let weights = &model.params[wo..wo + ind * outd];
        let inputs = &scratch.activations[layer];

        let (lower, delta): (&mut [f32], &[f32]) = if layer == 0 {
            (&mut scratch.d_input, &scratch.deltas[0])
        } else {
            let (head, tail) = scratch.deltas.split_at_mut(layer);
            (&mut head[layer - 1], &tail[0])
        };

        let (gw, gb) = chunk.mlp[wo - hash_len..bo - hash_len + outd].split_at_mut(ind * outd);
        lower.iter_mut().for_each(|v| *v = 0.0);
        for o in 0..outd {
            let d = delta[o];
            if d == 0.0 {
                continue;
            }
            gb[o] += d;
            let row = &mut gw[o * ind..(o + 1) * ind];
            for (g, x) in row.iter_mut().zip(inputs) {
                *g += d * x;
            }
            let wrow = &weights[o * ind..(o + 1) * ind];
            for (l, w) in lower.iter_mut().zip(wrow) {
                *l += d * w;
            }
        }
        if layer > 0 {
            // ReLU': the stored activation is already max(z, 0).
            for (l, a) in lower.iter_mut().zip(inputs) {
                if *a <= 0.0 {
                    *l = 0.0;
                }
            }
        }
    }

    if let PositionEncoding::HashGrid(cfg) = model.config.position_encoding {
        let f = cfg.feature_dim as usize;
        let mask = cfg.table_size() - 1;
        for (level, layout) in model.levels.iter().enumerate() {
            let d_level = &scratch.d_input[level * f..(level + 1) * f];
            for (entry, w) in corner_weights(layout, mask, sample.position) {
                let mut g = [0.0f32; 4];
                for (slot, dv) in g.iter_mut().zip(d_level) {
                    *slot = w * dv;
                }
                chunk.hash.push((entry as u32, g));
            }
        }
    }

    loss
}

/// Mean loss and mean gradient over `indices` into `set`, written to
/// `grads`. Deterministic for a fixed batch regardless of thread count.
pub fn batch_gradients(
    model: &NeuralFieldModel,
    samples: &[IrradianceSample],
    indices: &[u32],
    norm: LossNormalization,
    workspace: &mut BatchWorkspace,
    grads: &mut Gradients,
) -> Result<f64, FieldError> {
    let n_chunks = indices.len().div_ceil(CHUNK);
    assert!(n_chunks <= workspace.chunks.len());

    workspace.chunks[..n_chunks]
        .par_iter_mut()
        .zip(indices.par_chunks(CHUNK))
        .for_each(|(chunk, ids)| {
            chunk.reset();
            let mut scratch = Scratch::new(&model.config);
            for &i in ids {
                let loss = backward_sample(model, &samples[i as usize], norm, &mut scratch, chunk);
                chunk.loss_sum += loss as f64;
                chunk.count += 1;
            }
        });

    // Serial merge in chunk order.
    grads.flat.fill(0.0);
    let hash_len = model.layout.hash_len;
    let mut total_loss = 0.0f64;
    let mut total_count = 0usize;
    let f = match model.config.position_encoding {
        PositionEncoding::HashGrid(cfg) => cfg.feature_dim as usize,
        PositionEncoding::Frequency { .. } => 0,
    };
    for chunk in &workspace.chunks[..n_chunks] {
        total_loss += chunk.loss_sum;
        total_count += chunk.count;
        let (hash_part, mlp_part) = grads.flat.split_at_mut(hash_len);
        for (g, c) in mlp_part.iter_mut().zip(&chunk.mlp) {
            *g += c;
        }
        for (entry, g) in &chunk.hash {
            let base = *entry as usize * f;
            for (slot, v) in hash_part[base..base + f].iter_mut().zip(g) {
                *slot += v;
            }
        }
    }

    let inv = 1.0 / total_count.max(1) as f32;
    for g in &mut grads.flat {
        *g *= inv;
    }

    if grads.flat[..hash_len].iter().any(|g| !g.is_finite()) {
        return Err(FieldError::NonFiniteGradient("hash table"));
    }
    if grads.flat[hash_len..].iter().any(|g| !g.is_finite()) {
        return Err(FieldError::NonFiniteGradient("mlp"));
    }
    Ok(total_loss / total_count.max(1) as f64)
}
