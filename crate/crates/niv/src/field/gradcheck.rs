//! Finite-difference verification of the analytic gradients.
//!
//! The evaluator re-implements encode + matrix walk in f64, independent of
//! the production forward path, and freezes the relative-L2 denominators at
//! the base parameters — exactly the function whose true derivative the
//! stop-gradient loss defines.

use rand::Rng;

use super::backprop::{batch_gradients, BatchWorkspace, Gradients};
use super::encoding::corner_weights;
use super::{LossNormalization, NeuralFieldModel, OutputActivation, PositionEncoding, LOSS_EPSILON};
use crate::dataset::IrradianceSample;
use crate::rng::{stream_rng, Stream};

/// Independent f64 forward pass over candidate parameters.
pub fn forward_f64(model: &NeuralFieldModel, params: &[f64], s: &IrradianceSample) -> [f64; 3] {
    let cfg = &model.config;
    let mut input: Vec<f64> = Vec::with_capacity(cfg.input_dim());
    match cfg.position_encoding {
        PositionEncoding::Frequency { bands } => {
            for p in s.position.to_array() {
                push_bands(&mut input, p as f64, bands);
            }
        }
        PositionEncoding::HashGrid(grid) => {
            let f = grid.feature_dim as usize;
            let mask = grid.table_size() - 1;
            for layout in &model.levels {
                let corners = corner_weights(layout, mask, s.position);
                for feat in 0..f {
                    let mut acc = 0.0f64;
                    for (entry, w) in corners {
                        acc += w as f64 * params[entry * f + feat];
                    }
                    input.push(acc);
                }
            }
        }
    }
    for d in s.direction.to_array() {
        input.push(d as f64);
    }
    if cfg.direction_freq_bands > 0 {
        for d in s.direction.to_array() {
            push_bands(&mut input, d as f64, cfg.direction_freq_bands);
        }
    }
    for p in &s.extra_params[..cfg.param_count as usize] {
        if cfg.param_freq_bands > 0 {
            push_bands(&mut input, *p as f64, cfg.param_freq_bands);
        } else {
            input.push(*p as f64);
        }
    }

    let mut act = input;
    for (layer, (ind, outd)) in cfg.layer_dims().iter().enumerate() {
        let (wo, bo) = model.layout.layers[layer];
        let mut next = vec![0.0f64; *outd];
        for (o, slot) in next.iter_mut().enumerate() {
            let mut acc = params[bo + o];
            for i in 0..*ind {
                acc += params[wo + o * ind + i] * act[i];
            }
            *slot = if layer < 3 { acc.max(0.0) } else { acc };
        }
        act = next;
    }
    let mut out = [0.0f64; 3];
    for (c, slot) in out.iter_mut().enumerate() {
        *slot = match cfg.output_activation {
            OutputActivation::Softplus => act[c].exp().ln_1p(),
            OutputActivation::Identity => act[c],
        };
    }
    out
}

fn push_bands(out: &mut Vec<f64>, p: f64, bands: u32) {
    let mut f = std::f64::consts::PI;
    for _ in 0..bands {
        out.push((f * p).sin());
        out.push((f * p).cos());
        f *= 2.0;
    }
}

fn frozen_loss(
    model: &NeuralFieldModel,
    params: &[f64],
    denoms: &[[f64; 3]],
    samples: &[IrradianceSample],
) -> f64 {
    let mut total = 0.0;
    for (s, denom) in samples.iter().zip(denoms) {
        let pred = forward_f64(model, params, s);
        let mut loss = 0.0;
        for c in 0..3 {
            let d = pred[c] - s.target.channel(c) as f64;
            loss += d * d / denom[c];
        }
        total += loss / 3.0;
    }
    total / samples.len() as f64
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOutcome {
    pub probes: usize,
    pub failures: usize,
}

/// Compares the analytic batch gradient to central finite differences
/// (`h`, f64 accumulation) on `n_probes` parameters split between the MLP
/// and hash latents referenced by the batch. A probe fails when the
/// relative error reaches 1e-3 (both magnitudes above 1e-7).
pub fn finite_difference_check(
    model: &NeuralFieldModel,
    samples: &[IrradianceSample],
    n_probes: usize,
    h: f64,
    probe_seed: u64,
) -> GradCheckOutcome {
    let indices: Vec<u32> = (0..samples.len() as u32).collect();
    let mut workspace = BatchWorkspace::new(model, samples.len());
    let mut grads = Gradients::new(model);
    batch_gradients(
        model,
        samples,
        &indices,
        LossNormalization::PerChannel,
        &mut workspace,
        &mut grads,
    )
    .expect("finite gradients");

    let params: Vec<f64> = model.params.iter().map(|&p| p as f64).collect();
    let denoms: Vec<[f64; 3]> = samples
        .iter()
        .map(|s| {
            let pred = forward_f64(model, &params, s);
            [
                pred[0] * pred[0] + LOSS_EPSILON as f64,
                pred[1] * pred[1] + LOSS_EPSILON as f64,
                pred[2] * pred[2] + LOSS_EPSILON as f64,
            ]
        })
        .collect();

    // Hash latents actually referenced by the batch (untouched ones are
    // trivially zero on both sides).
    let hash_len = model.layout.hash_len;
    let mut touched: Vec<usize> = Vec::new();
    if let PositionEncoding::HashGrid(grid) = model.config.position_encoding {
        let f = grid.feature_dim as usize;
        let mask = grid.table_size() - 1;
        for s in samples {
            for layout in &model.levels {
                for (entry, _) in corner_weights(layout, mask, s.position) {
                    touched.push(entry * f);
                }
            }
        }
        touched.sort_unstable();
        touched.dedup();
    }

    let mut rng = stream_rng(probe_seed, Stream::Eval, 0);
    let mut probes: Vec<usize> = Vec::with_capacity(n_probes);
    let mlp_probes = if touched.is_empty() { n_probes } else { n_probes / 2 };
    for _ in 0..mlp_probes {
        probes.push(hash_len + rng.gen_range(0..model.layout.total - hash_len));
    }
    while probes.len() < n_probes {
        let t = touched[rng.gen_range(0..touched.len())];
        probes.push(t + rng.gen_range(0..4));
    }

    let mut failures = 0usize;
    for &idx in &probes {
        let mut plus = params.clone();
        plus[idx] += h;
        let mut minus = params.clone();
        minus[idx] -= h;
        let fd = (frozen_loss(model, &plus, &denoms, samples)
            - frozen_loss(model, &minus, &denoms, samples))
            / (2.0 * h);
        let analytic = grads.flat[idx] as f64;
        let scale = fd.abs().max(analytic.abs());
        if scale > 1e-7 && (fd - analytic).abs() / scale >= 1e-3 {
            failures += 1;
        }
    }
    GradCheckOutcome {
        probes: probes.len(),
        failures,
    }
}
