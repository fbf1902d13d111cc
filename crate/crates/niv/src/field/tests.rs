use glam::Vec3;
use rand::Rng;

use super::encoding::corner_weights;
use super::train::{train, TrainConfig};
use super::*;
use crate::dataset::{IrradianceSample, SampleSet};
use crate::rng::{stream_rng, Stream};

fn unit_bbox() -> Aabb {
    Aabb {
        min: Vec3::ZERO,
        max: Vec3::ONE,
    }
}

fn random_sample(rng: &mut rand_chacha::ChaCha8Rng, param_count: usize) -> IrradianceSample {
    let mut extra = [0.0f32; 2];
    for slot in extra.iter_mut().take(param_count) {
        *slot = rng.gen();
    }
    IrradianceSample {
        position: Vec3::new(rng.gen(), rng.gen(), rng.gen()),
        direction: crate::scene::sampling::uniform_sphere(rng.gen(), rng.gen()),
        extra_params: extra,
        target: Rgb::new(rng.gen(), rng.gen(), rng.gen()),
        on_surface: false,
        backface_fraction: 0.0,
    }
}

fn synthetic_set(n: usize, param_count: usize, seed: u64, target: Option<Rgb>) -> SampleSet {
    let mut rng = stream_rng(seed, Stream::Eval, 0);
    let samples = (0..n)
        .map(|_| {
            let mut s = random_sample(&mut rng, param_count);
            if let Some(t) = target {
                s.target = t;
            }
            s
        })
        .collect();
    SampleSet {
        samples,
        scene_hash: [0; 32],
        spp_used: 1,
        seed,
        surface_fraction: 0.0,
        n_extra_params: param_count as u32,
    }
}

#[test]
fn zero_parameters_give_activation_of_zero() {
    let mut config = ModelConfig::frequency(2, 16);
    config.output_activation = OutputActivation::Identity;
    let mut model = NeuralFieldModel::new(config, unit_bbox(), 1).unwrap();
    model.params.fill(0.0);
    let out = model.forward(Vec3::splat(0.3), Vec3::X, &[]);
    assert_eq!(out, crate::rgb::BLACK);

    // Softplus maps the zero pre-activation to ln 2 instead.
    let mut config = ModelConfig::frequency(2, 16);
    config.output_activation = OutputActivation::Softplus;
    let mut model = NeuralFieldModel::new(config, unit_bbox(), 1).unwrap();
    model.params.fill(0.0);
    let out = model.forward(Vec3::splat(0.3), Vec3::X, &[]);
    assert!((out.r - 2.0f32.ln()).abs() < 1e-6);
}

#[test]
fn forward_is_deterministic() {
    let model = NeuralFieldModel::new(ModelConfig::hash(3, 10, 16), unit_bbox(), 7).unwrap();
    let p = Vec3::new(0.1, 0.9, 0.4);
    let d = Vec3::new(0.0, 1.0, 0.0);
    assert_eq!(model.forward(p, d, &[]), model.forward(p, d, &[]));
}

/// The forward oracle: an independent f64 re-implementation of encode +
/// matrix walk, shared with the finite-difference verifier.
#[test]
fn forward_matches_independent_f64_walk() {
    let model = NeuralFieldModel::new(ModelConfig::frequency(4, 16), unit_bbox(), 3).unwrap();
    let params: Vec<f64> = model.params.iter().map(|&p| p as f64).collect();
    let mut rng = stream_rng(9, Stream::Eval, 0);
    for _ in 0..50 {
        let s = random_sample(&mut rng, 0);
        let fast = model.forward(s.position, s.direction, &[]);
        let slow = gradcheck::forward_f64(&model, &params, &s);
        for c in 0..3 {
            assert!(
                (fast.channel(c) as f64 - slow[c]).abs() < 1e-5,
                "{} vs {}",
                fast.channel(c),
                slow[c]
            );
        }
    }
}

#[test]
fn loss_anchors() {
    assert_eq!(loss_relative_l2(Rgb::splat(0.4), Rgb::splat(0.4)), 0.0);
    let l = loss_relative_l2(crate::rgb::BLACK, Rgb::splat(1.0));
    assert!((l - 100.0).abs() < 1e-4, "{l}");
    let l = loss_relative_l2(Rgb::splat(1.0), Rgb::new(1.0, 2.0, 0.0));
    let expect = (0.0 + 1.0 + 1.0) / 1.01 / 3.0;
    assert!((l - expect).abs() < 1e-5, "{l} vs {expect}");
}

/// The keystone test: analytic backprop against central finite differences
/// over MLP weights, biases and hash latents (collisions included via the
/// small table). A small batch keeps the odds low that the +-h step pushes
/// a ReLU pre-activation across zero, where the comparison is undefined.
#[test]
fn gradients_match_finite_differences() {
    let model = NeuralFieldModel::new(ModelConfig::hash(3, 10, 16), unit_bbox(), 5).unwrap();
    let mut rng = stream_rng(10, Stream::Eval, 0);
    let samples: Vec<IrradianceSample> = (0..8).map(|_| random_sample(&mut rng, 0)).collect();
    let outcome = gradcheck::finite_difference_check(&model, &samples, 512, 1e-3, 11);
    assert_eq!(outcome.probes, 512);
    assert!(
        outcome.failures * 100 <= outcome.probes,
        "{} of {} probes failed",
        outcome.failures,
        outcome.probes
    );
}

#[test]
fn untouched_hash_latents_get_zero_gradient_and_duplication_is_idempotent() {
    let model = NeuralFieldModel::new(ModelConfig::hash(2, 14, 16), unit_bbox(), 6).unwrap();
    let mut rng = stream_rng(12, Stream::Eval, 0);
    let samples: Vec<IrradianceSample> = (0..4).map(|_| random_sample(&mut rng, 0)).collect();
    let indices: Vec<u32> = (0..4).collect();

    let mut workspace = backprop::BatchWorkspace::new(&model, 8);
    let mut grads = backprop::Gradients::new(&model);
    backprop::batch_gradients(
        &model,
        &samples,
        &indices,
        LossNormalization::PerChannel,
        &mut workspace,
        &mut grads,
    )
    .unwrap();

    // Entries referenced by the batch.
    let grid = match model.config.position_encoding {
        PositionEncoding::HashGrid(g) => g,
        _ => unreachable!(),
    };
    let f = grid.feature_dim as usize;
    let mut touched = vec![false; model.layout.hash_len / f];
    for s in &samples {
        for layout in &model.levels {
            for (entry, _) in corner_weights(layout, grid.table_size() - 1, s.position) {
                touched[entry] = true;
            }
        }
    }
    for (entry, hit) in touched.iter().enumerate() {
        if !hit {
            for feat in 0..f {
                assert_eq!(grads.flat[entry * f + feat], 0.0);
            }
        }
    }

    // Duplicating the batch must not change the mean gradient.
    let doubled: Vec<u32> = indices.iter().chain(&indices).copied().collect();
    let mut grads2 = backprop::Gradients::new(&model);
    backprop::batch_gradients(
        &model,
        &samples,
        &doubled,
        LossNormalization::PerChannel,
        &mut workspace,
        &mut grads2,
    )
    .unwrap();
    for (a, b) in grads.flat.iter().zip(&grads2.flat) {
        assert!((a - b).abs() <= 1e-7 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn model_files_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let model = NeuralFieldModel::new(ModelConfig::hash(2, 10, 32), unit_bbox(), 8).unwrap();

    let p32 = dir.path().join("m.f32.nivm");
    io::save_model(&model, io::Precision::F32, &p32).unwrap();
    let (back, prec) = io::load_model(&p32).unwrap();
    assert_eq!(prec, io::Precision::F32);
    assert_eq!(back.params, model.params);
    let q = Vec3::new(0.2, 0.5, 0.7);
    assert_eq!(back.forward(q, Vec3::Y, &[]), model.forward(q, Vec3::Y, &[]));

    // Payload accounting: file size minus header equals memory_bytes.
    let file_len = std::fs::metadata(&p32).unwrap().len() as usize;
    let header = file_len - model.memory_bytes(io::Precision::F32);
    assert!(header > 0 && header < 256, "header {header}");

    let p16 = dir.path().join("m.f16.nivm");
    io::save_model(&model, io::Precision::F16, &p16).unwrap();
    let (back16, prec) = io::load_model(&p16).unwrap();
    assert_eq!(prec, io::Precision::F16);
    assert_eq!(
        std::fs::metadata(&p16).unwrap().len() as usize - header + 0,
        model.memory_bytes(io::Precision::F16) + 0
    );
    for (a, b) in back16.params.iter().zip(&model.params) {
        if b.abs() > 1e-3 {
            assert!(
                (a - b).abs() / b.abs() <= 1.0 / 1024.0,
                "f16 error too large: {a} vs {b}"
            );
        }
    }
    // The published value check: 1.2345 survives within 2^-10 relative.
    let h = half::f16::from_f32(1.2345).to_f32();
    assert!((h - 1.2345).abs() / 1.2345 <= 1.0 / 1024.0);
}

#[test]
fn corrupted_model_magic_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.nivm");
    std::fs::write(&path, b"NOPE----").unwrap();
    match io::load_model(&path) {
        Err(FieldError::BadMagic) => {}
        other => panic!("expected BadMagic, got {other:?}"),
    }
}

#[test]
fn infer_batch_equals_forward() {
    let model = NeuralFieldModel::new(ModelConfig::frequency(8, 64), unit_bbox(), 13).unwrap();
    let mut rng = stream_rng(14, Stream::Eval, 0);
    let inputs: Vec<(Vec3, Vec3, [f32; 2])> = (0..100)
        .map(|_| {
            (
                Vec3::new(rng.gen(), rng.gen(), rng.gen()),
                crate::scene::sampling::uniform_sphere(rng.gen(), rng.gen()),
                [0.0; 2],
            )
        })
        .collect();
    let batch = model.infer_batch(&inputs);
    for ((p, d, e), out) in inputs.iter().zip(&batch) {
        assert_eq!(model.forward(*p, *d, e), *out);
    }
}

#[test]
fn constant_field_is_learned_to_high_precision() {
    let target = Rgb::new(0.5, 0.25, 0.75);
    let set = synthetic_set(4096, 0, 21, Some(target));
    let mut model = NeuralFieldModel::new(ModelConfig::frequency(2, 16), unit_bbox(), 22).unwrap();
    let cfg = TrainConfig {
        lr_final: 1e-6,
        ..TrainConfig::quick(9000, 512, 23)
    };
    let report = train(&mut model, &set, &cfg, None).unwrap();

    // Volumetric MSE against the constant target.
    let mut rng = stream_rng(24, Stream::Eval, 1);
    let mut mse = 0.0f64;
    let n = 500;
    for _ in 0..n {
        let s = random_sample(&mut rng, 0);
        let pred = model.forward(s.position, s.direction, &[]);
        for c in 0..3 {
            mse += ((pred.channel(c) - target.channel(c)) as f64).powi(2);
        }
    }
    mse /= (n * 3) as f64;
    let norm = (target.r * target.r + target.g * target.g + target.b * target.b) as f64;
    assert!(mse < 1e-6 * norm, "mse {mse} vs bound {}", 1e-6 * norm);
    let _ = report;
}

/// While still converging, the 100-iteration smoothed loss must not rise by
/// more than 5% between records (after the initial 500-iteration settle).
#[test]
fn smoothed_loss_is_non_increasing_while_converging() {
    let target = Rgb::new(0.4, 0.3, 0.6);
    let set = synthetic_set(4096, 0, 61, Some(target));
    let mut model = NeuralFieldModel::new(ModelConfig::frequency(2, 16), unit_bbox(), 62).unwrap();
    let cfg = TrainConfig::quick(1500, 1024, 63);
    let report = train(&mut model, &set, &cfg, None).unwrap();
    let rows: Vec<_> = report.trace.iter().filter(|r| r.iteration >= 500).collect();
    assert!(rows.len() >= 5);
    for pair in rows.windows(2) {
        assert!(
            pair[1].loss <= pair[0].loss * 1.05,
            "loss rose: {} -> {} at iteration {}",
            pair[0].loss,
            pair[1].loss,
            pair[1].iteration
        );
    }
}

#[test]
fn zero_target_field_drives_output_toward_zero() {
    let set = synthetic_set(2048, 0, 31, Some(crate::rgb::BLACK));
    let mut model = NeuralFieldModel::new(ModelConfig::frequency(2, 16), unit_bbox(), 32).unwrap();
    let cfg = TrainConfig::quick(3000, 512, 33);
    train(&mut model, &set, &cfg, None).unwrap();
    let mut rng = stream_rng(34, Stream::Eval, 0);
    let mut max_out = 0.0f32;
    for _ in 0..200 {
        let s = random_sample(&mut rng, 0);
        let pred = model.forward(s.position, s.direction, &[]);
        max_out = max_out.max(pred.max_component());
    }
    assert!(max_out < 0.05, "max output {max_out}");
}

#[test]
fn training_is_deterministic() {
    let set = synthetic_set(512, 0, 41, None);
    let cfg = TrainConfig::quick(200, 256, 42);
    let mut a = NeuralFieldModel::new(ModelConfig::hash(2, 10, 16), unit_bbox(), 43).unwrap();
    let mut b = NeuralFieldModel::new(ModelConfig::hash(2, 10, 16), unit_bbox(), 43).unwrap();
    train(&mut a, &set, &cfg, None).unwrap();
    train(&mut b, &set, &cfg, None).unwrap();
    assert_eq!(a.params, b.params);
}

#[test]
fn dataset_arity_mismatch_is_rejected() {
    let set = synthetic_set(64, 1, 51, None);
    let mut model = NeuralFieldModel::new(ModelConfig::frequency(2, 16), unit_bbox(), 52).unwrap();
    let cfg = TrainConfig::quick(100, 32, 53);
    match train(&mut model, &set, &cfg, None) {
        Err(FieldError::ParamArity { expected: 0, got: 1 }) => {}
        other => panic!("expected arity error, got {other:?}"),
    }
}

#[test]
fn capacity_ladder_payloads_match_published_sizes() {
    // (width, levels, f16 MB) from the runtime table.
    let ladder = [
        (16u32, None, 0.003),
        (32, None, 0.01),
        (64, None, 0.03),
        (64, Some(2u32), 0.16),
        (64, Some(4), 1.20),
        (64, Some(6), 3.30),
        (64, Some(8), 5.40),
    ];
    for (width, levels, mb) in ladder {
        let config = match levels {
            None => ModelConfig::frequency(8, width),
            Some(l) => ModelConfig::hash(l, 17, width),
        };
        let model = NeuralFieldModel::new(config, unit_bbox(), 1).unwrap();
        let actual_mb = model.memory_bytes(io::Precision::F16) as f64 / 1e6;
        assert!(
            (actual_mb - mb).abs() < 0.012 + mb * 0.02,
            "width {width} levels {levels:?}: {actual_mb:.4} MB vs published {mb}"
        );
    }
}
