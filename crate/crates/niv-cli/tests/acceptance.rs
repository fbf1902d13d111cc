//! Acceptance suite: one criterion per numbered check, run sequentially so
//! wall-clock bounds are meaningful, printing one PASS/FAIL line each.
//!
//! Run with:
//!   cargo test -p niv-cli --test acceptance -- --nocapture

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use glam::Vec3;
use rand::Rng;

use niv::dataset::{bake_dataset, BakeParams, ParamSampler, SampleSet, TargetKind};
use niv::eval::{image_metrics, volumetric_mse};
use niv::field::gradcheck;
use niv::field::io::Precision;
use niv::field::train::{train, TrainConfig};
use niv::field::{ModelConfig, NeuralFieldModel, TargetQuantity};
use niv::probes::{
    bake_grid, sh_basis, ProbeBakeMode, ProbeGrid, ProbeProvider, QueryHeuristics,
};
use niv::render::gbuffer::rasterize_gbuffer;
use niv::render::shade::{shade_deferred, shade_sampled_incident};
use niv::render::{ConstantProvider, FrameHDR, IrradianceProvider, ShadeComponents, ShadeOptions};
use niv::rgb::Rgb;
use niv::rng::{stream_rng, Stream};
use niv::scene::camera::Camera;
use niv::scene::fixtures::{fixture_json, fixture_scene};
use niv::scene::sampling::uniform_sphere;
use niv::scene::Scene;
use niv::tracer::{
    direct_irradiance, indirect_irradiance, reference::reference_render, OracleProvider,
    SceneView, TracerConfig,
};

const PI: f32 = std::f32::consts::PI;

struct Outcome {
    number: u32,
    name: &'static str,
    result: Result<String, String>,
    seconds: f64,
}

fn run(
    outcomes: &mut Vec<Outcome>,
    number: u32,
    name: &'static str,
    f: impl FnOnce() -> Result<String, String>,
) {
    let t0 = Instant::now();
    let result = f();
    let seconds = t0.elapsed().as_secs_f64();
    let line = match &result {
        Ok(detail) => format!("criterion {number:>2} PASS  {name}: {detail}"),
        Err(detail) => format!("criterion {number:>2} FAIL  {name}: {detail}"),
    };
    println!("{line}  [{seconds:.1}s]");
    outcomes.push(Outcome {
        number,
        name,
        result,
        seconds,
    });
}

/// Shared Cornell assets baked once.
struct Fixtures {
    cornell: Scene,
    train_set: SampleSet,
    eval_set: SampleSet,
    /// 64x64 path-traced reference at 4096 spp (criteria 7 and 11).
    reference: FrameHDR,
}

const TRAIN_SEED: u64 = 101;
const EVAL_SEED: u64 = 202;
const RENDER_W: u32 = 64;
const RENDER_H: u32 = 64;

fn bake_fixtures() -> Fixtures {
    let cornell = fixture_scene("cornell");
    let hash = niv::dataset::scene_digest(fixture_json("cornell").unwrap().as_bytes());
    let mut bake = BakeParams::new(1 << 15, TRAIN_SEED);
    bake.cfg = TracerConfig {
        spp: 64,
        ..TracerConfig::default()
    };
    let train_set = bake_dataset(&cornell, hash, &bake).expect("train bake");

    // Held-out eval set at 4x the training spp.
    let mut eval_bake = bake.clone();
    eval_bake.n_samples = 1 << 13;
    eval_bake.seed = EVAL_SEED;
    eval_bake.cfg.spp = 256;
    let eval_set = bake_dataset(&cornell, hash, &eval_bake).expect("eval bake");

    let camera = Camera::new(&cornell.camera.unwrap());
    let reference = reference_render(&cornell, &camera, RENDER_W, RENDER_H, 4096, 777, &[]);

    Fixtures {
        cornell,
        train_set,
        eval_set,
        reference,
    }
}

fn volume_target_mean(set: &SampleSet) -> Rgb {
    let mut sum = [0.0f64; 3];
    let mut n = 0u64;
    for s in set.samples.iter().filter(|s| !s.on_surface) {
        for c in 0..3 {
            sum[c] += s.target.channel(c) as f64;
        }
        n += 1;
    }
    Rgb::new(
        (sum[0] / n as f64) as f32,
        (sum[1] / n as f64) as f32,
        (sum[2] / n as f64) as f32,
    )
}

fn train_model(
    scene: &Scene,
    set: &SampleSet,
    config: ModelConfig,
    iterations: u32,
    batch_size: usize,
    seed: u64,
) -> NeuralFieldModel {
    let mut model = NeuralFieldModel::new(config, scene.bbox, seed).expect("model");
    let cfg = TrainConfig {
        batch_size,
        iterations,
        warm_iterations: iterations / 5,
        seed,
        ..TrainConfig::default()
    };
    train(&mut model, set, &cfg, None).expect("training");
    model
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

#[test]
fn acceptance_criteria() {
    let mut outcomes = Vec::new();
    let suite_start = Instant::now();

    println!("baking shared Cornell fixtures (train/eval sets + reference render)...");
    let fx = bake_fixtures();
    println!(
        "fixtures ready after {:.1}s: {} train samples, {} eval samples",
        suite_start.elapsed().as_secs_f64(),
        fx.train_set.samples.len(),
        fx.eval_set.samples.len()
    );

    run(&mut outcomes, 1, "oracle analytics", || criterion_1());
    run(&mut outcomes, 2, "floor fixture", || criterion_2());
    run(&mut outcomes, 3, "gradient oracle", || criterion_3());
    run(&mut outcomes, 4, "training convergence", || criterion_4(&fx));
    run(&mut outcomes, 5, "memory-error trade-off", || criterion_5(&fx));
    run(&mut outcomes, 6, "leak fixture", || criterion_6());
    run(&mut outcomes, 7, "shading identity", || criterion_7(&fx));
    run(&mut outcomes, 8, "hash-table ablation", || criterion_8(&fx));
    run(&mut outcomes, 9, "surface/culling ablation", || criterion_9(&fx));
    run(&mut outcomes, 10, "SH correctness", || criterion_10());
    run(&mut outcomes, 11, "incident-radiance ablation", || criterion_11(&fx));
    run(&mut outcomes, 12, "manifest determinism", || criterion_12());
    run(&mut outcomes, 13, "time-of-day field", || criterion_13());

    println!(
        "acceptance suite finished in {:.1}s",
        suite_start.elapsed().as_secs_f64()
    );
    let failures: Vec<String> = outcomes
        .iter()
        .filter_map(|o| {
            o.result
                .as_ref()
                .err()
                .map(|e| format!("criterion {} ({}): {e} [{:.1}s]", o.number, o.name, o.seconds))
        })
        .collect();
    assert!(
        failures.is_empty(),
        "{} criterion(s) failed:\n{}",
        failures.len(),
        failures.join("\n")
    );
}

/// 1. Uniform environment L=1 gives direct irradiance pi +-1% within 1s;
///    an emitterless scene has exactly zero indirect irradiance.
fn criterion_1() -> Result<String, String> {
    let t0 = Instant::now();
    let env = Scene::build(
        vec![],
        vec![],
        vec![],
        vec![niv::scene::Emitter::Environment {
            radiance: Rgb::splat(1.0),
        }],
        None,
        vec![],
    )
    .unwrap();
    let view = SceneView::for_bake(&env, &[]);
    let mut rng = stream_rng(1, Stream::Eval, 0);
    let mut sum = Rgb::splat(0.0);
    for _ in 0..1024 {
        sum += direct_irradiance(&view, Vec3::ZERO, Vec3::Y, &mut rng);
    }
    let mean = sum / 1024.0;
    for c in 0..3 {
        let rel = (mean.channel(c) - PI).abs() / PI;
        if rel >= 0.01 {
            return Err(format!("direct irradiance {mean:?} not within 1% of pi"));
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    if elapsed >= 1.0 {
        return Err(format!("env check took {elapsed:.2}s (budget 1s)"));
    }

    let dark = fixture_scene("cornell-empty");
    let dark = Scene {
        materials: dark
            .materials
            .iter()
            .map(|m| niv::scene::Material {
                emission: Rgb::splat(0.0),
                ..*m
            })
            .collect(),
        ..dark
    };
    let view = SceneView::for_bake(&dark, &[]);
    let cfg = TracerConfig::with_spp(256);
    let est = indirect_irradiance(
        &view,
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::Y,
        &cfg,
        &mut stream_rng(2, Stream::Eval, 0),
    )
    .unwrap();
    if est.value != Rgb::splat(0.0) {
        return Err(format!("emitterless indirect is {:?}, not zero", est.value));
    }
    Ok(format!(
        "direct = ({:.4}, {:.4}, {:.4}) vs pi, emitterless indirect exactly 0, {elapsed:.2}s",
        mean.r, mean.g, mean.b
    ))
}

/// 2. Indirect irradiance pi/2 +-2% above a rho=0.5 floor under a unit
///    environment, looking down, at 4096 spp within 10s.
fn criterion_2() -> Result<String, String> {
    let t0 = Instant::now();
    let scene = fixture_scene("floor-env");
    let view = SceneView::for_bake(&scene, &[]);
    let cfg = TracerConfig::with_spp(4096);
    let est = indirect_irradiance(
        &view,
        Vec3::new(0.0, 1.0, 0.0),
        -Vec3::Y,
        &cfg,
        &mut stream_rng(3, Stream::Eval, 0),
    )
    .unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    for c in 0..3 {
        let rel = (est.value.channel(c) - PI * 0.5).abs() / (PI * 0.5);
        if rel >= 0.02 {
            return Err(format!(
                "E = {:?}, channel {c} off pi/2 by {:.2}%",
                est.value,
                rel * 100.0
            ));
        }
    }
    if elapsed >= 10.0 {
        return Err(format!("took {elapsed:.1}s (budget 10s)"));
    }
    Ok(format!(
        "E = ({:.4}, {:.4}, {:.4}) vs pi/2 = {:.4}, {elapsed:.1}s",
        est.value.r,
        est.value.g,
        est.value.b,
        PI * 0.5
    ))
}

/// 3. Backprop vs central finite differences (h=1e-3, f64): relative error
///    < 1e-3 on >= 99% of 512 probed parameters, within 30s.
fn criterion_3() -> Result<String, String> {
    let t0 = Instant::now();
    let bbox = niv::scene::Aabb {
        min: Vec3::ZERO,
        max: Vec3::ONE,
    };
    let model = NeuralFieldModel::new(ModelConfig::hash(3, 10, 16), bbox, 5).unwrap();
    let mut rng = stream_rng(10, Stream::Eval, 0);
    let samples: Vec<niv::dataset::IrradianceSample> = (0..8)
        .map(|_| niv::dataset::IrradianceSample {
            position: Vec3::new(rng.gen(), rng.gen(), rng.gen()),
            direction: uniform_sphere(rng.gen(), rng.gen()),
            extra_params: [0.0; 2],
            target: Rgb::new(rng.gen(), rng.gen(), rng.gen()),
            on_surface: false,
            backface_fraction: 0.0,
        })
        .collect();
    let outcome = gradcheck::finite_difference_check(&model, &samples, 512, 1e-3, 11);
    let elapsed = t0.elapsed().as_secs_f64();
    let pass_fraction = 1.0 - outcome.failures as f64 / outcome.probes as f64;
    if pass_fraction < 0.99 {
        return Err(format!(
            "{} of {} probes disagree (pass rate {:.2}%)",
            outcome.failures,
            outcome.probes,
            pass_fraction * 100.0
        ));
    }
    if elapsed >= 30.0 {
        return Err(format!("took {elapsed:.1}s (budget 30s)"));
    }
    Ok(format!(
        "{}/{} probes within 1e-3 ({:.1}s)",
        outcome.probes - outcome.failures,
        outcome.probes,
        elapsed
    ))
}

/// 4. W=64, 2 levels, T=2^14, 10k iterations, batch 2^14 on the Cornell
///    fixture: held-out volumetric MSE < 0.1x the constant-mean predictor,
///    within 30 minutes.
fn criterion_4(fx: &Fixtures) -> Result<String, String> {
    let t0 = Instant::now();
    let model = train_model(
        &fx.cornell,
        &fx.train_set,
        ModelConfig::hash(2, 14, 64),
        10_000,
        1 << 14,
        7,
    );
    let mse = volumetric_mse(&model, &fx.eval_set, &[TRAIN_SEED]).map_err(|e| e.to_string())?;
    let baseline = volumetric_mse(
        &ConstantProvider(volume_target_mean(&fx.eval_set)),
        &fx.eval_set,
        &[],
    )
    .map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed().as_secs_f64();
    let ratio = mse.volume / baseline.volume;
    if ratio >= 0.1 {
        return Err(format!(
            "volumetric MSE {:.3e} is {ratio:.3}x the constant baseline {:.3e} (need < 0.1x)",
            mse.volume, baseline.volume
        ));
    }
    if elapsed >= 1800.0 {
        return Err(format!("took {elapsed:.0}s (budget 1800s)"));
    }
    Ok(format!(
        "MSE {:.3e} = {ratio:.3}x constant baseline {:.3e}, {:.0}s",
        mse.volume, baseline.volume, elapsed
    ))
}

/// 5. At a matched ~0.05 MB budget on Cornell, the field's volumetric MSE
///    is at most 0.5x the probe grid's (paper target ~10x; >= 2x accepted
///    at desk scale; actual ratio reported).
fn criterion_5(fx: &Fixtures) -> Result<String, String> {
    const BUDGET: usize = 50_000;
    let config = niv::eval::arch_for_budget(BUDGET).unwrap();
    let model = train_model(&fx.cornell, &fx.train_set, config, 8_000, 1 << 13, 7);
    let model_bytes = model.memory_bytes(Precision::F16);

    let dims = niv::probes::cubic_dims_for_budget(BUDGET);
    let (grid, _) = bake_grid(
        &fx.cornell,
        dims,
        2048,
        TRAIN_SEED,
        QueryHeuristics::default(),
        ProbeBakeMode::RadianceConvolve,
    );
    let probe_bytes = grid.memory_bytes();

    let niv_mse = volumetric_mse(&model, &fx.eval_set, &[TRAIN_SEED])
        .map_err(|e| e.to_string())?
        .volume;
    let probe_mse = volumetric_mse(
        &ProbeProvider {
            grid: &grid,
            scene: None,
        },
        &fx.eval_set,
        &[],
    )
    .map_err(|e| e.to_string())?
    .volume;

    let advantage = probe_mse / niv_mse;
    if niv_mse > 0.5 * probe_mse {
        return Err(format!(
            "field MSE {niv_mse:.3e} ({model_bytes} B) vs probe MSE {probe_mse:.3e} ({probe_bytes} B, {}^3): only {advantage:.2}x better (need >= 2x; paper reports ~10x)",
            dims[0]
        ));
    }
    Ok(format!(
        "field {niv_mse:.3e} ({model_bytes} B) vs probes {probe_mse:.3e} ({probe_bytes} B, {}^3): {advantage:.1}x better (desk-scale gate >= 2x, paper target ~10x)",
        dims[0]
    ))
}

/// 6. Two-room leak fixture: plain probes overestimate the dark side
///    (mean signed error > 0), ray-traced visibility strictly reduces the
///    absolute error, and the field is at least as accurate as probes+RT.
fn criterion_6() -> Result<String, String> {
    let scene = fixture_scene("leak-room");
    let hash = niv::dataset::scene_digest(fixture_json("leak-room").unwrap().as_bytes());

    let mut bake = BakeParams::new(1 << 14, 303);
    bake.cfg.spp = 48;
    let train_set = bake_dataset(&scene, hash, &bake).map_err(|e| e.to_string())?;
    let model = train_model(&scene, &train_set, ModelConfig::hash(2, 13, 64), 5_000, 1 << 13, 9);

    let (mut grid, _) = bake_grid(
        &scene,
        [6, 4, 4],
        2048,
        303,
        QueryHeuristics::default(),
        ProbeBakeMode::RadianceConvolve,
    );

    // Dark-side evaluation points: volume samples west of the divider.
    let mut eval_bake = BakeParams::new(6144, 404);
    eval_bake.surface_fraction = 0.0;
    eval_bake.cfg.spp = 192;
    let eval_set = bake_dataset(&scene, hash, &eval_bake).map_err(|e| e.to_string())?;
    let dark: Vec<_> = eval_set
        .samples
        .iter()
        .filter(|s| scene.bbox.from_unit(s.position).x < -0.3)
        .collect();
    if dark.len() < 500 {
        return Err(format!("only {} dark-side samples", dark.len()));
    }

    let mut plain_signed = 0.0f64;
    let mut plain_abs = 0.0f64;
    let mut rt_abs = 0.0f64;
    let mut field_abs = 0.0f64;
    for (i, s) in dark.iter().enumerate() {
        let world = scene.bbox.from_unit(s.position);
        grid.heuristics.rt_visibility = false;
        let p_plain = grid.query(world, s.direction, None);
        grid.heuristics.rt_visibility = true;
        let p_rt = grid.query(world, s.direction, Some(&scene));
        let f = model.irradiance(
            s.position,
            s.direction,
            &[],
            &mut stream_rng(1, Stream::Eval, i as u64),
        );
        for c in 0..3 {
            let t = s.target.channel(c) as f64;
            plain_signed += p_plain.channel(c) as f64 - t;
            plain_abs += (p_plain.channel(c) as f64 - t).abs();
            rt_abs += (p_rt.channel(c) as f64 - t).abs();
            field_abs += (f.channel(c) as f64 - t).abs();
        }
    }
    let n = (dark.len() * 3) as f64;
    let (plain_signed, plain_abs, rt_abs, field_abs) =
        (plain_signed / n, plain_abs / n, rt_abs / n, field_abs / n);

    if plain_signed <= 0.0 {
        return Err(format!(
            "probes do not leak: mean signed error {plain_signed:.3e} (expected > 0)"
        ));
    }
    if rt_abs >= plain_abs {
        return Err(format!(
            "RT visibility did not reduce error: {rt_abs:.3e} vs {plain_abs:.3e}"
        ));
    }
    if field_abs > rt_abs {
        return Err(format!(
            "field error {field_abs:.3e} exceeds probes+RT {rt_abs:.3e}"
        ));
    }
    Ok(format!(
        "dark-side |err|: probes {plain_abs:.3e} (signed +{plain_signed:.3e}) > probes+RT {rt_abs:.3e} >= field {field_abs:.3e}"
    ))
}

/// 7. Deferred shading with the oracle provider at 1024 spp matches the
///    4096-spp path-traced reference within relMSE 0.02 on the diffuse-only
///    Cornell scene.
fn criterion_7(fx: &Fixtures) -> Result<String, String> {
    let camera = Camera::new(&fx.cornell.camera.unwrap());
    let gbuffer = rasterize_gbuffer(&fx.cornell, &camera, RENDER_W, RENDER_H);
    let provider = OracleProvider {
        scene: &fx.cornell,
        cfg: TracerConfig::with_spp(1024),
    };
    let options = ShadeOptions {
        seed: 55,
        direct_spp: 1024,
        ..ShadeOptions::default()
    };
    let frame =
        shade_deferred(&gbuffer, &fx.cornell, &provider, &options).map_err(|e| e.to_string())?;
    let (mse, rel_mse) =
        image_metrics(&frame, &fx.reference, Some(&gbuffer)).map_err(|e| e.to_string())?;
    if rel_mse >= 0.02 {
        return Err(format!("relMSE {rel_mse:.4} (need < 0.02), MSE {mse:.3e}"));
    }
    Ok(format!("relMSE {rel_mse:.4} < 0.02 (MSE {mse:.3e})"))
}

/// 8. Hash-table sweep T in {2^10, 2^12, 2^14, 2^17} at 8 levels, 3 seeds:
///    median MSE non-increasing in T within 10% between neighbors, and
///    MSE(2^14) <= 1.5x MSE(2^17) while the table capacity shrinks 8x.
fn criterion_8(fx: &Fixtures) -> Result<String, String> {
    let tables = [10u32, 12, 14, 17];
    let seeds = [31u64, 32, 33];
    let mut medians = Vec::new();
    let mut payloads = Vec::new();
    for &log2 in &tables {
        let mut mses = Vec::new();
        let mut bytes = 0usize;
        for &seed in &seeds {
            let model = train_model(
                &fx.cornell,
                &fx.train_set,
                ModelConfig::hash(8, log2, 64),
                2_500,
                1 << 12,
                seed,
            );
            bytes = model.memory_bytes(Precision::F16);
            mses.push(
                volumetric_mse(&model, &fx.eval_set, &[TRAIN_SEED])
                    .map_err(|e| e.to_string())?
                    .volume,
            );
        }
        medians.push(median(mses));
        payloads.push(bytes);
    }

    for i in 1..medians.len() {
        if medians[i] > medians[i - 1] * 1.10 {
            return Err(format!(
                "median MSE rose from {:.3e} (T=2^{}) to {:.3e} (T=2^{}), over the 10% allowance",
                medians[i - 1],
                tables[i - 1],
                medians[i],
                tables[i]
            ));
        }
    }
    let mse14 = medians[2];
    let mse17 = medians[3];
    if mse14 > 1.5 * mse17 {
        return Err(format!(
            "MSE(2^14) {mse14:.3e} > 1.5x MSE(2^17) {mse17:.3e}"
        ));
    }
    // Table capacity shrinks exactly 8x (2^17 -> 2^14); dense coarse levels
    // cap the stored-parameter shrink below that, so both are reported.
    let capacity_ratio = (1u32 << 17) as f64 / (1u32 << 14) as f64;
    let payload_ratio = payloads[3] as f64 / payloads[2] as f64;
    if capacity_ratio < 8.0 {
        return Err("table capacity ratio below 8x".into());
    }
    Ok(format!(
        "medians {:?} (T=2^10..2^17); MSE(2^14)/MSE(2^17) = {:.2}; capacity shrink 8x, payload shrink {payload_ratio:.2}x ({} -> {} B)",
        medians
            .iter()
            .map(|m| format!("{m:.2e}"))
            .collect::<Vec<_>>(),
        mse14 / mse17,
        payloads[3],
        payloads[2]
    ))
}

/// 9. Culling + 20% surface sampling: the combined configuration reaches
///    surface MSE <= each single strategy, with volume MSE within 25% of
///    the best configuration (medians over 3 seeds).
fn criterion_9(fx: &Fixtures) -> Result<String, String> {
    let hash = niv::dataset::scene_digest(fixture_json("cornell").unwrap().as_bytes());
    let configs = [
        ("neither", false, 0.0f32),
        ("culling", true, 0.0),
        ("surface", false, 0.2),
        ("combined", true, 0.2),
    ];
    let seeds = [41u64, 42, 43];
    let mut surface_medians = Vec::new();
    let mut volume_medians = Vec::new();
    for (_, culling, surface_fraction) in configs {
        let mut surf = Vec::new();
        let mut vol = Vec::new();
        for &seed in &seeds {
            let mut bake = BakeParams::new(1 << 14, 500 + seed);
            bake.cfg.spp = 32;
            bake.culling = culling;
            bake.surface_fraction = surface_fraction;
            let set = bake_dataset(&fx.cornell, hash, &bake).map_err(|e| e.to_string())?;
            let model = train_model(
                &fx.cornell,
                &set,
                ModelConfig::hash(2, 13, 64),
                3_000,
                1 << 12,
                seed,
            );
            let mse = volumetric_mse(&model, &fx.eval_set, &[500 + seed])
                .map_err(|e| e.to_string())?;
            surf.push(mse.surface);
            vol.push(mse.volume);
        }
        surface_medians.push(median(surf));
        volume_medians.push(median(vol));
    }

    let combined_surf = surface_medians[3];
    for (i, name) in ["culling", "surface"].iter().enumerate() {
        let single = surface_medians[i + 1];
        if combined_surf > single {
            return Err(format!(
                "combined surface MSE {combined_surf:.3e} exceeds {name}-only {single:.3e}"
            ));
        }
    }
    let best_volume = volume_medians
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if volume_medians[3] > 1.25 * best_volume {
        return Err(format!(
            "combined volume MSE {:.3e} more than 25% over the best {best_volume:.3e}",
            volume_medians[3]
        ));
    }
    Ok(format!(
        "surface medians (neither/culling/surface/combined): {}; volume combined {:.3e} vs best {best_volume:.3e}",
        surface_medians
            .iter()
            .map(|m| format!("{m:.2e}"))
            .collect::<Vec<_>>()
            .join("/"),
        volume_medians[3]
    ))
}

/// 10. SH basis orthonormality (MC, +-0.01) and the constant-radiance grid
///     reproducing E = pi*c within 1% plus the f16 quantization allowance.
fn criterion_10() -> Result<String, String> {
    let mut rng = stream_rng(2, Stream::Eval, 0);
    let mut gram = [[0.0f64; 9]; 9];
    let n = 1_000_000;
    for _ in 0..n {
        let d = uniform_sphere(rng.gen(), rng.gen());
        let b = sh_basis(d);
        for i in 0..9 {
            for j in i..9 {
                gram[i][j] += (b[i] * b[j]) as f64;
            }
        }
    }
    let scale = 4.0 * std::f64::consts::PI / n as f64;
    let mut worst = 0.0f64;
    for i in 0..9 {
        for j in i..9 {
            let v = gram[i][j] * scale;
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - expect).abs());
        }
    }
    if worst >= 0.01 {
        return Err(format!("orthonormality deviation {worst:.4} (need < 0.01)"));
    }

    // Constant-field grid through the f16 file round trip.
    let c = Rgb::new(0.4, 0.6, 0.2);
    let mut proj_rng = stream_rng(3, Stream::Eval, 0);
    let probe = niv::probes::project_radiance(|_| c, 200_000, &mut proj_rng);
    let bbox = niv::scene::Aabb {
        min: Vec3::ZERO,
        max: Vec3::ONE,
    };
    let grid = ProbeGrid {
        dims: [3, 3, 3],
        bbox,
        probes: vec![probe; 27],
        heuristics: QueryHeuristics::default(),
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("c.nivp");
    niv::probes::io::save_grid(&grid, &path).map_err(|e| e.to_string())?;
    let grid = niv::probes::io::load_grid(&path).map_err(|e| e.to_string())?;

    let mut eval_rng = stream_rng(4, Stream::Eval, 0);
    let mut worst_rel = 0.0f32;
    for _ in 0..1000 {
        let x = Vec3::new(eval_rng.gen(), eval_rng.gen(), eval_rng.gen());
        let nrm = uniform_sphere(eval_rng.gen(), eval_rng.gen());
        let e = grid.query(x, nrm, None);
        for ch in 0..3 {
            let expect = PI * c.channel(ch);
            worst_rel = worst_rel.max((e.channel(ch) - expect).abs() / expect);
        }
    }
    // 1% projection accuracy plus ~2^-10 from half-precision storage.
    let allow = 0.01 + 1.0 / 1024.0;
    if worst_rel >= allow {
        return Err(format!(
            "constant-field reconstruction off by {:.2}% (allow {:.2}%)",
            worst_rel * 100.0,
            allow * 100.0
        ));
    }
    Ok(format!(
        "orthonormality within {worst:.4}; pi*c reproduced within {:.2}%",
        worst_rel * 100.0
    ))
}

/// 11. Incident-radiance ablation: at equal capacity and budget, sampled
///     shading at S=1 has strictly higher image MSE than the pre-integrated
///     field, and the pixel variance scales as 1/S within 20%.
fn criterion_11(fx: &Fixtures) -> Result<String, String> {
    let hash = niv::dataset::scene_digest(fixture_json("cornell").unwrap().as_bytes());
    let mut bake = BakeParams::new(1 << 14, 505);
    bake.cfg.spp = 24;
    bake.target = TargetKind::IncidentRadiance;
    let radiance_set = bake_dataset(&fx.cornell, hash, &bake).map_err(|e| e.to_string())?;

    let mut radiance_config = ModelConfig::hash(2, 13, 64);
    radiance_config.target_quantity = TargetQuantity::IncidentRadiance;
    let radiance_model = train_model(&fx.cornell, &radiance_set, radiance_config, 3_000, 1 << 13, 15);
    let irradiance_model = train_model(
        &fx.cornell,
        &fx.train_set,
        ModelConfig::hash(2, 13, 64),
        3_000,
        1 << 13,
        15,
    );

    let camera = Camera::new(&fx.cornell.camera.unwrap());
    let gbuffer = rasterize_gbuffer(&fx.cornell, &camera, RENDER_W, RENDER_H);
    let options = ShadeOptions {
        seed: 66,
        direct_spp: 256,
        ..ShadeOptions::default()
    };
    let sampled_s1 =
        shade_sampled_incident(&gbuffer, &fx.cornell, &radiance_model, 1, &options)
            .map_err(|e| e.to_string())?;
    let pre_integrated = shade_deferred(&gbuffer, &fx.cornell, &irradiance_model, &options)
        .map_err(|e| e.to_string())?;
    let (mse_sampled, _) =
        image_metrics(&sampled_s1, &fx.reference, Some(&gbuffer)).map_err(|e| e.to_string())?;
    let (mse_pre, _) =
        image_metrics(&pre_integrated, &fx.reference, Some(&gbuffer)).map_err(|e| e.to_string())?;
    if mse_sampled <= mse_pre {
        return Err(format!(
            "S=1 sampled MSE {mse_sampled:.3e} not higher than pre-integrated {mse_pre:.3e}"
        ));
    }

    // Empirical pixel variance of the indirect term across K independent
    // renders must scale as 1/S within 20%.
    let indirect_only = ShadeComponents {
        indirect: true,
        direct: false,
        emission: false,
    };
    let mut variances = Vec::new();
    for s in [4u32, 16, 64] {
        const K: usize = 6;
        let mut frames = Vec::new();
        for k in 0..K {
            let opts = ShadeOptions {
                seed: 900 + k as u64,
                direct_spp: 1,
                components: indirect_only,
                ..ShadeOptions::default()
            };
            frames.push(
                shade_sampled_incident(&gbuffer, &fx.cornell, &radiance_model, s, &opts)
                    .map_err(|e| e.to_string())?,
            );
        }
        let mut total_var = 0.0f64;
        let mut count = 0u64;
        for i in 0..frames[0].pixels.len() {
            for c in 0..3 {
                let vals: Vec<f64> = frames.iter().map(|f| f.pixels[i].channel(c) as f64).collect();
                let mean = vals.iter().sum::<f64>() / K as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (K - 1) as f64;
                total_var += var;
                count += 1;
            }
        }
        variances.push(total_var / count as f64);
    }
    let r1 = variances[0] / variances[1];
    let r2 = variances[1] / variances[2];
    for (name, r) in [("v(4)/v(16)", r1), ("v(16)/v(64)", r2)] {
        if !(3.2..=4.8).contains(&r) {
            return Err(format!(
                "{name} = {r:.2}, outside 4x +-20% (variances {variances:?})"
            ));
        }
    }
    Ok(format!(
        "S=1 MSE {mse_sampled:.3e} > pre-integrated {mse_pre:.3e}; variance ratios {r1:.2}, {r2:.2} (target 4.0 +-20%)"
    ))
}

/// 12. Every command re-run from its manifest reproduces its outputs byte
///     for byte (datasets, models, grids, CSVs, PFMs, PNGs, manifests).
fn criterion_12() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let bin = env!("CARGO_BIN_EXE_niv");
    let run = |args: &[&str], out_dir: &Path| -> Result<(), String> {
        let out = Command::new(bin)
            .arg("--out-dir")
            .arg(out_dir)
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "niv {args:?} failed: {}",
                String::from_utf8_lossy(&out.stderr)
            ));
        }
        Ok(())
    };

    run(&["fixture", "cornell", "-o", "cornell.json"], dir)?;
    let scene = dir.join("cornell.json").display().to_string();
    let st = |name: &str| dir.join(name).display().to_string();

    run(
        &["bake", &scene, "--n", "300", "--spp", "6", "--seed", "3", "-o", "d.nivd"],
        dir,
    )?;
    run(
        &[
            "train",
            &st("d.nivd"),
            "--width",
            "16",
            "--freq",
            "2",
            "--iterations",
            "150",
            "--batch-size",
            "128",
            "--seed",
            "4",
            "-o",
            "m.nivm",
        ],
        dir,
    )?;
    run(
        &["bake-probes", &scene, "--dims", "2", "2", "2", "--spp", "24", "-o", "p.nivp"],
        dir,
    )?;
    run(
        &[
            "render",
            &scene,
            "--provider",
            &st("m.nivm"),
            "--width",
            "20",
            "--height",
            "20",
            "--direct-spp",
            "2",
            "-o",
            "f",
        ],
        dir,
    )?;
    run(
        &["bake", &scene, "--n", "128", "--spp", "6", "--seed", "8", "-o", "e.nivd"],
        dir,
    )?;
    run(
        &[
            "eval",
            "--provider",
            &st("m.nivm"),
            "--evalset",
            &st("e.nivd"),
            "-o",
            "eval.csv",
        ],
        dir,
    )?;
    run(
        &[
            "sweep",
            "memory",
            &scene,
            "--budgets",
            "0.004,0.04",
            "--train-n",
            "300",
            "--eval-n",
            "150",
            "--spp",
            "4",
            "--probe-spp",
            "16",
            "--iterations",
            "120",
            "--batch-size",
            "128",
            "-o",
            "sm.csv",
        ],
        dir,
    )?;
    run(
        &[
            "sweep",
            "hash",
            &scene,
            "--table-log2",
            "10,12",
            "--levels",
            "2",
            "--width",
            "16",
            "--train-n",
            "300",
            "--eval-n",
            "150",
            "--spp",
            "4",
            "--iterations",
            "120",
            "--batch-size",
            "128",
            "-o",
            "sh.csv",
        ],
        dir,
    )?;

    let manifests = [
        "d.nivd.manifest.json",
        "m.nivm.manifest.json",
        "p.nivp.manifest.json",
        "f.pfm.manifest.json",
        "eval.csv.manifest.json",
        "sm.csv.manifest.json",
        "sh.csv.manifest.json",
    ];
    let mut compared = 0usize;
    for manifest in manifests {
        let replay_dir = dir.join(format!("replay-{manifest}"));
        run(
            &["replay", &dir.join(manifest).display().to_string()],
            &replay_dir,
        )?;
        let text = std::fs::read_to_string(dir.join(manifest)).map_err(|e| e.to_string())?;
        let parsed: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        for output in parsed["outputs"].as_array().unwrap() {
            let name = output.as_str().unwrap();
            let original = std::fs::read(dir.join(name)).map_err(|e| e.to_string())?;
            let replayed = std::fs::read(replay_dir.join(name))
                .map_err(|e| format!("replay missing {name}: {e}"))?;
            if original != replayed {
                return Err(format!("{name} differs between run and replay"));
            }
            compared += 1;
        }
        // The manifest itself reproduces too.
        let re_manifest = std::fs::read(replay_dir.join(manifest)).map_err(|e| e.to_string())?;
        if std::fs::read(dir.join(manifest)).unwrap() != re_manifest {
            return Err(format!("{manifest} differs between run and replay"));
        }
        compared += 1;
    }
    Ok(format!(
        "7 commands replayed; {compared} artifacts byte-identical"
    ))
}

/// 13. One-parameter time-of-day field: volumetric MSE at 8 held-out sun
///     angles stays within 1.5x of the MSE at the 8 trained anchors.
fn criterion_13() -> Result<String, String> {
    let scene = fixture_scene("sunroom");
    let hash = niv::dataset::scene_digest(fixture_json("sunroom").unwrap().as_bytes());
    let anchors: Vec<f32> = (0..8).map(|i| (2 * i + 1) as f32 / 16.0).collect();

    let mut bake = BakeParams::new(1 << 15, 606);
    bake.cfg.spp = 24;
    bake.params = ParamSampler::Anchors(anchors.clone());
    let train_set = bake_dataset(&scene, hash, &bake).map_err(|e| e.to_string())?;

    let mut config = ModelConfig::hash(2, 14, 64);
    config.param_count = 1;
    let model = train_model(&scene, &train_set, config, 6_000, 1 << 13, 17);

    let eval_at = |value: f32, seed: u64| -> Result<f64, String> {
        let mut bake = BakeParams::new(512, seed);
        bake.cfg.spp = 96;
        bake.params = ParamSampler::Anchors(vec![value]);
        let set = bake_dataset(&scene, hash, &bake).map_err(|e| e.to_string())?;
        Ok(volumetric_mse(&model, &set, &[606])
            .map_err(|e| e.to_string())?
            .volume)
    };

    let mut anchor_mse = 0.0f64;
    for (i, &a) in anchors.iter().enumerate() {
        anchor_mse += eval_at(a, 700 + i as u64)?;
    }
    anchor_mse /= anchors.len() as f64;

    let held_out: Vec<f32> = (1..=8).map(|i| i as f32 / 8.0).collect();
    let mut held_mse = 0.0f64;
    for (i, &h) in held_out.iter().enumerate() {
        held_mse += eval_at(h, 800 + i as u64)?;
    }
    held_mse /= held_out.len() as f64;

    let ratio = held_mse / anchor_mse;
    if ratio > 1.5 {
        return Err(format!(
            "held-out MSE {held_mse:.3e} is {ratio:.2}x the anchor MSE {anchor_mse:.3e} (allow 1.5x)"
        ));
    }
    Ok(format!(
        "anchor MSE {anchor_mse:.3e}, held-out MSE {held_mse:.3e}, ratio {ratio:.2} <= 1.5"
    ))
}
