//! Quantitative harness: volumetric MSE on held-out samples, image metrics,
//! and the two sweep experiments (memory-error trade-off, hash-table size).

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::SampleSet;
use crate::field::io::Precision;
use crate::field::train::{train, TrainConfig};
use crate::field::{ModelConfig, NeuralFieldModel, PositionEncoding};
use crate::probes::{
    bake_grid, cubic_dims_for_budget, ProbeBakeMode, ProbeProvider, QueryHeuristics,
};
use crate::render::gbuffer::GBuffer;
use crate::render::{FrameHDR, IrradianceProvider};
use crate::rng::{stream_rng, Stream};
use crate::scene::Scene;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("eval set seed {0} collides with a training seed; bake the eval set with a held-out seed")]
    SeedCollision(u64),
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    SizeMismatch(u32, u32, u32, u32),
    #[error("no budget in the capacity ladder fits {0} bytes")]
    BudgetTooSmall(usize),
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
}

/// Volume/surface split of a provider's squared error on an eval set.
#[derive(Debug, Clone, Copy)]
pub struct MseSplit {
    pub volume: f64,
    /// NaN when the set has no surface samples.
    pub surface: f64,
}

/// Mean squared error of `provider` against the eval set targets, split by
/// sample kind. Refuses sets whose bake seed matches a seed the provider
/// was trained with.
pub fn volumetric_mse(
    provider: &dyn IrradianceProvider,
    eval_set: &SampleSet,
    forbidden_seeds: &[u64],
) -> Result<MseSplit, EvalError> {
    if forbidden_seeds.contains(&eval_set.seed) {
        return Err(EvalError::SeedCollision(eval_set.seed));
    }
    let sums: Vec<(f64, u64, f64, u64)> = eval_set
        .samples
        .par_chunks(1024)
        .enumerate()
        .map(|(chunk_idx, chunk)| {
            let mut volume = (0.0f64, 0u64);
            let mut surface = (0.0f64, 0u64);
            for (i, s) in chunk.iter().enumerate() {
                let mut rng = stream_rng(
                    eval_set.seed,
                    Stream::Eval,
                    (chunk_idx * 1024 + i) as u64,
                );
                let k = provider.param_count().min(2);
                let pred = provider.irradiance(
                    s.position,
                    s.direction,
                    &s.extra_params[..k],
                    &mut rng,
                );
                let mut err = 0.0f64;
                for c in 0..3 {
                    err += ((pred.channel(c) - s.target.channel(c)) as f64).powi(2);
                }
                err /= 3.0;
                if s.on_surface {
                    surface.0 += err;
                    surface.1 += 1;
                } else {
                    volume.0 += err;
                    volume.1 += 1;
                }
            }
            (volume.0, volume.1, surface.0, surface.1)
        })
        .collect();
    let (mut vs, mut vn, mut ss, mut sn) = (0.0, 0u64, 0.0, 0u64);
    for (a, b, c, d) in sums {
        vs += a;
        vn += b;
        ss += c;
        sn += d;
    }
    Ok(MseSplit {
        volume: if vn > 0 { vs / vn as f64 } else { f64::NAN },
        surface: if sn > 0 { ss / sn as f64 } else { f64::NAN },
    })
}

/// Per-pixel per-channel image metrics. `rel_mse` divides by the rendered
/// frame's squared value plus 0.01 (mirroring the training loss). Pixels
/// without coverage are excluded when a G-buffer is given.
pub fn image_metrics(
    frame: &FrameHDR,
    reference: &FrameHDR,
    coverage: Option<&GBuffer>,
) -> Result<(f64, f64), EvalError> {
    if (frame.width, frame.height) != (reference.width, reference.height) {
        return Err(EvalError::SizeMismatch(
            frame.width,
            frame.height,
            reference.width,
            reference.height,
        ));
    }
    let mut mse = 0.0f64;
    let mut rel = 0.0f64;
    let mut count = 0u64;
    for (i, (a, b)) in frame.pixels.iter().zip(&reference.pixels).enumerate() {
        if let Some(g) = coverage {
            if !g.pixels[i].coverage {
                continue;
            }
        }
        for c in 0..3 {
            let d = (a.channel(c) - b.channel(c)) as f64;
            mse += d * d;
            rel += d * d / ((a.channel(c) as f64).powi(2) + 0.01);
            count += 1;
        }
    }
    let n = count.max(1) as f64;
    Ok((mse / n, rel / n))
}

/// The published capacity ladder: widths and hash levels that realize each
/// memory tier (f16 storage).
pub const CAPACITY_LADDER: &[(u32, Option<u32>)] = &[
    (16, None),
    (32, None),
    (64, None),
    (64, Some(2)),
    (64, Some(4)),
    (64, Some(6)),
    (64, Some(8)),
];

/// Serialized payload of an architecture at the given precision.
pub fn model_payload_bytes(config: &ModelConfig, precision: Precision) -> usize {
    let hash = match config.position_encoding {
        PositionEncoding::HashGrid(cfg) => cfg.total_entries() * cfg.feature_dim as usize,
        PositionEncoding::Frequency { .. } => 0,
    };
    let mlp: usize = config
        .layer_dims()
        .iter()
        .map(|(i, o)| i * o + o)
        .sum();
    (hash + mlp) * precision.bytes_per_param()
}

/// Largest ladder entry whose f16 payload fits the budget.
pub fn arch_for_budget(budget_bytes: usize) -> Option<ModelConfig> {
    let mut best: Option<(usize, ModelConfig)> = None;
    for &(width, levels) in CAPACITY_LADDER {
        let config = match levels {
            None => ModelConfig::frequency(8, width),
            Some(l) => ModelConfig::hash(l, 17, width),
        };
        let bytes = model_payload_bytes(&config, Precision::F16);
        if bytes <= budget_bytes && best.as_ref().map_or(true, |(b, _)| bytes > *b) {
            best = Some((bytes, config));
        }
    }
    best.map(|(_, c)| c)
}

/// One row of a sweep CSV.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub provider: String,
    pub budget_bytes: usize,
    pub actual_bytes: usize,
    pub volume_mse: f64,
    pub surface_mse: f64,
    pub seed: u64,
    /// `None` prints as `n/a`, keeping CSV bytes reproducible; timings are
    /// informational only.
    pub wall_s: Option<f64>,
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("provider,budget_bytes,actual_bytes,volume_mse,surface_mse,seed,wall_s\n");
    for p in points {
        let wall = p
            .wall_s
            .map(|w| format!("{w:.3}"))
            .unwrap_or_else(|| "n/a".into());
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.provider, p.budget_bytes, p.actual_bytes, p.volume_mse, p.surface_mse, p.seed, wall
        ));
    }
    out
}

/// Memory-error trade-off: per budget, train the best-fitting model and
/// bake a probe grid, then evaluate all three providers (probes are queried
/// with and without ray-traced visibility) on the same eval set.
#[allow(clippy::too_many_arguments)]
pub fn sweep_memory_error(
    scene: &Scene,
    train_set: &SampleSet,
    eval_set: &SampleSet,
    budgets: &[usize],
    train_cfg: &TrainConfig,
    probe_spp: u32,
    record_timings: bool,
) -> Result<Vec<SweepPoint>, EvalError> {
    let mut points = Vec::new();
    for &budget in budgets {
        let config = arch_for_budget(budget).ok_or(EvalError::BudgetTooSmall(budget))?;
        let t0 = std::time::Instant::now();
        let mut model = NeuralFieldModel::new(config, scene.bbox, train_cfg.seed)?;
        train(&mut model, train_set, train_cfg, None)?;
        let mse = volumetric_mse(&model, eval_set, &[train_set.seed])?;
        points.push(SweepPoint {
            provider: "niv".into(),
            budget_bytes: budget,
            actual_bytes: model.memory_bytes(Precision::F16),
            volume_mse: mse.volume,
            surface_mse: mse.surface,
            seed: train_cfg.seed,
            wall_s: record_timings.then(|| t0.elapsed().as_secs_f64()),
        });

        let t0 = std::time::Instant::now();
        let dims = cubic_dims_for_budget(budget);
        let (mut grid, _) = bake_grid(
            scene,
            dims,
            probe_spp,
            train_cfg.seed,
            QueryHeuristics::default(),
            ProbeBakeMode::RadianceConvolve,
        );
        let plain = volumetric_mse(
            &ProbeProvider {
                grid: &grid,
                scene: None,
            },
            eval_set,
            &[train_set.seed],
        )?;
        let bake_wall = t0.elapsed().as_secs_f64();
        points.push(SweepPoint {
            provider: "probes".into(),
            budget_bytes: budget,
            actual_bytes: grid.memory_bytes(),
            volume_mse: plain.volume,
            surface_mse: plain.surface,
            seed: train_cfg.seed,
            wall_s: record_timings.then_some(bake_wall),
        });

        grid.heuristics.rt_visibility = true;
        let rt = volumetric_mse(
            &ProbeProvider {
                grid: &grid,
                scene: Some(scene),
            },
            eval_set,
            &[train_set.seed],
        )?;
        points.push(SweepPoint {
            provider: "probes+rt".into(),
            budget_bytes: budget,
            actual_bytes: grid.memory_bytes(),
            volume_mse: rt.volume,
            surface_mse: rt.surface,
            seed: train_cfg.seed,
            wall_s: record_timings.then_some(bake_wall),
        });
    }
    Ok(points)
}

/// Hash-table ablation: fixed level count and width, sweep the table size.
pub fn sweep_hash_table(
    scene: &Scene,
    train_set: &SampleSet,
    eval_set: &SampleSet,
    table_log2s: &[u32],
    levels: u32,
    width: u32,
    train_cfg: &TrainConfig,
) -> Result<Vec<SweepPoint>, EvalError> {
    let mut points = Vec::new();
    for &log2 in table_log2s {
        let config = ModelConfig::hash(levels, log2, width);
        let mut model = NeuralFieldModel::new(config, scene.bbox, train_cfg.seed)?;
        train(&mut model, train_set, train_cfg, None)?;
        let mse = volumetric_mse(&model, eval_set, &[train_set.seed])?;
        points.push(SweepPoint {
            provider: format!("niv-t{log2}"),
            budget_bytes: 1usize << log2,
            actual_bytes: model.memory_bytes(Precision::F16),
            volume_mse: mse.volume,
            surface_mse: mse.surface,
            seed: train_cfg.seed,
            wall_s: None,
        });
    }
    Ok(points)
}

/// Wall-clock batched query rate; informational, never a gate.
pub fn throughput_report(provider: &dyn IrradianceProvider, n_queries: usize) -> Option<f64> {
    if n_queries == 0 {
        return None;
    }
    let inputs: Vec<(glam::Vec3, glam::Vec3)> = (0..n_queries)
        .map(|i| {
            let mut rng = stream_rng(99, Stream::Eval, i as u64);
            use rand::Rng;
            (
                glam::Vec3::new(rng.gen(), rng.gen(), rng.gen()),
                crate::scene::sampling::uniform_sphere(rng.gen(), rng.gen()),
            )
        })
        .collect();
    let params = vec![0.0f32; provider.param_count()];
    let t0 = std::time::Instant::now();
    let acc: f64 = inputs
        .par_iter()
        .map_init(
            || stream_rng(100, Stream::Eval, 0),
            |rng, (p, n)| provider.irradiance(*p, *n, &params, rng).luminance() as f64,
        )
        .sum();
    let dt = t0.elapsed().as_secs_f64();
    std::hint::black_box(acc);
    Some(n_queries as f64 / dt)
}

/// gnuplot script for a memory sweep CSV.
pub fn gnuplot_script(csv_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set logscale xy\n\
         set xlabel 'memory (bytes)'\n\
         set ylabel 'volumetric MSE'\n\
         set key left bottom\n\
         plot '{csv_name}' using 3:($1 eq 'niv' ? $4 : 1/0) with linespoints title 'NIV', \\\n\
         \x20    '{csv_name}' using 3:($1 eq 'probes' ? $4 : 1/0) with linespoints title 'probes', \\\n\
         \x20    '{csv_name}' using 3:($1 eq 'probes+rt' ? $4 : 1/0) with linespoints title 'probes+RT'\n"
    )
}
