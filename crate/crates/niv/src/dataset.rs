//! Training/evaluation sample sets and the `NIVD` binary format.
//!
//! A sample couples a position-direction pair with its path-traced target.
//! Positions are stored normalized to the unit cube by the static scene
//! bounds, which is also the coordinate frame every provider queries in.

use std::io::Read;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use glam::Vec3;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::rgb::Rgb;
use crate::rng::{stream_rng, Stream};
use crate::scene::sampling::uniform_sphere;
use crate::scene::Scene;
use crate::tracer::{
    indirect_incident_radiance, indirect_irradiance, SceneView, TracerConfig, TracerError,
};

const MAGIC: &[u8; 4] = b"NIVD";
const VERSION: u32 = 1;
const FLAG_ON_SURFACE: u32 = 1;
/// Attempts per volume slot before declaring the scene mostly solid.
const CULL_RETRY_LIMIT: u32 = 64;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a NIVD dataset file")]
    BadMagic,
    #[error("unsupported NIVD version {0}")]
    BadVersion(u32),
    #[error("truncated dataset file")]
    Truncated,
    #[error(transparent)]
    Tracer(#[from] TracerError),
}

/// One training or evaluation record.
#[derive(Debug, Clone, Copy)]
pub struct IrradianceSample {
    /// Position in the unit cube (normalized by the static scene bounds).
    pub position: Vec3,
    /// Unit query direction; the shading normal for surface samples.
    pub direction: Vec3,
    /// Normalized variable scene parameters, up to two.
    pub extra_params: [f32; 2],
    pub target: Rgb,
    pub on_surface: bool,
    /// Fraction of first hits that struck a backface while estimating.
    pub backface_fraction: f32,
}

/// What the baked target measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    /// Pre-integrated indirect irradiance `E(x, n)`.
    Irradiance,
    /// Indirect incident radiance `L(x, omega)`; direction sampled on the
    /// full sphere even for surface records.
    IncidentRadiance,
}

/// How variable scene parameters are drawn per sample.
#[derive(Debug, Clone)]
pub enum ParamSampler {
    /// Scene has no variable parameters.
    None,
    /// Uniform in `[0,1]^k`.
    Uniform(usize),
    /// Uniform choice among fixed anchor values (single parameter).
    Anchors(Vec<f32>),
}

impl ParamSampler {
    pub fn dims(&self) -> usize {
        match self {
            ParamSampler::None => 0,
            ParamSampler::Uniform(k) => *k,
            ParamSampler::Anchors(_) => 1,
        }
    }

    fn draw(&self, rng: &mut rand_chacha::ChaCha8Rng) -> [f32; 2] {
        let mut p = [0.0f32; 2];
        match self {
            ParamSampler::None => {}
            ParamSampler::Uniform(k) => {
                for slot in p.iter_mut().take(*k) {
                    *slot = rng.gen();
                }
            }
            ParamSampler::Anchors(anchors) => {
                let i = (rng.gen::<f32>() * anchors.len() as f32).min(anchors.len() as f32 - 1.0);
                p[0] = anchors[i as usize];
            }
        }
        p
    }
}

#[derive(Debug, Clone)]
pub struct BakeParams {
    pub n_samples: usize,
    /// Fraction of samples pinned to static surfaces with the normal as
    /// direction (0.2 reproduces the production split).
    pub surface_fraction: f32,
    pub cfg: TracerConfig,
    /// Discard volume samples whose first hits are majority-backfacing.
    pub culling: bool,
    pub params: ParamSampler,
    pub target: TargetKind,
    pub seed: u64,
}

impl BakeParams {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        BakeParams {
            n_samples,
            surface_fraction: 0.2,
            cfg: TracerConfig::default(),
            culling: true,
            params: ParamSampler::None,
            target: TargetKind::Irradiance,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampleSet {
    pub samples: Vec<IrradianceSample>,
    pub scene_hash: [u8; 32],
    pub spp_used: u32,
    pub seed: u64,
    pub surface_fraction: f32,
    pub n_extra_params: u32,
}

impl SampleSet {
    pub fn surface_count(&self) -> usize {
        self.samples.iter().filter(|s| s.on_surface).count()
    }

    /// Mean target over all samples; the best constant predictor.
    pub fn target_mean(&self) -> Rgb {
        let mut sum = [0.0f64; 3];
        for s in &self.samples {
            let t = s.target.to_array();
            for c in 0..3 {
                sum[c] += t[c] as f64;
            }
        }
        let n = self.samples.len().max(1) as f64;
        Rgb::new(
            (sum[0] / n) as f32,
            (sum[1] / n) as f32,
            (sum[2] / n) as f32,
        )
    }
}

/// Digest of a scene file's bytes, recorded in datasets baked from it.
pub fn scene_digest(bytes: &[u8]) -> [u8; 32] {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().into()
}

/// Bakes a sample set: `(1 - surface_fraction) * n` volume samples with
/// positions uniform in the static bounds and directions uniform on the
/// sphere, the rest pinned to surfaces with the shading normal as
/// direction. Deterministic per seed and worker-count independent.
pub fn bake_dataset(
    scene: &Scene,
    scene_hash: [u8; 32],
    params: &BakeParams,
) -> Result<SampleSet, DatasetError> {
    params.cfg.validate()?;
    let n = params.n_samples;
    let n_surface = (params.surface_fraction * n as f32).round() as usize;
    let n_volume = n - n_surface;

    let results: Vec<Result<IrradianceSample, TracerError>> = (0..n)
        .into_par_iter()
        .map(|slot| {
            let mut rng = stream_rng(params.seed, Stream::BakeSample, slot as u64);
            if slot < n_volume {
                bake_volume_sample(scene, params, &mut rng, slot)
            } else {
                bake_surface_sample(scene, params, &mut rng)
            }
        })
        .collect();

    let mut samples = Vec::with_capacity(n);
    let mut exhausted = 0usize;
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(TracerError::RetryExhausted { .. }) => exhausted += 1,
            Err(e) => return Err(e.into()),
        }
    }
    if exhausted > 0 {
        return Err(TracerError::RetryExhausted {
            achieved: samples.len(),
            requested: n,
        }
        .into());
    }

    Ok(SampleSet {
        samples,
        scene_hash,
        spp_used: params.cfg.spp,
        seed: params.seed,
        surface_fraction: params.surface_fraction,
        n_extra_params: params.params.dims() as u32,
    })
}

fn bake_volume_sample(
    scene: &Scene,
    params: &BakeParams,
    rng: &mut rand_chacha::ChaCha8Rng,
    slot: usize,
) -> Result<IrradianceSample, TracerError> {
    let attempts = if params.culling { CULL_RETRY_LIMIT } else { 1 };
    for _ in 0..attempts {
        let extra = params.params.draw(rng);
        let view = SceneView::for_bake(scene, &extra[..params.params.dims()]);
        let u = Vec3::new(rng.gen(), rng.gen(), rng.gen());
        let position = scene.bbox.from_unit(u);
        let direction = uniform_sphere(rng.gen(), rng.gen());

        let (target, backface_fraction) = match params.target {
            TargetKind::Irradiance => {
                let est = indirect_irradiance(&view, position, direction, &params.cfg, rng)?;
                (est.value, est.backface_fraction)
            }
            TargetKind::IncidentRadiance => {
                let (value, backface) =
                    indirect_incident_radiance(&view, position, direction, &params.cfg, rng)?;
                (value, backface as u32 as f32)
            }
        };
        if params.culling && backface_fraction > 0.5 {
            continue;
        }
        return Ok(IrradianceSample {
            position: scene.bbox.to_unit(position),
            direction,
            extra_params: extra,
            target,
            on_surface: false,
            backface_fraction,
        });
    }
    Err(TracerError::RetryExhausted {
        achieved: slot,
        requested: params.n_samples,
    })
}

fn bake_surface_sample(
    scene: &Scene,
    params: &BakeParams,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<IrradianceSample, TracerError> {
    let sampler = scene
        .static_set
        .sampler
        .as_ref()
        .ok_or_else(|| TracerError::Config("no sampleable surface".into()))?;
    let extra = params.params.draw(rng);
    let view = SceneView::for_bake(scene, &extra[..params.params.dims()]);
    let (position, normal, _) = sampler.sample(
        &scene.static_set.positions,
        &scene.static_set.shading_normals,
        rng.gen(),
        rng.gen(),
        rng.gen(),
    );
    // Estimate from just off the surface so the first hits do not strike
    // the surface itself.
    let spawn = scene.offset_position(position, normal);
    match params.target {
        TargetKind::Irradiance => {
            let est = indirect_irradiance(&view, spawn, normal, &params.cfg, rng)?;
            Ok(IrradianceSample {
                position: scene.bbox.to_unit(position),
                direction: normal,
                extra_params: extra,
                target: est.value,
                on_surface: true,
                backface_fraction: est.backface_fraction,
            })
        }
        TargetKind::IncidentRadiance => {
            let direction = uniform_sphere(rng.gen(), rng.gen());
            let (value, backface) =
                indirect_incident_radiance(&view, spawn, direction, &params.cfg, rng)?;
            Ok(IrradianceSample {
                position: scene.bbox.to_unit(position),
                direction,
                extra_params: extra,
                target: value,
                on_surface: true,
                backface_fraction: backface as u32 as f32,
            })
        }
    }
}

/// Serializes in the `NIVD` layout: magic, version, scene hash, counts,
/// bake metadata, then little-endian f32 records
/// `[pos x3, dir x3, params x k, target x3, flags u32]`.
pub fn save_sampleset(set: &SampleSet, path: &Path) -> Result<(), DatasetError> {
    let mut buf = Vec::with_capacity(64 + set.samples.len() * 44);
    buf.extend_from_slice(MAGIC);
    buf.write_u32::<LittleEndian>(VERSION).unwrap();
    buf.extend_from_slice(&set.scene_hash);
    buf.write_u64::<LittleEndian>(set.samples.len() as u64)
        .unwrap();
    buf.write_u64::<LittleEndian>(set.surface_count() as u64)
        .unwrap();
    buf.write_u32::<LittleEndian>(set.spp_used).unwrap();
    buf.write_u64::<LittleEndian>(set.seed).unwrap();
    buf.write_f32::<LittleEndian>(set.surface_fraction).unwrap();
    buf.write_u32::<LittleEndian>(set.n_extra_params).unwrap();
    let k = set.n_extra_params as usize;
    for s in &set.samples {
        for v in s.position.to_array() {
            buf.write_f32::<LittleEndian>(v).unwrap();
        }
        for v in s.direction.to_array() {
            buf.write_f32::<LittleEndian>(v).unwrap();
        }
        for p in &s.extra_params[..k] {
            buf.write_f32::<LittleEndian>(*p).unwrap();
        }
        for v in s.target.to_array() {
            buf.write_f32::<LittleEndian>(v).unwrap();
        }
        buf.write_u32::<LittleEndian>(if s.on_surface { FLAG_ON_SURFACE } else { 0 })
            .unwrap();
    }
    std::fs::write(path, buf).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_sampleset(path: &Path) -> Result<SampleSet, DatasetError> {
    let bytes = std::fs::read(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut r = std::io::Cursor::new(bytes);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| DatasetError::Truncated)?;
    if &magic != MAGIC {
        return Err(DatasetError::BadMagic);
    }
    let version = r
        .read_u32::<LittleEndian>()
        .map_err(|_| DatasetError::Truncated)?;
    if version != VERSION {
        return Err(DatasetError::BadVersion(version));
    }
    let mut scene_hash = [0u8; 32];
    r.read_exact(&mut scene_hash)
        .map_err(|_| DatasetError::Truncated)?;
    let count = r
        .read_u64::<LittleEndian>()
        .map_err(|_| DatasetError::Truncated)? as usize;
    let _surface_count = r
        .read_u64::<LittleEndian>()
        .map_err(|_| DatasetError::Truncated)?;
    let spp_used = r
        .read_u32::<LittleEndian>()
        .map_err(|_| DatasetError::Truncated)?;
    let seed = r
        .read_u64::<LittleEndian>()
        .map_err(|_| DatasetError::Truncated)?;
    let surface_fraction = r
        .read_f32::<LittleEndian>()
        .map_err(|_| DatasetError::Truncated)?;
    let n_extra_params = r
        .read_u32::<LittleEndian>()
        .map_err(|_| DatasetError::Truncated)?;
    let k = n_extra_params as usize;

    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let mut rec = [0.0f32; 9 + 2];
        for slot in rec.iter_mut().take(6) {
            *slot = r
                .read_f32::<LittleEndian>()
                .map_err(|_| DatasetError::Truncated)?;
        }
        let mut extra_params = [0.0f32; 2];
        for slot in extra_params.iter_mut().take(k) {
            *slot = r
                .read_f32::<LittleEndian>()
                .map_err(|_| DatasetError::Truncated)?;
        }
        let mut target = [0.0f32; 3];
        for slot in &mut target {
            *slot = r
                .read_f32::<LittleEndian>()
                .map_err(|_| DatasetError::Truncated)?;
        }
        let flags = r
            .read_u32::<LittleEndian>()
            .map_err(|_| DatasetError::Truncated)?;
        samples.push(IrradianceSample {
            position: Vec3::new(rec[0], rec[1], rec[2]),
            direction: Vec3::new(rec[3], rec[4], rec[5]),
            extra_params,
            target: Rgb::from_array(target),
            on_surface: flags & FLAG_ON_SURFACE != 0,
            backface_fraction: 0.0,
        });
    }
    Ok(SampleSet {
        samples,
        scene_hash,
        spp_used,
        seed,
        surface_fraction,
        n_extra_params,
    })
}
