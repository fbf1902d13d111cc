//! Monte Carlo ground truth.
//!
//! `direct_irradiance` estimates light arriving straight from emitters;
//! `indirect_irradiance` estimates the cosine-weighted integral of radiance
//! that bounced off at least one surface before reaching the query point.
//! Emitter radiance seen directly never enters the indirect estimate — it is
//! re-added at render time as the noise-free direct term.

pub mod reference;

use glam::Vec3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rgb::{Rgb, BLACK};
use crate::scene::sampling::{cosine_hemisphere, uniform_triangle};
use crate::scene::{BvhSelector, Emitter, MaterialKind, Ray, Scene, SurfaceHit};

#[derive(Debug, Error)]
pub enum TracerError {
    #[error("NaN in estimator at sample {sample} (position {position:?})")]
    NonFinite { sample: u32, position: [f32; 3] },
    #[error("invalid tracer config: {0}")]
    Config(String),
    #[error(
        "retry budget exhausted: scene is mostly solid ({achieved} of {requested} volume samples baked)"
    )]
    RetryExhausted { achieved: usize, requested: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct TracerConfig {
    /// Hemisphere samples per irradiance estimate.
    pub spp: u32,
    /// Maximum surface vertices per path.
    pub max_depth: u32,
    /// Path depth at which Russian roulette starts.
    pub rr_start_depth: u32,
    /// Lower clamp on the roulette survival probability.
    pub rr_min_prob: f32,
}

impl Default for TracerConfig {
    fn default() -> Self {
        TracerConfig {
            spp: 64,
            max_depth: 8,
            rr_start_depth: 3,
            rr_min_prob: 0.05,
        }
    }
}

impl TracerConfig {
    pub fn with_spp(spp: u32) -> Self {
        TracerConfig {
            spp,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), TracerError> {
        if self.spp < 1 {
            return Err(TracerError::Config("spp must be >= 1".into()));
        }
        if self.max_depth < 2 {
            return Err(TracerError::Config("max_depth must be >= 2".into()));
        }
        if !(self.rr_min_prob > 0.0 && self.rr_min_prob <= 1.0) {
            return Err(TracerError::Config("rr_min_prob must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// A scene plus the emitter set in effect (variable parameters applied) and
/// the geometry the rays may see. Bakes use `Static`; renders use `Both`.
pub struct SceneView<'a> {
    pub scene: &'a Scene,
    pub emitters: Vec<Emitter>,
    pub occluders: BvhSelector,
}

impl<'a> SceneView<'a> {
    pub fn for_bake(scene: &'a Scene, params: &[f32]) -> Self {
        SceneView {
            scene,
            emitters: scene.configured_emitters(params),
            occluders: BvhSelector::Static,
        }
    }

    pub fn for_render(scene: &'a Scene, params: &[f32]) -> Self {
        SceneView {
            scene,
            emitters: scene.configured_emitters(params),
            occluders: BvhSelector::Both,
        }
    }

    fn intersect(&self, ray: &Ray, t_max: f32) -> Option<SurfaceHit> {
        self.scene.intersect(self.occluders, ray, t_max)
    }

    fn unoccluded(&self, ray: &Ray, t_max: f32) -> bool {
        self.scene.unoccluded(self.occluders, ray, t_max)
    }

    /// Total emissive area visible to this view's rays.
    fn emissive_area(&self) -> f32 {
        let mut a = self.scene.static_set.emissive_area;
        if self.occluders == BvhSelector::Both {
            a += self.scene.dynamic_set.emissive_area;
        }
        a
    }
}

fn face_forward(n: Vec3, toward: Vec3) -> Vec3 {
    if n.dot(toward) < 0.0 {
        -n
    } else {
        n
    }
}

/// One-sample estimate of the irradiance arriving at `x` (oriented by unit
/// normal `n`) straight from the emitters, zero bounces in between.
///
/// Directional lights are exact; the constant environment uses one cosine
/// shadow ray against the analytic `pi * L`; area lights draw one
/// uniform-by-area point. Averaging calls refines stochastic terms.
/// `x` must already sit on the outside of any surface it was spawned from.
pub fn direct_irradiance(view: &SceneView, x: Vec3, n: Vec3, rng: &mut ChaCha8Rng) -> Rgb {
    let mut total = BLACK;
    for emitter in &view.emitters {
        match *emitter {
            Emitter::Directional {
                direction,
                radiance,
            } => {
                let cos = (-direction).dot(n);
                if cos > 0.0 && view.unoccluded(&Ray::new(x, -direction), f32::INFINITY) {
                    total += radiance * cos;
                }
            }
            Emitter::Environment { radiance } => {
                let dir = cosine_hemisphere(n, rng.gen(), rng.gen());
                if view.unoccluded(&Ray::new(x, dir), f32::INFINITY) {
                    total += radiance * std::f32::consts::PI;
                }
            }
        }
    }
    total += sample_area_lights(view, x, n, rng);
    total
}

/// One next-event sample over every emissive triangle in the view.
fn sample_area_lights(view: &SceneView, x: Vec3, n: Vec3, rng: &mut ChaCha8Rng) -> Rgb {
    let total_area = view.emissive_area();
    if total_area <= 0.0 {
        return BLACK;
    }
    let mut target = rng.gen::<f32>().min(0.999_999) * total_area;
    let u1 = rng.gen::<f32>();
    let u2 = rng.gen::<f32>();

    let mut pick = None;
    for (set, dynamic) in [(&view.scene.static_set, false), (&view.scene.dynamic_set, true)] {
        if dynamic && view.occluders != BvhSelector::Both {
            break;
        }
        if target < set.emissive_area {
            let slot = set.emissive_cdf.partition_point(|&c| c <= target);
            let slot = slot.min(set.emissive.len().saturating_sub(1));
            pick = Some((set, set.emissive[slot]));
            break;
        }
        target -= set.emissive_area;
    }
    let Some((set, tri_id)) = pick else {
        return BLACK;
    };

    let tri = &set.positions[tri_id as usize];
    let y = uniform_triangle(tri, u1, u2);
    let light_n = crate::scene::mesh::triangle_normal(tri);
    let to_light = y - x;
    let dist_sq = to_light.length_squared();
    if dist_sq <= 1e-12 {
        return BLACK;
    }
    let dist = dist_sq.sqrt();
    let w = to_light / dist;
    let cos_x = w.dot(n);
    let cos_y = (-w).dot(light_n); // emission is one-sided
    if cos_x <= 0.0 || cos_y <= 0.0 {
        return BLACK;
    }
    let eps = view.scene.ray_epsilon;
    if !view.unoccluded(&Ray::new(x, w), dist - 2.0 * eps) {
        return BLACK;
    }
    let emission = view.scene.material(set.material[tri_id as usize]).emission;
    emission * (cos_x * cos_y / dist_sq * total_area)
}

/// Outgoing radiance at `hit` toward the origin of `ray`, *excluding* the
/// hit's own emission: exactly the light that has scattered at least once.
/// Emission enters only through next-event estimation at each vertex, so
/// BSDF-sampled emitter hits never double count. Mirror hits terminate the
/// path (bake targets cover diffuse transport only).
pub fn radiance_after_hit(
    view: &SceneView,
    ray: &Ray,
    hit: &SurfaceHit,
    cfg: &TracerConfig,
    rng: &mut ChaCha8Rng,
) -> Rgb {
    let mut radiance = BLACK;
    let mut throughput = crate::rgb::WHITE;
    let mut ray = *ray;
    let mut hit = *hit;
    let mut depth = 1u32;
    loop {
        let material = view.scene.material(hit.material);
        if material.kind == MaterialKind::Mirror {
            break;
        }
        let n = face_forward(hit.shading_normal, -ray.dir);
        let geom_side = face_forward(hit.geometric_normal, -ray.dir);
        let spawn = view.scene.offset_position(hit.position, geom_side);

        let direct = direct_irradiance(view, spawn, n, rng);
        radiance += throughput * material.albedo * (direct * std::f32::consts::FRAC_1_PI);

        // Cosine sampling against a Lambertian lobe cancels to the albedo.
        throughput *= material.albedo;
        if throughput.max_component() <= 0.0 || depth >= cfg.max_depth {
            break;
        }
        depth += 1;
        if depth > cfg.rr_start_depth {
            let survive = throughput.luminance().clamp(cfg.rr_min_prob, 1.0);
            if rng.gen::<f32>() >= survive {
                break;
            }
            throughput = throughput * (1.0 / survive);
        }
        let dir = cosine_hemisphere(n, rng.gen(), rng.gen());
        ray = Ray::new(spawn, dir);
        match view.intersect(&ray, f32::INFINITY) {
            Some(h) => hit = h,
            None => break,
        }
    }
    radiance
}

/// Indirect irradiance estimate with per-channel standard error of the mean
/// and the fraction of first hits that were backfacing.
#[derive(Debug, Clone, Copy)]
pub struct IndirectEstimate {
    pub value: Rgb,
    pub backface_fraction: f32,
    pub std_error: Rgb,
}

/// Estimates `E(x, n)`: for each of `cfg.spp` cosine-sampled directions,
/// trace to the first hit and accumulate the reflected (emission-free)
/// radiance there. Misses and directly seen emitters contribute nothing.
pub fn indirect_irradiance(
    view: &SceneView,
    x: Vec3,
    n: Vec3,
    cfg: &TracerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<IndirectEstimate, TracerError> {
    let mut mean = [0.0f64; 3];
    let mut m2 = [0.0f64; 3];
    let mut backfaces = 0u32;
    for s in 0..cfg.spp {
        let dir = cosine_hemisphere(n, rng.gen(), rng.gen());
        let ray = Ray::new(x, dir);
        let contribution = match view.intersect(&ray, f32::INFINITY) {
            None => BLACK,
            Some(hit) => {
                if hit.is_backface {
                    backfaces += 1;
                }
                radiance_after_hit(view, &ray, &hit, cfg, rng) * std::f32::consts::PI
            }
        };
        if !contribution.is_finite() {
            return Err(TracerError::NonFinite {
                sample: s,
                position: x.to_array(),
            });
        }
        // Welford accumulation per channel.
        let arr = contribution.to_array();
        for c in 0..3 {
            let v = arr[c] as f64;
            let delta = v - mean[c];
            mean[c] += delta / (s + 1) as f64;
            m2[c] += delta * (v - mean[c]);
        }
    }
    let spp = cfg.spp as f64;
    let var_denom = (spp - 1.0).max(1.0);
    let std_error = Rgb::new(
        (m2[0] / var_denom / spp).sqrt() as f32,
        (m2[1] / var_denom / spp).sqrt() as f32,
        (m2[2] / var_denom / spp).sqrt() as f32,
    );
    Ok(IndirectEstimate {
        value: Rgb::new(mean[0] as f32, mean[1] as f32, mean[2] as f32),
        backface_fraction: backfaces as f32 / cfg.spp as f32,
        std_error,
    })
}

/// The Monte Carlo estimator behind the provider interface: shading
/// directly against ground truth. Queries are stochastic, so callers pass
/// a per-pixel stream. Quantities match the trained models (indirect only).
pub struct OracleProvider<'a> {
    pub scene: &'a Scene,
    pub cfg: TracerConfig,
}

impl crate::render::IrradianceProvider for OracleProvider<'_> {
    fn irradiance(
        &self,
        position: glam::Vec3,
        n: glam::Vec3,
        params: &[f32],
        rng: &mut ChaCha8Rng,
    ) -> Rgb {
        let view = SceneView::for_bake(self.scene, params);
        // Nudge off any surface the query sits on; volume queries move by a
        // negligible epsilon.
        let world = self.scene.bbox.from_unit(position);
        let x = self.scene.offset_position(world, n);
        indirect_irradiance(&view, x, n, &self.cfg, rng)
            .map(|e| e.value)
            .unwrap_or(crate::rgb::BLACK)
    }

    fn param_count(&self) -> usize {
        self.scene.variable_params.len()
    }

    fn label(&self) -> &'static str {
        "oracle"
    }
}

/// Radiance arriving at `x` from direction `toward` after at least one
/// bounce; the target quantity of incident-radiance models. The first hit
/// is deterministic, the continuation is averaged over `cfg.spp` paths.
pub fn indirect_incident_radiance(
    view: &SceneView,
    x: Vec3,
    toward: Vec3,
    cfg: &TracerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Rgb, bool), TracerError> {
    let ray = Ray::new(x, toward);
    let Some(hit) = view.intersect(&ray, f32::INFINITY) else {
        return Ok((BLACK, false));
    };
    let mut sum = BLACK;
    for s in 0..cfg.spp {
        let v = radiance_after_hit(view, &ray, &hit, cfg, rng);
        if !v.is_finite() {
            return Err(TracerError::NonFinite {
                sample: s,
                position: x.to_array(),
            });
        }
        sum += v;
    }
    Ok((sum / cfg.spp as f32, hit.is_backface))
}
