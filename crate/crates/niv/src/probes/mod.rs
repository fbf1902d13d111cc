//! Classical baseline: a regular lattice of second-order spherical-harmonics
//! irradiance probes with the usual trilinear + heuristic query path.
//!
//! Probes store the *indirect* irradiance field only, exactly like the
//! neural provider, so the two are interchangeable behind the shading API.

pub mod io;

use glam::Vec3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::rgb::{Rgb, BLACK};
use crate::rng::{stream_rng, Stream};
use crate::scene::sampling::uniform_sphere;
use crate::scene::{Aabb, BvhSelector, Ray, Scene};
use crate::tracer::{indirect_irradiance, radiance_after_hit, SceneView, TracerConfig};

/// Real SH basis, bands l = 0..2, conventional normalization.
/// Order: `[Y00, Y1-1, Y10, Y11, Y2-2, Y2-1, Y20, Y21, Y22]`.
pub fn sh_basis(n: Vec3) -> [f32; 9] {
    let (x, y, z) = (n.x, n.y, n.z);
    [
        0.282095,
        0.488603 * y,
        0.488603 * z,
        0.488603 * x,
        1.092548 * x * y,
        1.092548 * y * z,
        0.315392 * (3.0 * z * z - 1.0),
        1.092548 * x * z,
        0.546274 * (x * x - y * y),
    ]
}

/// Clamped-cosine convolution scales per coefficient (pi, 2pi/3, pi/4 by
/// band), turning a radiance projection into an irradiance reconstruction.
const COSINE_LOBE: [f32; 9] = {
    let a0 = std::f32::consts::PI;
    let a1 = 2.0 * std::f32::consts::PI / 3.0;
    let a2 = std::f32::consts::PI / 4.0;
    [a0, a1, a1, a1, a2, a2, a2, a2, a2]
};

/// One probe: 9 RGB coefficients reconstructing `E(n) = sum c_i Y_i(n)`.
/// 27 scalars, stored as f16 on disk (54 bytes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShIrradiance {
    pub coeffs: [Rgb; 9],
}

impl Default for ShIrradiance {
    fn default() -> Self {
        ShIrradiance {
            coeffs: [BLACK; 9],
        }
    }
}

impl ShIrradiance {
    pub fn reconstruct(&self, n: Vec3) -> Rgb {
        let basis = sh_basis(n);
        let mut out = BLACK;
        for (c, b) in self.coeffs.iter().zip(basis) {
            out += *c * b;
        }
        out
    }
}

/// How a probe's coefficients are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeBakeMode {
    /// Project incident indirect radiance, then convolve with the clamped
    /// cosine. One path per direction sample.
    RadianceConvolve,
    /// Project sampled irradiance values directly (no convolution);
    /// slower per sample, used for cross-checks.
    DirectIrradiance,
}

#[derive(Debug, Clone, Copy)]
pub struct QueryHeuristics {
    /// Down-weight probes behind the shading normal.
    pub cosine_falloff: bool,
    /// Power applied to the clamped falloff dot product.
    pub falloff_exponent: f32,
    /// Interpolation weights never drop below this, so some probe always
    /// contributes.
    pub weight_clamp: f32,
    /// Zero out probes occluded from the query point (shadow ray against
    /// static geometry only).
    pub rt_visibility: bool,
}

impl Default for QueryHeuristics {
    fn default() -> Self {
        QueryHeuristics {
            cosine_falloff: true,
            falloff_exponent: 1.0,
            weight_clamp: 1e-6,
            rt_visibility: false,
        }
    }
}

pub struct ProbeGrid {
    pub dims: [u32; 3],
    pub bbox: Aabb,
    /// x-fastest order: `index = (z * ny + y) * nx + x`.
    pub probes: Vec<ShIrradiance>,
    pub heuristics: QueryHeuristics,
}

/// Flagged observations from a bake.
#[derive(Debug, Clone, Default)]
pub struct BakeReport {
    /// Probes whose surroundings look mostly backfacing (inside geometry).
    /// They are baked as-is, just reported.
    pub inside_geometry: Vec<u32>,
}

impl ProbeGrid {
    pub fn probe_count(&self) -> usize {
        self.probes.len()
    }

    /// Serialized payload: 54 bytes per probe.
    pub fn memory_bytes(&self) -> usize {
        self.probes.len() * 54
    }

    pub fn probe_position(&self, ix: u32, iy: u32, iz: u32) -> Vec3 {
        let t = Vec3::new(
            ix as f32 / (self.dims[0] - 1) as f32,
            iy as f32 / (self.dims[1] - 1) as f32,
            iz as f32 / (self.dims[2] - 1) as f32,
        );
        self.bbox.from_unit(t)
    }

    fn index(&self, ix: u32, iy: u32, iz: u32) -> usize {
        ((iz * self.dims[1] + iy) * self.dims[0] + ix) as usize
    }

    /// Trilinear + heuristics interpolation of the 8 surrounding probes.
    /// `scene` enables ray-traced visibility when the grid asks for it.
    pub fn query(&self, x: Vec3, n: Vec3, scene: Option<&Scene>) -> Rgb {
        let cell_max = [
            (self.dims[0] - 2) as f32,
            (self.dims[1] - 2) as f32,
            (self.dims[2] - 2) as f32,
        ];
        let extent = self.bbox.max - self.bbox.min;
        let grid_pos = (x - self.bbox.min) / extent
            * Vec3::new(
                (self.dims[0] - 1) as f32,
                (self.dims[1] - 1) as f32,
                (self.dims[2] - 1) as f32,
            );
        let cell = Vec3::new(
            grid_pos.x.floor().clamp(0.0, cell_max[0]),
            grid_pos.y.floor().clamp(0.0, cell_max[1]),
            grid_pos.z.floor().clamp(0.0, cell_max[2]),
        );
        let frac = (grid_pos - cell).clamp(Vec3::ZERO, Vec3::ONE);
        let (cx, cy, cz) = (cell.x as u32, cell.y as u32, cell.z as u32);

        let mut weights = [0.0f32; 8];
        let mut values = [BLACK; 8];
        for i in 0..8 {
            let (dx, dy, dz) = ((i & 1) as u32, ((i >> 1) & 1) as u32, ((i >> 2) & 1) as u32);
            let (ix, iy, iz) = (cx + dx, cy + dy, cz + dz);
            let wx = if dx == 1 { frac.x } else { 1.0 - frac.x };
            let wy = if dy == 1 { frac.y } else { 1.0 - frac.y };
            let wz = if dz == 1 { frac.z } else { 1.0 - frac.z };
            let mut w = wx * wy * wz;

            let probe_pos = self.probe_position(ix, iy, iz);
            if self.heuristics.cosine_falloff {
                let to_probe = probe_pos - x;
                if to_probe.length_squared() > 1e-12 {
                    let falloff = to_probe.normalize().dot(n).max(0.0);
                    w *= falloff.powf(self.heuristics.falloff_exponent);
                }
            }
            if self.heuristics.rt_visibility {
                if let Some(scene) = scene {
                    let origin = scene.offset_position(x, n);
                    let to_probe = probe_pos - origin;
                    let dist = to_probe.length();
                    if dist > scene.ray_epsilon {
                        let ray = Ray::new(origin, to_probe / dist);
                        if !scene.unoccluded(
                            BvhSelector::Static,
                            &ray,
                            dist - scene.ray_epsilon,
                        ) {
                            w = 0.0;
                        }
                    }
                }
            }
            weights[i] = w.max(self.heuristics.weight_clamp);
            values[i] = self.probes[self.index(ix, iy, iz)].reconstruct(n);
        }

        let total: f32 = weights.iter().sum();
        let mut out = BLACK;
        for (w, v) in weights.iter().zip(values) {
            out += v * (w / total);
        }
        out
    }
}

/// Projects the spherical function sampled by `radiance` into SH-2 with
/// `samples` uniform directions and convolves with the clamped cosine.
/// This is the bake kernel, exposed so tests can inject synthetic fields.
pub fn project_radiance(
    mut radiance: impl FnMut(Vec3) -> Rgb,
    samples: u32,
    rng: &mut ChaCha8Rng,
) -> ShIrradiance {
    let mut coeffs = [BLACK; 9];
    for _ in 0..samples {
        let dir = uniform_sphere(rng.gen(), rng.gen());
        let value = radiance(dir);
        for (c, b) in coeffs.iter_mut().zip(sh_basis(dir)) {
            *c += value * b;
        }
    }
    let scale = 4.0 * std::f32::consts::PI / samples as f32;
    for (c, lobe) in coeffs.iter_mut().zip(COSINE_LOBE) {
        *c = *c * (scale * lobe);
    }
    ShIrradiance { coeffs }
}

/// Bakes one probe against the scene's indirect field.
pub fn bake_probe(
    view: &SceneView,
    position: Vec3,
    samples: u32,
    cfg: &TracerConfig,
    mode: ProbeBakeMode,
    rng: &mut ChaCha8Rng,
) -> ShIrradiance {
    match mode {
        ProbeBakeMode::RadianceConvolve => {
            let mut coeffs = [BLACK; 9];
            for _ in 0..samples {
                let dir = uniform_sphere(rng.gen(), rng.gen());
                let ray = Ray::new(position, dir);
                let value = match view.scene.intersect(BvhSelector::Static, &ray, f32::INFINITY) {
                    None => BLACK,
                    Some(hit) => radiance_after_hit(view, &ray, &hit, cfg, rng),
                };
                for (c, b) in coeffs.iter_mut().zip(sh_basis(dir)) {
                    *c += value * b;
                }
            }
            let scale = 4.0 * std::f32::consts::PI / samples as f32;
            for (c, lobe) in coeffs.iter_mut().zip(COSINE_LOBE) {
                *c = *c * (scale * lobe);
            }
            ShIrradiance { coeffs }
        }
        ProbeBakeMode::DirectIrradiance => {
            let mut coeffs = [BLACK; 9];
            let per_dir = TracerConfig {
                spp: 1,
                ..*cfg
            };
            for _ in 0..samples {
                let dir = uniform_sphere(rng.gen(), rng.gen());
                let est = indirect_irradiance(view, position, dir, &per_dir, rng)
                    .map(|e| e.value)
                    .unwrap_or(BLACK);
                for (c, b) in coeffs.iter_mut().zip(sh_basis(dir)) {
                    *c += est * b;
                }
            }
            let scale = 4.0 * std::f32::consts::PI / samples as f32;
            for (c, _) in coeffs.iter_mut().zip(COSINE_LOBE) {
                *c = *c * scale;
            }
            ShIrradiance { coeffs }
        }
    }
}

/// Largest cubic grid whose payload fits `budget_bytes`.
pub fn cubic_dims_for_budget(budget_bytes: usize) -> [u32; 3] {
    let mut n = 2u32;
    while ((n + 1) as usize).pow(3) * 54 <= budget_bytes {
        n += 1;
    }
    [n, n, n]
}

/// Bakes the full lattice (parallel over probes, one stream per probe).
pub fn bake_grid(
    scene: &Scene,
    dims: [u32; 3],
    samples_per_probe: u32,
    seed: u64,
    heuristics: QueryHeuristics,
    mode: ProbeBakeMode,
) -> (ProbeGrid, BakeReport) {
    assert!(dims.iter().all(|&d| d >= 2), "probe dims must be >= 2");
    let mut grid = ProbeGrid {
        dims,
        bbox: scene.bbox,
        probes: vec![ShIrradiance::default(); (dims[0] * dims[1] * dims[2]) as usize],
        heuristics,
    };
    let cfg = TracerConfig::default();
    let positions: Vec<Vec3> = (0..grid.probes.len() as u32)
        .map(|i| {
            let ix = i % dims[0];
            let iy = (i / dims[0]) % dims[1];
            let iz = i / (dims[0] * dims[1]);
            grid.probe_position(ix, iy, iz)
        })
        .collect();

    let results: Vec<(ShIrradiance, bool)> = positions
        .par_iter()
        .enumerate()
        .map(|(i, &pos)| {
            let mut rng = stream_rng(seed, Stream::Probe, i as u64);
            let view = SceneView::for_bake(scene, &[]);
            // Inside-geometry check: mostly backfacing first hits.
            let mut backfaces = 0u32;
            const PROBE_RAYS: u32 = 32;
            for _ in 0..PROBE_RAYS {
                let dir = uniform_sphere(rng.gen(), rng.gen());
                if let Some(hit) =
                    scene.intersect(BvhSelector::Static, &Ray::new(pos, dir), f32::INFINITY)
                {
                    if hit.is_backface {
                        backfaces += 1;
                    }
                }
            }
            let probe = bake_probe(&view, pos, samples_per_probe, &cfg, mode, &mut rng);
            (probe, backfaces * 2 > PROBE_RAYS)
        })
        .collect();

    let mut report = BakeReport::default();
    for (i, (probe, inside)) in results.into_iter().enumerate() {
        grid.probes[i] = probe;
        if inside {
            report.inside_geometry.push(i as u32);
        }
    }
    (grid, report)
}

/// Provider adapter; carries the scene when ray-traced visibility is on.
pub struct ProbeProvider<'a> {
    pub grid: &'a ProbeGrid,
    pub scene: Option<&'a Scene>,
}

impl crate::render::IrradianceProvider for ProbeProvider<'_> {
    fn irradiance(&self, position: Vec3, n: Vec3, _params: &[f32], _rng: &mut ChaCha8Rng) -> Rgb {
        let world = self.grid.bbox.from_unit(position);
        self.grid.query(world, n, self.scene)
    }

    fn label(&self) -> &'static str {
        "probes"
    }
}
