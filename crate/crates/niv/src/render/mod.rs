//! Deferred shading from a G-buffer against any irradiance provider.
//!
//! The final image composes per pixel as
//! `albedo/pi * E * AO  +  albedo/pi * D  +  L_e`, where `E` comes from the
//! provider (neural field, probe grid or the path-traced oracle), `D` is
//! direct irradiance estimated with shadow rays, and emission is read from
//! the G-buffer. Swapping providers changes only the indirect term.

pub mod ao;
pub mod gbuffer;
pub mod shade;

use glam::Vec3;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::rgb::{Rgb, BLACK};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("provider expects {expected} extra parameters, got {got}")]
    ParamArity { expected: usize, got: usize },
    #[error("half-resolution shading requires even dimensions, got {width}x{height}")]
    OddDimensions { width: u32, height: u32 },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Linear HDR frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameHDR {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<Rgb>,
}

impl FrameHDR {
    pub fn new(width: u32, height: u32) -> FrameHDR {
        FrameHDR {
            width,
            height,
            pixels: vec![BLACK; (width * height) as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: Rgb) {
        self.pixels[(y * self.width + x) as usize] = v;
    }

    /// Fills every pixel in parallel; `f` gets `(x, y)`.
    pub fn par_fill(&mut self, f: impl Fn(u32, u32) -> Rgb + Sync) {
        let width = self.width;
        self.pixels.par_iter_mut().enumerate().for_each(|(i, px)| {
            *px = f(i as u32 % width, i as u32 / width);
        });
    }

    /// Pixelwise sum; operands must match in size.
    pub fn add(&self, other: &FrameHDR) -> FrameHDR {
        assert_eq!((self.width, self.height), (other.width, other.height));
        FrameHDR {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .zip(&other.pixels)
                .map(|(a, b)| *a + *b)
                .collect(),
        }
    }
}

/// Anything that can answer irradiance queries: a trained field, a probe
/// grid, or the Monte Carlo oracle itself. Implementations are immutable
/// and safe to call from many threads.
pub trait IrradianceProvider: Sync {
    /// Irradiance at `position` (unit-cube coordinates of the static scene
    /// bounds) for unit direction `n`. Stochastic providers draw from `rng`;
    /// deterministic ones ignore it.
    fn irradiance(&self, position: Vec3, n: Vec3, params: &[f32], rng: &mut ChaCha8Rng) -> Rgb;

    /// Number of extra parameters each query expects.
    fn param_count(&self) -> usize {
        0
    }

    /// Short name used in reports.
    fn label(&self) -> &'static str;
}

/// Constant provider; the best-constant baseline in evaluations.
pub struct ConstantProvider(pub Rgb);

impl IrradianceProvider for ConstantProvider {
    fn irradiance(&self, _: Vec3, _: Vec3, _: &[f32], _: &mut ChaCha8Rng) -> Rgb {
        self.0
    }

    fn label(&self) -> &'static str {
        "constant"
    }
}

/// Toggles for the three shading terms; all on for final frames. The split
/// exists so the composition `indirect + (direct + emission)` can be
/// verified exactly.
#[derive(Debug, Clone, Copy)]
pub struct ShadeComponents {
    pub indirect: bool,
    pub direct: bool,
    pub emission: bool,
}

impl Default for ShadeComponents {
    fn default() -> Self {
        ShadeComponents {
            indirect: true,
            direct: true,
            emission: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AoOptions {
    pub enabled: bool,
    pub ray_count: u32,
    /// Occlusion search radius as a fraction of the scene diagonal.
    pub max_distance_fraction: f32,
}

impl Default for AoOptions {
    fn default() -> Self {
        AoOptions {
            enabled: false,
            ray_count: 32,
            max_distance_fraction: 0.1,
        }
    }
}

/// Shading configuration shared by all shading entry points.
#[derive(Debug, Clone)]
pub struct ShadeOptions {
    pub seed: u64,
    /// Shadow-ray samples per pixel for stochastic direct terms (area
    /// lights, occluded environments). Directional lights are exact.
    pub direct_spp: u32,
    pub half_resolution: bool,
    pub dynamic_ao: AoOptions,
    pub specular_defer: bool,
    /// Values for the provider's extra parameters, normalized to [0,1].
    pub param_values: Vec<f32>,
    pub components: ShadeComponents,
}

impl Default for ShadeOptions {
    fn default() -> Self {
        ShadeOptions {
            seed: 0,
            direct_spp: 16,
            half_resolution: false,
            dynamic_ao: AoOptions::default(),
            specular_defer: false,
            param_values: vec![],
            components: ShadeComponents::default(),
        }
    }
}
