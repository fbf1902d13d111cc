//! Deferred shading passes.

use glam::Vec3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ao::dynamic_ao;
use super::gbuffer::{GBuffer, GBufferPixel};
use super::{FrameHDR, IrradianceProvider, RenderError, ShadeOptions};
use crate::rgb::{Rgb, BLACK};
use crate::rng::{stream_rng, Stream};
use crate::scene::sampling::cosine_hemisphere;
use crate::scene::{BvhSelector, Emitter, MaterialKind, Ray, Scene};
use crate::tracer::{direct_irradiance, SceneView};

const FRAC_1_PI: f32 = std::f32::consts::FRAC_1_PI;
const SPECULAR_DEPTH_LIMIT: u32 = 4;

fn check_arity(provider: &dyn IrradianceProvider, options: &ShadeOptions) -> Result<(), RenderError> {
    if provider.param_count() != options.param_values.len() {
        return Err(RenderError::ParamArity {
            expected: provider.param_count(),
            got: options.param_values.len(),
        });
    }
    Ok(())
}

fn environment_radiance(emitters: &[Emitter]) -> Rgb {
    emitters.iter().fold(BLACK, |acc, e| match e {
        Emitter::Environment { radiance } => acc + *radiance,
        _ => acc,
    })
}

struct PixelCtx<'a> {
    scene: &'a Scene,
    view: &'a SceneView<'a>,
    options: &'a ShadeOptions,
    ao_distance: f32,
}

impl PixelCtx<'_> {
    /// Direct irradiance at a surface point, averaged over `direct_spp`
    /// next-event samples. Exact terms (directional, open environment)
    /// come out noise free.
    fn direct(&self, position: Vec3, n: Vec3, rng: &mut ChaCha8Rng) -> Rgb {
        let spawn = self.scene.offset_position(position, n);
        let spp = self.options.direct_spp.max(1);
        let mut sum = BLACK;
        for _ in 0..spp {
            sum += direct_irradiance(self.view, spawn, n, rng);
        }
        sum / spp as f32
    }

    fn ao(&self, position: Vec3, n: Vec3, rng: &mut ChaCha8Rng) -> f32 {
        if !self.options.dynamic_ao.enabled {
            return 1.0;
        }
        dynamic_ao(
            self.scene,
            position,
            n,
            self.options.dynamic_ao.ray_count,
            self.ao_distance,
            rng,
        )
    }

    /// Composes one surface sample given its already-computed indirect
    /// irradiance. Term order is fixed: `indirect + (direct + emission)`.
    fn compose(
        &self,
        px: &GBufferPixel,
        indirect_irr: Rgb,
        ao: f32,
        rng_direct: &mut ChaCha8Rng,
    ) -> Rgb {
        let c = self.options.components;
        let indirect = if c.indirect {
            px.albedo * indirect_irr * (ao * FRAC_1_PI)
        } else {
            BLACK
        };
        let direct = if c.direct {
            px.albedo * self.direct(px.position, px.shading_normal, rng_direct) * FRAC_1_PI
        } else {
            BLACK
        };
        let emission = if c.emission { px.emission } else { BLACK };
        indirect + (direct + emission)
    }
}

fn pixel_rng(seed: u64, stream: Stream, x: u32, y: u32) -> ChaCha8Rng {
    stream_rng(seed, stream, (y as u64) << 32 | x as u64)
}

/// Full-resolution deferred shading. Uncovered pixels show the environment.
pub fn shade_deferred(
    gbuffer: &GBuffer,
    scene: &Scene,
    provider: &dyn IrradianceProvider,
    options: &ShadeOptions,
) -> Result<FrameHDR, RenderError> {
    check_arity(provider, options)?;
    if options.half_resolution {
        return shade_half_resolution(gbuffer, scene, provider, options);
    }
    let view = SceneView::for_render(scene, &options.param_values);
    let ctx = PixelCtx {
        scene,
        view: &view,
        options,
        ao_distance: options.dynamic_ao.max_distance_fraction * scene.bbox.diagonal(),
    };
    let env = environment_radiance(&view.emitters);
    let mut frame = FrameHDR::new(gbuffer.width, gbuffer.height);
    frame.par_fill(|x, y| {
        let px = gbuffer.get(x, y);
        if !px.coverage {
            return env;
        }
        let mut rng_direct = pixel_rng(options.seed, Stream::PixelDirect, x, y);
        let mut rng_ao = pixel_rng(options.seed, Stream::PixelAo, x, y);
        let mut rng_provider = pixel_rng(options.seed, Stream::PixelProvider, x, y);
        if px.kind == MaterialKind::Mirror && options.specular_defer {
            return shade_mirror_chain(&ctx, provider, x, y, gbuffer, &mut rng_provider);
        }
        let e = provider.irradiance(
            scene.bbox.to_unit(px.position),
            px.shading_normal,
            &options.param_values,
            &mut rng_provider,
        );
        let ao = ctx.ao(px.position, px.shading_normal, &mut rng_ao);
        ctx.compose(px, e, ao, &mut rng_direct)
    });
    Ok(frame)
}

/// Mirror pixels follow the reflection chain to the first diffuse surface
/// and shade it there; chains deeper than the cap go black.
fn shade_mirror_chain(
    ctx: &PixelCtx,
    provider: &dyn IrradianceProvider,
    x: u32,
    y: u32,
    gbuffer: &GBuffer,
    rng_provider: &mut ChaCha8Rng,
) -> Rgb {
    let px = gbuffer.get(x, y);
    let scene = ctx.scene;
    let mut dir = px.view_dir;
    let mut normal = px.shading_normal;
    let mut position = px.position;
    let mut tint = px.albedo;
    let mut rng_direct = pixel_rng(ctx.options.seed, Stream::PixelDirect, x, y);
    let mut rng_ao = pixel_rng(ctx.options.seed, Stream::PixelAo, x, y);

    for _ in 0..SPECULAR_DEPTH_LIMIT {
        dir = dir - 2.0 * dir.dot(normal) * normal;
        let spawn = scene.offset_position(position, normal);
        let Some(hit) = scene.intersect(BvhSelector::Both, &Ray::new(spawn, dir), f32::INFINITY)
        else {
            return tint * environment_radiance(&ctx.view.emitters);
        };
        let material = scene.material(hit.material);
        let n = if hit.shading_normal.dot(dir) > 0.0 {
            -hit.shading_normal
        } else {
            hit.shading_normal
        };
        if material.kind == MaterialKind::Mirror {
            position = hit.position;
            normal = n;
            tint = tint * material.albedo;
            continue;
        }
        let deferred = GBufferPixel {
            position: hit.position,
            shading_normal: n,
            view_dir: dir,
            albedo: material.albedo,
            emission: if hit.is_backface { BLACK } else { material.emission },
            kind: MaterialKind::Diffuse,
            dynamic: hit.dynamic,
            coverage: true,
        };
        let e = provider.irradiance(
            scene.bbox.to_unit(hit.position),
            n,
            &ctx.options.param_values,
            rng_provider,
        );
        let ao = ctx.ao(hit.position, n, &mut rng_ao);
        return tint * ctx.compose(&deferred, e, ao, &mut rng_direct);
    }
    BLACK
}

/// Queries the provider on a quarter-pixel-count buffer, upsamples the
/// irradiance bilinearly, and composes with full-resolution albedo, direct
/// light, AO and emission.
pub fn shade_half_resolution(
    gbuffer: &GBuffer,
    scene: &Scene,
    provider: &dyn IrradianceProvider,
    options: &ShadeOptions,
) -> Result<FrameHDR, RenderError> {
    check_arity(provider, options)?;
    if gbuffer.width % 2 != 0 || gbuffer.height % 2 != 0 {
        return Err(RenderError::OddDimensions {
            width: gbuffer.width,
            height: gbuffer.height,
        });
    }
    let half = gbuffer.half();
    let mut e_half = vec![BLACK; (half.width * half.height) as usize];
    e_half.par_iter_mut().enumerate().for_each(|(i, out)| {
        let (x, y) = (i as u32 % half.width, i as u32 / half.width);
        let px = half.get(x, y);
        if !px.coverage {
            return;
        }
        let mut rng = pixel_rng(options.seed, Stream::PixelProvider, x, y);
        *out = provider.irradiance(
            scene.bbox.to_unit(px.position),
            px.shading_normal,
            &options.param_values,
            &mut rng,
        );
    });

    let sample_half = |x: i64, y: i64| -> Rgb {
        let x = x.clamp(0, half.width as i64 - 1) as u32;
        let y = y.clamp(0, half.height as i64 - 1) as u32;
        e_half[(y * half.width + x) as usize]
    };

    let view = SceneView::for_render(scene, &options.param_values);
    let ctx = PixelCtx {
        scene,
        view: &view,
        options,
        ao_distance: options.dynamic_ao.max_distance_fraction * scene.bbox.diagonal(),
    };
    let env = environment_radiance(&view.emitters);
    let mut frame = FrameHDR::new(gbuffer.width, gbuffer.height);
    frame.par_fill(|x, y| {
        let px = gbuffer.get(x, y);
        if !px.coverage {
            return env;
        }
        // Bilinear upsample: half pixel (hx, hy) sits at full-res position
        // (2*hx + 0.5, 2*hy + 0.5).
        let fx = (x as f32 - 0.5) / 2.0;
        let fy = (y as f32 - 0.5) / 2.0;
        let (x0, y0) = (fx.floor() as i64, fy.floor() as i64);
        let (tx, ty) = (fx - x0 as f32, fy - y0 as f32);
        let top = sample_half(x0, y0) * (1.0 - tx) + sample_half(x0 + 1, y0) * tx;
        let bottom = sample_half(x0, y0 + 1) * (1.0 - tx) + sample_half(x0 + 1, y0 + 1) * tx;
        let e = top * (1.0 - ty) + bottom * ty;

        let mut rng_direct = pixel_rng(options.seed, Stream::PixelDirect, x, y);
        let mut rng_ao = pixel_rng(options.seed, Stream::PixelAo, x, y);
        let ao = ctx.ao(px.position, px.shading_normal, &mut rng_ao);
        ctx.compose(px, e, ao, &mut rng_direct)
    });
    Ok(frame)
}

/// Shades with an incident-radiance model: the indirect term is the
/// `sample_count`-sample cosine-weighted Monte Carlo estimate
/// `mean(pi * L(x, omega))`, demonstrating the variance a non-pre-integrated
/// quantity costs at runtime.
pub fn shade_sampled_incident(
    gbuffer: &GBuffer,
    scene: &Scene,
    provider: &dyn IrradianceProvider,
    sample_count: u32,
    options: &ShadeOptions,
) -> Result<FrameHDR, RenderError> {
    check_arity(provider, options)?;
    let view = SceneView::for_render(scene, &options.param_values);
    let ctx = PixelCtx {
        scene,
        view: &view,
        options,
        ao_distance: options.dynamic_ao.max_distance_fraction * scene.bbox.diagonal(),
    };
    let env = environment_radiance(&view.emitters);
    let mut frame = FrameHDR::new(gbuffer.width, gbuffer.height);
    frame.par_fill(|x, y| {
        let px = gbuffer.get(x, y);
        if !px.coverage {
            return env;
        }
        let mut rng_direct = pixel_rng(options.seed, Stream::PixelDirect, x, y);
        let mut rng_ao = pixel_rng(options.seed, Stream::PixelAo, x, y);
        let mut rng_provider = pixel_rng(options.seed, Stream::PixelProvider, x, y);
        let unit = scene.bbox.to_unit(px.position);
        let mut sum = BLACK;
        for _ in 0..sample_count.max(1) {
            let omega = cosine_hemisphere(px.shading_normal, rng_provider.gen(), rng_provider.gen());
            sum += provider.irradiance(unit, omega, &options.param_values, &mut rng_provider)
                * std::f32::consts::PI;
        }
        let e = sum / sample_count.max(1) as f32;
        let ao = ctx.ao(px.position, px.shading_normal, &mut rng_ao);
        ctx.compose(px, e, ao, &mut rng_direct)
    });
    Ok(frame)
}
