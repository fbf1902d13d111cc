//! Full-transport path-traced reference images.
//!
//! Direct, indirect and emission together, with next-event estimation at
//! every diffuse vertex and mirror chains followed by perfect reflection.
//! Emission is added only when a vertex is reached from the camera or
//! through mirrors; diffuse continuation rays rely on next-event sampling,
//! so nothing is counted twice.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{direct_irradiance, face_forward, SceneView, TracerConfig};
use crate::render::FrameHDR;
use crate::rgb::{Rgb, BLACK, WHITE};
use crate::rng::{stream_rng, Stream};
use crate::scene::camera::Camera;
use crate::scene::{Emitter, MaterialKind, Ray, Scene};

const MIRROR_DEPTH_LIMIT: u32 = 16;

fn environment_radiance(view: &SceneView) -> Rgb {
    let mut total = BLACK;
    for e in &view.emitters {
        if let Emitter::Environment { radiance } = e {
            total += *radiance;
        }
    }
    total
}

/// Radiance carried by one camera path.
pub fn trace_path(view: &SceneView, mut ray: Ray, cfg: &TracerConfig, rng: &mut ChaCha8Rng) -> Rgb {
    let mut radiance = BLACK;
    let mut throughput = WHITE;
    // Emission is visible from the camera and through mirror chains only.
    let mut specular_chain = true;
    let mut depth = 0u32;
    loop {
        let Some(hit) = view.intersect(&ray, f32::INFINITY) else {
            if specular_chain {
                radiance += throughput * environment_radiance(view);
            }
            break;
        };
        depth += 1;
        let material = view.scene.material(hit.material);
        if specular_chain && !hit.is_backface {
            radiance += throughput * material.emission;
        }
        let geom_side = face_forward(hit.geometric_normal, -ray.dir);
        let spawn = view.scene.offset_position(hit.position, geom_side);

        if material.kind == MaterialKind::Mirror {
            if depth >= MIRROR_DEPTH_LIMIT {
                break;
            }
            let n = face_forward(hit.shading_normal, -ray.dir);
            let reflected = ray.dir - 2.0 * ray.dir.dot(n) * n;
            throughput *= material.albedo;
            specular_chain = true;
            ray = Ray::new(spawn, reflected);
            continue;
        }

        let n = face_forward(hit.shading_normal, -ray.dir);
        let direct = direct_irradiance(view, spawn, n, rng);
        radiance += throughput * material.albedo * (direct * std::f32::consts::FRAC_1_PI);
        specular_chain = false;

        throughput *= material.albedo;
        if throughput.max_component() <= 0.0 || depth >= cfg.max_depth {
            break;
        }
        if depth + 1 > cfg.rr_start_depth {
            let survive = throughput.luminance().clamp(cfg.rr_min_prob, 1.0);
            if rng.gen::<f32>() >= survive {
                break;
            }
            throughput = throughput * (1.0 / survive);
        }
        let dir = crate::scene::sampling::cosine_hemisphere(n, rng.gen(), rng.gen());
        ray = Ray::new(spawn, dir);
    }
    radiance
}

/// Path-traces the scene (static + dynamic) from `camera`. Deterministic
/// per seed and independent of worker count.
pub fn reference_render(
    scene: &Scene,
    camera: &Camera,
    width: u32,
    height: u32,
    spp: u32,
    seed: u64,
    params: &[f32],
) -> FrameHDR {
    let view = SceneView::for_render(scene, params);
    let cfg = TracerConfig::default();
    let mut frame = FrameHDR::new(width, height);
    frame.par_fill(|px, py| {
        let mut rng = stream_rng(seed, Stream::PixelCamera, (py as u64) << 32 | px as u64);
        let mut sum = BLACK;
        for _ in 0..spp {
            let jitter = (rng.gen::<f32>(), rng.gen::<f32>());
            let ray = camera.ray(px, py, width, height, jitter);
            sum += trace_path(&view, ray, &cfg, &mut rng);
        }
        sum / spp as f32
    });
    frame
}

/// Mean and per-pixel variance over `spp` independent path samples; used by
/// self-consistency tests.
pub fn render_with_variance(
    scene: &Scene,
    camera: &Camera,
    width: u32,
    height: u32,
    spp: u32,
    seed: u64,
) -> (FrameHDR, Vec<Rgb>) {
    let view = SceneView::for_render(scene, &[]);
    let cfg = TracerConfig::default();
    let mut frame = FrameHDR::new(width, height);
    let mut variances = vec![BLACK; (width * height) as usize];
    let vslice = &mut variances;
    let results: Vec<(Rgb, Rgb)> = (0..width * height)
        .map(|i| {
            let (px, py) = (i % width, i / width);
            let mut rng = stream_rng(seed, Stream::PixelCamera, (py as u64) << 32 | px as u64);
            let mut mean = [0.0f64; 3];
            let mut m2 = [0.0f64; 3];
            for s in 0..spp {
                let jitter = (rng.gen::<f32>(), rng.gen::<f32>());
                let ray = camera.ray(px, py, width, height, jitter);
                let v = trace_path(&view, ray, &cfg, &mut rng).to_array();
                for c in 0..3 {
                    let x = v[c] as f64;
                    let d = x - mean[c];
                    mean[c] += d / (s + 1) as f64;
                    m2[c] += d * (x - mean[c]);
                }
            }
            let denom = ((spp - 1).max(1)) as f64;
            (
                Rgb::new(mean[0] as f32, mean[1] as f32, mean[2] as f32),
                Rgb::new(
                    (m2[0] / denom) as f32,
                    (m2[1] / denom) as f32,
                    (m2[2] / denom) as f32,
                ),
            )
        })
        .collect();
    for (i, (mean, var)) in results.into_iter().enumerate() {
        frame.pixels[i] = mean;
        vslice[i] = var;
    }
    (frame, variances)
}
