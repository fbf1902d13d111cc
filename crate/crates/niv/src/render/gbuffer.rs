//! Primary-visibility buffers, produced by ray casting one center ray per
//! pixel against the full scene (static + dynamic).

use glam::Vec3;
use rayon::prelude::*;

use crate::rgb::{Rgb, BLACK};
use crate::scene::camera::Camera;
use crate::scene::{BvhSelector, MaterialKind, Scene};

#[derive(Debug, Clone, Copy)]
pub struct GBufferPixel {
    pub position: Vec3,
    pub shading_normal: Vec3,
    /// Direction the primary ray traveled (camera toward surface).
    pub view_dir: Vec3,
    pub albedo: Rgb,
    /// Emission toward the camera; zero for backface hits.
    pub emission: Rgb,
    pub kind: MaterialKind,
    pub dynamic: bool,
    pub coverage: bool,
}

impl Default for GBufferPixel {
    fn default() -> Self {
        GBufferPixel {
            position: Vec3::ZERO,
            shading_normal: Vec3::Z,
            view_dir: -Vec3::Z,
            albedo: BLACK,
            emission: BLACK,
            kind: MaterialKind::Diffuse,
            dynamic: false,
            coverage: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GBuffer {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<GBufferPixel>,
}

impl GBuffer {
    pub fn get(&self, x: u32, y: u32) -> &GBufferPixel {
        &self.pixels[(y * self.width + x) as usize]
    }

    pub fn coverage_fraction(&self) -> f32 {
        self.pixels.iter().filter(|p| p.coverage).count() as f32 / self.pixels.len() as f32
    }

    /// Quarter-pixel-count buffer holding the top-left sample of each 2x2
    /// block; feeds half-resolution shading.
    pub fn half(&self) -> GBuffer {
        let (w, h) = (self.width / 2, self.height / 2);
        let mut pixels = Vec::with_capacity((w * h) as usize);
        for y in 0..h {
            for x in 0..w {
                pixels.push(*self.get(x * 2, y * 2));
            }
        }
        GBuffer {
            width: w,
            height: h,
            pixels,
        }
    }
}

/// Casts pixel-center rays and fills all channels; misses leave
/// `coverage = false`.
pub fn rasterize_gbuffer(scene: &Scene, camera: &Camera, width: u32, height: u32) -> GBuffer {
    let mut pixels = vec![GBufferPixel::default(); (width * height) as usize];
    pixels.par_iter_mut().enumerate().for_each(|(i, out)| {
        let (px, py) = (i as u32 % width, i as u32 / width);
        let ray = camera.ray(px, py, width, height, (0.5, 0.5));
        if let Some(hit) = scene.intersect(BvhSelector::Both, &ray, f32::INFINITY) {
            let material = scene.material(hit.material);
            let n = if hit.shading_normal.dot(ray.dir) > 0.0 {
                -hit.shading_normal
            } else {
                hit.shading_normal
            };
            *out = GBufferPixel {
                position: hit.position,
                shading_normal: n,
                view_dir: ray.dir,
                albedo: material.albedo,
                emission: if hit.is_backface { BLACK } else { material.emission },
                kind: material.kind,
                dynamic: hit.dynamic,
                coverage: true,
            };
        }
    });
    GBuffer {
        width,
        height,
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::camera::CameraSpec;
    use crate::scene::fixtures::fixture_scene;

    #[test]
    fn empty_scene_has_no_coverage() {
        let scene = crate::scene::Scene::build(vec![], vec![], vec![], vec![], None, vec![])
            .unwrap();
        let cam = Camera::new(&CameraSpec {
            origin: [0.0, 0.0, 3.0],
            look_at: [0.0, 0.0, 0.0],
            up: [0.0, 1.0, 0.0],
            fov_y_degrees: 45.0,
        });
        let g = rasterize_gbuffer(&scene, &cam, 16, 16);
        assert_eq!(g.coverage_fraction(), 0.0);
    }

    #[test]
    fn cornell_view_is_fully_covered() {
        let scene = fixture_scene("cornell");
        let cam = Camera::new(&scene.camera.unwrap());
        let g = rasterize_gbuffer(&scene, &cam, 32, 32);
        assert_eq!(g.coverage_fraction(), 1.0);
    }
}
