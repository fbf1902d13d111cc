//! Pinhole camera.

use glam::Vec3;

use super::Ray;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct CameraSpec {
    pub origin: [f32; 3],
    pub look_at: [f32; 3],
    pub up: [f32; 3],
    pub fov_y_degrees: f32,
}

#[derive(Debug, Clone, Copy)]
pub struct Camera {
    origin: Vec3,
    forward: Vec3,
    right: Vec3,
    up: Vec3,
    tan_half_fov: f32,
}

impl Camera {
    pub fn new(spec: &CameraSpec) -> Camera {
        let origin = Vec3::from(spec.origin);
        let forward = (Vec3::from(spec.look_at) - origin).normalize();
        let right = forward.cross(Vec3::from(spec.up)).normalize();
        let up = right.cross(forward);
        Camera {
            origin,
            forward,
            right,
            up,
            tan_half_fov: (spec.fov_y_degrees.to_radians() * 0.5).tan(),
        }
    }

    /// Primary ray through pixel `(px, py)` of a `width x height` frame.
    /// `jitter` in `[0,1)^2` offsets within the pixel; `(0.5, 0.5)` is the
    /// pixel center. Pixel `(0, 0)` is top-left.
    pub fn ray(&self, px: u32, py: u32, width: u32, height: u32, jitter: (f32, f32)) -> Ray {
        let aspect = width as f32 / height as f32;
        let sx = 2.0 * ((px as f32 + jitter.0) / width as f32) - 1.0;
        let sy = 1.0 - 2.0 * ((py as f32 + jitter.1) / height as f32);
        let dir = (self.forward
            + self.right * (sx * self.tan_half_fov * aspect)
            + self.up * (sy * self.tan_half_fov))
            .normalize();
        Ray::new(self.origin, dir)
    }
}
