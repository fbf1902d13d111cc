//! Direction and surface-area sampling.

use glam::Vec3;

use super::mesh::{triangle_area, triangle_normal};

/// Orthonormal basis around a unit normal (Duff et al. branchless variant).
pub fn onb(n: Vec3) -> (Vec3, Vec3) {
    let sign = 1.0f32.copysign(n.z);
    let a = -1.0 / (sign + n.z);
    let b = n.x * n.y * a;
    let t = Vec3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x);
    let bt = Vec3::new(b, sign + n.y * n.y * a, -n.y);
    (t, bt)
}

/// Concentric disk mapping of `[0,1]^2`; `(0.5, 0.5)` maps to the origin.
fn concentric_disk(u1: f32, u2: f32) -> (f32, f32) {
    let ox = 2.0 * u1 - 1.0;
    let oy = 2.0 * u2 - 1.0;
    if ox == 0.0 && oy == 0.0 {
        return (0.0, 0.0);
    }
    let (r, theta) = if ox.abs() > oy.abs() {
        (ox, std::f32::consts::FRAC_PI_4 * (oy / ox))
    } else {
        (
            oy,
            std::f32::consts::FRAC_PI_2 - std::f32::consts::FRAC_PI_4 * (ox / oy),
        )
    };
    (r * theta.cos(), r * theta.sin())
}

/// Cosine-weighted hemisphere direction around unit `n`, pdf `cos(theta)/pi`.
/// `u = (0.5, 0.5)` returns `n` itself (disk center).
pub fn cosine_hemisphere(n: Vec3, u1: f32, u2: f32) -> Vec3 {
    let (x, y) = concentric_disk(u1, u2);
    let z = (1.0 - x * x - y * y).max(0.0).sqrt();
    let (t, bt) = onb(n);
    (t * x + bt * y + n * z).normalize()
}

/// Uniform direction on the unit sphere.
pub fn uniform_sphere(u1: f32, u2: f32) -> Vec3 {
    let z = 1.0 - 2.0 * u1;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * std::f32::consts::PI * u2;
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Uniform barycentric point on a triangle.
pub fn uniform_triangle(tri: &[Vec3; 3], u1: f32, u2: f32) -> Vec3 {
    let su = u1.sqrt();
    let b0 = 1.0 - su;
    let b1 = su * (1.0 - u2);
    let b2 = su * u2;
    tri[0] * b0 + tri[1] * b1 + tri[2] * b2
}

/// Uniform-by-area sampler over a triangle soup.
#[derive(Debug)]
pub struct SurfaceSampler {
    cdf: Vec<f32>,
    pub total_area: f32,
}

impl SurfaceSampler {
    /// `None` when the soup has no triangle with positive area.
    pub fn build(tris: &[[Vec3; 3]]) -> Option<SurfaceSampler> {
        let mut cdf = Vec::with_capacity(tris.len());
        let mut acc = 0.0f32;
        for tri in tris {
            acc += triangle_area(tri);
            cdf.push(acc);
        }
        if acc > 0.0 {
            Some(SurfaceSampler {
                cdf,
                total_area: acc,
            })
        } else {
            None
        }
    }

    /// pdf is uniform per unit area: `1 / total_area`.
    pub fn pdf(&self) -> f32 {
        1.0 / self.total_area
    }

    /// Draws `(position, shading normal, triangle id)` from three uniforms.
    pub fn sample(
        &self,
        tris: &[[Vec3; 3]],
        shading_normals: &[Option<[Vec3; 3]>],
        u_select: f32,
        u1: f32,
        u2: f32,
    ) -> (Vec3, Vec3, u32) {
        let target = u_select.min(0.999_999) * self.total_area;
        let idx = self.cdf.partition_point(|&c| c <= target).min(self.cdf.len() - 1);
        let tri = &tris[idx];
        let p = uniform_triangle(tri, u1, u2);
        let gn = triangle_normal(tri);
        let n = match &shading_normals[idx] {
            // Flat sampling of a smooth mesh: use the geometric side.
            Some([n0, n1, n2]) => {
                let avg = (*n0 + *n1 + *n2).normalize_or_zero();
                if avg == Vec3::ZERO || avg.dot(gn) < 0.0 {
                    gn
                } else {
                    let su = u1.sqrt();
                    let b0 = 1.0 - su;
                    let b1 = su * (1.0 - u2);
                    let b2 = su * u2;
                    let n = (*n0 * b0 + *n1 * b1 + *n2 * b2).normalize_or_zero();
                    if n == Vec3::ZERO || n.dot(gn) < 0.0 {
                        gn
                    } else {
                        n
                    }
                }
            }
            None => gn,
        };
        (p, n, idx as u32)
    }
}
