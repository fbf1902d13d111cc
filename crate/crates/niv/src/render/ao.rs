//! Ambient occlusion against dynamic geometry only.
//!
//! The baked field knows nothing about objects added at render time; this
//! pass approximates how they block indirect light, both their
//! self-occlusion and the contact darkening they cast onto the scene.

use glam::Vec3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::scene::sampling::cosine_hemisphere;
use crate::scene::{BvhSelector, Ray, Scene};

/// Fraction of the hemisphere around `n` left open by dynamic geometry, in
/// `[0,1]`. Each cosine-weighted ray that hits within `max_distance`
/// contributes occlusion `1 - t / max_distance`, so far blockers matter
/// less. Static geometry is ignored by construction.
pub fn dynamic_ao(
    scene: &Scene,
    x: Vec3,
    n: Vec3,
    ray_count: u32,
    max_distance: f32,
    rng: &mut ChaCha8Rng,
) -> f32 {
    if scene.dynamic_set.is_empty() || ray_count == 0 {
        return 1.0;
    }
    let origin = scene.offset_position(x, n);
    let mut occlusion = 0.0f32;
    for _ in 0..ray_count {
        let dir = cosine_hemisphere(n, rng.gen(), rng.gen());
        if let Some(hit) = scene.intersect(BvhSelector::Dynamic, &Ray::new(origin, dir), max_distance)
        {
            occlusion += 1.0 - hit.t / max_distance;
        }
    }
    (1.0 - occlusion / ray_count as f32).clamp(0.0, 1.0)
}
