use glam::Vec3;
use rand::Rng;

use super::mesh::Mesh;
use super::sampling::{cosine_hemisphere, SurfaceSampler};
use super::*;
use crate::rng::{stream_rng, Stream};

fn unit_square_scene() -> Scene {
    // Unit square in the z=0 plane facing +z.
    let quad = Mesh::quad([
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(1.0, 1.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
    ]);
    Scene::build(
        vec![quad],
        vec![Material::diffuse(crate::rgb::Rgb::splat(0.5))],
        vec![Instance {
            mesh: 0,
            material: 0,
            transform: Transform::default(),
            dynamic: false,
        }],
        vec![],
        None,
        vec![],
    )
    .unwrap()
}

#[test]
fn ray_hits_unit_square_at_t_one() {
    let scene = unit_square_scene();
    let ray = Ray::new(Vec3::new(0.5, 0.5, 1.0), -Vec3::Z);
    let hit = scene.intersect(BvhSelector::Static, &ray, f32::INFINITY).unwrap();
    assert!((hit.t - 1.0).abs() < 1e-6);
    assert!(hit.geometric_normal.dot(Vec3::Z) > 0.999);
    assert!(!hit.is_backface);

    // From behind, the same face is a backface hit.
    let ray = Ray::new(Vec3::new(0.5, 0.5, -1.0), Vec3::Z);
    let hit = scene.intersect(BvhSelector::Static, &ray, f32::INFINITY).unwrap();
    assert!(hit.is_backface);
}

#[test]
fn parallel_offset_ray_misses() {
    let scene = unit_square_scene();
    let ray = Ray::new(Vec3::new(0.5, 0.5, 1.0), Vec3::X);
    assert!(scene.intersect(BvhSelector::Static, &ray, f32::INFINITY).is_none());
}

#[test]
fn t_max_cuts_off_hits() {
    let scene = unit_square_scene();
    let ray = Ray::new(Vec3::new(0.5, 0.5, 1.0), -Vec3::Z);
    assert!(scene.intersect(BvhSelector::Static, &ray, 0.5).is_none());
}

#[test]
fn static_and_dynamic_sets_are_independent() {
    let quad = Mesh::quad([
        Vec3::new(-1.0, -1.0, 0.0),
        Vec3::new(1.0, -1.0, 0.0),
        Vec3::new(1.0, 1.0, 0.0),
        Vec3::new(-1.0, 1.0, 0.0),
    ]);
    let scene = Scene::build(
        vec![quad],
        vec![Material::diffuse(crate::rgb::Rgb::splat(0.5))],
        vec![
            Instance {
                mesh: 0,
                material: 0,
                transform: Transform::translation(Vec3::new(0.0, 0.0, -2.0)),
                dynamic: false,
            },
            Instance {
                mesh: 0,
                material: 0,
                transform: Transform::translation(Vec3::new(0.0, 0.0, -1.0)),
                dynamic: true,
            },
        ],
        vec![],
        None,
        vec![],
    )
    .unwrap();

    let ray = Ray::new(Vec3::ZERO, -Vec3::Z);
    let s = scene.intersect(BvhSelector::Static, &ray, f32::INFINITY).unwrap();
    assert!((s.t - 2.0).abs() < 1e-6 && !s.dynamic);
    let d = scene.intersect(BvhSelector::Dynamic, &ray, f32::INFINITY).unwrap();
    assert!((d.t - 1.0).abs() < 1e-6 && d.dynamic);
    let b = scene.intersect(BvhSelector::Both, &ray, f32::INFINITY).unwrap();
    assert!((b.t - 1.0).abs() < 1e-6 && b.dynamic);
    // The trained volume ignores dynamic geometry.
    assert!((scene.bbox.max.z - -2.0).abs() < 1e-3);
}

#[test]
fn quadrant_density_on_unit_square_is_uniform() {
    let scene = unit_square_scene();
    let sampler = scene.static_set.sampler.as_ref().unwrap();
    let mut rng = stream_rng(17, Stream::Eval, 0);
    let n = 100_000usize;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        let (p, _, _) = sampler.sample(
            &scene.static_set.positions,
            &scene.static_set.shading_normals,
            rng.gen(),
            rng.gen(),
            rng.gen(),
        );
        let q = (p.x >= 0.5) as usize * 2 + (p.y >= 0.5) as usize;
        counts[q] += 1;
    }
    for c in counts {
        let frac = c as f64 / n as f64;
        assert!((frac - 0.25).abs() < 0.005, "quadrant fraction {frac}");
    }
}

#[test]
fn zero_area_scene_has_no_sampler() {
    let degenerate = Mesh {
        positions: vec![Vec3::ZERO, Vec3::ZERO, Vec3::ZERO],
        normals: None,
        indices: vec![[0, 1, 2]],
    };
    assert!(SurfaceSampler::build(&[[Vec3::ZERO; 3]]).is_none());
    let scene = Scene::build(
        vec![degenerate],
        vec![Material::diffuse(crate::rgb::Rgb::splat(0.5))],
        vec![Instance {
            mesh: 0,
            material: 0,
            transform: Transform::default(),
            dynamic: false,
        }],
        vec![],
        None,
        vec![],
    )
    .unwrap();
    assert!(scene.static_set.sampler.is_none());
}

/// Chi-square goodness-of-fit of the cosine sampler against cos(theta)/pi
/// over a (cos theta, phi) grid.
#[test]
fn cosine_sampler_matches_pdf() {
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    let n = Vec3::new(0.2, 0.9, -0.1).normalize();
    let (t, b) = super::sampling::onb(n);
    let mut rng = stream_rng(23, Stream::Eval, 0);
    const NC: usize = 10; // cos(theta) bins
    const NP: usize = 12; // phi bins
    let samples = 1_000_000usize;
    let mut counts = [[0u32; NP]; NC];
    for _ in 0..samples {
        let d = cosine_hemisphere(n, rng.gen(), rng.gen());
        let c = d.dot(n).clamp(0.0, 1.0);
        let phi = (d.dot(b)).atan2(d.dot(t));
        // P(cos in [c0,c1]) = c1^2 - c0^2 under pdf cos/pi, so bin by cos^2.
        let ci = ((c * c) * NC as f32).min(NC as f32 - 1.0) as usize;
        let pi2 = std::f32::consts::TAU;
        let pf = ((phi + std::f32::consts::PI) / pi2).clamp(0.0, 0.999_999);
        counts[ci][(pf * NP as f32) as usize] += 1;
    }
    let expected = samples as f64 / (NC * NP) as f64;
    let mut chi2 = 0.0f64;
    for row in &counts {
        for &c in row {
            let d = c as f64 - expected;
            chi2 += d * d / expected;
        }
    }
    let dof = (NC * NP - 1) as f64;
    let p = 1.0 - ChiSquared::new(dof).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 {chi2}, p {p}");
}

#[test]
fn configured_emitters_rotate_the_sun() {
    let scene = fixtures::fixture_scene("sunroom");
    let e = scene.configured_emitters(&[0.5]);
    match e[0] {
        Emitter::Directional { direction, .. } => {
            // Midpoint of [-0.5, 0.5] is angle 0: unchanged.
            assert!(direction.dot(-Vec3::Y) > 0.999);
        }
        _ => panic!("expected directional emitter"),
    }
    let e = scene.configured_emitters(&[1.0]);
    match e[0] {
        Emitter::Directional { direction, .. } => {
            let expected = Vec3::new(0.5f32.sin(), -(0.5f32.cos()), 0.0);
            assert!(direction.dot(expected) > 0.999);
        }
        _ => panic!("expected directional emitter"),
    }
}
