//! Scene representation: triangle geometry, materials, emitters, ray
//! intersection and surface sampling.
//!
//! Instances are split into a *static* set (the world that gets baked) and a
//! *dynamic* set (objects introduced at render time, unseen by any bake).
//! Each set owns its own BVH so they can be queried independently.

pub mod bvh;
pub mod camera;
pub mod fixtures;
pub mod json;
pub mod mesh;
pub mod obj;
pub mod sampling;

use glam::Vec3;
use thiserror::Error;

use crate::rgb::Rgb;
use bvh::Bvh;
use camera::CameraSpec;
use mesh::Mesh;
use sampling::SurfaceSampler;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene parse error: {0}")]
    Parse(String),
    #[error("scene validation error: {0}")]
    Validation(String),
    #[error("empty mesh: {0}")]
    EmptyMesh(String),
    #[error("non-finite vertex in mesh '{0}'")]
    NonFiniteVertex(String),
    #[error("no sampleable surface")]
    NoSampleableSurface,
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaterialKind {
    Diffuse,
    Mirror,
}

/// Surface material. `albedo` is reflectance in `[0,1]` per channel; for
/// mirrors it acts as a reflectance tint. `emission` is emitted radiance,
/// one-sided along the geometric normal.
#[derive(Debug, Clone, Copy)]
pub struct Material {
    pub albedo: Rgb,
    pub emission: Rgb,
    pub kind: MaterialKind,
}

impl Material {
    pub fn diffuse(albedo: Rgb) -> Self {
        Material {
            albedo,
            emission: crate::rgb::BLACK,
            kind: MaterialKind::Diffuse,
        }
    }

    pub fn emissive(emission: Rgb) -> Self {
        Material {
            albedo: crate::rgb::BLACK,
            emission,
            kind: MaterialKind::Diffuse,
        }
    }

    pub fn is_emissive(&self) -> bool {
        self.emission.max_component() > 0.0
    }

    fn validate(&self, id: &str) -> Result<(), SceneError> {
        let a = self.albedo;
        if !(0.0..=1.0).contains(&a.r) || !(0.0..=1.0).contains(&a.g) || !(0.0..=1.0).contains(&a.b)
        {
            return Err(SceneError::Validation(format!(
                "material '{id}': albedo out of [0,1]"
            )));
        }
        if self.emission.min_component() < 0.0 {
            return Err(SceneError::Validation(format!(
                "material '{id}': negative emission"
            )));
        }
        Ok(())
    }
}

/// Non-geometric emitters. Area lights are not listed here: any instance
/// whose material has nonzero emission acts as an area emitter.
#[derive(Debug, Clone, Copy)]
pub enum Emitter {
    /// Parallel light. `direction` is the direction the light travels
    /// (pointing away from the source); `radiance` scales the clamped
    /// cosine so an unshadowed surface facing the light receives exactly
    /// `radiance` as irradiance.
    Directional { direction: Vec3, radiance: Rgb },
    /// Constant environment radiance from every direction.
    Environment { radiance: Rgb },
}

/// Rigid transform plus uniform scale, applied scale-then-rotate-then-translate.
#[derive(Debug, Clone, Copy)]
pub struct Transform {
    pub translate: Vec3,
    /// `(unit axis, angle in degrees)`.
    pub rotate_axis_angle: Option<(Vec3, f32)>,
    pub scale: f32,
}

impl Default for Transform {
    fn default() -> Self {
        Transform {
            translate: Vec3::ZERO,
            rotate_axis_angle: None,
            scale: 1.0,
        }
    }
}

impl Transform {
    pub fn translation(t: Vec3) -> Self {
        Transform {
            translate: t,
            ..Default::default()
        }
    }

    pub fn point(&self, p: Vec3) -> Vec3 {
        self.vector(p * self.scale) + self.translate
    }

    /// Rotation only; valid for directions and (uniform scale) normals.
    pub fn vector(&self, v: Vec3) -> Vec3 {
        match self.rotate_axis_angle {
            None => v,
            Some((axis, deg)) => glam::Quat::from_axis_angle(axis, deg.to_radians()) * v,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub mesh: usize,
    pub material: usize,
    pub transform: Transform,
    pub dynamic: bool,
}

/// A named scene parameter the irradiance field can be conditioned on,
/// exposed to models normalized to `[0,1]`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct VariableParam {
    pub name: String,
    pub min: f32,
    pub max: f32,
}

/// Nearest-intersection record.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceHit {
    pub t: f32,
    pub position: Vec3,
    pub geometric_normal: Vec3,
    pub shading_normal: Vec3,
    pub material: u32,
    pub triangle: u32,
    /// True when the ray struck the face from behind
    /// (`dir . geometric_normal > 0`).
    pub is_backface: bool,
    pub dynamic: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, dir: Vec3) -> Self {
        Ray { origin, dir }
    }

    pub fn at(&self, t: f32) -> Vec3 {
        self.origin + self.dir * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BvhSelector {
    Static,
    Dynamic,
    Both,
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: Vec3::splat(f32::INFINITY),
        max: Vec3::splat(f32::NEG_INFINITY),
    };

    pub fn grow(&mut self, p: Vec3) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn union(mut self, other: Aabb) -> Aabb {
        self.grow(other.min);
        self.grow(other.max);
        self
    }

    pub fn diagonal(&self) -> f32 {
        (self.max - self.min).length()
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.cmpge(self.min).all() && p.cmple(self.max).all()
    }

    /// Maps a world point into the unit cube (clamped outside).
    pub fn to_unit(&self, p: Vec3) -> Vec3 {
        ((p - self.min) / (self.max - self.min)).clamp(Vec3::ZERO, Vec3::ONE)
    }

    /// Maps a unit-cube point back to world space.
    pub fn from_unit(&self, u: Vec3) -> Vec3 {
        self.min + u * (self.max - self.min)
    }

    /// Inflates the box so it stays watertight against rounding in surface
    /// sampling, and gives axes with (near-)zero extent enough thickness
    /// that the unit-cube mapping stays well defined for planar scenes.
    fn pad_degenerate(mut self) -> Aabb {
        let extent = self.max - self.min;
        let big = extent.max_element().max(1.0);
        self.min -= Vec3::splat(big * 1e-6);
        self.max += Vec3::splat(big * 1e-6);
        let pad = big * 1e-4;
        for axis in 0..3 {
            if extent[axis] < pad {
                self.min[axis] -= pad;
                self.max[axis] += pad;
            }
        }
        self
    }
}

/// World-space triangle soup for one instance set, with its BVH, uniform
/// area sampler and emissive-triangle table.
#[derive(Debug)]
pub struct GeometrySet {
    pub positions: Vec<[Vec3; 3]>,
    /// Per-vertex shading normals where the source mesh provided them.
    pub shading_normals: Vec<Option<[Vec3; 3]>>,
    pub material: Vec<u32>,
    pub bvh: Bvh,
    pub sampler: Option<SurfaceSampler>,
    /// Emissive triangle ids with cumulative area, for area-light sampling.
    pub emissive: Vec<u32>,
    pub emissive_cdf: Vec<f32>,
    pub emissive_area: f32,
}

impl GeometrySet {
    fn build(
        positions: Vec<[Vec3; 3]>,
        shading_normals: Vec<Option<[Vec3; 3]>>,
        material: Vec<u32>,
        materials: &[Material],
    ) -> Self {
        let bvh = Bvh::build(&positions);
        let sampler = SurfaceSampler::build(&positions);
        let mut emissive = Vec::new();
        let mut emissive_cdf = Vec::new();
        let mut acc = 0.0f32;
        for (i, tri) in positions.iter().enumerate() {
            if materials[material[i] as usize].is_emissive() {
                acc += mesh::triangle_area(tri);
                emissive.push(i as u32);
                emissive_cdf.push(acc);
            }
        }
        GeometrySet {
            positions,
            shading_normals,
            material,
            bvh,
            sampler,
            emissive,
            emissive_cdf,
            emissive_area: acc,
        }
    }

    pub fn triangle_count(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Nearest hit along `ray` with `0 < t < t_max`. Ties at equal `t` go to
    /// the lowest triangle id.
    pub fn intersect(&self, ray: &Ray, t_max: f32) -> Option<SurfaceHit> {
        self.bvh
            .intersect(&self.positions, ray, t_max)
            .map(|raw| self.make_hit(ray, raw))
    }

    /// Brute-force reference used by tests to pin BVH exactness.
    pub fn intersect_linear(&self, ray: &Ray, t_max: f32) -> Option<SurfaceHit> {
        bvh::intersect_linear(&self.positions, ray, t_max).map(|raw| self.make_hit(ray, raw))
    }

    pub fn occluded(&self, ray: &Ray, t_max: f32) -> bool {
        self.bvh.intersect(&self.positions, ray, t_max).is_some()
    }

    fn make_hit(&self, ray: &Ray, raw: bvh::RawHit) -> SurfaceHit {
        let tri = raw.triangle as usize;
        let geometric_normal = mesh::triangle_normal(&self.positions[tri]);
        let shading_normal = match &self.shading_normals[tri] {
            Some([n0, n1, n2]) => {
                let w = 1.0 - raw.u - raw.v;
                let n = (*n0 * w + *n1 * raw.u + *n2 * raw.v).normalize_or_zero();
                let n = if n == Vec3::ZERO { geometric_normal } else { n };
                // Smooth normals opposing the face are flipped to its side.
                if n.dot(geometric_normal) < 0.0 {
                    -n
                } else {
                    n
                }
            }
            None => geometric_normal,
        };
        SurfaceHit {
            t: raw.t,
            position: ray.at(raw.t),
            geometric_normal,
            shading_normal,
            material: self.material[tri],
            triangle: raw.triangle,
            is_backface: ray.dir.dot(geometric_normal) > 0.0,
            dynamic: false,
        }
    }
}

/// A fully built scene: immutable after construction, safe to query from
/// any number of threads.
#[derive(Debug)]
pub struct Scene {
    pub materials: Vec<Material>,
    pub emitters: Vec<Emitter>,
    pub static_set: GeometrySet,
    pub dynamic_set: GeometrySet,
    /// Bounds of the static geometry; defines the bake volume and the
    /// unit-cube normalization used by every irradiance provider.
    pub bbox: Aabb,
    /// Self-intersection offset: `1e-4 x` static bbox diagonal.
    pub ray_epsilon: f32,
    pub camera: Option<CameraSpec>,
    pub variable_params: Vec<VariableParam>,
}

impl Scene {
    /// Assembles a scene from meshes + instances. `meshes[i]` is referenced
    /// by `Instance::mesh`; materials by `Instance::material`.
    pub fn build(
        meshes: Vec<Mesh>,
        materials: Vec<Material>,
        instances: Vec<Instance>,
        emitters: Vec<Emitter>,
        camera: Option<CameraSpec>,
        variable_params: Vec<VariableParam>,
    ) -> Result<Scene, SceneError> {
        for e in &emitters {
            match e {
                Emitter::Directional { direction, radiance } => {
                    if !direction.is_normalized() {
                        return Err(SceneError::Validation(
                            "directional emitter direction must be unit length".into(),
                        ));
                    }
                    if radiance.min_component() < 0.0 {
                        return Err(SceneError::Validation(
                            "directional emitter radiance must be >= 0".into(),
                        ));
                    }
                }
                Emitter::Environment { radiance } => {
                    if radiance.min_component() < 0.0 {
                        return Err(SceneError::Validation(
                            "environment radiance must be >= 0".into(),
                        ));
                    }
                }
            }
        }
        if variable_params.len() > 2 {
            return Err(SceneError::Validation(
                "at most 2 variable parameters are supported".into(),
            ));
        }

        let mut sets: [(Vec<[Vec3; 3]>, Vec<Option<[Vec3; 3]>>, Vec<u32>); 2] = Default::default();
        for inst in &instances {
            let mesh = meshes
                .get(inst.mesh)
                .ok_or_else(|| SceneError::Validation(format!("bad mesh index {}", inst.mesh)))?;
            if inst.material >= materials.len() {
                return Err(SceneError::Validation(format!(
                    "bad material index {}",
                    inst.material
                )));
            }
            if inst.transform.scale <= 0.0 {
                return Err(SceneError::Validation(
                    "instance scale must be positive (transform must stay invertible)".into(),
                ));
            }
            let (pos, nrm, mat) = &mut sets[inst.dynamic as usize];
            mesh.emit_world_triangles(&inst.transform, pos, nrm);
            mat.resize(pos.len(), inst.material as u32);
        }

        let [(sp, sn, sm), (dp, dn, dm)] = sets;
        let static_set = GeometrySet::build(sp, sn, sm, &materials);
        let dynamic_set = GeometrySet::build(dp, dn, dm, &materials);

        let mut bbox = Aabb::EMPTY;
        for tri in &static_set.positions {
            for v in tri {
                bbox.grow(*v);
            }
        }
        if static_set.is_empty() {
            bbox = Aabb {
                min: Vec3::ZERO,
                max: Vec3::ONE,
            };
        }
        let bbox = bbox.pad_degenerate();

        Ok(Scene {
            materials,
            emitters,
            static_set,
            dynamic_set,
            bbox,
            ray_epsilon: 1e-4 * bbox.diagonal(),
            camera,
            variable_params,
        })
    }

    pub fn material(&self, id: u32) -> &Material {
        &self.materials[id as usize]
    }

    /// Nearest hit across the selected instance sets. Equal-`t` ties between
    /// the sets resolve to the static hit.
    pub fn intersect(&self, selector: BvhSelector, ray: &Ray, t_max: f32) -> Option<SurfaceHit> {
        let s = if selector != BvhSelector::Dynamic {
            self.static_set.intersect(ray, t_max)
        } else {
            None
        };
        let d = if selector != BvhSelector::Static {
            self.dynamic_set.intersect(ray, t_max).map(|mut h| {
                h.dynamic = true;
                h
            })
        } else {
            None
        };
        match (s, d) {
            (Some(a), Some(b)) => Some(if b.t < a.t { b } else { a }),
            (a, b) => a.or(b),
        }
    }

    /// Visibility test: true when nothing in the selected sets blocks the
    /// segment `(origin, origin + dir * t_max)`.
    pub fn unoccluded(&self, selector: BvhSelector, ray: &Ray, t_max: f32) -> bool {
        let blocked = match selector {
            BvhSelector::Static => self.static_set.occluded(ray, t_max),
            BvhSelector::Dynamic => self.dynamic_set.occluded(ray, t_max),
            BvhSelector::Both => {
                self.static_set.occluded(ray, t_max) || self.dynamic_set.occluded(ray, t_max)
            }
        };
        !blocked
    }

    /// Spawn point for secondary rays: `position` pushed off the surface on
    /// the side of `normal` the ray should travel.
    pub fn offset_position(&self, position: Vec3, normal: Vec3) -> Vec3 {
        position + normal * self.ray_epsilon
    }

    /// Emitters after applying normalized variable parameter values.
    ///
    /// Convention: parameter `i` binds to the `i`-th directional emitter and
    /// rotates its base direction about the world Z axis by
    /// `min + value * (max - min)` radians. Scenes without directional
    /// emitters ignore the parameters.
    pub fn configured_emitters(&self, params: &[f32]) -> Vec<Emitter> {
        let mut emitters = self.emitters.clone();
        if params.is_empty() {
            return emitters;
        }
        let mut next = 0;
        for (p, spec) in params.iter().zip(&self.variable_params) {
            let angle = spec.min + p.clamp(0.0, 1.0) * (spec.max - spec.min);
            for (i, e) in emitters.iter_mut().enumerate().skip(next) {
                if let Emitter::Directional { direction, .. } = e {
                    let (s, c) = angle.sin_cos();
                    let d = *direction;
                    *direction = Vec3::new(c * d.x - s * d.y, s * d.x + c * d.y, d.z).normalize();
                    next = i + 1;
                    break;
                }
            }
        }
        emitters
    }
}

#[cfg(test)]
mod tests;
