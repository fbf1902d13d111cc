//! JSON scene description.
//!
//! ```json
//! {
//!   "meshes": [
//!     {"id": "floor", "primitive": {"type": "quad", "points": [[...],[...],[...],[...]]}},
//!     {"id": "walls", "primitive": {"type": "box", "min": [...], "max": [...]}},
//!     {"id": "ball",  "primitive": {"type": "sphere", "center": [...], "radius": 0.3, "subdiv": 3}},
//!     {"id": "prop",  "obj_path": "prop.obj"}
//!   ],
//!   "materials": [{"id": "white", "albedo": [0.73,0.73,0.73], "emission": [0,0,0], "kind": "diffuse"}],
//!   "instances": [{"mesh": "floor", "material": "white",
//!                  "transform": {"translate": [0,0,0], "rotate_axis_angle": [0,1,0,90], "scale": 1.0},
//!                  "dynamic": false}],
//!   "emitters": [{"type": "directional", "direction": [0,-1,0], "radiance": [3,3,3]},
//!                {"type": "env", "radiance": [1,1,1]}],
//!   "camera": {"origin": [...], "look_at": [...], "up": [0,1,0], "fov_y_degrees": 40},
//!   "variable_params": [{"name": "sun_angle", "min": -0.6, "max": 0.6}]
//! }
//! ```
//!
//! `obj_path` is resolved relative to the scene file.

use std::collections::HashMap;
use std::path::Path;

use glam::Vec3;
use serde::{Deserialize, Serialize};

use super::camera::CameraSpec;
use super::mesh::Mesh;
use super::{
    Emitter, Instance, Material, MaterialKind, Scene, SceneError, Transform, VariableParam,
};
use crate::rgb::Rgb;

#[derive(Debug, Serialize, Deserialize)]
pub struct SceneDoc {
    #[serde(default)]
    pub meshes: Vec<MeshDoc>,
    #[serde(default)]
    pub materials: Vec<MaterialDoc>,
    #[serde(default)]
    pub instances: Vec<InstanceDoc>,
    #[serde(default)]
    pub emitters: Vec<EmitterDoc>,
    #[serde(default)]
    pub camera: Option<CameraSpec>,
    #[serde(default)]
    pub variable_params: Vec<VariableParam>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MeshDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obj_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primitive: Option<PrimitiveDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PrimitiveDoc {
    Quad { points: [[f32; 3]; 4] },
    Box { min: [f32; 3], max: [f32; 3] },
    Sphere {
        center: [f32; 3],
        radius: f32,
        #[serde(default = "default_subdiv")]
        subdiv: u32,
    },
}

fn default_subdiv() -> u32 {
    3
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MaterialDoc {
    pub id: String,
    pub albedo: [f32; 3],
    #[serde(default)]
    pub emission: [f32; 3],
    #[serde(default = "default_kind")]
    pub kind: MaterialKind,
}

fn default_kind() -> MaterialKind {
    MaterialKind::Diffuse
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub mesh: String,
    pub material: String,
    #[serde(default)]
    pub transform: TransformDoc,
    #[serde(default)]
    pub dynamic: bool,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct TransformDoc {
    #[serde(default)]
    pub translate: Option<[f32; 3]>,
    /// `[axis_x, axis_y, axis_z, angle_degrees]`.
    #[serde(default)]
    pub rotate_axis_angle: Option<[f32; 4]>,
    #[serde(default)]
    pub scale: Option<f32>,
}

impl TransformDoc {
    fn build(&self) -> Result<Transform, SceneError> {
        let rotate = match self.rotate_axis_angle {
            None => None,
            Some([x, y, z, deg]) => {
                let axis = Vec3::new(x, y, z);
                if axis.length() < 1e-8 {
                    return Err(SceneError::Validation("rotation axis is zero".into()));
                }
                Some((axis.normalize(), deg))
            }
        };
        Ok(Transform {
            translate: self.translate.map(Vec3::from).unwrap_or(Vec3::ZERO),
            rotate_axis_angle: rotate,
            scale: self.scale.unwrap_or(1.0),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum EmitterDoc {
    Directional {
        direction: [f32; 3],
        radiance: [f32; 3],
    },
    Env {
        radiance: [f32; 3],
    },
}

/// Loads and builds a scene from a JSON file. Mesh OBJ paths resolve
/// relative to the file's directory.
pub fn load_scene(path: &Path) -> Result<Scene, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    scene_from_str(&text, base)
}

/// Builds a scene from JSON text; `base` anchors relative OBJ paths.
pub fn scene_from_str(text: &str, base: &Path) -> Result<Scene, SceneError> {
    let doc: SceneDoc = serde_json::from_str(text)
        .map_err(|e| SceneError::Parse(format!("line {} column {}: {e}", e.line(), e.column())))?;
    build_scene(&doc, base)
}

pub fn build_scene(doc: &SceneDoc, base: &Path) -> Result<Scene, SceneError> {
    let mut meshes = Vec::with_capacity(doc.meshes.len());
    let mut mesh_ids = HashMap::new();
    for m in &doc.meshes {
        let mesh = match (&m.obj_path, &m.primitive) {
            (Some(p), None) => super::obj::load_obj(&base.join(p))?,
            (None, Some(prim)) => match prim {
                PrimitiveDoc::Quad { points } => Mesh::quad([
                    Vec3::from(points[0]),
                    Vec3::from(points[1]),
                    Vec3::from(points[2]),
                    Vec3::from(points[3]),
                ]),
                PrimitiveDoc::Box { min, max } => {
                    Mesh::box_outward(Vec3::from(*min), Vec3::from(*max))
                }
                PrimitiveDoc::Sphere {
                    center,
                    radius,
                    subdiv,
                } => Mesh::icosphere(Vec3::from(*center), *radius, *subdiv),
            },
            _ => {
                return Err(SceneError::Parse(format!(
                    "mesh '{}': exactly one of obj_path or primitive required",
                    m.id
                )))
            }
        };
        mesh.validate(&m.id)?;
        mesh_ids.insert(m.id.clone(), meshes.len());
        meshes.push(mesh);
    }

    let mut materials = Vec::with_capacity(doc.materials.len());
    let mut material_ids = HashMap::new();
    for m in &doc.materials {
        let mat = Material {
            albedo: Rgb::from_array(m.albedo),
            emission: Rgb::from_array(m.emission),
            kind: m.kind,
        };
        mat.validate(&m.id)?;
        material_ids.insert(m.id.clone(), materials.len());
        materials.push(mat);
    }

    let mut instances = Vec::with_capacity(doc.instances.len());
    for inst in &doc.instances {
        let mesh = *mesh_ids
            .get(&inst.mesh)
            .ok_or_else(|| SceneError::Validation(format!("unknown mesh '{}'", inst.mesh)))?;
        let material = *material_ids.get(&inst.material).ok_or_else(|| {
            SceneError::Validation(format!("unknown material '{}'", inst.material))
        })?;
        instances.push(Instance {
            mesh,
            material,
            transform: inst.transform.build()?,
            dynamic: inst.dynamic,
        });
    }

    let emitters = doc
        .emitters
        .iter()
        .map(|e| match e {
            EmitterDoc::Directional {
                direction,
                radiance,
            } => {
                let d = Vec3::from(*direction);
                if d.length() < 1e-8 {
                    return Err(SceneError::Validation(
                        "directional emitter direction is zero".into(),
                    ));
                }
                Ok(Emitter::Directional {
                    direction: d.normalize(),
                    radiance: Rgb::from_array(*radiance),
                })
            }
            EmitterDoc::Env { radiance } => Ok(Emitter::Environment {
                radiance: Rgb::from_array(*radiance),
            }),
        })
        .collect::<Result<Vec<_>, _>>()?;

    Scene::build(
        meshes,
        materials,
        instances,
        emitters,
        doc.camera,
        doc.variable_params.clone(),
    )
}
