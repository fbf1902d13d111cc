//! Procedurally generated test scenes, emitted as scene JSON so the repo
//! ships no binary assets. The same files back the unit tests, the
//! acceptance suite and the `fixture` CLI subcommand.

use std::path::Path;

use super::json::{
    EmitterDoc, InstanceDoc, MaterialDoc, MeshDoc, PrimitiveDoc, SceneDoc, TransformDoc,
};
use super::camera::CameraSpec;
use super::{Scene, VariableParam};

pub const FIXTURE_NAMES: &[&str] = &[
    "cornell",
    "cornell-empty",
    "leak-room",
    "floor-env",
    "box-plate",
    "solid-box",
    "sunroom",
];

/// JSON text for a named fixture.
pub fn fixture_json(name: &str) -> Option<String> {
    let doc = match name {
        "cornell" => cornell_doc(true),
        "cornell-empty" => cornell_doc(false),
        "leak-room" => leak_room_doc(),
        "floor-env" => floor_env_doc(),
        "box-plate" => box_plate_doc(),
        "solid-box" => solid_box_doc(),
        "sunroom" => sunroom_doc(),
        _ => return None,
    };
    Some(serde_json::to_string_pretty(&doc).expect("fixture docs serialize"))
}

/// Builds a named fixture scene directly.
pub fn fixture_scene(name: &str) -> Scene {
    let text = fixture_json(name).unwrap_or_else(|| panic!("unknown fixture '{name}'"));
    super::json::scene_from_str(&text, Path::new(".")).expect("fixtures are valid scenes")
}

/// Empty-walled Cornell room JSON (5 quads + area light).
pub fn cornell_empty_json() -> String {
    fixture_json("cornell-empty").unwrap()
}

/// OBJ text for a smooth unit-radius sphere, used as a stand-in dynamic
/// object in CLI examples and tests.
pub fn sphere_obj() -> String {
    let mesh = super::mesh::Mesh::icosphere(glam::Vec3::ZERO, 1.0, 2);
    super::obj::write_obj(&mesh)
}

// Axis-aligned quad on the plane `axis = level`, facing +-axis, spanning
// `[u0,u1] x [v0,v1]` on the cyclically following axes (x->yz, y->zx, z->xy).
fn axis_quad(axis: usize, positive: bool, level: f32, u0: f32, u1: f32, v0: f32, v1: f32) -> PrimitiveDoc {
    let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
    let mk = |u: f32, v: f32| {
        let mut p = [0.0f32; 3];
        p[axis] = level;
        p[ua] = u;
        p[va] = v;
        p
    };
    let points = if positive {
        [mk(u0, v0), mk(u1, v0), mk(u1, v1), mk(u0, v1)]
    } else {
        [mk(u0, v0), mk(u0, v1), mk(u1, v1), mk(u1, v0)]
    };
    PrimitiveDoc::Quad { points }
}

fn mesh(id: &str, primitive: PrimitiveDoc) -> MeshDoc {
    MeshDoc {
        id: id.into(),
        obj_path: None,
        primitive: Some(primitive),
    }
}

fn material(id: &str, albedo: [f32; 3], emission: [f32; 3]) -> MaterialDoc {
    MaterialDoc {
        id: id.into(),
        albedo,
        emission,
        kind: super::MaterialKind::Diffuse,
    }
}

fn instance(mesh: &str, material: &str) -> InstanceDoc {
    InstanceDoc {
        mesh: mesh.into(),
        material: material.into(),
        transform: TransformDoc::default(),
        dynamic: false,
    }
}

fn placed(mesh: &str, material: &str, translate: [f32; 3], rotate_y_deg: f32) -> InstanceDoc {
    InstanceDoc {
        mesh: mesh.into(),
        material: material.into(),
        transform: TransformDoc {
            translate: Some(translate),
            rotate_axis_angle: (rotate_y_deg != 0.0).then_some([0.0, 1.0, 0.0, rotate_y_deg]),
            scale: None,
        },
        dynamic: false,
    }
}

/// Cornell room: x,z in [-1,1], y in [0,2], open front at z=+1. With
/// `boxes` it carries the usual tall and short blocks.
fn cornell_doc(boxes: bool) -> SceneDoc {
    let mut meshes = vec![
        mesh("floor", axis_quad(1, true, 0.0, -1.0, 1.0, -1.0, 1.0)),
        mesh("ceiling", axis_quad(1, false, 2.0, -1.0, 1.0, -1.0, 1.0)),
        mesh("back", axis_quad(2, true, -1.0, -1.0, 1.0, 0.0, 2.0)),
        mesh("left", axis_quad(0, true, -1.0, 0.0, 2.0, -1.0, 1.0)),
        mesh("right", axis_quad(0, false, 1.0, 0.0, 2.0, -1.0, 1.0)),
        mesh("light", axis_quad(1, false, 1.99, -0.25, 0.25, -0.25, 0.25)),
    ];
    let materials = vec![
        material("white", [0.73, 0.73, 0.73], [0.0; 3]),
        material("red", [0.63, 0.065, 0.05], [0.0; 3]),
        material("green", [0.14, 0.45, 0.091], [0.0; 3]),
        material("lamp", [0.0; 3], [17.0, 12.0, 4.0]),
    ];
    let mut instances = vec![
        instance("floor", "white"),
        instance("ceiling", "white"),
        instance("back", "white"),
        instance("left", "red"),
        instance("right", "green"),
        instance("light", "lamp"),
    ];
    if boxes {
        meshes.push(mesh(
            "tall",
            PrimitiveDoc::Box {
                min: [-0.25, 0.0, -0.25],
                max: [0.25, 1.2, 0.25],
            },
        ));
        meshes.push(mesh(
            "short",
            PrimitiveDoc::Box {
                min: [-0.3, 0.0, -0.3],
                max: [0.3, 0.6, 0.3],
            },
        ));
        instances.push(placed("tall", "white", [-0.4, 0.0, -0.35], 17.0));
        instances.push(placed("short", "white", [0.4, 0.0, 0.35], -18.0));
    }
    SceneDoc {
        meshes,
        materials,
        instances,
        emitters: vec![],
        // Slightly below the room's vertical center: a centered camera in a
        // square room sends corner rays exactly along the wall-ceiling seam.
        camera: Some(CameraSpec {
            origin: [0.0, 0.95, 3.4],
            look_at: [0.0, 0.95, 0.0],
            up: [0.0, 1.0, 0.0],
            fov_y_degrees: 40.0,
        }),
        variable_params: vec![],
    }
}

/// Two rooms split by a thin wall with a doorway; the only light sits on
/// the bright-side ceiling. Exercises probe light leaking.
fn leak_room_doc() -> SceneDoc {
    let meshes = vec![
        mesh("floor", axis_quad(1, true, 0.0, -1.0, 1.0, -2.0, 2.0)),
        mesh("ceiling", axis_quad(1, false, 2.0, -1.0, 1.0, -2.0, 2.0)),
        mesh("back", axis_quad(2, true, -1.0, -2.0, 2.0, 0.0, 2.0)),
        mesh("front", axis_quad(2, false, 1.0, -2.0, 2.0, 0.0, 2.0)),
        mesh("west", axis_quad(0, true, -2.0, 0.0, 2.0, -1.0, 1.0)),
        mesh("east", axis_quad(0, false, 2.0, 0.0, 2.0, -1.0, 1.0)),
        // Divider with a doorway at z in [0.5, 1.0), y < 1.5.
        mesh(
            "wall_a",
            PrimitiveDoc::Box {
                min: [-0.05, 0.0, -1.0],
                max: [0.05, 2.0, 0.5],
            },
        ),
        mesh(
            "wall_b",
            PrimitiveDoc::Box {
                min: [-0.05, 1.5, 0.5],
                max: [0.05, 2.0, 1.0],
            },
        ),
        mesh("light", axis_quad(1, false, 1.99, -0.3, 0.3, 0.9, 1.5)),
    ];
    let materials = vec![
        material("white", [0.73, 0.73, 0.73], [0.0; 3]),
        material("lamp", [0.0; 3], [14.0, 14.0, 14.0]),
    ];
    let instances = vec![
        instance("floor", "white"),
        instance("ceiling", "white"),
        instance("back", "white"),
        instance("front", "white"),
        instance("west", "white"),
        instance("east", "white"),
        instance("wall_a", "white"),
        instance("wall_b", "white"),
        instance("light", "lamp"),
    ];
    SceneDoc {
        meshes,
        materials,
        instances,
        emitters: vec![],
        camera: Some(CameraSpec {
            origin: [-1.6, 1.0, 0.0],
            look_at: [0.0, 1.0, 0.0],
            up: [0.0, 1.0, 0.0],
            fov_y_degrees: 55.0,
        }),
        variable_params: vec![],
    }
}

/// Large Lambertian floor (albedo 0.5) under a unit constant environment.
fn floor_env_doc() -> SceneDoc {
    SceneDoc {
        meshes: vec![mesh(
            "floor",
            axis_quad(1, true, 0.0, -1000.0, 1000.0, -1000.0, 1000.0),
        )],
        materials: vec![material("grey", [0.5, 0.5, 0.5], [0.0; 3])],
        instances: vec![instance("floor", "grey")],
        emitters: vec![EmitterDoc::Env {
            radiance: [1.0, 1.0, 1.0],
        }],
        camera: None,
        variable_params: vec![],
    }
}

/// Floor plus a wide plate hovering at y=0.5; a point just beneath the
/// plate sees an almost fully occluded sky.
fn box_plate_doc() -> SceneDoc {
    SceneDoc {
        meshes: vec![
            mesh("floor", axis_quad(1, true, 0.0, -5.0, 5.0, -5.0, 5.0)),
            mesh("plate", axis_quad(1, false, 0.5, -4.0, 4.0, -4.0, 4.0)),
        ],
        materials: vec![material("grey", [0.5, 0.5, 0.5], [0.0; 3])],
        instances: vec![instance("floor", "grey"), instance("plate", "grey")],
        emitters: vec![EmitterDoc::Env {
            radiance: [1.0, 1.0, 1.0],
        }],
        camera: None,
        variable_params: vec![],
    }
}

/// A closed box occupying half the scene bounds; volume samples inside it
/// must be culled by the backface-majority test. The floor covers only the
/// open half so no face is coplanar with the block.
fn solid_box_doc() -> SceneDoc {
    SceneDoc {
        meshes: vec![
            // axis_quad(1, ..) spans (u, v) = (z, x).
            mesh("floor", axis_quad(1, true, 0.0, -1.0, 0.0, -1.0, 1.0)),
            // Covers z in [0,1]: exactly half of the [-1,1]x[0,1]x[-1,1] bounds.
            mesh(
                "block",
                PrimitiveDoc::Box {
                    min: [-1.0, 0.0, 0.0],
                    max: [1.0, 1.0, 1.0],
                },
            ),
        ],
        materials: vec![material("grey", [0.6, 0.6, 0.6], [0.0; 3])],
        instances: vec![instance("floor", "grey"), instance("block", "grey")],
        emitters: vec![EmitterDoc::Env {
            radiance: [1.0, 1.0, 1.0],
        }],
        camera: None,
        variable_params: vec![],
    }
}

/// Room with a slot in the ceiling and a rotating sun: the one-parameter
/// variable-irradiance fixture.
fn sunroom_doc() -> SceneDoc {
    let meshes = vec![
        mesh("floor", axis_quad(1, true, 0.0, -1.0, 1.0, -1.0, 1.0)),
        mesh("back", axis_quad(2, true, -1.0, -1.0, 1.0, 0.0, 2.0)),
        mesh("front", axis_quad(2, false, 1.0, -1.0, 1.0, 0.0, 2.0)),
        mesh("west", axis_quad(0, true, -1.0, 0.0, 2.0, -1.0, 1.0)),
        mesh("east", axis_quad(0, false, 1.0, 0.0, 2.0, -1.0, 1.0)),
        // Ceiling slabs leaving a sky slot over x in [-0.3, 0.3].
        mesh("roof_w", axis_quad(1, false, 2.0, -1.0, 1.0, -1.0, -0.3)),
        mesh("roof_e", axis_quad(1, false, 2.0, -1.0, 1.0, 0.3, 1.0)),
    ];
    let materials = vec![
        material("white", [0.73, 0.73, 0.73], [0.0; 3]),
        material("floorband", [0.6, 0.45, 0.2], [0.0; 3]),
    ];
    let instances = vec![
        instance("floor", "floorband"),
        instance("back", "white"),
        instance("front", "white"),
        instance("west", "white"),
        instance("east", "white"),
        instance("roof_w", "white"),
        instance("roof_e", "white"),
    ];
    SceneDoc {
        meshes,
        materials,
        instances,
        emitters: vec![EmitterDoc::Directional {
            direction: [0.0, -1.0, 0.0],
            radiance: [8.0, 7.5, 6.5],
        }],
        camera: Some(CameraSpec {
            origin: [0.0, 1.2, 0.85],
            look_at: [0.0, 0.6, -0.4],
            up: [0.0, 1.0, 0.0],
            fov_y_degrees: 55.0,
        }),
        variable_params: vec![VariableParam {
            name: "sun_angle".into(),
            min: -0.5,
            max: 0.5,
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{BvhSelector, Ray};
    use glam::Vec3;

    #[test]
    fn all_fixtures_build() {
        for name in FIXTURE_NAMES {
            let scene = fixture_scene(name);
            assert!(
                !scene.static_set.is_empty(),
                "fixture {name} has no static geometry"
            );
        }
    }

    #[test]
    fn cornell_walls_face_inward() {
        let scene = fixture_scene("cornell-empty");
        let center = Vec3::new(0.0, 1.0, 0.0);
        for dir in [
            Vec3::X,
            -Vec3::X,
            Vec3::Y,
            -Vec3::Y,
            -Vec3::Z,
        ] {
            let hit = scene
                .intersect(BvhSelector::Static, &Ray::new(center, dir), f32::INFINITY)
                .expect("wall hit");
            assert!(!hit.is_backface, "wall along {dir:?} faces away");
        }
    }

    #[test]
    fn sampled_surface_points_stay_in_bbox() {
        use crate::rng::{stream_rng, Stream};
        use rand::Rng;
        let scene = fixture_scene("cornell");
        let sampler = scene.static_set.sampler.as_ref().unwrap();
        let mut rng = stream_rng(5, Stream::Eval, 0);
        for _ in 0..10_000 {
            let (p, n, _) = sampler.sample(
                &scene.static_set.positions,
                &scene.static_set.shading_normals,
                rng.gen(),
                rng.gen(),
                rng.gen(),
            );
            assert!(scene.bbox.contains(p), "{p} outside bbox");
            assert!((n.length() - 1.0).abs() < 1e-4);
        }
    }
}
