//! Indexed triangle meshes and procedural primitives.

use glam::Vec3;

use super::{SceneError, Transform};

/// Indexed triangle mesh in object space. `normals`, when present, are
/// per-vertex shading normals parallel to `positions`.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub positions: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    pub indices: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn validate(&self, id: &str) -> Result<(), SceneError> {
        if self.indices.is_empty() {
            return Err(SceneError::EmptyMesh(id.to_string()));
        }
        if self.positions.iter().any(|p| !p.is_finite()) {
            return Err(SceneError::NonFiniteVertex(id.to_string()));
        }
        Ok(())
    }

    /// Appends this mesh's triangles, transformed to world space.
    pub(super) fn emit_world_triangles(
        &self,
        transform: &Transform,
        out_positions: &mut Vec<[Vec3; 3]>,
        out_normals: &mut Vec<Option<[Vec3; 3]>>,
    ) {
        for idx in &self.indices {
            let p = [
                transform.point(self.positions[idx[0] as usize]),
                transform.point(self.positions[idx[1] as usize]),
                transform.point(self.positions[idx[2] as usize]),
            ];
            out_positions.push(p);
            out_normals.push(self.normals.as_ref().map(|ns| {
                [
                    transform.vector(ns[idx[0] as usize]).normalize_or_zero(),
                    transform.vector(ns[idx[1] as usize]).normalize_or_zero(),
                    transform.vector(ns[idx[2] as usize]).normalize_or_zero(),
                ]
            }));
        }
    }

    /// Quad given as four corners, split deterministically into triangles
    /// `0-1-2` and `0-2-3`. The winding defines the geometric normal.
    pub fn quad(corners: [Vec3; 4]) -> Mesh {
        Mesh {
            positions: corners.to_vec(),
            normals: None,
            indices: vec![[0, 1, 2], [0, 2, 3]],
        }
    }

    /// Axis-aligned box with outward-facing faces.
    pub fn box_outward(min: Vec3, max: Vec3) -> Mesh {
        let (a, b) = (min, max);
        let corner = |x, y, z| {
            Vec3::new(
                if x == 0 { a.x } else { b.x },
                if y == 0 { a.y } else { b.y },
                if z == 0 { a.z } else { b.z },
            )
        };
        // Each face listed counter-clockwise seen from outside.
        let faces = [
            [corner(0, 0, 0), corner(0, 0, 1), corner(0, 1, 1), corner(0, 1, 0)], // -x
            [corner(1, 0, 0), corner(1, 1, 0), corner(1, 1, 1), corner(1, 0, 1)], // +x
            [corner(0, 0, 0), corner(1, 0, 0), corner(1, 0, 1), corner(0, 0, 1)], // -y
            [corner(0, 1, 0), corner(0, 1, 1), corner(1, 1, 1), corner(1, 1, 0)], // +y
            [corner(0, 0, 0), corner(0, 1, 0), corner(1, 1, 0), corner(1, 0, 0)], // -z
            [corner(0, 0, 1), corner(1, 0, 1), corner(1, 1, 1), corner(0, 1, 1)], // +z
        ];
        let mut positions = Vec::with_capacity(24);
        let mut indices = Vec::with_capacity(12);
        for f in faces {
            let base = positions.len() as u32;
            positions.extend_from_slice(&f);
            indices.push([base, base + 1, base + 2]);
            indices.push([base, base + 2, base + 3]);
        }
        Mesh {
            positions,
            normals: None,
            indices,
        }
    }

    /// Icosphere with smooth vertex normals. `subdiv = 0` is the plain
    /// icosahedron (20 faces); each level quadruples the face count.
    pub fn icosphere(center: Vec3, radius: f32, subdiv: u32) -> Mesh {
        let phi = (1.0 + 5.0f32.sqrt()) / 2.0;
        let mut positions: Vec<Vec3> = [
            (-1.0, phi, 0.0),
            (1.0, phi, 0.0),
            (-1.0, -phi, 0.0),
            (1.0, -phi, 0.0),
            (0.0, -1.0, phi),
            (0.0, 1.0, phi),
            (0.0, -1.0, -phi),
            (0.0, 1.0, -phi),
            (phi, 0.0, -1.0),
            (phi, 0.0, 1.0),
            (-phi, 0.0, -1.0),
            (-phi, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
        let mut indices: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];

        for _ in 0..subdiv.min(4) {
            let mut midpoints = std::collections::HashMap::new();
            let mut midpoint = |a: u32, b: u32, positions: &mut Vec<Vec3>| -> u32 {
                let key = (a.min(b), a.max(b));
                *midpoints.entry(key).or_insert_with(|| {
                    let m = ((positions[a as usize] + positions[b as usize]) * 0.5).normalize();
                    positions.push(m);
                    (positions.len() - 1) as u32
                })
            };
            let mut next = Vec::with_capacity(indices.len() * 4);
            for [a, b, c] in indices {
                let ab = midpoint(a, b, &mut positions);
                let bc = midpoint(b, c, &mut positions);
                let ca = midpoint(c, a, &mut positions);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            indices = next;
        }

        let normals = Some(positions.clone());
        for p in &mut positions {
            *p = center + *p * radius;
        }
        Mesh {
            positions,
            normals,
            indices,
        }
    }
}

pub fn triangle_area(tri: &[Vec3; 3]) -> f32 {
    0.5 * (tri[1] - tri[0]).cross(tri[2] - tri[0]).length()
}

pub fn triangle_normal(tri: &[Vec3; 3]) -> Vec3 {
    (tri[1] - tri[0]).cross(tri[2] - tri[0]).normalize_or_zero()
}
