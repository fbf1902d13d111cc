//! Minimal Wavefront OBJ loader: `v`, `vn` and `f` records only.

use std::path::Path;

use glam::Vec3;

use super::mesh::Mesh;
use super::SceneError;

pub fn load_obj(path: &Path) -> Result<Mesh, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path.display().to_string();
    parse_obj(&text, &name)
}

pub fn parse_obj(text: &str, name: &str) -> Result<Mesh, SceneError> {
    let mut positions: Vec<Vec3> = Vec::new();
    let mut normals_pool: Vec<Vec3> = Vec::new();
    // Per-vertex normal resolved from the face records; OBJ indexes
    // positions and normals independently, so normals are re-welded onto
    // the position index.
    let mut vertex_normals: Vec<Option<Vec3>> = Vec::new();
    let mut indices: Vec<[u32; 3]> = Vec::new();
    let mut any_normals = false;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let p = parse_vec3(&mut it, name, lineno)?;
                positions.push(p);
                vertex_normals.push(None);
            }
            Some("vn") => normals_pool.push(parse_vec3(&mut it, name, lineno)?),
            Some("f") => {
                let mut verts: Vec<u32> = Vec::new();
                for tok in it {
                    let mut parts = tok.split('/');
                    let vi = parse_index(parts.next(), positions.len(), name, lineno)?;
                    let _vt = parts.next();
                    if let Some(nt) = parts.next() {
                        if !nt.is_empty() {
                            let ni = parse_index(Some(nt), normals_pool.len(), name, lineno)?;
                            vertex_normals[vi as usize] = Some(normals_pool[ni as usize]);
                            any_normals = true;
                        }
                    }
                    verts.push(vi);
                }
                if verts.len() < 3 {
                    return Err(SceneError::Parse(format!(
                        "{name}:{}: face with fewer than 3 vertices",
                        lineno + 1
                    )));
                }
                for i in 1..verts.len() - 1 {
                    indices.push([verts[0], verts[i], verts[i + 1]]);
                }
            }
            _ => {}
        }
    }

    let normals = if any_normals {
        Some(
            vertex_normals
                .iter()
                .map(|n| n.unwrap_or(Vec3::Z))
                .collect(),
        )
    } else {
        None
    };
    let mesh = Mesh {
        positions,
        normals,
        indices,
    };
    mesh.validate(name)?;
    Ok(mesh)
}

fn parse_vec3<'a>(
    it: &mut impl Iterator<Item = &'a str>,
    name: &str,
    lineno: usize,
) -> Result<Vec3, SceneError> {
    let mut v = [0.0f32; 3];
    for slot in &mut v {
        *slot = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                SceneError::Parse(format!("{name}:{}: expected 3 coordinates", lineno + 1))
            })?;
    }
    Ok(Vec3::from(v))
}

fn parse_index(
    tok: Option<&str>,
    len: usize,
    name: &str,
    lineno: usize,
) -> Result<u32, SceneError> {
    let raw: i64 = tok
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| SceneError::Parse(format!("{name}:{}: bad face index", lineno + 1)))?;
    let idx = if raw > 0 {
        raw - 1
    } else {
        len as i64 + raw
    };
    if idx < 0 || idx >= len as i64 {
        return Err(SceneError::Parse(format!(
            "{name}:{}: face index {raw} out of range",
            lineno + 1
        )));
    }
    Ok(idx as u32)
}

/// Serializes a mesh as OBJ text (used to emit procedural test assets).
pub fn write_obj(mesh: &Mesh) -> String {
    let mut out = String::new();
    for p in &mesh.positions {
        out.push_str(&format!("v {} {} {}\n", p.x, p.y, p.z));
    }
    if let Some(ns) = &mesh.normals {
        for n in ns {
            out.push_str(&format!("vn {} {} {}\n", n.x, n.y, n.z));
        }
        for tri in &mesh.indices {
            out.push_str(&format!(
                "f {0}//{0} {1}//{1} {2}//{2}\n",
                tri[0] + 1,
                tri[1] + 1,
                tri[2] + 1
            ));
        }
    } else {
        for tri in &mesh.indices {
            out.push_str(&format!("f {} {} {}\n", tri[0] + 1, tri[1] + 1, tri[2] + 1));
        }
    }
    out
}
