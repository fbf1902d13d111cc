//! `NIVP` probe-grid files: header plus 27 half-precision coefficients per
//! probe, x-fastest.

use std::io::Read;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use glam::Vec3;
use half::f16;
use thiserror::Error;

use super::{ProbeGrid, QueryHeuristics, ShIrradiance};
use crate::rgb::Rgb;
use crate::scene::Aabb;

const MAGIC: &[u8; 4] = b"NIVP";
const VERSION: u32 = 1;
/// Fixed header size: magic + version + dims + bbox + flags + exponent +
/// clamp.
pub const HEADER_BYTES: usize = 4 + 4 + 12 + 24 + 4 + 4 + 4;

#[derive(Debug, Error)]
pub enum ProbeIoError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a NIVP probe grid file")]
    BadMagic,
    #[error("unsupported NIVP version {0}")]
    BadVersion(u32),
    #[error("truncated probe grid file")]
    Truncated,
}

pub fn save_grid(grid: &ProbeGrid, path: &Path) -> Result<(), ProbeIoError> {
    let mut buf = Vec::with_capacity(HEADER_BYTES + grid.memory_bytes());
    buf.extend_from_slice(MAGIC);
    buf.write_u32::<LittleEndian>(VERSION).unwrap();
    for d in grid.dims {
        buf.write_u32::<LittleEndian>(d).unwrap();
    }
    for v in [
        grid.bbox.min.x,
        grid.bbox.min.y,
        grid.bbox.min.z,
        grid.bbox.max.x,
        grid.bbox.max.y,
        grid.bbox.max.z,
    ] {
        buf.write_f32::<LittleEndian>(v).unwrap();
    }
    let mut flags = 0u32;
    if grid.heuristics.cosine_falloff {
        flags |= 1;
    }
    if grid.heuristics.rt_visibility {
        flags |= 2;
    }
    buf.write_u32::<LittleEndian>(flags).unwrap();
    buf.write_f32::<LittleEndian>(grid.heuristics.falloff_exponent)
        .unwrap();
    buf.write_f32::<LittleEndian>(grid.heuristics.weight_clamp)
        .unwrap();
    for probe in &grid.probes {
        for c in &probe.coeffs {
            for v in c.to_array() {
                buf.write_u16::<LittleEndian>(f16::from_f32(v).to_bits())
                    .unwrap();
            }
        }
    }
    std::fs::write(path, buf).map_err(|source| ProbeIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_grid(path: &Path) -> Result<ProbeGrid, ProbeIoError> {
    let bytes = std::fs::read(path).map_err(|source| ProbeIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut r = std::io::Cursor::new(bytes);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| ProbeIoError::Truncated)?;
    if &magic != MAGIC {
        return Err(ProbeIoError::BadMagic);
    }
    let tr = |_| ProbeIoError::Truncated;
    let version = r.read_u32::<LittleEndian>().map_err(tr)?;
    if version != VERSION {
        return Err(ProbeIoError::BadVersion(version));
    }
    let mut dims = [0u32; 3];
    for d in &mut dims {
        *d = r.read_u32::<LittleEndian>().map_err(tr)?;
    }
    let mut b = [0.0f32; 6];
    for v in &mut b {
        *v = r.read_f32::<LittleEndian>().map_err(tr)?;
    }
    let flags = r.read_u32::<LittleEndian>().map_err(tr)?;
    let falloff_exponent = r.read_f32::<LittleEndian>().map_err(tr)?;
    let weight_clamp = r.read_f32::<LittleEndian>().map_err(tr)?;

    let count = (dims[0] * dims[1] * dims[2]) as usize;
    let mut probes = Vec::with_capacity(count);
    for _ in 0..count {
        let mut coeffs = [Rgb::splat(0.0); 9];
        for c in &mut coeffs {
            let mut vals = [0.0f32; 3];
            for v in &mut vals {
                *v = f16::from_bits(r.read_u16::<LittleEndian>().map_err(tr)?).to_f32();
            }
            *c = Rgb::from_array(vals);
        }
        probes.push(ShIrradiance { coeffs });
    }
    Ok(ProbeGrid {
        dims,
        bbox: Aabb {
            min: Vec3::new(b[0], b[1], b[2]),
            max: Vec3::new(b[3], b[4], b[5]),
        },
        probes,
        heuristics: QueryHeuristics {
            cosine_falloff: flags & 1 != 0,
            falloff_exponent,
            weight_clamp,
            rt_visibility: flags & 2 != 0,
        },
    })
}
