//! `NIVM` model files.
//!
//! The header carries the complete architecture (encoding, widths, bounds,
//! seeds), so loading needs no sidecar config. The parameter blob follows
//! in flat order — hash table level-major, then layer-major row-major
//! weights and biases — at f32 or quantized f16 precision.

use std::io::Read;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use glam::Vec3;
use half::f16;

use super::encoding::HashGridConfig;
use super::{
    param_layout, FieldError, ModelConfig, NeuralFieldModel, OutputActivation, PositionEncoding,
    TargetQuantity,
};
use crate::scene::Aabb;

const MAGIC: &[u8; 4] = b"NIVM";
const VERSION: u32 = 1;

/// Storage precision of the parameter blob.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F16,
}

impl Precision {
    pub fn bytes_per_param(self) -> usize {
        match self {
            Precision::F32 => 4,
            Precision::F16 => 2,
        }
    }

    pub fn parse(s: &str) -> Option<Precision> {
        match s {
            "f32" => Some(Precision::F32),
            "f16" => Some(Precision::F16),
            _ => None,
        }
    }
}

pub fn save_model(
    model: &NeuralFieldModel,
    precision: Precision,
    path: &Path,
) -> Result<(), FieldError> {
    let mut buf = Vec::with_capacity(128 + model.memory_bytes(precision));
    buf.extend_from_slice(MAGIC);
    let w = &mut buf;
    w.write_u32::<LittleEndian>(VERSION).unwrap();
    for v in [
        model.bbox.min.x,
        model.bbox.min.y,
        model.bbox.min.z,
        model.bbox.max.x,
        model.bbox.max.y,
        model.bbox.max.z,
    ] {
        w.write_f32::<LittleEndian>(v).unwrap();
    }
    w.write_u32::<LittleEndian>(match model.config.target_quantity {
        TargetQuantity::Irradiance => 0,
        TargetQuantity::IncidentRadiance => 1,
    })
    .unwrap();
    match model.config.position_encoding {
        PositionEncoding::Frequency { bands } => {
            w.write_u32::<LittleEndian>(0).unwrap();
            w.write_u32::<LittleEndian>(bands).unwrap();
        }
        PositionEncoding::HashGrid(cfg) => {
            w.write_u32::<LittleEndian>(1).unwrap();
            w.write_u32::<LittleEndian>(cfg.levels).unwrap();
            w.write_u32::<LittleEndian>(cfg.feature_dim).unwrap();
            w.write_u32::<LittleEndian>(cfg.table_size_log2).unwrap();
            w.write_u32::<LittleEndian>(cfg.base_resolution).unwrap();
            w.write_f32::<LittleEndian>(cfg.growth_factor).unwrap();
        }
    }
    w.write_u32::<LittleEndian>(model.config.direction_freq_bands)
        .unwrap();
    w.write_u32::<LittleEndian>(model.config.param_count).unwrap();
    w.write_u32::<LittleEndian>(model.config.param_freq_bands)
        .unwrap();
    w.write_u32::<LittleEndian>(model.config.hidden_width).unwrap();
    w.write_u32::<LittleEndian>(match model.config.output_activation {
        OutputActivation::Softplus => 0,
        OutputActivation::Identity => 1,
    })
    .unwrap();
    w.write_u64::<LittleEndian>(model.data_seed).unwrap();
    w.write_u64::<LittleEndian>(model.train_seed).unwrap();
    w.write_u32::<LittleEndian>(match precision {
        Precision::F32 => 0,
        Precision::F16 => 1,
    })
    .unwrap();
    w.write_u64::<LittleEndian>(model.params.len() as u64).unwrap();
    match precision {
        Precision::F32 => {
            for &p in &model.params {
                w.write_f32::<LittleEndian>(p).unwrap();
            }
        }
        Precision::F16 => {
            for &p in &model.params {
                w.write_u16::<LittleEndian>(f16::from_f32(p).to_bits()).unwrap();
            }
        }
    }
    std::fs::write(path, buf).map_err(|source| FieldError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a model; f16 blobs are widened back to f32 for inference.
pub fn load_model(path: &Path) -> Result<(NeuralFieldModel, Precision), FieldError> {
    let bytes = std::fs::read(path).map_err(|source| FieldError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut r = std::io::Cursor::new(bytes);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| FieldError::Truncated)?;
    if &magic != MAGIC {
        return Err(FieldError::BadMagic);
    }
    let tr = |_| FieldError::Truncated;
    let version = r.read_u32::<LittleEndian>().map_err(tr)?;
    if version != VERSION {
        return Err(FieldError::BadVersion(version));
    }
    let mut b = [0.0f32; 6];
    for v in &mut b {
        *v = r.read_f32::<LittleEndian>().map_err(tr)?;
    }
    let bbox = Aabb {
        min: Vec3::new(b[0], b[1], b[2]),
        max: Vec3::new(b[3], b[4], b[5]),
    };
    let target_quantity = match r.read_u32::<LittleEndian>().map_err(tr)? {
        0 => TargetQuantity::Irradiance,
        _ => TargetQuantity::IncidentRadiance,
    };
    let position_encoding = match r.read_u32::<LittleEndian>().map_err(tr)? {
        0 => PositionEncoding::Frequency {
            bands: r.read_u32::<LittleEndian>().map_err(tr)?,
        },
        _ => PositionEncoding::HashGrid(HashGridConfig {
            levels: r.read_u32::<LittleEndian>().map_err(tr)?,
            feature_dim: r.read_u32::<LittleEndian>().map_err(tr)?,
            table_size_log2: r.read_u32::<LittleEndian>().map_err(tr)?,
            base_resolution: r.read_u32::<LittleEndian>().map_err(tr)?,
            growth_factor: r.read_f32::<LittleEndian>().map_err(tr)?,
        }),
    };
    let direction_freq_bands = r.read_u32::<LittleEndian>().map_err(tr)?;
    let param_count = r.read_u32::<LittleEndian>().map_err(tr)?;
    let param_freq_bands = r.read_u32::<LittleEndian>().map_err(tr)?;
    let hidden_width = r.read_u32::<LittleEndian>().map_err(tr)?;
    let output_activation = match r.read_u32::<LittleEndian>().map_err(tr)? {
        0 => OutputActivation::Softplus,
        _ => OutputActivation::Identity,
    };
    let data_seed = r.read_u64::<LittleEndian>().map_err(tr)?;
    let train_seed = r.read_u64::<LittleEndian>().map_err(tr)?;
    let precision = match r.read_u32::<LittleEndian>().map_err(tr)? {
        0 => Precision::F32,
        _ => Precision::F16,
    };
    let count = r.read_u64::<LittleEndian>().map_err(tr)? as usize;

    let config = ModelConfig {
        position_encoding,
        direction_freq_bands,
        param_count,
        param_freq_bands,
        hidden_width,
        output_activation,
        target_quantity,
    };
    let layout = param_layout(&config);
    if layout.total != count {
        return Err(FieldError::Config(format!(
            "parameter count {count} does not match architecture ({} expected)",
            layout.total
        )));
    }
    let mut params = vec![0.0f32; count];
    match precision {
        Precision::F32 => {
            for p in &mut params {
                *p = r.read_f32::<LittleEndian>().map_err(tr)?;
            }
        }
        Precision::F16 => {
            for p in &mut params {
                *p = f16::from_bits(r.read_u16::<LittleEndian>().map_err(tr)?).to_f32();
            }
        }
    }

    let levels = match config.position_encoding {
        PositionEncoding::HashGrid(cfg) => cfg.layouts(),
        PositionEncoding::Frequency { .. } => vec![],
    };
    Ok((
        NeuralFieldModel {
            config,
            bbox,
            layout,
            levels,
            params,
            data_seed,
            train_seed,
        },
        precision,
    ))
}
