//! Input encodings: fixed sinusoidal bands and the trainable multi-level
//! hash grid.

use glam::Vec3;

/// Appends `[sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^(B-1) pi p),
/// cos(2^(B-1) pi p)]` per scalar.
pub fn freq_encode(values: &[f32], bands: u32, out: &mut Vec<f32>) {
    for &p in values {
        let mut freq = std::f32::consts::PI;
        for _ in 0..bands {
            let (s, c) = (freq * p).sin_cos();
            out.push(s);
            out.push(c);
            freq *= 2.0;
        }
    }
}

/// Multi-level grid configuration. Levels whose dense corner count
/// `(N+1)^3` fits in the table are stored densely; finer levels share a
/// `table_size`-entry hash table and collide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HashGridConfig {
    pub levels: u32,
    pub feature_dim: u32,
    pub table_size_log2: u32,
    pub base_resolution: u32,
    pub growth_factor: f32,
}

impl Default for HashGridConfig {
    fn default() -> Self {
        HashGridConfig {
            levels: 8,
            feature_dim: 4,
            table_size_log2: 17,
            base_resolution: 16,
            growth_factor: std::f32::consts::SQRT_2,
        }
    }
}

/// Placement of one level inside the flat parameter table.
#[derive(Debug, Clone, Copy)]
pub struct LevelLayout {
    /// Voxels per side; the lattice has `resolution + 1` corners per side.
    pub resolution: u32,
    /// First entry of this level (entry = `feature_dim` scalars).
    pub entry_offset: usize,
    pub entry_count: usize,
    pub hashed: bool,
}

impl HashGridConfig {
    pub fn table_size(&self) -> usize {
        1usize << self.table_size_log2
    }

    /// Per-level resolutions `floor(N0 * b^l)` and their table placement.
    pub fn layouts(&self) -> Vec<LevelLayout> {
        let mut out = Vec::with_capacity(self.levels as usize);
        let mut offset = 0usize;
        for level in 0..self.levels {
            // The relative nudge recovers the mathematical floor(N0 * b^l)
            // where the f32-rounded growth factor lands a hair under an
            // integer (sqrt(2)^2 and friends).
            let resolution = (self.base_resolution as f64
                * (self.growth_factor as f64).powi(level as i32)
                * (1.0 + 1e-6))
                .floor() as u32;
            let dense = (resolution as usize + 1).pow(3);
            let hashed = dense > self.table_size();
            let entry_count = if hashed { self.table_size() } else { dense };
            out.push(LevelLayout {
                resolution,
                entry_offset: offset,
                entry_count,
                hashed,
            });
            offset += entry_count;
        }
        out
    }

    pub fn total_entries(&self) -> usize {
        self.layouts().iter().map(|l| l.entry_count).sum()
    }

    pub fn output_dim(&self) -> usize {
        (self.levels * self.feature_dim) as usize
    }
}

/// Spatial hash of a lattice corner (the usual three-prime XOR).
fn corner_hash(x: u32, y: u32, z: u32, mask: usize) -> usize {
    let h = (x as usize)
        ^ (y as usize).wrapping_mul(2_654_435_761)
        ^ (z as usize).wrapping_mul(805_459_861);
    h & mask
}

/// The 8 corner entries and trilinear weights of `p` at one level.
/// `p` is clamped to the unit cube.
pub fn corner_weights(layout: &LevelLayout, table_mask: usize, p: Vec3) -> [(usize, f32); 8] {
    let res = layout.resolution;
    let p = p.clamp(Vec3::ZERO, Vec3::ONE) * res as f32;
    let cell = p.floor().min(Vec3::splat((res - 1) as f32));
    let frac = p - cell;
    let (cx, cy, cz) = (cell.x as u32, cell.y as u32, cell.z as u32);
    let side = res as usize + 1;

    let mut out = [(0usize, 0.0f32); 8];
    for (i, slot) in out.iter_mut().enumerate() {
        let (dx, dy, dz) = ((i & 1) as u32, ((i >> 1) & 1) as u32, ((i >> 2) & 1) as u32);
        let (x, y, z) = (cx + dx, cy + dy, cz + dz);
        let entry = if layout.hashed {
            corner_hash(x, y, z, table_mask)
        } else {
            (z as usize * side + y as usize) * side + x as usize
        };
        let wx = if dx == 1 { frac.x } else { 1.0 - frac.x };
        let wy = if dy == 1 { frac.y } else { 1.0 - frac.y };
        let wz = if dz == 1 { frac.z } else { 1.0 - frac.z };
        *slot = (layout.entry_offset + entry, wx * wy * wz);
    }
    out
}

/// Interpolated features of all levels, coarse to fine, appended to `out`.
pub fn hash_encode(
    cfg: &HashGridConfig,
    layouts: &[LevelLayout],
    table: &[f32],
    p: Vec3,
    out: &mut Vec<f32>,
) {
    let f = cfg.feature_dim as usize;
    let mask = cfg.table_size() - 1;
    for layout in layouts {
        let corners = corner_weights(layout, mask, p);
        let base = out.len();
        out.resize(base + f, 0.0);
        for (entry, w) in corners {
            let feats = &table[entry * f..entry * f + f];
            for (o, x) in out[base..].iter_mut().zip(feats) {
                *o += w * x;
            }
        }
    }
}
