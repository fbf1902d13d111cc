//! HDR/LDR image output: bit-exact linear PFM plus tone-mapped PNG.

use std::io::Read;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::render::{FrameHDR, RenderError};
use crate::rgb::Rgb;

/// Reinhard `x / (1 + x)` per channel.
pub fn reinhard(v: f32) -> f32 {
    let v = v.max(0.0);
    v / (1.0 + v)
}

/// Linear-to-sRGB transfer function.
pub fn srgb_encode(v: f32) -> f32 {
    let v = v.clamp(0.0, 1.0);
    if v <= 0.003_130_8 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

fn to_srgb_byte(linear: f32) -> u8 {
    (srgb_encode(reinhard(linear)) * 255.0).round().clamp(0.0, 255.0) as u8
}

fn io_err(path: &Path, source: std::io::Error) -> RenderError {
    RenderError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes a little-endian RGB PFM (`PF`, scale -1.0). Rows run bottom-up,
/// as the format prescribes; values are bit-exact.
pub fn write_pfm(frame: &FrameHDR, path: &Path) -> Result<(), RenderError> {
    let mut buf = Vec::with_capacity(64 + frame.pixels.len() * 12);
    buf.extend_from_slice(format!("PF\n{} {}\n-1.0\n", frame.width, frame.height).as_bytes());
    for y in (0..frame.height).rev() {
        for x in 0..frame.width {
            let c = frame.get(x, y);
            buf.write_f32::<LittleEndian>(c.r).unwrap();
            buf.write_f32::<LittleEndian>(c.g).unwrap();
            buf.write_f32::<LittleEndian>(c.b).unwrap();
        }
    }
    std::fs::write(path, buf).map_err(|e| io_err(path, e))
}

pub fn read_pfm(path: &Path) -> Result<FrameHDR, RenderError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let bad = |msg: &str| {
        io_err(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string()),
        )
    };
    let mut fields = Vec::new();
    let mut offset = 0usize;
    while fields.len() < 4 {
        let end = bytes[offset..]
            .iter()
            .position(|b| b.is_ascii_whitespace())
            .ok_or_else(|| bad("truncated header"))?;
        fields.push(
            std::str::from_utf8(&bytes[offset..offset + end])
                .map_err(|_| bad("bad header"))?
                .to_string(),
        );
        offset += end + 1;
    }
    if fields[0] != "PF" {
        return Err(bad("not a color PFM"));
    }
    let width: u32 = fields[1].parse().map_err(|_| bad("bad width"))?;
    let height: u32 = fields[2].parse().map_err(|_| bad("bad height"))?;
    let scale: f32 = fields[3].parse().map_err(|_| bad("bad scale"))?;
    if scale >= 0.0 {
        return Err(bad("big-endian PFM unsupported"));
    }
    let mut frame = FrameHDR::new(width, height);
    let mut r = std::io::Cursor::new(&bytes[offset..]);
    for y in (0..height).rev() {
        for x in 0..width {
            let mut c = [0.0f32; 3];
            for v in &mut c {
                *v = r.read_f32::<LittleEndian>().map_err(|_| bad("truncated pixels"))?;
            }
            frame.set(x, y, Rgb::from_array(c));
        }
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).ok();
    Ok(frame)
}

/// Writes an 8-bit sRGB PNG after Reinhard tone mapping.
pub fn write_png(frame: &FrameHDR, path: &Path) -> Result<(), RenderError> {
    let mut img = image::RgbImage::new(frame.width, frame.height);
    for (x, y, px) in img.enumerate_pixels_mut() {
        let c = frame.get(x, y);
        *px = image::Rgb([to_srgb_byte(c.r), to_srgb_byte(c.g), to_srgb_byte(c.b)]);
    }
    img.save(path).map_err(|e| {
        io_err(
            path,
            std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        )
    })
}

/// The standard output pair: bit-exact PFM plus tone-mapped PNG.
pub fn tonemap_write(frame: &FrameHDR, pfm_path: &Path, png_path: &Path) -> Result<(), RenderError> {
    write_pfm(frame, pfm_path)?;
    write_png(frame, png_path)
}
