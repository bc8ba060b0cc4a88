//! Depth map files.
//!
//! Two formats are supported:
//!
//! * 16-bit single-channel PNG in the KITTI devkit convention: `depth = raw / 256`
//!   meters, raw `0` is an invalid pixel.
//! * A lossless float format: the 4-byte magic `PDFM`, then width and height as
//!   little-endian `u32`, then `width × height` little-endian `f32` values in
//!   row-major order. Nothing may follow the last value.

use std::fs;
use std::path::Path;

use image::{ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::grid::{is_valid, ConfidenceMap, DepthMap, Grid};

pub const FLOAT_MAP_MAGIC: [u8; 4] = *b"PDFM";
const HEADER_LEN: usize = 12;

/// Meters per raw PNG unit is `1 / DEPTH_PNG_SCALE`.
pub const DEPTH_PNG_SCALE: f64 = 256.0;

#[inline]
pub fn raw_to_depth(raw: u16) -> f64 {
    raw as f64 / DEPTH_PNG_SCALE
}

/// Nearest raw value; invalid depths map to 0, valid depths never do.
#[inline]
pub fn depth_to_raw(depth: f64) -> u16 {
    if !is_valid(depth) {
        return 0;
    }
    (depth * DEPTH_PNG_SCALE)
        .round()
        .clamp(1.0, u16::MAX as f64) as u16
}

pub fn write_depth_png(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    let path = path.as_ref();
    let raw: Vec<u16> = depth.as_slice().iter().map(|&d| depth_to_raw(d)).collect();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(depth.width() as u32, depth.height() as u32, raw)
            .expect("buffer sized from the map");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

pub fn read_depth_png(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let img = match img {
        image::DynamicImage::ImageLuma16(buf) => buf,
        other => {
            return Err(Error::Format {
                offset: 0,
                message: format!(
                    "{}: expected a 16-bit grayscale PNG, found {:?}",
                    path.display(),
                    other.color()
                ),
            })
        }
    };
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(raw_to_depth).collect();
    DepthMap::from_vec(w as usize, h as usize, data)
}

/// Saves a confidence map as an 8-bit grayscale PNG (`255 ↔ 1.0`).
pub fn write_confidence_png(path: impl AsRef<Path>, conf: &ConfidenceMap) -> Result<()> {
    let path = path.as_ref();
    let raw: Vec<u8> = conf
        .as_slice()
        .iter()
        .map(|&m| (m.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(conf.width() as u32, conf.height() as u32, raw)
            .expect("buffer sized from the map");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

pub fn encode_float_map(map: &Grid<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * map.len());
    out.extend_from_slice(&FLOAT_MAP_MAGIC);
    out.extend_from_slice(&(map.width() as u32).to_le_bytes());
    out.extend_from_slice(&(map.height() as u32).to_le_bytes());
    for &x in map.as_slice() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    out
}

pub fn decode_float_map(bytes: &[u8]) -> Result<Grid<f64>> {
    let format = |offset: usize, message: String| Error::Format {
        offset: offset as u64,
        message,
    };
    if bytes.len() < HEADER_LEN {
        return Err(format(
            bytes.len(),
            format!("truncated header: {} of {HEADER_LEN} bytes", bytes.len()),
        ));
    }
    if bytes[..4] != FLOAT_MAP_MAGIC {
        return Err(format(0, format!("bad magic {:?}", &bytes[..4])));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (w, h) = (word(4), word(8));
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| format(4, format!("dimensions {w}x{h} overflow")))?;
    if bytes.len() < expected {
        return Err(format(
            bytes.len(),
            format!(
                "truncated data: {w}x{h} map needs {expected} bytes, file has {}",
                bytes.len()
            ),
        ));
    }
    if bytes.len() > expected {
        return Err(format(
            expected,
            format!(
                "{} trailing bytes after {w}x{h} map",
                bytes.len() - expected
            ),
        ));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Grid::from_vec(w, h, data)
}

pub fn write_float_map(path: impl AsRef<Path>, map: &Grid<f64>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_float_map(map)).map_err(|e| Error::io(path, e))
}

pub fn read_float_map(path: impl AsRef<Path>) -> Result<Grid<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_float_map(&bytes)
}
