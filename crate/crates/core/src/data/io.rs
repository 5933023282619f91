//! `HSC1` cube container, named-section checkpoints and PNG band export.
//!
//! Cube layout: `b"HSC1"`, then width, height and bands as little-endian
//! `u32`, then `width * height * bands` little-endian `f32` values ordered
//! `(y, x, band)`.
//!
//! Checkpoint layout: `b"HSCP"`, a little-endian `u32` section count, then
//! per section a `u32` name length, the UTF-8 name, and one `HSC1` block
//! with `width = cols`, `height = rows`, `bands = 1`.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::cube::ImageCube;
use crate::error::{Error, Result};

pub const CUBE_MAGIC: &[u8; 4] = b"HSC1";
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HSCP";

fn encode_block(out: &mut Vec<u8>, dims: (usize, usize, usize), values: impl Iterator<Item = f64>) {
    out.extend_from_slice(CUBE_MAGIC);
    for d in [dims.0, dims.1, dims.2] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

pub fn encode_cube(cube: &ImageCube) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * cube.as_slice().len());
    encode_block(&mut out, cube.dims(), cube.as_slice().iter().copied());
    out
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail(&self, offset: usize, detail: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            detail: detail.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(
                self.bytes.len(),
                format!("truncated while reading {what}: need {n} bytes"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn block(&mut self) -> Result<((usize, usize, usize), Vec<f64>)> {
        let start = self.pos;
        if self.take(4, "magic")? != CUBE_MAGIC {
            return Err(self.fail(start, "bad magic, expected HSC1"));
        }
        let w = self.u32("width")? as usize;
        let h = self.u32("height")? as usize;
        let b = self.u32("bands")? as usize;
        let count = w
            .checked_mul(h)
            .and_then(|v| v.checked_mul(b))
            .ok_or_else(|| self.fail(start + 4, "dimensions overflow"))?;
        let payload_at = self.pos;
        let raw = self.take(
            count
                .checked_mul(4)
                .ok_or_else(|| self.fail(start + 4, "dimensions overflow"))?,
            "payload",
        )?;
        let mut values = Vec::with_capacity(count);
        for (i, c) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            if v.is_nan() {
                return Err(self.fail(payload_at + 4 * i, "NaN entry"));
            }
            values.push(v as f64);
        }
        Ok(((w, h, b), values))
    }
}

/// A decoded cube and how many values were clamped into [0, 1].
#[derive(Clone, Debug)]
pub struct LoadedCube {
    pub cube: ImageCube,
    pub clamped: usize,
}

pub fn decode_cube(path: &Path, bytes: &[u8]) -> Result<LoadedCube> {
    let mut r = Reader {
        path,
        bytes,
        pos: 0,
    };
    let ((w, h, b), values) = r.block()?;
    if r.pos != bytes.len() {
        return Err(r.fail(r.pos, "trailing bytes after payload"));
    }
    let mut cube = ImageCube::new(w, h, b, values).map_err(|e| r.fail(4, e.to_string()))?;
    let clamped = cube.clamp_unit();
    if clamped > 0 {
        log::warn!("{}: clamped {clamped} values into [0, 1]", path.display());
    }
    Ok(LoadedCube { cube, clamped })
}

pub fn load_cube(path: &Path) -> Result<LoadedCube> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cube(path, &bytes)
}

pub fn save_cube(cube: &ImageCube, path: &Path) -> Result<()> {
    write_atomic(path, &encode_cube(cube))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Named matrices written in insertion order.
pub fn encode_checkpoint(sections: &[(String, Array2<f64>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    for (name, m) in sections {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        encode_block(&mut out, (m.ncols(), m.nrows(), 1), m.iter().copied());
    }
    out
}

pub fn decode_checkpoint(path: &Path, bytes: &[u8]) -> Result<Vec<(String, Array2<f64>)>> {
    let mut r = Reader {
        path,
        bytes,
        pos: 0,
    };
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(r.fail(0, "bad magic, expected HSCP"));
    }
    let n = r.u32("section count")?;
    let mut sections = Vec::new();
    for _ in 0..n {
        let at = r.pos;
        let len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| r.fail(at + 4, "section name is not UTF-8"))?
            .to_string();
        let ((cols, rows, bands), values) = r.block()?;
        if bands != 1 {
            return Err(r.fail(at, format!("section {name} has {bands} bands, expected 1")));
        }
        let m = Array2::from_shape_vec((rows, cols), values).expect("sized by header");
        sections.push((name, m));
    }
    if r.pos != bytes.len() {
        return Err(r.fail(r.pos, "trailing bytes after last section"));
    }
    Ok(sections)
}

pub fn save_checkpoint(sections: &[(String, Array2<f64>)], path: &Path) -> Result<()> {
    write_atomic(path, &encode_checkpoint(sections))
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<(String, Array2<f64>)>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(path, &bytes)
}

/// Plain CSV of a matrix, one row per line, no header.
pub fn matrix_to_csv(m: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.10e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Writes one band as an 8-bit grayscale PNG, stretching the band's own
/// min..max linearly onto 0..255.
pub fn export_band_png(cube: &ImageCube, band: usize, path: &Path) -> Result<()> {
    let img = cube.band(band)?;
    let lo = img.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = img.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let pixels: Vec<u8> = img
        .iter()
        .map(|&v| (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    image::save_buffer(
        path,
        &pixels,
        cube.width() as u32,
        cube.height() as u32,
        image::ColorType::L8,
    )
    .map_err(|e| Error::io(path, std::io::Error::other(e)))
}
