use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Dense reflectance raster stored `(y, x, band)` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageCube {
    width: usize,
    height: usize,
    bands: usize,
    data: Vec<f64>,
}

impl ImageCube {
    pub fn new(width: usize, height: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || bands == 0 {
            return Err(Error::Config(format!(
                "cube dimensions must be positive, got {width}x{height}x{bands}"
            )));
        }
        if data.len() != width * height * bands {
            return Err(Error::Contract(format!(
                "cube {width}x{height}x{bands} needs {} values, got {}",
                width * height * bands,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bands,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, bands: usize) -> Result<Self> {
        Self::new(width, height, bands, vec![0.0; width * height * bands])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.bands)
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, band: usize) -> f64 {
        self.data[(y * self.width + x) * self.bands + band]
    }

    pub fn set(&mut self, x: usize, y: usize, band: usize, value: f64) {
        self.data[(y * self.width + x) * self.bands + band] = value;
    }

    pub fn spectrum(&self, x: usize, y: usize) -> &[f64] {
        let start = (y * self.width + x) * self.bands;
        &self.data[start..start + self.bands]
    }

    /// Clamps every value into [0, 1], returning how many were changed.
    pub fn clamp_unit(&mut self) -> usize {
        let mut changed = 0;
        for v in &mut self.data {
            let c = v.clamp(0.0, 1.0);
            if c != *v {
                changed += 1;
                *v = c;
            }
        }
        changed
    }

    /// One band as a `height × width` image.
    pub fn band(&self, band: usize) -> Result<Array2<f64>> {
        if band >= self.bands {
            return Err(Error::Config(format!(
                "band {band} out of range for a {}-band cube",
                self.bands
            )));
        }
        Ok(Array2::from_shape_fn((self.height, self.width), |(y, x)| {
            self.get(x, y, band)
        }))
    }
}

/// Pixels × bands matrix, row index `y * width + x`.
pub fn unfold(cube: &ImageCube) -> Array2<f64> {
    Array2::from_shape_vec((cube.pixels(), cube.bands), cube.data.clone())
        .expect("cube storage matches its dimensions")
}

pub fn fold(matrix: &Array2<f64>, width: usize, height: usize) -> Result<ImageCube> {
    if matrix.nrows() != width * height {
        return Err(Error::shape(
            "fold",
            matrix.dim(),
            (width * height, matrix.ncols()),
        ));
    }
    let data = matrix.iter().copied().collect();
    ImageCube::new(width, height, matrix.ncols(), data)
}

/// Mean over disjoint `factor × factor` blocks, per band.
pub fn block_downsample(cube: &ImageCube, factor: usize) -> Result<ImageCube> {
    if factor == 0 || !cube.width.is_multiple_of(factor) || !cube.height.is_multiple_of(factor) {
        return Err(Error::Config(format!(
            "block size {factor} does not divide {}x{}",
            cube.width, cube.height
        )));
    }
    let (w, h, b) = (cube.width / factor, cube.height / factor, cube.bands);
    let mut out = vec![0.0; w * h * b];
    let norm = 1.0 / (factor * factor) as f64;
    for y in 0..h {
        for x in 0..w {
            let dst = &mut out[(y * w + x) * b..(y * w + x + 1) * b];
            for yy in y * factor..(y + 1) * factor {
                for xx in x * factor..(x + 1) * factor {
                    for (d, s) in dst.iter_mut().zip(cube.spectrum(xx, yy)) {
                        *d += s;
                    }
                }
            }
            dst.iter_mut().for_each(|d| *d *= norm);
        }
    }
    ImageCube::new(w, h, b, out)
}

/// Right-multiplies every pixel spectrum by an `L × l` response.
pub fn apply_spectral_response(cube: &ImageCube, response: &Array2<f64>) -> Result<ImageCube> {
    if response.nrows() != cube.bands {
        return Err(Error::shape(
            "apply_spectral_response",
            (cube.pixels(), cube.bands),
            response.dim(),
        ));
    }
    let out = unfold(cube).dot(response);
    fold(&out, cube.width, cube.height)
}

/// Angle between two spectra in radians, `None` if either is all zero.
///
/// Uses `2·atan2(‖â − b̂‖, ‖â + b̂‖)` on the unit vectors, which stays
/// accurate near 0 where `acos` of the cosine loses half the digits.
pub(crate) fn spectral_angle(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Option<f64> {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    Some(2.0 * diff.sqrt().atan2(sum.sqrt()))
}
