//! Seeded synthetic scenes that follow the linear mixing model exactly.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use super::cube::{apply_spectral_response, block_downsample, fold, ImageCube};
use super::response::SpectralResponse;
use crate::error::{Error, Result};

/// Scene generator settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    /// Number of endmembers mixed into the scene.
    pub c_true: usize,
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    /// Spatial downsampling ratio of the low-resolution cube.
    pub ratio: usize,
    pub msi_bands: usize,
    /// Maximum active endmembers per pixel.
    pub sparsity: usize,
    /// Spatial correlation length in pixels, used as the box-blur radius.
    pub smoothness: usize,
    /// Symmetric Dirichlet concentration of the per-pixel draws.
    pub concentration: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            c_true: 5,
            width: 64,
            height: 64,
            bands: 31,
            ratio: 8,
            msi_bands: 3,
            sparsity: 3,
            smoothness: 3,
            concentration: 0.3,
            seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.c_true == 0 || self.c_true > self.bands {
            return fail(format!("c_true={} must be in 1..={}", self.c_true, self.bands));
        }
        if self.width == 0 || self.height == 0 || self.bands == 0 || self.msi_bands == 0 {
            return fail("dimensions must be positive".into());
        }
        if self.ratio == 0 || !self.width.is_multiple_of(self.ratio) || !self.height.is_multiple_of(self.ratio) {
            return fail(format!(
                "ratio {} must divide {}x{}",
                self.ratio, self.width, self.height
            ));
        }
        if self.sparsity == 0 || self.sparsity > self.c_true {
            return fail(format!(
                "sparsity={} must be in 1..={}",
                self.sparsity, self.c_true
            ));
        }
        if !(self.concentration > 0.0) {
            return fail("concentration must be positive".into());
        }
        if self.msi_bands != 3 {
            return fail("the built-in response generates 3 multispectral bands".into());
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = || Error::Config(format!("{key}: cannot parse {value:?}"));
        let int = || value.parse::<usize>().map_err(|_| bad());
        match key {
            "c_true" => self.c_true = int()?,
            "width" => self.width = int()?,
            "height" => self.height = int()?,
            "bands" => self.bands = int()?,
            "ratio" => self.ratio = int()?,
            "msi_bands" => self.msi_bands = int()?,
            "sparsity" => self.sparsity = int()?,
            "smoothness" => self.smoothness = int()?,
            "concentration" => self.concentration = value.parse().map_err(|_| bad())?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            other => return Err(Error::Config(format!("unknown synth key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        format!(
            "c_true = {}\nwidth = {}\nheight = {}\nbands = {}\nratio = {}\nmsi_bands = {}\n\
             sparsity = {}\nsmoothness = {}\nconcentration = {}\nseed = {}\n",
            self.c_true,
            self.width,
            self.height,
            self.bands,
            self.ratio,
            self.msi_bands,
            self.sparsity,
            self.smoothness,
            self.concentration,
            self.seed
        )
    }
}

/// Generated scene together with its ground-truth factors.
#[derive(Clone, Debug)]
pub struct SynthScene {
    pub hr_hsi: ImageCube,
    pub lr_hsi: ImageCube,
    pub hr_msi: ImageCube,
    /// `c_true × L`, rows peak at 1.
    pub phi_true: Array2<f64>,
    /// `(width·height) × c_true`, rows on the simplex.
    pub s_true: Array2<f64>,
    pub response: SpectralResponse,
}

fn endmember_spectra(rng: &mut ChaCha8Rng, c: usize, bands: usize) -> Array2<f64> {
    let mut phi = Array2::zeros((c, bands));
    let span = (bands.max(2) - 1) as f64;
    for mut row in phi.rows_mut() {
        let bumps = rng.random_range(1..=3);
        let baseline = rng.random_range(0.0..0.1);
        row.fill(baseline);
        for _ in 0..bumps {
            let center = rng.random_range(0.0..=span);
            let width = rng.random_range(0.06..0.25) * span + 0.5;
            let amp = rng.random_range(0.3..1.0);
            for (b, v) in row.iter_mut().enumerate() {
                let d = (b as f64 - center) / width;
                *v += amp * (-0.5 * d * d).exp();
            }
        }
        let peak = row.iter().copied().fold(0.0, f64::max);
        row /= peak;
    }
    phi
}

fn sparse_dirichlet(rng: &mut ChaCha8Rng, gamma: &Gamma<f64>, c: usize, k: usize) -> Vec<f64> {
    let mut row = vec![0.0; c];
    let support = sample(rng, c, k);
    let mut total = 0.0;
    for j in support.iter() {
        let g = gamma.sample(rng);
        row[j] = g;
        total += g;
    }
    if total > 0.0 {
        row.iter_mut().for_each(|v| *v /= total);
    } else {
        for j in support.iter() {
            row[j] = 1.0 / k as f64;
        }
    }
    row
}

/// One sparse Dirichlet draw per pixel.
fn pixel_abundances(rng: &mut ChaCha8Rng, gamma: &Gamma<f64>, spec: &SynthSpec) -> Array2<f64> {
    let mut s = Array2::zeros((spec.width * spec.height, spec.c_true));
    for mut row in s.rows_mut() {
        let draw = sparse_dirichlet(rng, gamma, spec.c_true, spec.sparsity);
        row.iter_mut().zip(&draw).for_each(|(d, &v)| *d = v);
    }
    s
}

fn box_blur(s: &Array2<f64>, width: usize, height: usize, radius: usize) -> Array2<f64> {
    if radius == 0 {
        return s.clone();
    }
    let mut out = Array2::zeros(s.dim());
    for y in 0..height {
        let y0 = y.saturating_sub(radius);
        let y1 = (y + radius).min(height - 1);
        for x in 0..width {
            let x0 = x.saturating_sub(radius);
            let x1 = (x + radius).min(width - 1);
            let mut acc = out.row_mut(y * width + x);
            for yy in y0..=y1 {
                for xx in x0..=x1 {
                    acc += &s.row(yy * width + xx);
                }
            }
            let n = ((y1 - y0 + 1) * (x1 - x0 + 1)) as f64;
            acc /= n;
        }
    }
    out
}

/// Keeps the `k` largest entries of each row and rescales them to sum to one.
fn keep_top_k(s: &mut Array2<f64>, k: usize) {
    let mut order: Vec<usize> = Vec::with_capacity(s.ncols());
    for mut row in s.rows_mut() {
        order.clear();
        order.extend(0..row.len());
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        for &j in &order[k..] {
            row[j] = 0.0;
        }
        let total = row.sum();
        row /= total;
    }
}

/// Builds a scene: smooth endmember spectra, sparse spatially-smoothed
/// abundances, and both degraded observations.
pub fn synth_generate(spec: &SynthSpec) -> Result<SynthScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let phi_true = endmember_spectra(&mut rng, spec.c_true, spec.bands);

    let gamma = Gamma::new(spec.concentration, 1.0)
        .map_err(|e| Error::Config(format!("concentration: {e}")))?;
    let raw = pixel_abundances(&mut rng, &gamma, spec);
    let mut s_true = box_blur(&raw, spec.width, spec.height, spec.smoothness);
    keep_top_k(&mut s_true, spec.sparsity);

    let hr_hsi = fold(&s_true.dot(&phi_true), spec.width, spec.height)?;
    let response = SpectralResponse::gaussian_rgb(spec.bands)?;
    let lr_hsi = block_downsample(&hr_hsi, spec.ratio)?;
    let hr_msi = apply_spectral_response(&hr_hsi, response.matrix())?;
    Ok(SynthScene {
        hr_hsi,
        lr_hsi,
        hr_msi,
        phi_true,
        s_true,
        response,
    })
}
