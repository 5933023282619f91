//! RMSE and spectral angle mapper between an estimate and a reference cube.

use std::fmt;

use ndarray::ArrayView1;

use crate::data::{spectral_angle, ImageCube};
use crate::error::{Error, Result};

fn check_dims(op: &'static str, a: &ImageCube, b: &ImageCube) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Config(format!(
            "{op}: cube dimensions differ, {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// `(rmse_unit, rmse_8bit)` over all voxels.
pub fn rmse(estimate: &ImageCube, reference: &ImageCube) -> Result<(f64, f64)> {
    check_dims("rmse", estimate, reference)?;
    let sq: f64 = estimate
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let unit = (sq / estimate.as_slice().len() as f64).sqrt();
    Ok((unit, 255.0 * unit))
}

/// Mean spectral angle in degrees, and the number of pixels skipped because
/// either spectrum was all zero.
pub fn sam(estimate: &ImageCube, reference: &ImageCube) -> Result<(f64, usize)> {
    check_dims("sam", estimate, reference)?;
    let mut total = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for y in 0..estimate.height() {
        for x in 0..estimate.width() {
            let a = ArrayView1::from(estimate.spectrum(x, y));
            let b = ArrayView1::from(reference.spectrum(x, y));
            match spectral_angle(a, b) {
                Some(ang) => {
                    total += ang;
                    used += 1;
                }
                None => skipped += 1,
            }
        }
    }
    let mean = if used == 0 { 0.0 } else { total / used as f64 };
    Ok((mean.to_degrees(), skipped))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub rmse_8bit: f64,
    pub rmse_unit: f64,
    pub sam_degrees: f64,
    pub pixels: usize,
    pub bands: usize,
    pub excluded_pixels: usize,
}

impl EvalReport {
    pub fn compute(estimate: &ImageCube, reference: &ImageCube) -> Result<Self> {
        let (rmse_unit, rmse_8bit) = rmse(estimate, reference)?;
        let (sam_degrees, excluded_pixels) = sam(estimate, reference)?;
        Ok(Self {
            rmse_8bit,
            rmse_unit,
            sam_degrees,
            pixels: reference.pixels(),
            bands: reference.bands(),
            excluded_pixels,
        })
    }

    pub const CSV_HEADER: &'static str =
        "rmse_8bit,rmse_unit,sam_degrees,pixels,bands,excluded_pixels";

    pub fn to_csv(&self) -> String {
        format!(
            "{}\n{:.10},{:.10},{:.10},{},{},{}\n",
            Self::CSV_HEADER,
            self.rmse_8bit,
            self.rmse_unit,
            self.sam_degrees,
            self.pixels,
            self.bands,
            self.excluded_pixels
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "RMSE {:.4} (8-bit) / {:.6} (unit), SAM {:.4} deg over {} pixels x {} bands",
            self.rmse_8bit, self.rmse_unit, self.sam_degrees, self.pixels, self.bands
        )?;
        if self.excluded_pixels > 0 {
            write!(f, " ({} zero pixels excluded)", self.excluded_pixels)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(vals: Vec<f64>, bands: usize) -> ImageCube {
        let px = vals.len() / bands;
        ImageCube::new(px, 1, bands, vals).unwrap()
    }

    #[test]
    fn rmse_examples() {
        let a = cube(vec![0.2, 0.4, 0.6, 0.8], 2);
        assert_eq!(rmse(&a, &a).unwrap(), (0.0, 0.0));
        let b = cube(vec![0.3, 0.5, 0.7, 0.9], 2);
        let (u, e) = rmse(&b, &a).unwrap();
        assert!((u - 0.1).abs() < 1e-12);
        assert!((e - 25.5).abs() < 1e-9);
        assert_eq!(rmse(&a, &b).unwrap(), rmse(&b, &a).unwrap());
        assert!(rmse(&a, &cube(vec![0.0; 4], 1)).is_err());
    }

    #[test]
    fn sam_examples() {
        let a = cube(vec![0.2, 0.4, 0.1, 0.3], 2);
        assert_eq!(sam(&a, &a).unwrap().0, 0.0);
        let twice = cube(a.as_slice().iter().map(|v| v * 2.0).collect(), 2);
        assert!(sam(&twice, &a).unwrap().0.abs() < 1e-12);
        let x = cube(vec![1.0, 0.0, 0.0, 1.0], 2);
        let y = cube(vec![0.0, 1.0, 1.0, 0.0], 2);
        assert!((sam(&x, &y).unwrap().0 - 90.0).abs() < 1e-12);
    }

    #[test]
    fn zero_pixels_are_excluded() {
        let a = cube(vec![0.0, 0.0, 0.3, 0.4], 2);
        let b = cube(vec![0.1, 0.1, 0.3, 0.4], 2);
        let (deg, skipped) = sam(&a, &b).unwrap();
        assert_eq!(skipped, 1);
        assert!(deg.abs() < 1e-12);
    }

    #[test]
    fn report_csv() {
        let a = cube(vec![0.2, 0.4], 2);
        let r = EvalReport::compute(&a, &a).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with(EvalReport::CSV_HEADER));
        assert_eq!(r.rmse_8bit, 255.0 * r.rmse_unit);
    }
}
