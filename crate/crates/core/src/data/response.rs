use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Sensor spectral response, `L × l`, each column summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralResponse(Array2<f64>);

impl SpectralResponse {
    /// Validates nonnegativity and normalizes every column to unit sum.
    pub fn from_matrix(mut m: Array2<f64>) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::Config("empty spectral response".into()));
        }
        if let Some(bad) = m.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!(
                "spectral response entries must be finite and nonnegative, found {bad}"
            )));
        }
        for (j, mut col) in m.columns_mut().into_iter().enumerate() {
            let total = col.sum();
            if total <= 0.0 {
                return Err(Error::Config(format!(
                    "spectral response column {j} has zero sum"
                )));
            }
            col /= total;
        }
        Ok(Self(m))
    }

    /// Three broad Gaussian sensitivities spread over the band range, roughly
    /// the blue/green/red layout of a consumer camera.
    pub fn gaussian_rgb(bands: usize) -> Result<Self> {
        let span = (bands.max(2) - 1) as f64;
        let centers = [0.15, 0.5, 0.8].map(|c| c * span);
        let width = 0.12 * span + 1.0;
        let m = Array2::from_shape_fn((bands, 3), |(b, j)| {
            let d = (b as f64 - centers[j]) / width;
            (-0.5 * d * d).exp()
        });
        Self::from_matrix(m)
    }

    pub fn bands_in(&self) -> usize {
        self.0.nrows()
    }

    pub fn bands_out(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    /// Parses `L` rows of `l` comma-separated values. A first line that does
    /// not parse as numbers is treated as a header.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            match parsed {
                Ok(r) => rows.push(r),
                Err(_) if rows.is_empty() && lineno == 0 => continue,
                Err(e) => {
                    return Err(Error::Config(format!(
                        "response csv line {}: {e}",
                        lineno + 1
                    )))
                }
            }
        }
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Config("response csv rows have unequal lengths".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let m = Array2::from_shape_vec((rows.len(), cols), flat)
            .map_err(|e| Error::Config(e.to_string()))?;
        Self::from_matrix(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.0.rows() {
            let fields: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_columns_normalized() {
        let mut text = String::from("r,g,b\n");
        for i in 0..31 {
            text.push_str(&format!("{},{},{}\n", i as f64, 1.0, (31 - i) as f64 * 0.5));
        }
        let r = SpectralResponse::parse_csv(&text).unwrap();
        assert_eq!(r.matrix().dim(), (31, 3));
        for col in r.matrix().columns() {
            assert!((col.sum() - 1.0).abs() < 1e-12);
        }
        // second column was constant
        assert!((r.matrix()[[7, 1]] - 1.0 / 31.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_and_zero_columns() {
        assert!(SpectralResponse::parse_csv("1,-1\n2,2\n").is_err());
        assert!(SpectralResponse::parse_csv("1,0\n2,0\n").is_err());
        assert!(SpectralResponse::parse_csv("1,2\n3\n").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let r = SpectralResponse::gaussian_rgb(31).unwrap();
        let back = SpectralResponse::parse_csv(&r.to_csv()).unwrap();
        for (a, b) in r.matrix().iter().zip(back.matrix()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
