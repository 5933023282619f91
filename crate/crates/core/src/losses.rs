//! Loss terms and the three training objectives.
//!
//! * HSI objective: `½‖Y_h − Ŷ_h‖²_F + λ·H₁(S_h) + μ·Σ‖W‖²_F` over the decoder.
//! * MSI objective: `½‖Y_m − Ŷ_m‖²_F + λ·H₁(S_m)`.
//! * Angle objective: mean spectral angle between the upsampled HSI
//!   representation and the MSI representation, divided by π.
//!
//! The entropy term is averaged over pixels; reconstruction terms are plain
//! Frobenius sums.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1};

use crate::diffcore::{CustomOp, Tape, Value, ACOS_CLAMP};
use crate::error::{Error, Result};

/// Floor inside the entropy logarithm, standing in for `0·log 0 = 0`.
pub const ENTROPY_LOG_FLOOR: f64 = 1e-12;

/// Trade-off weights of the sparsity and decoder weight-decay terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda: f64,
    pub mu: f64,
}

impl LossWeights {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda >= 0.0 && mu >= 0.0) {
            return Err(Error::Config(format!(
                "loss weights must be nonnegative (lambda={lambda}, mu={mu})"
            )));
        }
        Ok(Self { lambda, mu })
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda: 1e-6,
            mu: 1e-6,
        }
    }
}

/// `½‖y − ŷ‖²_F`.
pub fn reconstruction_loss(tape: &mut Tape, y: Value, y_hat: Value) -> Result<Value> {
    let r = tape.sub(y, y_hat)?;
    let sq = tape.square(r);
    let s = tape.sum(sq);
    Ok(tape.scale(s, 0.5))
}

/// Generalized Shannon entropy function of every row, `p ≥ 1`.
pub fn entropy_rows(s: &Array2<f64>, p: f64) -> Array2<f64> {
    let mut out = Array2::zeros((s.nrows(), 1));
    for (i, row) in s.rows().into_iter().enumerate() {
        let norm: f64 = row.iter().map(|x| x.abs().powf(p)).sum();
        if norm <= 0.0 {
            continue;
        }
        out[[i, 0]] = -row
            .iter()
            .map(|x| {
                let q = x.abs().powf(p) / norm;
                q * q.max(ENTROPY_LOG_FLOOR).ln()
            })
            .sum::<f64>();
    }
    out
}

struct EntropyRowsOp {
    p: f64,
}

impl CustomOp for EntropyRowsOp {
    fn name(&self) -> &'static str {
        "entropy_rows"
    }

    fn backward(
        &self,
        inputs: &[&Array2<f64>],
        _output: &Array2<f64>,
        grad: &Array2<f64>,
    ) -> Vec<Array2<f64>> {
        let s = inputs[0];
        let p = self.p;
        let mut gs = Array2::zeros(s.dim());
        let c = s.ncols();
        let mut q = vec![0.0; c];
        let mut dh_dq = vec![0.0; c];
        for i in 0..s.nrows() {
            let row = s.row(i);
            let norm: f64 = row.iter().map(|x| x.abs().powf(p)).sum();
            if norm <= 0.0 {
                continue;
            }
            let mut weighted = 0.0;
            for j in 0..c {
                q[j] = row[j].abs().powf(p) / norm;
                dh_dq[j] = if q[j] > ENTROPY_LOG_FLOOR {
                    -(q[j].ln() + 1.0)
                } else {
                    -ENTROPY_LOG_FLOOR.ln()
                };
                weighted += q[j] * dh_dq[j];
            }
            let g = grad[[i, 0]];
            for j in 0..c {
                let x = row[j];
                // d|x|^p/dx
                let dpow = if x == 0.0 {
                    0.0
                } else {
                    p * x.abs().powf(p - 1.0) * x.signum()
                };
                gs[[i, j]] = g * dpow / norm * (dh_dq[j] - weighted);
            }
        }
        vec![gs]
    }
}

/// Pixel-averaged entropy function `mean_i H_p(s_i)`.
pub fn entropy_sparsity(tape: &mut Tape, s: Value, p: f64) -> Result<Value> {
    if p < 1.0 {
        return Err(Error::Config(format!("entropy order must be >= 1, got {p}")));
    }
    let rows = entropy_rows(tape.data(s), p);
    let h = tape.custom(&[s], rows, Box::new(EntropyRowsOp { p }));
    Ok(tape.mean(h))
}

/// Integer spatial ratio between a low- and a high-resolution grid.
pub fn upsample_factor(lr: (usize, usize), hr: (usize, usize)) -> Result<usize> {
    let (lw, lh) = lr;
    let (hw, hh) = hr;
    if lw == 0 || lh == 0 || hw % lw != 0 || hh % lh != 0 || hw / lw != hh / lh {
        return Err(Error::Config(format!(
            "spatial ratio between {lw}x{lh} and {hw}x{hh} is not a common integer"
        )));
    }
    Ok(hw / lw)
}

/// Copies each low-resolution row onto the `factor × factor` block of
/// high-resolution pixels it covers. Rows are `y * width + x` on both grids.
pub fn duplicate_upsample(
    s: &Array2<f64>,
    lr_width: usize,
    lr_height: usize,
    factor: usize,
) -> Result<Array2<f64>> {
    if factor == 0 {
        return Err(Error::Config("upsampling factor must be positive".into()));
    }
    if s.nrows() != lr_width * lr_height {
        return Err(Error::shape(
            "duplicate_upsample",
            s.dim(),
            (lr_width * lr_height, s.ncols()),
        ));
    }
    let hr_width = lr_width * factor;
    let hr_height = lr_height * factor;
    let mut out = Array2::zeros((hr_width * hr_height, s.ncols()));
    for y in 0..hr_height {
        for x in 0..hr_width {
            let src = (y / factor) * lr_width + x / factor;
            out.row_mut(y * hr_width + x).assign(&s.row(src));
        }
    }
    Ok(out)
}

struct RowCosineOp;

fn row_cos_parts(a: ArrayView1<f64>, b: ArrayView1<f64>) -> (f64, f64, f64) {
    let dot = a.dot(&b);
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    (dot, na, nb)
}

/// Per-row cosine similarity, `p × 1`. Zero rows give cosine 0.
pub fn row_cosine(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.nrows(), 1));
    for i in 0..a.nrows() {
        let (dot, na, nb) = row_cos_parts(a.row(i), b.row(i));
        if na > 0.0 && nb > 0.0 {
            out[[i, 0]] = dot / (na * nb);
        }
    }
    out
}

impl CustomOp for RowCosineOp {
    fn name(&self) -> &'static str {
        "row_cosine"
    }

    fn backward(
        &self,
        inputs: &[&Array2<f64>],
        output: &Array2<f64>,
        grad: &Array2<f64>,
    ) -> Vec<Array2<f64>> {
        let (a, b) = (inputs[0], inputs[1]);
        let mut ga = Array2::zeros(a.dim());
        let mut gb = Array2::zeros(b.dim());
        for i in 0..a.nrows() {
            let (_, na, nb) = row_cos_parts(a.row(i), b.row(i));
            if na == 0.0 || nb == 0.0 {
                continue;
            }
            let cos = output[[i, 0]];
            let g = grad[[i, 0]];
            for j in 0..a.ncols() {
                ga[[i, j]] = g * (b[[i, j]] / (na * nb) - cos * a[[i, j]] / (na * na));
                gb[[i, j]] = g * (a[[i, j]] / (na * nb) - cos * b[[i, j]] / (nb * nb));
            }
        }
        vec![ga, gb]
    }

    fn difference(
        &self,
        plus: &[&Array2<f64>],
        minus: &[&Array2<f64>],
        deltas: &[&Array2<f64>],
    ) -> Option<Array2<f64>> {
        // Δ(u·v) = Δu·v⁺ + u⁻·Δv over the unit vectors of each row
        let unit_gap = |xp: ArrayView1<f64>, xm: ArrayView1<f64>, dx: ArrayView1<f64>| {
            let (np, nm) = (xp.dot(&xp).sqrt(), xm.dot(&xm).sqrt());
            let sq_gap: f64 = dx
                .iter()
                .zip(xp.iter().zip(xm.iter()))
                .map(|(d, (p, m))| d * (p + m))
                .sum();
            let inv_gap = -sq_gap / (np + nm) / (np * nm);
            let du = dx.mapv(|v| v / np) + xm.mapv(|v| v * inv_gap);
            (du, np, nm)
        };
        let mut out = Array2::zeros((plus[0].nrows(), 1));
        for i in 0..plus[0].nrows() {
            let (da, _, nam) = unit_gap(plus[0].row(i), minus[0].row(i), deltas[0].row(i));
            let (db, nbp, _) = unit_gap(plus[1].row(i), minus[1].row(i), deltas[1].row(i));
            if !(nam > 0.0 && nbp > 0.0 && da.iter().chain(db.iter()).all(|v| v.is_finite())) {
                return None;
            }
            out[[i, 0]] = da.dot(&plus[1].row(i)) / nbp + minus[0].row(i).dot(&db) / nam;
        }
        Some(out)
    }
}

/// `(1/π)·mean_i arccos(cos(a_i, b_i))`, cosine clamped away from ±1.
pub fn angle_similarity(tape: &mut Tape, a: Value, b: Value) -> Result<Value> {
    let (ad, bd) = (tape.data(a), tape.data(b));
    if ad.dim() != bd.dim() {
        return Err(Error::shape("angle_similarity", ad.dim(), bd.dim()));
    }
    let cos = row_cosine(ad, bd);
    let cos = tape.custom(&[a, b], cos, Box::new(RowCosineOp));
    let cos = tape.clamp(cos, -ACOS_CLAMP, ACOS_CLAMP);
    let ang = tape.acos(cos)?;
    let mean = tape.mean(ang);
    Ok(tape.scale(mean, 1.0 / PI))
}

/// `Σ ‖W‖²_F` over the given weight matrices.
pub fn weight_decay(tape: &mut Tape, weights: &[Value]) -> Result<Value> {
    let mut total: Option<Value> = None;
    for &w in weights {
        let sq = tape.square(w);
        let s = tape.sum(sq);
        total = Some(match total {
            Some(t) => tape.add(t, s)?,
            None => s,
        });
    }
    Ok(total.unwrap_or_else(|| tape.leaf(Array2::zeros((1, 1)))))
}

/// Scalar handles of one objective and its components.
#[derive(Clone, Copy, Debug)]
pub struct ObjectiveTerms {
    pub total: Value,
    pub reconstruction: Value,
    pub entropy: Value,
    pub decay: Option<Value>,
}

fn weighted_sum(tape: &mut Tape, base: Value, term: Value, weight: f64) -> Result<Value> {
    let scaled = tape.scale(term, weight);
    tape.add(base, scaled)
}

/// HSI network objective: reconstruction, entropy sparsity and decoder decay.
pub fn hsi_objective(
    tape: &mut Tape,
    y: Value,
    y_hat: Value,
    s: Value,
    decoder_weights: &[Value],
    weights: LossWeights,
) -> Result<ObjectiveTerms> {
    let reconstruction = reconstruction_loss(tape, y, y_hat)?;
    let entropy = entropy_sparsity(tape, s, 1.0)?;
    let decay = weight_decay(tape, decoder_weights)?;
    let total = weighted_sum(tape, reconstruction, entropy, weights.lambda)?;
    let total = weighted_sum(tape, total, decay, weights.mu)?;
    Ok(ObjectiveTerms {
        total,
        reconstruction,
        entropy,
        decay: Some(decay),
    })
}

/// MSI network objective: reconstruction and entropy sparsity.
pub fn msi_objective(
    tape: &mut Tape,
    y: Value,
    y_hat: Value,
    s: Value,
    weights: LossWeights,
) -> Result<ObjectiveTerms> {
    let reconstruction = reconstruction_loss(tape, y, y_hat)?;
    let entropy = entropy_sparsity(tape, s, 1.0)?;
    let total = weighted_sum(tape, reconstruction, entropy, weights.lambda)?;
    Ok(ObjectiveTerms {
        total,
        reconstruction,
        entropy,
        decay: None,
    })
}

/// Angle objective between the (constant) upsampled HSI representation and
/// the MSI representation.
pub fn angle_objective(tape: &mut Tape, s_h_upsampled: &Array2<f64>, s_m: Value) -> Result<Value> {
    let target = tape.leaf(s_h_upsampled.clone());
    angle_similarity(tape, target, s_m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn scalar_of(f: impl FnOnce(&mut Tape) -> Result<Value>) -> f64 {
        let mut t = Tape::new();
        let v = f(&mut t).unwrap();
        t.scalar(v)
    }

    #[test]
    fn reconstruction_examples() {
        let y = array![[1.0, 2.0, 3.0], [0.0, 0.5, 1.0]];
        let zero = scalar_of(|t| {
            let a = t.leaf(y.clone());
            let b = t.leaf(y.clone());
            reconstruction_loss(t, a, b)
        });
        assert_eq!(zero, 0.0);
        let three = scalar_of(|t| {
            let a = t.leaf(&y + 1.0);
            let b = t.leaf(y.clone());
            reconstruction_loss(t, a, b)
        });
        assert_eq!(three, 3.0);
        let twelve = scalar_of(|t| {
            let a = t.leaf(&y + 2.0);
            let b = t.leaf(y.clone());
            reconstruction_loss(t, a, b)
        });
        assert_eq!(twelve, 4.0 * three);
        let mut t = Tape::new();
        let a = t.leaf(y.clone());
        let b = t.leaf(Array2::zeros((3, 2)));
        assert!(matches!(
            reconstruction_loss(&mut t, a, b),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn entropy_examples() {
        let h = entropy_rows(
            &array![
                [0.0, 1.0, 0.0, 0.0],
                [0.25, 0.25, 0.25, 0.25],
                [0.5, 0.5, 0.0, 0.0]
            ],
            1.0,
        );
        assert_eq!(h[[0, 0]], 0.0);
        assert!((h[[1, 0]] - 4f64.ln()).abs() < 1e-15);
        assert!((h[[2, 0]] - 2f64.ln()).abs() < 1e-15);
        // scale invariance of the normalized form
        let h2 = entropy_rows(&array![[1.0, 1.0, 0.0, 0.0]], 1.0);
        assert!((h2[[0, 0]] - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn entropy_mean_over_pixels() {
        let v = scalar_of(|t| {
            let s = t.leaf(array![[1.0, 0.0], [0.5, 0.5]]);
            entropy_sparsity(t, s, 1.0)
        });
        assert!((v - 2f64.ln() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn upsample_examples() {
        let one = array![[0.2, 0.8]];
        let up = duplicate_upsample(&one, 1, 1, 2).unwrap();
        assert_eq!(up.nrows(), 4);
        assert!(up.rows().into_iter().all(|r| r == one.row(0)));

        let s = array![[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]];
        assert_eq!(duplicate_upsample(&s, 3, 1, 1).unwrap(), s);

        assert_eq!(upsample_factor((2, 2), (8, 8)).unwrap(), 4);
        assert!(upsample_factor((3, 2), (8, 8)).is_err());
        assert!(upsample_factor((2, 2), (8, 6)).is_err());
    }

    #[test]
    fn upsample_block_layout() {
        // 2x2 grid of distinct rows a b / c d
        let s = array![[1.0], [2.0], [3.0], [4.0]];
        let up = duplicate_upsample(&s, 2, 2, 2).unwrap();
        let expect = [
            1.0, 1.0, 2.0, 2.0, //
            1.0, 1.0, 2.0, 2.0, //
            3.0, 3.0, 4.0, 4.0, //
            3.0, 3.0, 4.0, 4.0,
        ];
        assert_eq!(up.column(0).to_vec(), expect);
    }

    #[test]
    fn angle_examples() {
        let same = array![[0.2, 0.8], [0.6, 0.4]];
        let v = scalar_of(|t| {
            let a = t.leaf(same.clone());
            let b = t.leaf(same.clone());
            angle_similarity(t, a, b)
        });
        assert!(v.abs() < 1e-5, "{v}");

        let v = scalar_of(|t| {
            let a = t.leaf(array![[1.0, 0.0], [1.0, 0.0]]);
            let b = t.leaf(array![[0.0, 1.0], [0.0, 1.0]]);
            angle_similarity(t, a, b)
        });
        assert!((v - 0.5).abs() < 1e-12);

        let r = std::f64::consts::FRAC_1_SQRT_2;
        let v = scalar_of(|t| {
            let a = t.leaf(array![[1.0, 0.0]]);
            let b = t.leaf(array![[r, r]]);
            angle_similarity(t, a, b)
        });
        assert!((v - 0.25).abs() < 1e-12);
    }

    #[test]
    fn weight_decay_examples() {
        let v = scalar_of(|t| {
            let w = t.leaf(Array2::zeros((3, 3)));
            weight_decay(t, &[w])
        });
        assert_eq!(v, 0.0);
        let v = scalar_of(|t| {
            let w = t.leaf(Array2::eye(2));
            weight_decay(t, &[w])
        });
        assert_eq!(v, 2.0);
        let w0 = array![[0.5, -1.0], [2.0, 0.25]];
        let base = scalar_of(|t| {
            let w = t.leaf(w0.clone());
            weight_decay(t, &[w])
        });
        let scaled = scalar_of(|t| {
            let w = t.leaf(&w0 * 3.0);
            weight_decay(t, &[w])
        });
        assert!((scaled - 9.0 * base).abs() < 1e-12);
    }

    #[test]
    fn hsi_objective_degenerate_cases() {
        let y = array![[0.1, 0.2, 0.3]];
        let v = scalar_of(|t| {
            let a = t.leaf(y.clone());
            let b = t.leaf(y.clone());
            let s = t.leaf(array![[0.0, 1.0]]);
            let w = t.leaf(Array2::zeros((2, 3)));
            Ok(hsi_objective(t, a, b, s, &[w], LossWeights::new(0.3, 0.7)?)?.total)
        });
        assert_eq!(v, 0.0);

        let mut t = Tape::new();
        let a = t.leaf(y.clone());
        let b = t.leaf(array![[0.0, 0.4, 0.1]]);
        let s = t.leaf(array![[0.5, 0.5]]);
        let w = t.leaf(Array2::ones((2, 3)));
        let terms = hsi_objective(&mut t, a, b, s, &[w], LossWeights::new(0.0, 0.0).unwrap())
            .unwrap();
        assert_eq!(t.scalar(terms.total), t.scalar(terms.reconstruction));
    }

    #[test]
    fn loss_weights_reject_negative() {
        assert!(LossWeights::new(-1.0, 0.0).is_err());
        assert!(LossWeights::new(0.0, f64::NAN).is_err());
    }
}
