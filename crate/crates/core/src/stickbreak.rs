//! Stick-breaking representation layer.
//!
//! A sigmoid head produces break fractions `u`, a softplus head produces one
//! concentration `beta` per pixel, the Kumaraswamy inverse CDF with
//! `alpha = 1` maps them to `v`, and the stick-breaking recurrence turns the
//! `c - 1` breaks into a `c`-wide row on the probability simplex. The last
//! component takes the remaining stick so every row sums to one.

use ndarray::{Array2, Axis};

use crate::diffcore::{CustomOp, ParamId, ParamStore, Tape, Value};
use crate::error::{Error, Result};

/// Floor on `1 - u` before raising it to `1 / beta`.
pub const ONE_MINUS_U_FLOOR: f64 = 1e-12;

/// `v = 1 - (1 - u)^(1/beta)`, with `beta` a column broadcast across `u`.
pub fn kumaraswamy_inverse(u: &Array2<f64>, beta: &Array2<f64>) -> Result<Array2<f64>> {
    check_beta_shape(u, beta)?;
    let mut v = u.clone();
    for (mut row, b) in v.rows_mut().into_iter().zip(beta.column(0)) {
        let inv = 1.0 / b;
        row.mapv_inplace(|x| 1.0 - (1.0 - x).max(ONE_MINUS_U_FLOOR).powf(inv));
    }
    Ok(v)
}

fn check_beta_shape(u: &Array2<f64>, beta: &Array2<f64>) -> Result<()> {
    if beta.ncols() != 1 || beta.nrows() != u.nrows() {
        return Err(Error::shape("kumaraswamy_inverse", u.dim(), beta.dim()));
    }
    Ok(())
}

/// Maps `p × (c-1)` break fractions to a `p × c` simplex matrix.
pub fn stick_break(v: &Array2<f64>) -> Array2<f64> {
    let (p, k) = v.dim();
    let mut s = Array2::zeros((p, k + 1));
    for (vr, mut sr) in v.rows().into_iter().zip(s.rows_mut()) {
        let mut rest = 1.0;
        for j in 0..k {
            sr[j] = vr[j] * rest;
            rest *= 1.0 - vr[j];
        }
        sr[k] = rest;
    }
    s
}

struct KumaraswamyOp;

impl CustomOp for KumaraswamyOp {
    fn name(&self) -> &'static str {
        "kumaraswamy_inverse"
    }

    fn backward(
        &self,
        inputs: &[&Array2<f64>],
        _output: &Array2<f64>,
        grad: &Array2<f64>,
    ) -> Vec<Array2<f64>> {
        let (u, beta) = (inputs[0], inputs[1]);
        let mut gu = Array2::zeros(u.dim());
        let mut gb = Array2::zeros(beta.dim());
        for i in 0..u.nrows() {
            let b = beta[[i, 0]];
            let mut acc = 0.0;
            for j in 0..u.ncols() {
                let raw = 1.0 - u[[i, j]];
                let a = raw.max(ONE_MINUS_U_FLOOR);
                let t = a.powf(1.0 / b);
                let g = grad[[i, j]];
                if raw > ONE_MINUS_U_FLOOR {
                    gu[[i, j]] = g * t / (b * a);
                }
                acc += g * t * a.ln() / (b * b);
            }
            gb[[i, 0]] = acc;
        }
        vec![gu, gb]
    }
}

struct StickBreakOp;

impl CustomOp for StickBreakOp {
    fn name(&self) -> &'static str {
        "stick_break"
    }

    fn backward(
        &self,
        inputs: &[&Array2<f64>],
        _output: &Array2<f64>,
        grad: &Array2<f64>,
    ) -> Vec<Array2<f64>> {
        let v = inputs[0];
        let (p, k) = v.dim();
        let mut gv = Array2::zeros((p, k));
        let mut rest = vec![0.0; k + 1];
        for i in 0..p {
            // rest[j] = prod_{o<j} (1 - v_o)
            rest[0] = 1.0;
            for j in 0..k {
                rest[j + 1] = rest[j] * (1.0 - v[[i, j]]);
            }
            // reverse sweep of the recurrence, no divisions
            let mut g_rest = grad[[i, k]];
            for j in (0..k).rev() {
                let gs = grad[[i, j]];
                gv[[i, j]] = gs * rest[j] - g_rest * rest[j];
                g_rest = gs * v[[i, j]] + g_rest * (1.0 - v[[i, j]]);
            }
        }
        vec![gv]
    }
}

/// Records [`kumaraswamy_inverse`] on the tape.
pub fn kumaraswamy_inverse_op(tape: &mut Tape, u: Value, beta: Value) -> Result<Value> {
    let out = kumaraswamy_inverse(tape.data(u), tape.data(beta))?;
    Ok(tape.custom(&[u, beta], out, Box::new(KumaraswamyOp)))
}

/// Records [`stick_break`] on the tape.
pub fn stick_break_op(tape: &mut Tape, v: Value) -> Value {
    let out = stick_break(tape.data(v));
    tape.custom(&[v], out, Box::new(StickBreakOp))
}

/// Parameters of the `u` and `beta` heads.
#[derive(Clone, Debug)]
pub struct HeadParams {
    pub u_weight: ParamId,
    pub u_bias: ParamId,
    pub beta_weight: ParamId,
    pub beta_bias: ParamId,
}

/// Tape handles produced by [`representation_head`].
#[derive(Clone, Copy, Debug)]
pub struct StickParams {
    /// `p × (c-1)` break fractions in (0, 1).
    pub u: Value,
    /// `p × 1`, strictly positive.
    pub beta: Value,
    pub v: Value,
    /// `p × c` representation.
    pub s: Value,
}

/// `u = sigmoid(h Wu + bu)`, `beta = softplus(h Wb + bb)`, then
/// Kumaraswamy inverse and stick breaking.
pub fn representation_head(
    tape: &mut Tape,
    store: &ParamStore,
    head: &HeadParams,
    hidden: Value,
) -> Result<StickParams> {
    let wu = tape.param(store, head.u_weight);
    let bu = tape.param(store, head.u_bias);
    let pre_u = tape.affine(hidden, wu, Some(bu))?;
    let u = tape.sigmoid(pre_u);

    let wb = tape.param(store, head.beta_weight);
    let bb = tape.param(store, head.beta_bias);
    let pre_b = tape.affine(hidden, wb, Some(bb))?;
    let beta = tape.softplus(pre_b);

    let v = kumaraswamy_inverse_op(tape, u, beta)?;
    let s = stick_break_op(tape, v);
    Ok(StickParams { u, beta, v, s })
}

/// Worst-case deviation of a candidate representation from the simplex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimplexStats {
    pub max_row_sum_deviation: f64,
    pub min_entry: f64,
    pub max_entry: f64,
    pub mean_row_sum: f64,
}

impl SimplexStats {
    pub fn of(s: &Array2<f64>) -> Self {
        let sums = s.sum_axis(Axis(1));
        Self {
            max_row_sum_deviation: sums.iter().fold(0.0, |m, &x| f64::max(m, (x - 1.0).abs())),
            min_entry: s.iter().copied().fold(f64::INFINITY, f64::min),
            max_entry: s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_row_sum: sums.mean().unwrap_or(f64::NAN),
        }
    }

    pub fn is_simplex(&self, tol: f64) -> bool {
        self.max_row_sum_deviation <= tol && self.min_entry >= 0.0 && self.max_entry <= 1.0 + tol
    }
}

/// Rows that are nonnegative and sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation(Array2<f64>);

impl Representation {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn new(s: Array2<f64>) -> Result<Self> {
        let stats = SimplexStats::of(&s);
        if !stats.is_simplex(Self::TOLERANCE) {
            return Err(Error::Contract(format!(
                "representation off the simplex: {stats:?}"
            )));
        }
        Ok(Self(s))
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn pixels(&self) -> usize {
        self.0.nrows()
    }

    pub fn width(&self) -> usize {
        self.0.ncols()
    }
}
