//! Reverse-mode tape over dense row-major matrices.
//!
//! Every operation appends one node holding its forward value and the
//! handles of its parents, so parents always precede children and a single
//! reverse sweep visits each node once. Gradients accumulate across
//! `backward` calls until [`Tape::zero_grad`] is called.

use ndarray::{Array2, Axis, Zip};

use super::params::{ParamId, ParamStore};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Value(usize);

impl Value {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Backward rule for an operation defined outside this module.
///
/// `inputs` are the forward values of the parents in the order they were
/// passed to [`Tape::custom`]; the returned vector must hold one cotangent
/// per input with the input's shape.
pub trait CustomOp {
    fn name(&self) -> &'static str;
    fn backward(
        &self,
        inputs: &[&Array2<f64>],
        output: &Array2<f64>,
        grad: &Array2<f64>,
    ) -> Vec<Array2<f64>>;

    /// Output difference between two evaluations given both sets of inputs
    /// and the input differences. `None` falls back to subtracting outputs.
    fn difference(
        &self,
        _plus: &[&Array2<f64>],
        _minus: &[&Array2<f64>],
        _deltas: &[&Array2<f64>],
    ) -> Option<Array2<f64>> {
        None
    }
}

enum Op {
    Leaf,
    Param(ParamId),
    Affine {
        x: Value,
        w: Value,
        b: Option<Value>,
    },
    MatMul(Value, Value),
    Add(Value, Value),
    Sub(Value, Value),
    Mul(Value, Value),
    Scale(Value, f64),
    Log(Value),
    Acos(Value),
    Square(Value),
    Sqrt(Value),
    Sigmoid(Value),
    Softplus(Value),
    Clamp {
        x: Value,
        lo: f64,
        hi: f64,
    },
    Sum(Value),
    Mean(Value),
    Custom {
        inputs: Vec<Value>,
        op: Box<dyn CustomOp>,
    },
}

struct Node {
    data: Array2<f64>,
    op: Op,
}

/// Recorded computation with per-node gradient slots.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Array2<f64>>>,
}

fn shape(a: &Array2<f64>) -> (usize, usize) {
    a.dim()
}

/// Neumaier summation. Scalar objectives are sums of many similar terms,
/// and plain accumulation loses digits that finite differences need.
pub fn compensated_sum(a: &Array2<f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for &x in a.iter() {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

fn scalar(v: f64) -> Array2<f64> {
    Array2::from_elem((1, 1), v)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, data: Array2<f64>, op: Op) -> Value {
        self.nodes.push(Node { data, op });
        self.grads.push(None);
        Value(self.nodes.len() - 1)
    }

    /// Forward value of a node.
    pub fn data(&self, v: Value) -> &Array2<f64> {
        &self.nodes[v.0].data
    }

    /// Scalar forward value of a 1×1 node.
    pub fn scalar(&self, v: Value) -> f64 {
        self.nodes[v.0].data[[0, 0]]
    }

    /// Accumulated cotangent of a node; all zeros when nothing reached it.
    pub fn grad(&self, v: Value) -> Array2<f64> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Array2::zeros(self.nodes[v.0].data.dim()),
        }
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            *g = None;
        }
    }

    /// A constant input. It receives a gradient slot but is never a parameter.
    pub fn leaf(&mut self, data: Array2<f64>) -> Value {
        self.push(data, Op::Leaf)
    }

    /// Records the current value of a trainable parameter.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Value {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    pub fn affine(&mut self, x: Value, w: Value, b: Option<Value>) -> Result<Value> {
        let (xd, wd) = (self.data(x), self.data(w));
        if xd.ncols() != wd.nrows() {
            return Err(Error::shape("affine", shape(xd), shape(wd)));
        }
        let mut out = xd.dot(wd);
        if let Some(b) = b {
            let bd = self.data(b);
            if bd.nrows() != 1 || bd.ncols() != out.ncols() {
                return Err(Error::shape("affine bias", shape(&out), shape(bd)));
            }
            out += bd;
        }
        Ok(self.push(out, Op::Affine { x, w, b }))
    }

    pub fn matmul(&mut self, a: Value, b: Value) -> Result<Value> {
        let (ad, bd) = (self.data(a), self.data(b));
        if ad.ncols() != bd.nrows() {
            return Err(Error::shape("matmul", shape(ad), shape(bd)));
        }
        let out = ad.dot(bd);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Value, b: Value) -> Result<()> {
        let (ad, bd) = (self.data(a), self.data(b));
        if ad.dim() != bd.dim() {
            return Err(Error::shape(op, shape(ad), shape(bd)));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Value, b: Value) -> Result<Value> {
        self.same_shape("add", a, b)?;
        let out = self.data(a) + self.data(b);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Value, b: Value) -> Result<Value> {
        self.same_shape("sub", a, b)?;
        let out = self.data(a) - self.data(b);
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Value, b: Value) -> Result<Value> {
        self.same_shape("mul", a, b)?;
        let out = self.data(a) * self.data(b);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Value, k: f64) -> Value {
        let out = self.data(a) * k;
        self.push(out, Op::Scale(a, k))
    }

    pub fn log(&mut self, a: Value) -> Result<Value> {
        let d = self.data(a);
        if let Some(bad) = d.iter().find(|&&x| x <= 0.0 || x.is_nan()) {
            return Err(Error::Domain {
                op: "log",
                detail: format!("nonpositive input {bad}"),
            });
        }
        let out = d.mapv(f64::ln);
        Ok(self.push(out, Op::Log(a)))
    }

    /// Inverse cosine. Callers clamp into [-1, 1] first.
    pub fn acos(&mut self, a: Value) -> Result<Value> {
        let d = self.data(a);
        if let Some(bad) = d.iter().find(|&&x| !(-1.0..=1.0).contains(&x)) {
            return Err(Error::Domain {
                op: "acos",
                detail: format!("input {bad} outside [-1, 1]"),
            });
        }
        let out = d.mapv(f64::acos);
        Ok(self.push(out, Op::Acos(a)))
    }

    pub fn square(&mut self, a: Value) -> Value {
        let out = self.data(a).mapv(|x| x * x);
        self.push(out, Op::Square(a))
    }

    pub fn sqrt(&mut self, a: Value) -> Result<Value> {
        let d = self.data(a);
        if let Some(bad) = d.iter().find(|&&x| x < 0.0 || x.is_nan()) {
            return Err(Error::Domain {
                op: "sqrt",
                detail: format!("negative input {bad}"),
            });
        }
        let out = d.mapv(f64::sqrt);
        Ok(self.push(out, Op::Sqrt(a)))
    }

    pub fn sigmoid(&mut self, a: Value) -> Value {
        let out = self.data(a).mapv(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn softplus(&mut self, a: Value) -> Value {
        let out = self.data(a).mapv(softplus);
        self.push(out, Op::Softplus(a))
    }

    /// Elementwise clamp; the gradient is passed only where the input was
    /// strictly inside the interval.
    pub fn clamp(&mut self, a: Value, lo: f64, hi: f64) -> Value {
        let out = self.data(a).mapv(|x| x.clamp(lo, hi));
        self.push(out, Op::Clamp { x: a, lo, hi })
    }

    pub fn sum(&mut self, a: Value) -> Value {
        let out = scalar(compensated_sum(self.data(a)));
        self.push(out, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Value) -> Value {
        let d = self.data(a);
        let out = scalar(compensated_sum(d) / d.len() as f64);
        self.push(out, Op::Mean(a))
    }

    /// Records an operation whose forward value was computed by the caller.
    pub fn custom(
        &mut self,
        inputs: &[Value],
        output: Array2<f64>,
        op: Box<dyn CustomOp>,
    ) -> Value {
        self.push(
            output,
            Op::Custom {
                inputs: inputs.to_vec(),
                op,
            },
        )
    }

    fn accumulate(&mut self, v: Value, g: Array2<f64>) {
        match &mut self.grads[v.0] {
            Some(acc) => *acc += &g,
            slot @ None => *slot = Some(g),
        }
    }

    /// Propagates d(loss)/d(node) to every node that reaches `loss`,
    /// adding to whatever the slots already hold.
    pub fn backward(&mut self, loss: Value) -> Result<()> {
        let dim = self.data(loss).dim();
        if dim != (1, 1) {
            return Err(Error::Contract(format!(
                "backward requires a 1x1 loss, got {}x{}",
                dim.0, dim.1
            )));
        }
        // Cotangents for this sweep are kept apart from the accumulated slots
        // so repeated calls add exactly one sweep's worth each time.
        let mut sweep: Vec<Option<Array2<f64>>> = vec![None; loss.0 + 1];
        sweep[loss.0] = Some(scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = sweep[idx].take() else { continue };
            for (parent, pg) in self.local_backward(idx, &g) {
                match &mut sweep[parent.0] {
                    Some(acc) => *acc += &pg,
                    slot @ None => *slot = Some(pg),
                }
            }
            self.accumulate(Value(idx), g);
        }
        Ok(())
    }

    fn local_backward(&self, idx: usize, g: &Array2<f64>) -> Vec<(Value, Array2<f64>)> {
        let node = &self.nodes[idx];
        let out = &node.data;
        match &node.op {
            Op::Leaf | Op::Param(_) => Vec::new(),
            Op::Affine { x, w, b } => {
                let (xd, wd) = (self.data(*x), self.data(*w));
                let mut res = vec![(*x, g.dot(&wd.t())), (*w, xd.t().dot(g))];
                if let Some(b) = b {
                    res.push((*b, g.sum_axis(Axis(0)).insert_axis(Axis(0))));
                }
                res
            }
            Op::MatMul(a, b) => {
                let (ad, bd) = (self.data(*a), self.data(*b));
                vec![(*a, g.dot(&bd.t())), (*b, ad.t().dot(g))]
            }
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, -g)],
            Op::Mul(a, b) => {
                let (ad, bd) = (self.data(*a), self.data(*b));
                vec![(*a, g * bd), (*b, g * ad)]
            }
            Op::Scale(a, k) => vec![(*a, g * *k)],
            Op::Log(a) => vec![(*a, g / self.data(*a))],
            Op::Acos(a) => {
                let mut da = g.clone();
                Zip::from(&mut da)
                    .and(self.data(*a))
                    .for_each(|d, &x| *d *= -1.0 / (1.0 - x * x).sqrt());
                vec![(*a, da)]
            }
            Op::Square(a) => vec![(*a, g * self.data(*a) * 2.0)],
            Op::Sqrt(a) => vec![(*a, g / &(out * 2.0))],
            Op::Sigmoid(a) => {
                let mut da = g.clone();
                Zip::from(&mut da)
                    .and(out)
                    .for_each(|d, &s| *d *= s * (1.0 - s));
                vec![(*a, da)]
            }
            Op::Softplus(a) => {
                let mut da = g.clone();
                Zip::from(&mut da)
                    .and(self.data(*a))
                    .for_each(|d, &x| *d *= sigmoid(x));
                vec![(*a, da)]
            }
            Op::Clamp { x, lo, hi } => {
                let mut da = g.clone();
                Zip::from(&mut da).and(self.data(*x)).for_each(|d, &v| {
                    if v <= *lo || v >= *hi {
                        *d = 0.0;
                    }
                });
                vec![(*x, da)]
            }
            Op::Sum(a) => {
                let d = self.data(*a);
                vec![(*a, Array2::from_elem(d.dim(), g[[0, 0]]))]
            }
            Op::Mean(a) => {
                let d = self.data(*a);
                let k = g[[0, 0]] / d.len() as f64;
                vec![(*a, Array2::from_elem(d.dim(), k))]
            }
            Op::Custom { inputs, op } => {
                let vals: Vec<&Array2<f64>> = inputs.iter().map(|&v| self.data(v)).collect();
                let grads = op.backward(&vals, out, g);
                debug_assert_eq!(grads.len(), inputs.len(), "{}", op.name());
                inputs.iter().copied().zip(grads).collect()
            }
        }
    }

    /// `self(v) − other(v)` for two tapes that recorded the same sequence
    /// of operations on nearby inputs.
    ///
    /// The difference is carried through the graph node by node instead of
    /// subtracting the two final values, so a small change in a large
    /// objective keeps its significant digits.
    pub fn difference(&self, other: &Tape, v: Value) -> Result<Array2<f64>> {
        if other.nodes.len() <= v.0 {
            return Err(Error::Contract("difference: tapes differ in length".into()));
        }
        let mut deltas: Vec<Array2<f64>> = Vec::with_capacity(v.0 + 1);
        for idx in 0..=v.0 {
            let (p, m) = (&self.nodes[idx], &other.nodes[idx]);
            if std::mem::discriminant(&p.op) != std::mem::discriminant(&m.op)
                || p.data.dim() != m.data.dim()
            {
                return Err(Error::Contract(format!(
                    "difference: tapes diverge at node {idx}"
                )));
            }
            let d = |x: &Value| &deltas[x.0];
            let plus = |x: &Value| self.data(*x);
            let minus = |x: &Value| other.data(*x);
            let delta = match &p.op {
                Op::Affine { x, w, b } => {
                    let mut out = d(x).dot(plus(w)) + minus(x).dot(d(w));
                    if let Some(b) = b {
                        out += d(b);
                    }
                    out
                }
                Op::MatMul(a, b) => d(a).dot(plus(b)) + minus(a).dot(d(b)),
                Op::Add(a, b) => d(a) + d(b),
                Op::Sub(a, b) => d(a) - d(b),
                Op::Mul(a, b) => d(a) * plus(b) + minus(a) * d(b),
                Op::Scale(a, k) => d(a) * *k,
                Op::Square(a) => d(a) * &(plus(a) + minus(a)),
                Op::Log(a) => {
                    let mut out = d(a).clone();
                    Zip::from(&mut out)
                        .and(minus(a))
                        .for_each(|o, &x| *o = (*o / x).ln_1p());
                    out
                }
                Op::Sqrt(a) => d(a) / &(&p.data + &m.data),
                Op::Sigmoid(a) => {
                    let mut out = d(a).clone();
                    Zip::from(&mut out)
                        .and(&p.data)
                        .and(&m.data)
                        .for_each(|o, &sp, &sm| *o = -sp * (1.0 - sm) * (-*o).exp_m1());
                    out
                }
                Op::Acos(a) => {
                    // sine and cosine of acos(x+) − acos(x−), with x− − x+ kept exact
                    let mut out = d(a).clone();
                    Zip::from(&mut out)
                        .and(plus(a))
                        .and(minus(a))
                        .for_each(|o, &xp, &xm| {
                            let (sp, sm) = ((1.0 - xp * xp).sqrt(), (1.0 - xm * xm).sqrt());
                            let den = xm * sp + xp * sm;
                            let sin = if den.abs() > 0.5 * ((xm * sp).abs() + (xp * sm).abs()) {
                                -*o * (xm + xp) / den
                            } else {
                                xm * sp - xp * sm
                            };
                            *o = sin.atan2(xp * xm + sp * sm);
                        });
                    out
                }
                Op::Clamp { x, lo, hi } => {
                    let mut out = d(x).clone();
                    Zip::from(&mut out)
                        .and(plus(x))
                        .and(minus(x))
                        .and(&p.data)
                        .and(&m.data)
                        .for_each(|o, &xp, &xm, &cp, &cm| {
                            let inside = |v: f64| v > *lo && v < *hi;
                            if !(inside(xp) && inside(xm)) {
                                *o = cp - cm;
                            }
                        });
                    out
                }
                Op::Custom { inputs, op } => {
                    let ip: Vec<_> = inputs.iter().map(plus).collect();
                    let im: Vec<_> = inputs.iter().map(minus).collect();
                    let id: Vec<_> = inputs.iter().map(d).collect();
                    op.difference(&ip, &im, &id)
                        .unwrap_or_else(|| &p.data - &m.data)
                }
                Op::Sum(a) => scalar(compensated_sum(d(a))),
                Op::Mean(a) => scalar(compensated_sum(d(a)) / d(a).len() as f64),
                _ => &p.data - &m.data,
            };
            deltas.push(delta);
        }
        Ok(deltas.pop().expect("at least one node"))
    }

    /// Adds the gradient of every parameter node into the store's slots.
    pub fn accumulate_param_grads(&self, store: &mut ParamStore) {
        for (node, g) in self.nodes.iter().zip(&self.grads) {
            if let (Op::Param(id), Some(g)) = (&node.op, g) {
                store.add_grad(*id, g);
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` in the form `max(x, 0) + ln(1 + e^-|x|)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn affine_identity_and_bias() {
        let mut t = Tape::new();
        let x = t.leaf(array![[1.0, 0.0]]);
        let w = t.leaf(Array2::eye(2));
        let b = t.leaf(array![[0.0, 0.0]]);
        let y = t.affine(x, w, Some(b)).unwrap();
        assert_eq!(t.data(y), &array![[1.0, 0.0]]);

        let x = t.leaf(array![[1.0, 2.0]]);
        let w = t.leaf(array![[1.0, 1.0], [1.0, -1.0]]);
        let b = t.leaf(array![[0.5, 0.5]]);
        let y = t.affine(x, w, Some(b)).unwrap();
        assert_eq!(t.data(y), &array![[3.5, -0.5]]);
    }

    #[test]
    fn affine_zero_weights_grad_is_row_sum_of_x() {
        let mut t = Tape::new();
        let xv = array![[1.0, -2.0], [0.5, 3.0], [2.0, 1.0]];
        let x = t.leaf(xv.clone());
        let w = t.leaf(Array2::zeros((2, 3)));
        let b = t.leaf(Array2::zeros((1, 3)));
        let y = t.affine(x, w, Some(b)).unwrap();
        assert!(t.data(y).iter().all(|&v| v == 0.0));
        let l = t.sum(y);
        t.backward(l).unwrap();
        let gw = t.grad(w);
        let col = xv.sum_axis(Axis(0));
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(gw[[i, j]], col[i]);
            }
        }
        assert_eq!(t.grad(b), Array2::from_elem((1, 3), 3.0));
    }

    #[test]
    fn affine_shape_error_names_both_shapes() {
        let mut t = Tape::new();
        let x = t.leaf(Array2::zeros((2, 3)));
        let w = t.leaf(Array2::zeros((2, 2)));
        let err = t.affine(x, w, None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)") && msg.contains("(2, 2)"), "{msg}");
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        let e = 1.0 - sigmoid(30.0);
        assert!(e > 0.0 && e < 1e-13);
        for x in [-5.0, -0.3, 0.7, 12.0] {
            assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() <= 1e-15);
        }
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!(!sigmoid(-800.0).is_nan());
    }

    #[test]
    fn softplus_values() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((softplus(50.0) - 50.0).abs() < 1e-12);
        assert!(softplus(-50.0) > 0.0);
        for x in [-3.0, -0.1, 0.4, 9.0] {
            assert!((softplus(x) - softplus(-x) - x).abs() < 1e-14);
        }
        assert!(softplus(1000.0).is_finite());
    }

    #[test]
    fn log_and_acos() {
        let mut t = Tape::new();
        let one = t.leaf(scalar(1.0));
        let l = t.log(one).unwrap();
        assert_eq!(t.scalar(l), 0.0);
        let a = t.acos(one).unwrap();
        assert_eq!(t.scalar(a), 0.0);
        let zero = t.leaf(scalar(0.0));
        let a0 = t.acos(zero).unwrap();
        assert!((t.scalar(a0) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(t.log(zero).is_err());
        let out = t.leaf(scalar(1.5));
        assert!(t.acos(out).is_err());
    }

    #[test]
    fn acos_derivative_at_zero() {
        let mut t = Tape::new();
        let x = t.leaf(scalar(0.0));
        let a = t.acos(x).unwrap();
        t.backward(a).unwrap();
        let analytic = t.grad(x)[[0, 0]];
        let h: f64 = 1e-6;
        let fd = (h.acos() - (-h).acos()) / (2.0 * h);
        assert!((analytic - fd).abs() < 1e-9);
        assert!((analytic + 1.0).abs() < 1e-12);
    }

    #[test]
    fn sum_of_weights_has_unit_gradient() {
        let mut t = Tape::new();
        let w = t.leaf(array![[1.0, 2.0], [3.0, 4.0]]);
        let l = t.sum(w);
        t.backward(l).unwrap();
        assert_eq!(t.grad(w), Array2::ones((2, 2)));
    }

    #[test]
    fn least_squares_gradient_matches_formula() {
        let xv = array![[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]];
        let wv = array![[0.2, -0.4], [1.0, 0.3]];
        let yv = array![[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]];
        let mut t = Tape::new();
        let x = t.leaf(xv.clone());
        let w = t.leaf(wv.clone());
        let y = t.leaf(yv.clone());
        let xw = t.matmul(x, w).unwrap();
        let r = t.sub(xw, y).unwrap();
        let sq = t.square(r);
        let s = t.sum(sq);
        let l = t.scale(s, 0.5);
        t.backward(l).unwrap();
        let expect = xv.t().dot(&(xv.dot(&wv) - &yv));
        let got = t.grad(w);
        for (a, b) in got.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_backward_doubles() {
        let mut t = Tape::new();
        let w = t.leaf(array![[1.0, -2.0]]);
        let sq = t.square(w);
        let l = t.sum(sq);
        t.backward(l).unwrap();
        let once = t.grad(w);
        t.backward(l).unwrap();
        assert_eq!(t.grad(w), &once * 2.0);
        t.zero_grad();
        assert_eq!(t.grad(w), Array2::zeros((1, 2)));
        t.backward(l).unwrap();
        assert_eq!(t.grad(w), once);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::new();
        let w = t.leaf(Array2::zeros((2, 2)));
        assert!(matches!(t.backward(w), Err(Error::Contract(_))));
    }

    #[test]
    fn unreachable_nodes_keep_zero_grad() {
        let mut t = Tape::new();
        let a = t.leaf(scalar(2.0));
        let b = t.leaf(scalar(3.0));
        let l = t.square(a);
        t.backward(l).unwrap();
        assert_eq!(t.grad(b)[[0, 0]], 0.0);
        assert_eq!(t.grad(a)[[0, 0]], 4.0);
    }

    fn mixed_graph(t: &mut Tape, w: &Array2<f64>) -> Value {
        let x = t.leaf(array![[0.3, -1.2, 0.7], [1.5, 0.2, -0.4]]);
        let w = t.leaf(w.clone());
        let h = t.affine(x, w, None).unwrap();
        let s = t.sigmoid(h);
        let sp = t.softplus(h);
        let l = t.log(sp).unwrap();
        let r = t.sqrt(sp).unwrap();
        let c = t.clamp(s, 0.1, 0.9);
        let a = t.acos(c).unwrap();
        let m = t.mul(l, r).unwrap();
        let q = t.square(a);
        let sum = t.add(m, q).unwrap();
        let total = t.sum(sum);
        let avg = t.mean(a);
        let total = t.sub(total, avg).unwrap();
        t.scale(total, 0.5)
    }

    #[test]
    fn difference_agrees_with_subtraction_for_large_steps() {
        let w = array![[0.4, -0.3], [0.1, 0.8], [-0.6, 0.2]];
        let mut wp = w.clone();
        wp[[1, 0]] += 0.05;
        let (mut tp, mut tm) = (Tape::new(), Tape::new());
        let lp = mixed_graph(&mut tp, &wp);
        let lm = mixed_graph(&mut tm, &w);
        let direct = tp.scalar(lp) - tm.scalar(lm);
        let carried = tp.difference(&tm, lp).unwrap()[[0, 0]];
        assert!((direct - carried).abs() <= 1e-13 * direct.abs().max(1.0), "{direct} vs {carried}");
    }

    #[test]
    fn difference_resolves_small_changes_of_a_large_quadratic() {
        // the central difference of a quadratic is exact, so the carried
        // difference over 2δ must reproduce the analytic gradient
        let y = Array2::from_shape_fn((6, 4), |(i, j)| 100.0 + (i * 4 + j) as f64);
        let x = Array2::from_shape_fn((6, 3), |(i, j)| ((i + 2 * j) as f64).sin());
        let w = Array2::from_shape_fn((3, 4), |(i, j)| 0.1 * (i as f64) - 0.05 * (j as f64));
        let record = |w: &Array2<f64>| {
            let mut t = Tape::new();
            let (xv, wv, yv) = (t.leaf(x.clone()), t.leaf(w.clone()), t.leaf(y.clone()));
            let p = t.matmul(xv, wv).unwrap();
            let r = t.sub(yv, p).unwrap();
            let sq = t.square(r);
            let l = t.sum(sq);
            (t, l)
        };
        let delta = 1e-7;
        let (mut wp, mut wm) = (w.clone(), w.clone());
        wp[[2, 1]] += delta;
        wm[[2, 1]] -= delta;
        let step = wp[[2, 1]] - wm[[2, 1]];
        let ((tp, l), (tm, _)) = (record(&wp), record(&wm));
        let numeric = tp.difference(&tm, l).unwrap()[[0, 0]] / step;
        let analytic = (-2.0 * x.t().dot(&(&y - &x.dot(&w))))[[2, 1]];
        assert!((numeric - analytic).abs() <= 1e-9 * analytic.abs(), "{numeric} vs {analytic}");
    }

    #[test]
    fn difference_rejects_different_graphs() {
        let mut a = Tape::new();
        let x = a.leaf(array![[1.0]]);
        let la = a.square(x);
        let mut b = Tape::new();
        let y = b.leaf(array![[1.0]]);
        b.sqrt(y).unwrap();
        assert!(matches!(a.difference(&b, la), Err(Error::Contract(_))));
    }
}
