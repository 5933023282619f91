use ndarray::{array, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use usdn::diffcore::{relative_error, ParamStore, Tape, Value};

type Unary = fn(&mut Tape, Value) -> Value;

fn assert_close(a: &Array2<f64>, b: &Array2<f64>, eps: f64) {
    assert_eq!(a.dim(), b.dim());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= eps, "{a} vs {b}");
    }
}

/// Central difference of a scalar function, step 1e-6.
fn numeric(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-6;
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn tape_derivative(op: Unary, x: f64) -> (f64, f64) {
    let mut t = Tape::new();
    let v = t.leaf(array![[x]]);
    let y = op(&mut t, v);
    let loss = t.sum(y);
    t.backward(loss).unwrap();
    (t.scalar(y), t.grad(v)[[0, 0]])
}

fn check_primitive(name: &str, op: Unary, lo: f64, hi: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let value = |x: f64| tape_derivative(op, x).0;
    for _ in 0..100 {
        let x = rng.random_range(lo..hi);
        let (_, analytic) = tape_derivative(op, x);
        let num = numeric(value, x);
        let rel = relative_error(analytic, num, 1e-6);
        assert!(rel < 1e-7, "{name} at {x}: analytic {analytic} numeric {num} rel {rel}");
    }
}

#[test]
fn primitive_derivatives_match_central_differences() {
    check_primitive("sigmoid", |t, v| t.sigmoid(v), -3.0, 3.0);
    check_primitive("softplus", |t, v| t.softplus(v), -3.0, 3.0);
    check_primitive("square", |t, v| t.square(v), -3.0, 3.0);
    check_primitive("scale", |t, v| t.scale(v, -2.5), -3.0, 3.0);
    check_primitive("log", |t, v| t.log(v).unwrap(), 0.05, 3.0);
    check_primitive("sqrt", |t, v| t.sqrt(v).unwrap(), 0.05, 3.0);
    check_primitive("acos", |t, v| t.acos(v).unwrap(), -0.95, 0.95);
}

#[test]
fn matmul_and_affine_gradients() {
    let x = array![[1.0, -2.0], [0.5, 3.0], [2.0, 0.0]];
    let w = array![[0.3, -0.1, 0.7], [0.2, 0.4, -0.5]];
    let b = array![[0.1, 0.2, 0.3]];
    let mut t = Tape::new();
    let (xv, wv, bv) = (t.leaf(x.clone()), t.leaf(w.clone()), t.leaf(b.clone()));
    let y = t.affine(xv, wv, Some(bv)).unwrap();
    let sq = t.square(y);
    let loss = t.sum(sq);
    t.backward(loss).unwrap();
    let dy = (x.dot(&w) + &b) * 2.0;
    assert_close(&t.grad(wv), &x.t().dot(&dy), 1e-12);
    assert_close(&t.grad(xv), &dy.dot(&w.t()), 1e-12);
    assert_close(&t.grad(bv), &dy.sum_axis(Axis(0)).insert_axis(Axis(0)), 1e-12);
}

#[test]
fn clamp_passes_no_gradient_outside_range() {
    let mut t = Tape::new();
    let v = t.leaf(array![[-2.0, 0.0, 2.0]]);
    let c = t.clamp(v, -1.0, 1.0);
    let loss = t.sum(c);
    t.backward(loss).unwrap();
    assert_eq!(t.grad(v), array![[0.0, 1.0, 0.0]]);
}

fn run_once(store: &ParamStore) -> (f64, Array2<f64>) {
    let id = store.find("w").unwrap();
    let mut t = Tape::new();
    let x = t.leaf(array![[0.1, 0.2], [0.3, -0.4]]);
    let w = t.param(store, id);
    let h = t.matmul(x, w).unwrap();
    let s = t.sigmoid(h);
    let l = t.mean(s);
    t.backward(l).unwrap();
    (t.scalar(l), t.grad(w))
}

#[test]
fn repeated_evaluation_is_bitwise_deterministic() {
    let mut store = ParamStore::new();
    store.insert("w", array![[0.5, -1.5], [2.0, 0.25]]);
    let a = run_once(&store);
    let b = run_once(&store);
    assert_eq!(a.0.to_bits(), b.0.to_bits());
    assert_eq!(a.1, b.1);
}

#[test]
fn zero_grad_resets_accumulation() {
    let mut store = ParamStore::new();
    let id = store.insert("w", array![[1.0, 2.0]]);
    let mut t = Tape::new();
    let w = t.param(&store, id);
    let sq = t.square(w);
    let loss = t.sum(sq);
    t.backward(loss).unwrap();
    t.accumulate_param_grads(&mut store);
    t.accumulate_param_grads(&mut store);
    assert_eq!(store.grad(id), &array![[4.0, 8.0]]);
    store.zero_grad();
    assert_eq!(store.grad(id), &array![[0.0, 0.0]]);
    t.zero_grad();
    t.backward(loss).unwrap();
    assert_eq!(t.grad(w), array![[2.0, 4.0]]);
}
