//! Central-difference verification of tape gradients.

use std::fmt;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Value};
use crate::error::Result;

/// Step and tolerance settings for [`finite_diff_check`].
#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Lower bound on the relative-error denominator, so coordinates whose
    /// true derivative is zero are judged on absolute error.
    pub denominator_floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-5,
            denominator_floor: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateMismatch {
    pub param: String,
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub label: String,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub failures: Vec<CoordinateMismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: {} coordinates, max rel. error {:.3e} (tol {:.1e}) {}",
            self.label,
            self.coordinates,
            self.max_rel_error,
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )?;
        for m in &self.failures {
            writeln!(
                f,
                "  {}[{},{}]: analytic {:.12e} numeric {:.12e} rel {:.3e}",
                m.param, m.row, m.col, m.analytic, m.numeric, m.rel_error
            )?;
        }
        Ok(())
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / denom
}

/// Compares backward-pass gradients of `f` against central differences over
/// every coordinate of `subset` (all parameters when `None`).
///
/// `f` records a scalar objective on a fresh tape from the current parameter
/// values. The numerator `f(θ+h) − f(θ−h)` is taken with
/// [`Tape::difference`] on the two recorded tapes, which keeps digits that
/// subtracting two large objective values would lose. The store's gradient
/// slots are overwritten with the analytic gradient.
pub fn finite_diff_check<F>(
    label: &str,
    f: F,
    params: &mut ParamStore,
    subset: Option<&[ParamId]>,
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Value>,
{
    assert!(opts.step > 0.0, "finite-difference step must be positive");
    let ids: Vec<ParamId> = match subset {
        Some(s) => s.to_vec(),
        None => params.ids().collect(),
    };

    params.zero_grad();
    let mut tape = Tape::new();
    let loss = f(&mut tape, params)?;
    tape.backward(loss)?;
    tape.accumulate_param_grads(params);

    let record = |p: &ParamStore| -> Result<(Tape, Value)> {
        let mut t = Tape::new();
        let l = f(&mut t, p)?;
        Ok((t, l))
    };

    let mut report = GradCheckReport {
        label: label.to_string(),
        coordinates: 0,
        max_rel_error: 0.0,
        tolerance: opts.tolerance,
        failures: Vec::new(),
    };
    for id in ids {
        let (rows, cols) = params.value(id).dim();
        for r in 0..rows {
            for c in 0..cols {
                let orig = params.value(id)[[r, c]];
                params.value_mut(id)[[r, c]] = orig + opts.step;
                let up = params.value(id)[[r, c]];
                let (plus, loss) = record(params)?;
                params.value_mut(id)[[r, c]] = orig - opts.step;
                let down = params.value(id)[[r, c]];
                let (minus, _) = record(params)?;
                params.value_mut(id)[[r, c]] = orig;

                // divide by the step actually taken after rounding
                let numeric = plus.difference(&minus, loss)?[[0, 0]] / (up - down);
                let analytic = params.grad(id)[[r, c]];
                let rel = relative_error(analytic, numeric, opts.denominator_floor);
                report.coordinates += 1;
                report.max_rel_error = report.max_rel_error.max(rel);
                if !(rel < opts.tolerance) {
                    report.failures.push(CoordinateMismatch {
                        param: params.name(id).to_string(),
                        row: r,
                        col: c,
                        analytic,
                        numeric,
                        rel_error: rel,
                    });
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn quadratic_form_is_exact() {
        let mut store = ParamStore::new();
        let x = store.insert("x", array![[0.3, -1.2, 2.0]]);
        let a = array![[2.0, 0.5, 0.0], [0.5, 1.0, -0.3], [0.0, -0.3, 3.0]];
        let report = finite_diff_check(
            "quadratic",
            |t, p| {
                let xv = t.param(p, x);
                let av = t.leaf(a.clone());
                let ax = t.matmul(xv, av)?;
                let prod = t.mul(ax, xv)?;
                Ok(t.sum(prod))
            },
            &mut store,
            None,
            GradCheckOptions {
                tolerance: 1e-9,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(report.passed(), "{report}");
        assert!(report.max_rel_error < 1e-9);
    }

    #[test]
    fn constant_function_has_zero_gradients() {
        let mut store = ParamStore::new();
        let w = store.insert("w", Array2::from_elem((2, 2), 0.7));
        let report = finite_diff_check(
            "constant",
            |t, _p| Ok(t.leaf(Array2::from_elem((1, 1), 4.0))),
            &mut store,
            None,
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.passed());
        assert_eq!(report.max_rel_error, 0.0);
        assert!(store.grad(w).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn wrong_gradient_is_reported() {
        struct Wrong;
        impl crate::diffcore::CustomOp for Wrong {
            fn name(&self) -> &'static str {
                "wrong"
            }
            fn backward(
                &self,
                inputs: &[&Array2<f64>],
                _out: &Array2<f64>,
                g: &Array2<f64>,
            ) -> Vec<Array2<f64>> {
                // true derivative of x^2 is 2x; report 3x
                vec![g * inputs[0] * 3.0]
            }
        }
        let mut store = ParamStore::new();
        let w = store.insert("w", array![[1.0, 2.0]]);
        let report = finite_diff_check(
            "wrong",
            |t, p| {
                let x = t.param(p, w);
                let out = t.data(x).mapv(|v| v * v);
                let y = t.custom(&[x], out, Box::new(Wrong));
                Ok(t.sum(y))
            },
            &mut store,
            None,
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(!report.passed());
        assert_eq!(report.failures.len(), 2);
        assert!((report.max_rel_error - 1.0 / 3.0).abs() < 1e-6);
    }
}
