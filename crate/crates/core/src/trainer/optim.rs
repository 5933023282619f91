use ndarray::{Array2, Zip};

use crate::diffcore::{ParamId, ParamStore};
use crate::error::{Error, Result};

/// Adaptive-moment optimizer with bias correction over a fixed parameter
/// subset.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    ids: Vec<ParamId>,
    first: Vec<Array2<f64>>,
    second: Vec<Array2<f64>>,
    steps: u64,
}

impl Adam {
    pub fn new(store: &ParamStore, ids: Vec<ParamId>, learning_rate: f64) -> Self {
        let zeros: Vec<Array2<f64>> = ids
            .iter()
            .map(|&id| Array2::zeros(store.value(id).dim()))
            .collect();
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            ids,
            first: zeros.clone(),
            second: zeros,
            steps: 0,
        }
    }

    pub fn ids(&self) -> &[ParamId] {
        &self.ids
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update from the gradients currently in `store`. Nothing
    /// is modified when any gradient is non-finite.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        for &id in &self.ids {
            if let Some(bad) = store.grad(id).iter().find(|g| !g.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite gradient {bad} in parameter {}",
                    store.name(id)
                )));
            }
        }
        self.steps += 1;
        let t = self.steps as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.epsilon, self.learning_rate);
        for (k, &id) in self.ids.iter().enumerate() {
            let grad = store.grad(id).clone();
            let (m, v) = (&mut self.first[k], &mut self.second[k]);
            Zip::from(store.value_mut(id))
                .and(m)
                .and(v)
                .and(&grad)
                .for_each(|p, m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut store = ParamStore::new();
        let id = store.insert("w", array![[0.3, -1.0]]);
        let mut opt = Adam::new(&store, vec![id], 1e-3);
        opt.step(&mut store).unwrap();
        assert_eq!(store.value(id), &array![[0.3, -1.0]]);
    }

    #[test]
    fn first_step_moves_by_learning_rate_times_sign() {
        let mut store = ParamStore::new();
        let id = store.insert("w", array![[1.0, 1.0, 1.0]]);
        store.add_grad(id, &array![[2.5, -0.01, 40.0]]);
        let mut opt = Adam::new(&store, vec![id], 1e-3);
        opt.step(&mut store).unwrap();
        // m_hat = g, v_hat = g^2 after bias correction
        for (p, s) in store.value(id).iter().zip([-1.0, 1.0, -1.0]) {
            assert!((p - (1.0 + 1e-3 * s)).abs() < 1e-8, "{p}");
        }
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut store = ParamStore::new();
        store.insert("ok", array![[0.0]]);
        let id = store.insert("me.l1.bias", array![[0.0]]);
        store.add_grad(id, &array![[f64::NAN]]);
        let ids: Vec<_> = store.ids().collect();
        let mut opt = Adam::new(&store, ids, 1e-3);
        let err = opt.step(&mut store).unwrap_err();
        assert!(err.to_string().contains("me.l1.bias"), "{err}");
        assert_eq!(store.value(id)[[0, 0]], 0.0);
    }

    #[test]
    fn untouched_parameters_outside_subset() {
        let mut store = ParamStore::new();
        let a = store.insert("a", array![[1.0]]);
        let b = store.insert("b", array![[1.0]]);
        store.add_grad(a, &array![[1.0]]);
        store.add_grad(b, &array![[1.0]]);
        let mut opt = Adam::new(&store, vec![a], 0.1);
        opt.step(&mut store).unwrap();
        assert_eq!(store.value(b)[[0, 0]], 1.0);
        assert!(store.value(a)[[0, 0]] < 1.0);
    }
}
