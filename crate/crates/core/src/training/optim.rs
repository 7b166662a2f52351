//! Adaptive-moment optimizer over a subset of a parameter store.

use serde::{Deserialize, Serialize};

use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::{lit, Matrix, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamSettings {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamSettings {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct Adam<T: Scalar> {
    pub settings: AdamSettings,
    /// Number of updates applied so far.
    pub t: u64,
    pub ids: Vec<ParamId>,
    pub m: Vec<Matrix<T>>,
    pub v: Vec<Matrix<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(store: &ParamStore<T>, ids: Vec<ParamId>, settings: AdamSettings) -> Self {
        let m: Vec<Matrix<T>> = ids
            .iter()
            .map(|&id| {
                let (r, c) = store.get(id).shape();
                Matrix::zeros(r, c)
            })
            .collect();
        let v = m.clone();
        Self { settings, t: 0, ids, m, v }
    }

    /// Applies one update from `grads`; parameters without a gradient are left alone.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &Gradients<T>) {
        self.t += 1;
        let s = &self.settings;
        let t = self.t as i32;
        let step = s.lr * (1.0 - s.beta2.powi(t)).sqrt() / (1.0 - s.beta1.powi(t));
        let (b1, b2, eps, step) = (lit::<T>(s.beta1), lit::<T>(s.beta2), lit::<T>(s.eps), lit::<T>(step));
        let one = T::one();
        for (k, &id) in self.ids.iter().enumerate() {
            let Some(g) = grads.get(id) else { continue };
            let p = store.get_mut(id);
            let m = self.m[k].data_mut();
            let v = self.v[k].data_mut();
            for (((pi, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (one - b1) * gi;
                *vi = b2 * *vi + (one - b2) * gi * gi;
                *pi -= step * *mi / (vi.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Matrix::from_rows(&[[1.0, -1.0]]));
        let mut opt = Adam::new(&store, vec![id], AdamSettings::with_lr(0.1));
        let mut grads = Gradients::empty(1);
        grads.accumulate(id, &Matrix::from_rows(&[[2.0, -3.0]]));
        opt.step(&mut store, &grads);
        let w = store.get(id);
        // first bias-corrected step is lr * sign(g) up to eps
        assert!((w.get(0, 0) - 0.9).abs() < 1e-7);
        assert!((w.get(0, 1) + 0.9).abs() < 1e-7);
    }
}
