//! Bias-corrected Adam.

use crate::error::{shape_err, Result};
use crate::params::ParamStore;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone)]
pub struct AdamState<S> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first: Vec<Tensor<S>>,
    second: Vec<Tensor<S>>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(store: &ParamStore<S>) -> Self {
        Self::with_betas(store, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(store: &ParamStore<S>, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros = || store.entries().iter().map(|e| Tensor::zeros(e.tensor.shape())).collect();
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn first_moment(&self, index: usize) -> &Tensor<S> {
        &self.first[index]
    }

    /// Applies one update. `grads[i]` belongs to `store.entries()[i]`; `None`
    /// and non-trainable entries are skipped.
    pub fn step(&mut self, store: &mut ParamStore<S>, grads: &[Option<Tensor<S>>], lr: f64) -> Result<()> {
        if grads.len() != store.len() || self.first.len() != store.len() {
            return shape_err(format!(
                "adam: {} grads / {} moments for {} params",
                grads.len(),
                self.first.len(),
                store.len()
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (S::of(self.beta1), S::of(self.beta2));
        let (one_b1, one_b2) = (S::of(1.0 - self.beta1), S::of(1.0 - self.beta2));
        let step_size = S::of(lr / bc1);
        let bc2_sqrt = S::of(bc2.sqrt());
        let eps = S::of(self.eps);
        for (i, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            let entry = &store.entries()[i];
            if !entry.trainable {
                continue;
            }
            if g.shape() != entry.tensor.shape() {
                return shape_err(format!(
                    "adam: grad {:?} for {} {:?}",
                    g.shape(),
                    entry.name,
                    entry.tensor.shape()
                ));
            }
            let m = self.first[i].data_mut();
            let v = self.second[i].data_mut();
            let p = store.get_mut(crate::params::ParamId(i)).data_mut();
            for j in 0..p.len() {
                let gj = g.data()[j];
                m[j] = b1 * m[j] + one_b1 * gj;
                v[j] = b2 * v[j] + one_b2 * gj * gj;
                if lr != 0.0 {
                    p[j] = p[j] - step_size * m[j] / (v[j].sqrt() / bc2_sqrt + eps);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(v: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.add("w", Tensor::scalar(v));
        s
    }

    #[test]
    fn zero_lr_leaves_params() {
        let mut s = store(1.5);
        let mut adam = AdamState::new(&s);
        adam.step(&mut s, &[Some(Tensor::scalar(3.0))], 0.0).unwrap();
        assert_eq!(s.entries()[0].tensor.data(), &[1.5]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = store(0.0);
        let mut adam = AdamState::new(&s);
        adam.step(&mut s, &[Some(Tensor::scalar(1.0))], 0.01).unwrap();
        assert!((s.entries()[0].tensor.data()[0] + 0.01).abs() < 1e-6);
    }

    #[test]
    fn descends_a_quadratic() {
        let mut s = store(0.0);
        let mut adam = AdamState::new(&s);
        for _ in 0..100 {
            let w = s.entries()[0].tensor.data()[0];
            adam.step(&mut s, &[Some(Tensor::scalar(2.0 * (w - 3.0)))], 0.1).unwrap();
        }
        let w = s.entries()[0].tensor.data()[0];
        assert!((w - 3.0).abs() < 0.1, "w = {w}");
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut s = store(0.0);
        let mut adam = AdamState::new(&s);
        assert!(adam.step(&mut s, &[Some(Tensor::zeros(&[2]))], 0.1).is_err());
    }
}
