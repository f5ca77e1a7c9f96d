use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 5e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam state for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        Self { config, m: vec![T::zero(); len], v: vec![T::zero(); len], t: 0 }
    }

    /// One bias-corrected update with learning rate `lr`.
    pub fn step(&mut self, params: &mut [T], grads: &[T], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let AdamConfig { beta1, beta2, eps, .. } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        if lr == 0.0 {
            // Moments still advance so that resumption stays aligned.
            for ((m, v), g) in self.m.iter_mut().zip(&mut self.v).zip(grads) {
                *m = T::lit(beta1) * *m + T::lit(1.0 - beta1) * *g;
                *v = T::lit(beta2) * *v + T::lit(1.0 - beta2) * *g * *g;
            }
            return;
        }
        let (b1, b2, nb1, nb2) = (T::lit(beta1), T::lit(beta2), T::lit(1.0 - beta1), T::lit(1.0 - beta2));
        let step = T::lit(lr / c1);
        let inv_c2 = T::lit(1.0 / c2);
        let e = T::lit(eps);
        for (((p, m), v), g) in params.iter_mut().zip(&mut self.m).zip(&mut self.v).zip(grads) {
            *m = b1 * *m + nb1 * *g;
            *v = b2 * *v + nb2 * *g * *g;
            *p -= step * *m / ((*v * inv_c2).sqrt() + e);
        }
    }
}
