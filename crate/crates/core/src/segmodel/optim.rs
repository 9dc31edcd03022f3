use serde::{Deserialize, Serialize};

use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam state with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n: usize, config: AdamConfig) -> Self {
        Adam { config, m: vec![T::zero(); n], v: vec![T::zero(); n], step: 0 }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let (b1, b2) = (T::lit(beta1), T::lit(beta2));
        let c1 = T::lit(1.0 - beta1.powi(self.step.min(i32::MAX as u64) as i32));
        let c2 = T::lit(1.0 - beta2.powi(self.step.min(i32::MAX as u64) as i32));
        let (lr, eps) = (T::lit(lr), T::lit(eps));
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
