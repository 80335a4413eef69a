//! Adam optimizer with bias-corrected moments.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        AdamState { config, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    /// One step on `theta` along `grad`.
    pub fn update(&mut self, theta: &mut [f64], grad: &[f64]) {
        assert_eq!(theta.len(), self.m.len(), "parameter count changed");
        assert_eq!(grad.len(), self.m.len(), "gradient length differs from parameters");
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for k in 0..theta.len() {
            let g = grad[k];
            self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * g;
            self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * g * g;
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            theta[k] -= learning_rate * mh / (vh.sqrt() + epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut s = AdamState::new(AdamConfig::default(), 3);
        let mut th = vec![1.0, -2.0, 0.5];
        s.update(&mut th, &[0.0; 3]);
        assert_eq!(th, vec![1.0, -2.0, 0.5]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_by_hand() {
        let mut s = AdamState::new(AdamConfig::default(), 1);
        let mut th = vec![0.0];
        s.update(&mut th, &[1.0]);
        assert!((th[0] + 1e-3 / (1.0 + 1e-8)).abs() < 1e-18);
    }

    #[test]
    fn first_step_is_scale_free() {
        for c in [1e-3, 1.0, 1e4] {
            let mut s = AdamState::new(AdamConfig::default(), 2);
            let mut th = vec![0.0, 0.0];
            s.update(&mut th, &[c, -c]);
            let step = 1e-3 * c / (c + 1e-8);
            assert!((th[0] + step).abs() < 1e-15 && (th[1] - step).abs() < 1e-15);
        }
    }
}
