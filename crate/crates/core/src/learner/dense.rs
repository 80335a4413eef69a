//! Three-layer ReLU network `in -> h1 -> h2 -> 1` with exact gradients.
//!
//! Both regression architectures reduce to this map: the derivative MLP
//! applies it to feature rows, and the stencil net (one wide convolution
//! followed by two size-one convolutions) applies it to sliding windows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

/// Parameters stored flat as `A1 | b1 | A2 | b2 | A3 | b3`, matrices
/// row-major with one row per output unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense3 {
    pub sizes: [usize; 4],
    pub theta: Vec<f64>,
}

/// One affine layer in row-major form, as written to model files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Glorot uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl Dense3 {
    pub fn zeros(sizes: [usize; 4]) -> Result<Self> {
        if sizes.contains(&0) || sizes[3] != 1 {
            return input(format!("invalid layer sizes {sizes:?}"));
        }
        let n = Self::offsets(sizes)[6];
        Ok(Dense3 { sizes, theta: vec![0.0; n] })
    }

    /// Glorot-uniform weights and zero biases.
    pub fn glorot(sizes: [usize; 4], rng: &mut impl Rng) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let off = Self::offsets(sizes);
        for l in 0..3 {
            let bound = glorot_bound(sizes[l], sizes[l + 1]);
            for w in &mut net.theta[off[2 * l]..off[2 * l + 1]] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    // start of A1, b1, A2, b2, A3, b3 and the total length
    fn offsets(s: [usize; 4]) -> [usize; 7] {
        let mut o = [0; 7];
        for l in 0..3 {
            o[2 * l + 1] = o[2 * l] + s[l] * s[l + 1];
            o[2 * l + 2] = o[2 * l + 1] + s[l + 1];
        }
        o
    }

    pub fn inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn layers(&self) -> Vec<Layer> {
        let o = Self::offsets(self.sizes);
        (0..3)
            .map(|l| Layer {
                rows: self.sizes[l + 1],
                cols: self.sizes[l],
                weights: self.theta[o[2 * l]..o[2 * l + 1]].to_vec(),
                bias: self.theta[o[2 * l + 1]..o[2 * l + 2]].to_vec(),
            })
            .collect()
    }

    pub fn from_layers(layers: &[Layer]) -> Result<Self> {
        if layers.len() != 3 {
            return input(format!("expected 3 layers, found {}", layers.len()));
        }
        let sizes = [layers[0].cols, layers[0].rows, layers[1].rows, layers[2].rows];
        let mut net = Self::zeros(sizes)?;
        let o = Self::offsets(sizes);
        for (l, layer) in layers.iter().enumerate() {
            if layer.cols != sizes[l] || layer.rows != sizes[l + 1] {
                return input(format!("layer {} does not chain", l + 1));
            }
            if layer.weights.len() != layer.rows * layer.cols || layer.bias.len() != layer.rows {
                return input(format!("layer {} has the wrong number of entries", l + 1));
            }
            net.theta[o[2 * l]..o[2 * l + 1]].copy_from_slice(&layer.weights);
            net.theta[o[2 * l + 1]..o[2 * l + 2]].copy_from_slice(&layer.bias);
        }
        Ok(net)
    }

    /// Output for one input row; `h1`, `h2` receive the hidden activations.
    fn forward_into(&self, x: &[f64], h1: &mut [f64], h2: &mut [f64]) -> f64 {
        let [n0, n1, n2, _] = self.sizes;
        let o = Self::offsets(self.sizes);
        let t = &self.theta;
        for (r, h) in h1.iter_mut().enumerate() {
            let w = &t[o[0] + r * n0..o[0] + (r + 1) * n0];
            let z = t[o[1] + r] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            *h = z.max(0.0);
        }
        for (r, h) in h2.iter_mut().enumerate() {
            let w = &t[o[2] + r * n1..o[2] + (r + 1) * n1];
            let z = t[o[3] + r] + w.iter().zip(h1.iter()).map(|(a, b)| a * b).sum::<f64>();
            *h = z.max(0.0);
        }
        t[o[5]] + t[o[4]..o[4] + n2].iter().zip(h2.iter()).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut h1 = vec![0.0; self.sizes[1]];
        let mut h2 = vec![0.0; self.sizes[2]];
        self.forward_into(x, &mut h1, &mut h2)
    }

    /// Outputs for row-major inputs, one per row.
    pub fn forward_rows(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n0 = self.sizes[0];
        if x.len() % n0 != 0 {
            return input(format!("input length {} is not a multiple of the width {n0}", x.len()));
        }
        let mut h1 = vec![0.0; self.sizes[1]];
        let mut h2 = vec![0.0; self.sizes[2]];
        Ok(x.chunks(n0).map(|row| self.forward_into(row, &mut h1, &mut h2)).collect())
    }

    /// Mean squared error over the rows of `x` and its gradient with respect
    /// to `theta`. ReLU derivative at exactly zero is taken as zero.
    pub fn loss_and_grad(&self, x: &[f64], y: &[f64], grad: &mut [f64]) -> f64 {
        let [n0, n1, n2, _] = self.sizes;
        let o = Self::offsets(self.sizes);
        let t = &self.theta;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let rows = y.len();
        let scale = 2.0 / rows as f64;
        let mut h1 = vec![0.0; n1];
        let mut h2 = vec![0.0; n2];
        let mut d2 = vec![0.0; n2];
        let mut d1 = vec![0.0; n1];
        let mut loss = 0.0;
        for (row, &target) in x.chunks(n0).zip(y) {
            let out = self.forward_into(row, &mut h1, &mut h2);
            let r = out - target;
            loss += r * r;
            let dy = scale * r;
            grad[o[5]] += dy;
            for k in 0..n2 {
                grad[o[4] + k] += dy * h2[k];
                d2[k] = if h2[k] > 0.0 { dy * t[o[4] + k] } else { 0.0 };
            }
            d1.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..n2 {
                let g = d2[k];
                if g == 0.0 {
                    continue;
                }
                grad[o[3] + k] += g;
                let w = &t[o[2] + k * n1..o[2] + (k + 1) * n1];
                let gw = &mut grad[o[2] + k * n1..o[2] + (k + 1) * n1];
                for j in 0..n1 {
                    gw[j] += g * h1[j];
                    d1[j] += g * w[j];
                }
            }
            for j in 0..n1 {
                if h1[j] <= 0.0 || d1[j] == 0.0 {
                    continue;
                }
                let g = d1[j];
                grad[o[1] + j] += g;
                let gw = &mut grad[o[0] + j * n0..o[0] + (j + 1) * n0];
                for (w, xi) in gw.iter_mut().zip(row) {
                    *w += g * xi;
                }
            }
        }
        loss / rows as f64
    }
}

/// Mean squared difference.
pub fn loss_mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return input("loss of an empty batch");
    }
    if pred.len() != target.len() {
        return input(format!("{} predictions for {} targets", pred.len(), target.len()));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn glorot_is_deterministic_with_zero_biases() {
        let a = Dense3::glorot([3, 32, 32, 1], &mut ChaCha20Rng::seed_from_u64(7)).unwrap();
        let b = Dense3::glorot([3, 32, 32, 1], &mut ChaCha20Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        for l in a.layers() {
            assert!(l.bias.iter().all(|&b| b == 0.0));
            let bound = glorot_bound(l.cols, l.rows);
            assert!(l.weights.iter().all(|w| w.abs() <= bound));
        }
        assert!((glorot_bound(3, 32) - 0.41403933560541256).abs() < 1e-12);
    }

    #[test]
    fn hand_evaluated_chain() {
        let layers = [
            Layer { rows: 1, cols: 1, weights: vec![1.0], bias: vec![-1.0] },
            Layer { rows: 1, cols: 1, weights: vec![2.0], bias: vec![0.0] },
            Layer { rows: 1, cols: 1, weights: vec![1.0], bias: vec![0.0] },
        ];
        let net = Dense3::from_layers(&layers).unwrap();
        assert_eq!(net.forward(&[3.0]), 4.0);
        assert_eq!(net.forward(&[0.5]), 0.0);
        assert_eq!(net.layers(), layers);
    }

    #[test]
    fn zero_net_outputs_final_bias() {
        let mut net = Dense3::zeros([4, 8, 8, 1]).unwrap();
        let n = net.len();
        net.theta[n - 1] = 2.5;
        let out = net.forward_rows(&[1.0, -2.0, 3.0, 0.5, 9.0, 9.0, 9.0, 9.0]).unwrap();
        assert_eq!(out, vec![2.5, 2.5]);
        let mut g = vec![0.0; n];
        net.loss_and_grad(&[1.0, 2.0, 3.0, 4.0], &[0.0], &mut g);
        // d/db3 of (b3 - 0)^2 at b3 = 2.5
        assert_eq!(g[n - 1], 5.0);
        assert!(g[..n - 1].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for draw in 0..10 {
            let mut net = Dense3::glorot([3, 5, 4, 1], &mut rng).unwrap();
            for v in &mut net.theta {
                *v += rng.random_range(-0.3..0.3);
            }
            let x: Vec<f64> = (0..3 * 7).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut g = vec![0.0; net.len()];
            net.loss_and_grad(&x, &y, &mut g);
            let loss = |n: &Dense3| loss_mse(&n.forward_rows(&x).unwrap(), &y).unwrap();
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            for k in 0..net.len() {
                let mut p = net.clone();
                p.theta[k] += 1e-6;
                let mut m = net.clone();
                m.theta[k] -= 1e-6;
                let fd = (loss(&p) - loss(&m)) / 2e-6;
                assert!((fd - g[k]).abs() <= 1e-6 * gnorm.max(1e-3), "draw {draw} param {k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn dead_relu_freezes_first_layer() {
        let mut net = Dense3::glorot([2, 4, 4, 1], &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        // large negative first-layer biases
        for b in &mut net.theta[8..12] {
            *b = -100.0;
        }
        let mut g = vec![0.0; net.len()];
        net.loss_and_grad(&[0.3, -0.2, 0.1, 0.4], &[1.0, 2.0], &mut g);
        assert!(g[..12].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mse_arithmetic() {
        assert_eq!(loss_mse(&[0.0, 0.0], &[1.0, 3.0]).unwrap(), 5.0);
        assert_eq!(loss_mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(loss_mse(&[], &[]).is_err());
        let a = loss_mse(&[0.3, -1.0], &[1.2, 0.5]).unwrap();
        let b = loss_mse(&[0.9, -3.0], &[3.6, 1.5]).unwrap();
        assert!((b - 9.0 * a).abs() < 1e-12);
    }
}
