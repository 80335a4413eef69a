//! Finite-difference weights on arbitrary nodes.

/// Fornberg's recursion: weights `w[m][j]` such that the `m`-th derivative at
/// `z` is approximately `sum_j w[m][j] f(x[j])`, for `m = 0..=max_order`.
pub fn fd_weights(z: f64, x: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centred_three_point() {
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w[0], vec![0.0, 1.0, 0.0]);
        assert!((w[1][0] + 0.5).abs() < 1e-15 && (w[1][2] - 0.5).abs() < 1e-15);
        assert!((w[2][0] - 1.0).abs() < 1e-15 && (w[2][1] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn one_sided_second_derivative() {
        let w = fd_weights(0.0, &[0.0, 1.0, 2.0, 3.0], 2);
        let expect = [2.0, -5.0, 4.0, -1.0];
        for (a, b) in w[2].iter().zip(expect) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn interpolation_at_uneven_nodes() {
        let x = [0.0, 0.5, 1.5];
        let w = fd_weights(-1.0, &x, 0);
        let f = |t: f64| 3.0 - t + 2.0 * t * t;
        let v: f64 = w[0].iter().zip(&x).map(|(w, x)| w * f(*x)).sum();
        assert!((v - f(-1.0)).abs() < 1e-13);
    }
}
