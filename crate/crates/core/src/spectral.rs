//! Two-dimensional FFT helpers on the periodic square `[0, 2 pi)^2`.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{input, Result};

/// Signed integer wavenumber of FFT bin `k` on an `n`-point periodic grid.
pub fn wavenumber(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Forward and inverse 2D transforms for row-major `ny x nx` fields.
pub struct Spectral2D {
    pub nx: usize,
    pub ny: usize,
    fx: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
}

impl Spectral2D {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Spectral2D {
            nx,
            ny,
            fx: planner.plan_fft_forward(nx),
            fy: planner.plan_fft_forward(ny),
            ix: planner.plan_fft_inverse(nx),
            iy: planner.plan_fft_inverse(ny),
        }
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.nx * self.ny {
            return input(format!("field has {len} values, transform expects {}x{}", self.ny, self.nx));
        }
        Ok(())
    }

    /// Unnormalised forward transform; entry `ky * nx + kx`.
    pub fn forward(&self, u: &[f64]) -> Result<Vec<Complex64>> {
        self.check(u.len())?;
        let mut c: Vec<Complex64> = u.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.transform(&mut c, &self.fx, &self.fy);
        Ok(c)
    }

    /// Normalised inverse transform. Returns the real part and the largest
    /// imaginary residue relative to the largest real magnitude.
    pub fn inverse(&self, mut c: Vec<Complex64>) -> Result<(Vec<f64>, f64)> {
        self.check(c.len())?;
        self.transform(&mut c, &self.ix, &self.iy);
        let scale = 1.0 / (self.nx * self.ny) as f64;
        let re: Vec<f64> = c.iter().map(|z| z.re * scale).collect();
        let max_re = re.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let max_im = c.iter().fold(0.0f64, |m, z| m.max((z.im * scale).abs()));
        Ok((re, max_im / max_re.max(1.0)))
    }

    fn transform(&self, c: &mut [Complex64], fx: &Arc<dyn Fft<f64>>, fy: &Arc<dyn Fft<f64>>) {
        let (nx, ny) = (self.nx, self.ny);
        for row in c.chunks_mut(nx) {
            fx.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); ny];
        for i in 0..nx {
            for j in 0..ny {
                col[j] = c[j * nx + i];
            }
            fy.process(&mut col);
            for j in 0..ny {
                c[j * nx + i] = col[j];
            }
        }
    }
}
