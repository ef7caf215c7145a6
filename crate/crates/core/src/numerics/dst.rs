//! Type-I discrete sine transform through a complex FFT of the odd extension.

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

#[derive(Clone)]
pub struct Dst1 {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dst1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Dst1({})", self.n)
    }
}

impl Dst1 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fft: planner.plan_fft_forward(2 * n + 2) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `X_k = Σ_j v_j sin(π (j+1)(k+1) / (n+1))`, in place.
    pub fn forward(&self, v: &mut [C64]) {
        let n = self.n;
        let mut buf = vec![C64::new(0.0, 0.0); 2 * n + 2];
        for j in 0..n {
            buf[j + 1] = v[j];
            buf[2 * n + 1 - j] = -v[j];
        }
        self.fft.process(&mut buf);
        let half_i = C64::new(0.0, 0.5);
        for k in 0..n {
            v[k] = half_i * buf[k + 1];
        }
    }

    /// Inverse of [`Dst1::forward`].
    pub fn inverse(&self, v: &mut [C64]) {
        self.forward(v);
        let s = 2.0 / (self.n as f64 + 1.0);
        for x in v.iter_mut() {
            *x *= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_sum_and_inverts() {
        let n = 13;
        let d = Dst1::new(n);
        let v: Vec<C64> = (0..n).map(|j| C64::new((j as f64 * 0.7).cos(), j as f64 * 0.1)).collect();
        let mut w = v.clone();
        d.forward(&mut w);
        for k in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for j in 0..n {
                s += v[j] * (std::f64::consts::PI * ((j + 1) * (k + 1)) as f64 / (n + 1) as f64).sin();
            }
            assert!((s - w[k]).norm() < 1e-12);
        }
        d.inverse(&mut w);
        for (a, b) in w.iter().zip(&v) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
