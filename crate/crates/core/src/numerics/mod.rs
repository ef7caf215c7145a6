//! Numerical building blocks: quadrature, ODE integration, splines, root
//! finding, Chebyshev/Bessel machinery, banded solvers and sine transforms.

pub mod banded;
pub mod cheb;
pub mod dst;
pub mod ode;
pub mod quad;
pub mod roots;
pub mod spline;

use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

/// Values that can be integrated and interpolated: `f64` and `Complex64`.
pub trait Scalar:
    Copy + Default + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn modulus(&self) -> f64;
}

impl Scalar for f64 {
    fn modulus(&self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn modulus(&self) -> f64 {
        self.norm()
    }
}

/// Central difference step used for derivatives of configured functions.
pub fn fd_step(r: f64) -> f64 {
    (1e-5f64).max(1e-5 * r.abs())
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fitted exponent `p` of `y ≈ C x^p` on positive samples.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}
