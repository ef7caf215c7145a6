//! Gauss–Legendre rules and adaptive Gauss–Kronrod (10/21) integration.

use super::Scalar;
use crate::{Error, Result};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208060015826,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// One Kronrod 21-point panel; returns the estimate and |K21 − G10|.
pub fn gk21<T: Scalar, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[10];
    let mut g = T::default();
    for j in 0..10 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k = k + s * WGK[j];
        if j % 2 == 1 {
            g = g + s * WG[j / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    let err = (k - g).modulus();
    (k, err)
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub panels: usize,
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Bisects the panel with the largest error until the summed error is below
/// `max(abs_tol, rel_tol·|I|)`. The error estimate of the 10/21 pair is
/// pessimistic for smooth integrands, so the returned value is usually far
/// more accurate than `error`.
pub fn integrate<T: Scalar, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<QuadResult<T>> {
    if a == b {
        return Ok(QuadResult { value: T::default(), error: 0.0, panels: 0 });
    }
    let (v, e) = gk21(&mut f, a, b);
    let mut panels = vec![(a, b, v, e)];
    loop {
        let mut total = T::default();
        let mut err = 0.0;
        let mut worst = 0;
        for (i, p) in panels.iter().enumerate() {
            total = total + p.2;
            err += p.3;
            if p.3 > panels[worst].3 {
                worst = i;
            }
        }
        let target = abs_tol.max(rel_tol * total.modulus());
        if err <= target {
            return Ok(QuadResult { value: total, error: err, panels: panels.len() });
        }
        if panels.len() >= max_panels {
            // Accept if the remaining error is at round-off level of the panels.
            if err <= 1e3 * f64::EPSILON * total.modulus().max(abs_tol) {
                return Ok(QuadResult { value: total, error: err, panels: panels.len() });
            }
            return Err(Error::Budget(format!(
                "adaptive quadrature on [{a}, {b}] stopped at {} panels with error {err:e}",
                panels.len()
            )));
        }
        let (pa, pb, _, _) = panels.swap_remove(worst);
        let m = 0.5 * (pa + pb);
        if m <= pa || m >= pb {
            return Ok(QuadResult { value: total, error: err, panels: panels.len() + 1 });
        }
        let (v1, e1) = gk21(&mut f, pa, m);
        let (v2, e2) = gk21(&mut f, m, pb);
        panels.push((pa, m, v1, e1));
        panels.push((m, pb, v2, e2));
    }
}

/// Adaptive integration over consecutive breakpoints.
pub fn integrate_pieces<T: Scalar, F: FnMut(f64) -> T>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<QuadResult<T>> {
    let mut out = QuadResult { value: T::default(), error: 0.0, panels: 0 };
    let pieces = breaks.len().saturating_sub(1).max(1) as f64;
    for w in breaks.windows(2) {
        let r = integrate(&mut f, w[0], w[1], abs_tol / pieces, rel_tol, max_panels)?;
        out.value = out.value + r.value;
        out.error += r.error;
        out.panels += r.panels;
    }
    Ok(out)
}

/// `∫_a^∞ f` through the substitution `s = a/u`, `u ∈ (0, 1]`.
///
/// Needs `f(s) = O(s^{-1-δ})`; endpoint singularities of the transformed
/// integrand at `u = 0` are handled by the open Kronrod rule.
pub fn integrate_tail<T: Scalar, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<QuadResult<T>> {
    assert!(a > 0.0, "tail integral needs a positive lower limit");
    integrate(
        |u: f64| {
            if u <= 0.0 {
                T::default()
            } else {
                f(a / u) * (a / (u * u))
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
        max_panels,
    )
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Fixed Gauss–Legendre rule mapped onto `[a, b]`.
pub fn gl_fixed<T: Scalar, F: FnMut(f64) -> T>(rule: &(Vec<f64>, Vec<f64>), a: f64, b: f64, mut f: F) -> T {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = T::default();
    for (x, w) in rule.0.iter().zip(&rule.1) {
        s = s + f(c + h * x) * (w * h);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let rule = gauss_legendre(6);
        let v = gl_fixed(&rule, 0.0, 2.0, |x: f64| x.powi(11));
        assert!((v - 2f64.powi(12) / 12.0).abs() < 1e-10);
    }

    #[test]
    fn adaptive_handles_peaks_and_tails() {
        let r = integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 1e-12, 2000).unwrap();
        let exact = 2.0 * (1.0 / 1e-4f64.sqrt()) * (1.0 / 1e-4f64.sqrt()).atan();
        assert!((r.value - exact).abs() < 1e-9 * exact);
        let t = integrate_tail(|s: f64| s.powf(-1.6), 2.0, 1e-13, 1e-13, 4000).unwrap();
        assert!((t.value - 2f64.powf(-0.6) / 0.6).abs() < 1e-10);
    }
}
