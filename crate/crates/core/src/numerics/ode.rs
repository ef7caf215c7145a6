//! Dormand–Prince 5(4) integration with continuous output for small complex
//! systems.

use crate::{Error, Result};
use num_complex::Complex64 as C64;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-14, h_init: 1e-3, max_steps: 5_000_000 }
    }
}

#[derive(Debug, Clone)]
struct Step<const N: usize> {
    x0: f64,
    h: f64,
    rc: [[C64; N]; 5],
}

/// Piecewise quartic continuous extension of an accepted step sequence.
#[derive(Debug, Clone)]
pub struct Dense<const N: usize> {
    steps: Vec<Step<N>>,
}

impl<const N: usize> Dense<N> {
    fn new() -> Self {
        Self { steps: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Covered interval as `(lo, hi)`.
    pub fn span(&self) -> (f64, f64) {
        let a = self.steps.first().map(|s| s.x0).unwrap_or(0.0);
        let b = self.steps.last().map(|s| s.x0 + s.h).unwrap_or(0.0);
        (a.min(b), a.max(b))
    }

    /// Interpolated state at `x`; clamps to the covered interval.
    pub fn eval(&self, x: f64) -> [C64; N] {
        let forward = self.steps[0].h > 0.0;
        // Steps are monotone in x0 along the integration direction.
        let idx = self.steps.partition_point(|s| if forward { s.x0 + s.h < x } else { s.x0 + s.h > x });
        let s = &self.steps[idx.min(self.steps.len() - 1)];
        let th = ((x - s.x0) / s.h).clamp(0.0, 1.0);
        let th1 = 1.0 - th;
        let mut y = [C64::new(0.0, 0.0); N];
        for i in 0..N {
            y[i] = s.rc[0][i]
                + (s.rc[1][i] + (s.rc[2][i] + (s.rc[3][i] + s.rc[4][i] * th1) * th) * th1) * th;
        }
        y
    }

    /// Appends the steps of another solution continuing this one.
    pub fn extend(&mut self, other: Dense<N>) {
        self.steps.extend(other.steps);
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn comb<const N: usize>(y: &[C64; N], h: f64, terms: &[(f64, &[C64; N])]) -> [C64; N] {
    let mut out = *y;
    for (c, k) in terms {
        if *c != 0.0 {
            for i in 0..N {
                out[i] += k[i] * (h * c);
            }
        }
    }
    out
}

/// Integrates `y' = f(x, y)` from `x0` to `x1` (either direction).
///
/// Returns the end state and, if requested, the continuous extension.
pub fn dopri45<const N: usize, F: FnMut(f64, &[C64; N]) -> [C64; N]>(
    mut f: F,
    x0: f64,
    y0: [C64; N],
    x1: f64,
    opts: &OdeOptions,
    keep_dense: bool,
) -> Result<([C64; N], Option<Dense<N>>)> {
    let mut dense = if keep_dense { Some(Dense::new()) } else { None };
    if x1 == x0 {
        return Ok((y0, dense));
    }
    let dir = (x1 - x0).signum();
    let mut x = x0;
    let mut y = y0;
    let mut h = opts.h_init.min((x1 - x0).abs()) * dir;
    let mut k1 = f(x, &y);
    let mut steps = 0usize;
    while (x1 - x) * dir > 0.0 {
        if steps >= opts.max_steps {
            return Err(Error::Budget(format!("ode step budget exhausted at x = {x}")));
        }
        steps += 1;
        if (x + h - x1) * dir > 0.0 {
            h = x1 - x;
        }
        let k2 = f(x + C2 * h, &comb(&y, h, &[(A21, &k1)]));
        let k3 = f(x + C3 * h, &comb(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(x + C4 * h, &comb(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(x + C5 * h, &comb(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(
            x + h,
            &comb(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y1 = comb(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(x + h, &y1);
        let mut err = 0.0;
        for i in 0..N {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let sc = opts.atol + opts.rtol * y[i].norm().max(y1[i].norm());
            err += (e.norm() / sc).powi(2);
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            if h.abs() < 1e-14 * (1.0 + x.abs()) {
                return Err(Error::Instability(format!("ode produced non-finite values near x = {x}")));
            }
            continue;
        }
        if err <= 1.0 {
            if let Some(d) = dense.as_mut() {
                let mut rc = [[C64::new(0.0, 0.0); N]; 5];
                for i in 0..N {
                    let ydiff = y1[i] - y[i];
                    let bspl = k1[i] * h - ydiff;
                    rc[0][i] = y[i];
                    rc[1][i] = ydiff;
                    rc[2][i] = bspl;
                    rc[3][i] = ydiff - k7[i] * h - bspl;
                    rc[4][i] = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
                }
                d.steps.push(Step { x0: x, h, rc });
            }
            x += h;
            y = y1;
            k1 = k7;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h.abs() < 1e-14 * (1.0 + x.abs()) {
                return Err(Error::Instability(format!("ode step size underflow near x = {x}")));
            }
        }
    }
    Ok((y, dense))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillator_matches_closed_form_with_dense_output() {
        let f = |_x: f64, y: &[C64; 2]| [y[1], -y[0] * 4.0];
        let y0 = [C64::new(1.0, 0.0), C64::new(0.0, 2.0)];
        let (y, d) = dopri45(f, 0.0, y0, 10.0, &OdeOptions::default(), true).unwrap();
        // y = e^{2ix}
        let exact = C64::new(0.0, 20.0).exp();
        assert!((y[0] - exact).norm() < 1e-8);
        let d = d.unwrap();
        let mid = d.eval(3.3);
        assert!((mid[0] - C64::new(0.0, 6.6).exp()).norm() < 1e-8);
        let (yb, _) = dopri45(f, 10.0, y, 0.0, &OdeOptions::default(), false).unwrap();
        assert!((yb[0] - y0[0]).norm() < 1e-8);
    }
}
