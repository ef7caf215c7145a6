//! Bessel sequences and Chebyshev expansions used by the propagators.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// `J_0(x), …, J_nmax(x)` for `x ≥ 0` by Miller's downward recurrence,
/// normalized with `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_seq(x: f64, nmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let top = nmax.max(x as usize);
    let mut start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;
    let mut jp1 = 0.0f64;
    let mut j = 1e-300f64;
    let mut sum = 0.0f64;
    let mut buf = vec![0.0; nmax + 1];
    for k in (1..=start).rev() {
        // j holds J_k, jp1 holds J_{k+1}.
        let jm1 = 2.0 * k as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        let kk = k - 1;
        if kk <= nmax {
            buf[kk] = j;
        }
        if kk % 2 == 0 && kk > 0 {
            sum += 2.0 * j;
        }
        if j.abs() > 1e250 {
            let s = 1e-250;
            j *= s;
            jp1 *= s;
            sum *= s;
            for v in buf.iter_mut() {
                *v *= s;
            }
        }
    }
    sum += j;
    for (o, b) in out.iter_mut().zip(&buf) {
        *o = b / sum;
    }
    out
}

/// Chebyshev coefficients `c_k` of `g` on `[-1, 1]`, so `g ≈ Σ' c_k T_k`
/// with the first term halved already folded into `c_0`.
pub fn cheb_coeffs<F: Fn(f64) -> f64>(g: F, n: usize) -> Vec<f64> {
    let nodes: Vec<f64> = (0..n).map(|j| PI * (j as f64 + 0.5) / n as f64).collect();
    let vals: Vec<f64> = nodes.iter().map(|t| g(t.cos())).collect();
    let mut c = vec![0.0; n];
    for (k, ck) in c.iter_mut().enumerate() {
        let mut s = 0.0;
        for (t, v) in nodes.iter().zip(&vals) {
            s += v * (k as f64 * t).cos();
        }
        *ck = 2.0 * s / n as f64;
    }
    c[0] *= 0.5;
    c
}

/// Jackson damping factors for a degree `n − 1` expansion.
pub fn jackson(n: usize) -> Vec<f64> {
    let np1 = n as f64 + 1.0;
    (0..n)
        .map(|k| {
            let k = k as f64;
            ((np1 - k) * (PI * k / np1).cos() + (PI * k / np1).sin() / (PI / np1).tan()) / np1
        })
        .collect()
}

/// Coefficients of `e^{−iτH} = e^{−iτc} Σ (2 − δ_{k0}) (−i sgn τ)^k J_k(|τ|d) T_k((H − c)/d)`
/// for a spectrum inside `[a, b]`; returns `(coeffs, c, d)`.
pub fn evolution_coefficients(a: f64, b: f64, tau: f64) -> (Vec<C64>, f64, f64) {
    let (c, d) = (0.5 * (a + b), 0.5 * (b - a));
    let x = tau.abs() * d;
    let kmax = (x + 12.0 * x.cbrt() + 40.0) as usize;
    let j = bessel_j_seq(x, kmax);
    let mut last = kmax;
    while last > x as usize + 1 && j[last].abs() < 1e-18 {
        last -= 1;
    }
    let rot = C64::new(0.0, -tau.signum());
    let phase = C64::new(0.0, -tau * c).exp();
    let mut p = C64::new(1.0, 0.0);
    let coeffs = (0..=last)
        .map(|k| {
            let w = if k == 0 { 1.0 } else { 2.0 };
            let v = phase * p * (w * j[k]);
            p *= rot;
            v
        })
        .collect();
    (coeffs, c, d)
}

/// `Σ_k a_k T_k((H − c)/d) u` by the three-term recurrence, with `apply`
/// computing `out = H v`.
pub fn series_apply<F: FnMut(&[C64], &mut [C64])>(mut apply: F, coeffs: &[C64], c: f64, d: f64, u: &[C64]) -> Vec<C64> {
    let n = u.len();
    let mut acc: Vec<C64> = u.iter().map(|v| v * coeffs[0]).collect();
    if coeffs.len() == 1 {
        return acc;
    }
    let mut scaled = |v: &[C64], out: &mut [C64]| {
        apply(v, out);
        for (o, x) in out.iter_mut().zip(v) {
            *o = (*o - x * c) / d;
        }
    };
    let mut prev = u.to_vec();
    let mut cur = vec![C64::new(0.0, 0.0); n];
    let mut buf = vec![C64::new(0.0, 0.0); n];
    scaled(&prev, &mut cur);
    for (a, v) in acc.iter_mut().zip(&cur) {
        *a += v * coeffs[1];
    }
    for ck in &coeffs[2..] {
        scaled(&cur, &mut buf);
        for j in 0..n {
            let next = buf[j] * 2.0 - prev[j];
            prev[j] = cur[j];
            cur[j] = next;
            acc[j] += next * ck;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_values() {
        let j = bessel_j_seq(10.0, 30);
        assert!((j[0] - (-0.245_935_764_451_348_3)).abs() < 1e-13);
        assert!((j[1] - 0.043_472_746_168_861_44).abs() < 1e-13);
        assert!((j[10] - 0.207_486_106_633_358_8).abs() < 1e-13);
        let big = bessel_j_seq(200.0, 260);
        assert!(big[259].abs() < 1e-10);
        let s: f64 = big[0] + 2.0 * big.iter().skip(2).step_by(2).sum::<f64>();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chebyshev_expansion_of_exponential() {
        let c = cheb_coeffs(|x| x.exp(), 20);
        let x: f64 = 0.3;
        let (mut t0, mut t1) = (1.0, x);
        let mut s = c[0] + c[1] * x;
        for ck in c.iter().skip(2) {
            let t2 = 2.0 * x * t1 - t0;
            s += ck * t2;
            t0 = t1;
            t1 = t2;
        }
        assert!((s - x.exp()).abs() < 1e-14);
    }
}
