//! Complex banded LU factorization with partial pivoting.

use crate::{Error, Result};
use num_complex::Complex64 as C64;

/// Band storage: row `i` keeps columns `i − kl ..= i + ku + kl` (room for
/// pivoting fill-in).
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    w: usize,
    a: Vec<C64>,
    piv: Vec<usize>,
}

impl BandLu {
    /// Factors the matrix given by `entry(i, j)` for `|i − j|` within the band.
    pub fn factor<F: Fn(usize, usize) -> C64>(n: usize, kl: usize, ku: usize, entry: F) -> Result<Self> {
        let w = 2 * kl + ku + 1;
        let mut a = vec![C64::new(0.0, 0.0); n * w];
        let idx = |i: usize, j: usize| i * w + (j + kl - i);
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n - 1);
            for j in lo..=hi {
                a[idx(i, j)] = entry(i, j);
            }
        }
        let mut piv = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = a[idx(k, k)].norm();
            for i in k + 1..=last {
                let v = a[idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Domain(format!("singular banded matrix at row {k}")));
            }
            piv[k] = p;
            let jhi = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=jhi {
                    a.swap(idx(k, j), idx(p, j));
                }
            }
            let d = a[idx(k, k)];
            for i in k + 1..=last {
                let l = a[idx(i, k)] / d;
                a[idx(i, k)] = l;
                if l != C64::new(0.0, 0.0) {
                    for j in k + 1..=jhi {
                        let v = a[idx(k, j)];
                        a[idx(i, j)] -= l * v;
                    }
                }
            }
        }
        Ok(Self { n, kl, w, a, piv })
    }

    pub fn solve(&self, b: &mut [C64]) {
        let (n, kl, w) = (self.n, self.kl, self.w);
        let ku_tot = w - 1 - kl;
        let idx = |i: usize, j: usize| i * w + (j + kl - i);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let last = (k + kl).min(n - 1);
            let bk = b[k];
            for i in k + 1..=last {
                b[i] -= self.a[idx(i, k)] * bk;
            }
        }
        for i in (0..n).rev() {
            let jhi = (i + ku_tot).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=jhi {
                s -= self.a[idx(i, j)] * b[j];
            }
            b[i] = s / self.a[idx(i, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_pentadiagonal_system_needing_pivots() {
        let n = 40;
        let entry = |i: usize, j: usize| {
            let d = i as i64 - j as i64;
            match d {
                0 => C64::new(if i % 3 == 0 { 0.0 } else { 0.5 }, 0.1),
                1 | -1 => C64::new(1.0, 0.0),
                2 | -2 => C64::new(-0.25, 0.05 * i as f64),
                _ => C64::new(0.0, 0.0),
            }
        };
        let lu = BandLu::factor(n, 2, 2, entry).unwrap();
        let x: Vec<C64> = (0..n).map(|i| C64::new((i as f64).sin(), 0.3)).collect();
        let mut b = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                b[i] += entry(i, j) * x[j];
            }
        }
        lu.solve(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).norm() < 1e-10);
        }
    }
}
