//! Natural cubic splines over sorted knots, real or complex valued.

use super::Scalar;

#[derive(Debug, Clone)]
pub struct CubicSpline<T: Scalar> {
    x: Vec<f64>,
    y: Vec<T>,
    m: Vec<T>,
    zero_outside: bool,
}

impl<T: Scalar> CubicSpline<T> {
    /// Natural spline through `(x_i, y_i)`. With `zero_outside` the spline
    /// evaluates to zero beyond the knot range; otherwise it extrapolates
    /// linearly with the end slopes.
    pub fn new(x: Vec<f64>, y: Vec<T>, zero_outside: bool) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n, "spline needs at least two matching samples");
        assert!(x.windows(2).all(|w| w[1] > w[0]), "spline knots must increase");
        let mut m = vec![T::default(); n];
        if n > 2 {
            // Tridiagonal solve for second derivatives with m_0 = m_{n-1} = 0.
            let mut c = vec![0.0; n];
            let mut d = vec![T::default(); n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let a = h0 / 6.0;
                let b = (h0 + h1) / 3.0;
                let cc = h1 / 6.0;
                let rhs = (y[i + 1] - y[i]) * (1.0 / h1) - (y[i] - y[i - 1]) * (1.0 / h0);
                let denom = b - a * c[i - 1];
                c[i] = cc / denom;
                d[i] = (rhs - d[i - 1] * a) * (1.0 / denom);
            }
            for i in (1..n - 1).rev() {
                m[i] = d[i] - m[i + 1] * c[i];
            }
        }
        Self { x, y, m, zero_outside }
    }

    /// Clamped spline with prescribed end slopes `d0`, `dn`.
    pub fn clamped(x: Vec<f64>, y: Vec<T>, d0: T, dn: T, zero_outside: bool) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n, "spline needs at least two matching samples");
        assert!(x.windows(2).all(|w| w[1] > w[0]), "spline knots must increase");
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![T::default(); n];
        let h0 = x[1] - x[0];
        diag[0] = h0 / 3.0;
        sup[0] = h0 / 6.0;
        rhs[0] = (y[1] - y[0]) * (1.0 / h0) - d0;
        for i in 1..n - 1 {
            let a = x[i] - x[i - 1];
            let b = x[i + 1] - x[i];
            sub[i] = a / 6.0;
            diag[i] = (a + b) / 3.0;
            sup[i] = b / 6.0;
            rhs[i] = (y[i + 1] - y[i]) * (1.0 / b) - (y[i] - y[i - 1]) * (1.0 / a);
        }
        let hn = x[n - 1] - x[n - 2];
        sub[n - 1] = hn / 6.0;
        diag[n - 1] = hn / 3.0;
        rhs[n - 1] = dn - (y[n - 1] - y[n - 2]) * (1.0 / hn);
        // Thomas algorithm.
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            let r = rhs[i - 1];
            rhs[i] = rhs[i] - r * w;
        }
        let mut m = vec![T::default(); n];
        m[n - 1] = rhs[n - 1] * (1.0 / diag[n - 1]);
        for i in (0..n - 1).rev() {
            m[i] = (rhs[i] - m[i + 1] * sup[i]) * (1.0 / diag[i]);
        }
        Self { x, y, m, zero_outside }
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[T] {
        &self.y
    }

    fn locate(&self, t: f64) -> usize {
        let i = self.x.partition_point(|&v| v <= t);
        i.clamp(1, self.x.len() - 1) - 1
    }

    pub fn eval(&self, t: f64) -> T {
        let n = self.x.len();
        if t < self.x[0] || t > self.x[n - 1] {
            if self.zero_outside {
                return T::default();
            }
            let (i, edge) = if t < self.x[0] { (0, self.x[0]) } else { (n - 1, self.x[n - 1]) };
            return self.y[i] + self.deriv(edge) * (t - edge);
        }
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        self.y[i] * a
            + self.y[i + 1] * b
            + (self.m[i] * (a * a * a - a) + self.m[i + 1] * (b * b * b - b)) * (h * h / 6.0)
    }

    pub fn deriv(&self, t: f64) -> T {
        let n = self.x.len();
        if (t < self.x[0] || t > self.x[n - 1]) && self.zero_outside {
            return T::default();
        }
        let t = t.clamp(self.x[0], self.x[n - 1]);
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        (self.y[i + 1] - self.y[i]) * (1.0 / h)
            + (self.m[i + 1] * (3.0 * b * b - 1.0) - self.m[i] * (3.0 * a * a - 1.0)) * (h / 6.0)
    }

    pub fn deriv2(&self, t: f64) -> T {
        let n = self.x.len();
        if t < self.x[0] || t > self.x[n - 1] {
            return T::default();
        }
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let b = (t - self.x[i]) / h;
        self.m[i] * (1.0 - b) + self.m[i + 1] * b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_smooth_function() {
        let x: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let s = CubicSpline::new(x, y, false);
        for t in [0.7, 3.3, 8.2] {
            assert!((s.eval(t) - t.sin()).abs() < 1e-5);
            assert!((s.deriv(t) - t.cos()).abs() < 1e-3);
        }
    }

    #[test]
    fn clamped_matches_end_slopes() {
        let x: Vec<f64> = (0..=40).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let s = CubicSpline::clamped(x, y, 1.0, 4f64.cos(), true);
        assert!((s.deriv(0.0) - 1.0).abs() < 1e-12);
        assert!((s.deriv(4.0) - 4f64.cos()).abs() < 1e-12);
        assert!((s.eval(2.05) - 2.05f64.sin()).abs() < 1e-6);
        assert_eq!(s.eval(4.5), 0.0);
    }
}
