//! Brute-force references: a two-dimensional finite-difference Hamiltonian
//! on a tiny grid, small-`ε` resolvent solves, closed-form one-dimensional
//! scattering and high-resolution quadrature.

use crate::fourier::scattering_matrix;
use crate::geometry::{CoreFn, ManifoldModel, Profile};
use crate::mode_reduction::{reduce, RadialGrid, RadialState, Stencil};
use crate::numerics::banded::BandLu;
use crate::numerics::cheb::{evolution_coefficients, series_apply};
use crate::numerics::loglog_slope;
use crate::numerics::quad::{gauss_legendre, gl_fixed};
use crate::resolvent::limiting_resolvent_mode;
use crate::{Error, Result, C64};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

pub const MAX_RADIAL: usize = 200;
pub const MAX_ANGULAR: usize = 64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Real symmetric matrix in compressed-row storage.
#[derive(Debug, Clone)]
pub struct SparseSym {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseSym {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.vals[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn apply(&self, u: &[C64], out: &mut [C64]) {
        for i in 0..self.n {
            let mut s = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += u[self.cols[k]] * self.vals[k];
            }
            out[i] = s;
        }
    }

    /// `max |H_ij − H_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                d = d.max((self.vals[k] - self.get(self.cols[k], i)).abs());
            }
        }
        d
    }

    /// Gershgorin interval.
    pub fn bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut diag = 0.0;
            let mut off = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.cols[k] == i {
                    diag = self.vals[k];
                } else {
                    off += self.vals[k].abs();
                }
            }
            lo = lo.min(diag - off);
            hi = hi.max(diag + off);
        }
        (lo, hi)
    }
}

/// `−½Δ_g + V` on the grid `(x_j, θ_a)`, index `j·n_θ + a`.
#[derive(Debug, Clone)]
pub struct Hamiltonian2d {
    pub grid: Arc<RadialGrid>,
    pub n_theta: usize,
    pub matrix: SparseSym,
    /// Warp `f` at the radial nodes.
    pub f: Vec<f64>,
}

/// Conservative second-order discretization of
/// `−½ f^{-1}∂_x(f∂_x) − ½ f^{-2}∂_θ² + V` with co-area weights `f dx dθ`,
/// Fourier collocation in `θ`, Dirichlet at both ends of the radial range,
/// and symmetrized by `√f` so the unknowns are half-densities.
pub fn dense_hamiltonian_2d(model: &ManifoldModel, grid: Arc<RadialGrid>, n_theta: usize) -> Result<Hamiltonian2d> {
    if grid.n > MAX_RADIAL || n_theta > MAX_ANGULAR {
        return Err(Error::SizeCap(format!("2D oracle grid {} x {n_theta} exceeds {MAX_RADIAL} x {MAX_ANGULAR}", grid.n)));
    }
    if n_theta < 4 || n_theta % 2 != 0 {
        return Err(Error::Validation("angular grid needs an even count of at least 4".into()));
    }
    let n = grid.n;
    let dx = grid.dx;
    let warp = |x: f64| model.log_warp_x(x).0.exp();
    let f: Vec<f64> = (0..n).map(|j| warp(grid.x(j))).collect();
    let fh: Vec<f64> = (0..=n).map(|j| warp(grid.x_lo + (j as f64 + 0.5) * dx)).collect();
    let v: Vec<f64> = (0..n).map(|j| model.potential_x(grid.x(j))).collect();
    let dth = 2.0 * PI / n_theta as f64;
    // −∂_θ² in Fourier collocation.
    let ang: Vec<f64> = (0..n_theta)
        .map(|d| {
            let d = d.min(n_theta - d);
            if d == 0 {
                PI * PI / (3.0 * dth * dth) + 1.0 / 6.0
            } else {
                let s = (0.5 * d as f64 * dth).sin();
                let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
                sign / (2.0 * s * s)
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(n * n_theta);
    let inv = 0.5 / (dx * dx);
    for j in 0..n {
        let cent = 0.5 / (f[j] * f[j]);
        for a in 0..n_theta {
            let mut r = Vec::with_capacity(n_theta + 2);
            let diag = inv * (fh[j] + fh[j + 1]) / f[j] + v[j];
            for b in 0..n_theta {
                let d = (a + n_theta - b) % n_theta;
                let mut val = cent * ang[d];
                if b == a {
                    val += diag;
                }
                r.push((j * n_theta + b, val));
            }
            if j > 0 {
                r.push(((j - 1) * n_theta + a, -inv * fh[j] / (f[j] * f[j - 1]).sqrt()));
            }
            if j + 1 < n {
                r.push(((j + 1) * n_theta + a, -inv * fh[j + 1] / (f[j] * f[j + 1]).sqrt()));
            }
            rows.push(r);
        }
    }
    Ok(Hamiltonian2d { grid, n_theta, matrix: SparseSym::from_rows(rows), f })
}

impl Hamiltonian2d {
    /// Samples `Σ_m u_m(x) e^{imθ}/√(2π)` at the angular nodes.
    pub fn from_modes(&self, state: &RadialState) -> Result<Vec<C64>> {
        let nt = self.n_theta;
        if let Some(m) = state.modes.iter().find(|m| m.unsigned_abs() as usize >= nt / 2) {
            return Err(Error::Validation(format!("mode {m} is not resolved by {nt} angles")));
        }
        let mut out = vec![ZERO; self.grid.n * nt];
        let w = (2.0 * PI).sqrt().recip() * (2.0 * PI / nt as f64).sqrt();
        for (i, m) in state.modes.iter().enumerate() {
            for a in 0..nt {
                let e = C64::new(0.0, *m as f64 * a as f64 * 2.0 * PI / nt as f64).exp() * w;
                for j in 0..self.grid.n {
                    out[j * nt + a] += state.data[i][j] * e;
                }
            }
        }
        Ok(out)
    }

    /// Angular coefficients `u_m` of an oracle vector.
    pub fn to_modes(&self, values: &[C64], modes: &[i32]) -> RadialState {
        let nt = self.n_theta;
        let w = (2.0 * PI).sqrt().recip() * (2.0 * PI / nt as f64).sqrt();
        let mut out = RadialState::zeros(self.grid.clone(), modes.to_vec());
        for (i, m) in modes.iter().enumerate() {
            for a in 0..nt {
                let e = C64::new(0.0, -(*m as f64) * a as f64 * 2.0 * PI / nt as f64).exp() * w;
                for j in 0..self.grid.n {
                    out.data[i][j] += values[j * nt + a] * e;
                }
            }
        }
        out
    }

    /// Discrete `L²` norm with weight `dx` (angular weight already folded in).
    pub fn norm(&self, values: &[C64]) -> f64 {
        (values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx).sqrt()
    }

    /// `e^{−itH}` by a Chebyshev expansion over steps of at most `dt`.
    pub fn evolve(&self, values: &[C64], t: f64, dt: f64) -> Vec<C64> {
        if t == 0.0 {
            return values.to_vec();
        }
        let steps = (t.abs() / dt).ceil().max(1.0) as usize;
        let (a, b) = self.matrix.bounds();
        let (coeffs, c, d) = evolution_coefficients(a, b, t / steps as f64);
        let mut u = values.to_vec();
        for _ in 0..steps {
            u = series_apply(|v, o| self.matrix.apply(v, o), &coeffs, c, d, &u);
        }
        u
    }

    /// Radial tridiagonal `(diag, off)` that the matrix induces on angular mode `m`.
    pub fn mode_block(&self, m: i32) -> (Vec<f64>, Vec<f64>) {
        let nt = self.n_theta;
        let mut diag = vec![0.0; self.grid.n];
        let mut off = vec![0.0; self.grid.n.saturating_sub(1)];
        for j in 0..self.grid.n {
            let row0 = j * nt;
            diag[j] = (0..nt)
                .map(|b| self.matrix.get(row0, row0 + b) * (m as f64 * b as f64 * 2.0 * PI / nt as f64).cos())
                .sum();
            if j + 1 < self.grid.n {
                off[j] = self.matrix.get(row0, (j + 1) * nt);
            }
        }
        (diag, off)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    pub t: f64,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    pub symmetry_defect: f64,
    pub oracle_norm: f64,
    pub reduced_norm: f64,
    /// `‖ψ_reduced − ψ_oracle‖/‖ψ_oracle‖` at time `t`.
    pub relative_error: f64,
}

/// Evolves `psi` for time `t` with the 2D oracle and mode by mode with the
/// reduced operators (`stencil`, Chebyshev), then compares them.
pub fn compare_evolution(model: &ManifoldModel, grid: Arc<RadialGrid>, n_theta: usize, psi: &RadialState, t: f64, stencil: Stencil) -> Result<OracleComparison> {
    let ham = dense_hamiltonian_2d(model, grid.clone(), n_theta)?;
    let start = ham.from_modes(psi)?;
    let end2d = ham.evolve(&start, t, 1.0);
    let mmax = psi.modes.iter().map(|m| m.abs()).max().unwrap_or(0);
    let mut reduced = psi.clone();
    for (i, m) in psi.modes.iter().enumerate() {
        let op = reduce(model, *m, grid.clone(), stencil, mmax, None)?;
        let (a, b) = op.spectral_bounds();
        let steps = (t.abs() / 1.0).ceil().max(1.0) as usize;
        let (coeffs, c, d) = evolution_coefficients(a, b, t / steps as f64);
        let mut u = psi.data[i].clone();
        for _ in 0..steps {
            u = series_apply(|v, o| op.apply(v, o), &coeffs, c, d, &u);
        }
        reduced.data[i] = u;
    }
    let red2d = ham.from_modes(&reduced)?;
    let diff: Vec<C64> = red2d.iter().zip(&end2d).map(|(a, b)| a - b).collect();
    let on = ham.norm(&end2d);
    Ok(OracleComparison {
        t,
        radial_nodes: grid.n,
        angular_nodes: n_theta,
        symmetry_defect: ham.matrix.symmetry_defect(),
        oracle_norm: on,
        reduced_norm: ham.norm(&red2d),
        relative_error: ham.norm(&diff) / on,
    })
}

/// `(H_m − λ − iε)φ = ψ` for one mode by a banded solve. The grid is
/// extended on every end by an absorbing tail (`−iW`, cubic ramp) long
/// enough that the truncation is invisible on the original nodes.
pub fn small_eps_resolvent(model: &ManifoldModel, grid: &RadialGrid, m: i32, lambda: f64, eps: f64, psi: &[C64]) -> Result<Vec<C64>> {
    if !(1e-4..=1e-1).contains(&eps) {
        return Err(Error::Validation(format!("epsilon = {eps} outside [1e-4, 1e-1]")));
    }
    if psi.len() != grid.n {
        return Err(Error::Validation("source length differs from grid".into()));
    }
    let k = (2.0 * lambda).max(1e-6).sqrt();
    let wavelength = 2.0 * PI / k;
    let cells = ((40.0 * wavelength).max(60.0) / grid.dx).ceil();
    let tail = cells * grid.dx;
    let rmax: Vec<f64> = grid.rmax.iter().map(|r| r + tail).collect();
    let big = Arc::new(RadialGrid::new(model, &rmax, grid.dx)?);
    let shift = ((grid.x_lo - big.x_lo) / grid.dx).round() as usize;
    let op = reduce(model, m, big.clone(), Stencil::Order4, m.abs(), None)?;
    let strength = 2.0 * lambda.max(0.05);
    let cap: Vec<f64> = (0..big.n)
        .map(|j| match big.end_of[j] {
            Some(e) => {
                let s = (big.radius[j] - grid.rmax[e]) / tail;
                if s > 0.0 {
                    strength * s * s * s
                } else {
                    0.0
                }
            }
            None => 0.0,
        })
        .collect();
    let z = C64::new(lambda, eps);
    let lu = BandLu::factor(big.n, 2, 2, |i, j| {
        let mut v = C64::new(op.entry(i, j), 0.0);
        if i == j {
            v -= z + C64::new(0.0, cap[i]);
        }
        v
    })?;
    let mut rhs = vec![ZERO; big.n];
    rhs[shift..shift + grid.n].copy_from_slice(psi);
    lu.solve(&mut rhs);
    Ok(rhs[shift..shift + grid.n].to_vec())
}

/// Textbook one-dimensional potentials with closed-form scattering.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Potential1d {
    Free,
    /// `v0` on `|x| < a`.
    SquareWell { v0: f64, a: f64 },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Coefficients1d {
    pub transmission: C64,
    pub reflection: C64,
}

/// Transmission and reflection amplitudes for `−½ψ'' + Vψ = λψ` with
/// incidence from the left, `e^{ikx} + r e^{−ikx}` → `t e^{ikx}`.
pub fn closed_form_scattering(potential: Potential1d, lambda: f64) -> Result<Coefficients1d> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda = {lambda} must be positive")));
    }
    let k = C64::new((2.0 * lambda).sqrt(), 0.0);
    match potential {
        Potential1d::Free => Ok(Coefficients1d { transmission: C64::new(1.0, 0.0), reflection: ZERO }),
        Potential1d::SquareWell { v0, a } => {
            let q = C64::new(2.0 * (lambda - v0), 0.0).sqrt();
            let i = C64::new(0.0, 1.0);
            if q.norm() < 1e-14 {
                // Linear interior solution at the band edge.
                let d = C64::new(2.0 * a, 0.0);
                let den = C64::new(1.0, 0.0) - i * k * d / 2.0;
                let t = (-i * k * d).exp() / den;
                let r = -i * k * d / 2.0 * (-2.0 * i * k * a).exp() / den * -1.0;
                return Ok(Coefficients1d { transmission: t, reflection: r });
            }
            let two_qa = q * (2.0 * a);
            let den = (two_qa).cos() - i * (k * k + q * q) / (2.0 * k * q) * two_qa.sin();
            let t = (-2.0 * i * k * a).exp() / den;
            let r = i * (q * q - k * k) / (2.0 * k * q) * two_qa.sin() * (-2.0 * i * k * a).exp() / den;
            Ok(Coefficients1d { transmission: t, reflection: r })
        }
    }
}

/// The one-dimensional potential a model reduces to in every mode when both
/// ends are potential-free half-cylinders; `None` for any other model.
pub fn line_potential(model: &ManifoldModel) -> Option<Potential1d> {
    let plain = model.n_ends() == 2
        && model.ends.iter().all(|e| matches!(e.profile, Profile::Flat) && e.v_long.is_zero() && e.v_short.is_zero());
    if !plain {
        return None;
    }
    match model.params.core_v {
        CoreFn::Zero => Some(Potential1d::Free),
        CoreFn::SquareWell { v0, a } => Some(Potential1d::SquareWell { v0, a }),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormRow {
    pub lambda: f64,
    pub m: i32,
    /// `|S_ij|` from the Jost construction, indexed `[i][j]`.
    pub computed: [[f64; 2]; 2],
    pub transmission: f64,
    pub reflection: f64,
    pub max_error: f64,
}

/// `|S(λ)|` against the closed form, mode by mode: on flat ends mode `m`
/// sees the line potential at energy `λ − m²/2`.
pub fn compare_closed_form(model: &ManifoldModel, grid: &RadialGrid, lambdas: &[f64], modes: &[i32]) -> Result<Vec<ClosedFormRow>> {
    let pot = line_potential(model).ok_or_else(|| Error::Validation("closed-form scattering needs two flat ends with a free or square-well core".into()))?;
    let mut rows = Vec::new();
    for &lambda in lambdas {
        let s = scattering_matrix(model, grid, lambda, modes)?;
        for &m in modes {
            let e = lambda - 0.5 * (m as f64).powi(2);
            if e <= 0.0 {
                continue;
            }
            let exact = closed_form_scattering(pot, e)?;
            let mut computed = [[0.0; 2]; 2];
            for (i, row) in computed.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = s.entry(m, i, j).ok_or_else(|| Error::Domain(format!("mode {m} closed at lambda = {lambda}")))?.norm();
                }
            }
            let (t, r) = (exact.transmission.norm(), exact.reflection.norm());
            let max_error = [(computed[0][0] - r).abs(), (computed[1][1] - r).abs(), (computed[1][0] - t).abs(), (computed[0][1] - t).abs()]
                .into_iter()
                .fold(0.0, f64::max);
            rows.push(ClosedFormRow { lambda, m, computed, transmission: t, reflection: r, max_error });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallEpsReport {
    pub lambda: f64,
    pub m: i32,
    pub eps: Vec<f64>,
    /// `‖φ_ε − R(λ + i0)ψ‖/‖R(λ + i0)ψ‖` on the original nodes.
    pub errors: Vec<f64>,
    /// `Im⟨ψ, φ_ε⟩`, positive for every `ε`.
    pub im_pairing: Vec<f64>,
    /// Fitted exponent of `errors ~ ε^rate`.
    pub rate: f64,
}

/// Runs [`small_eps_resolvent`] over `eps` and compares with the Jost
/// resolvent of the same mode.
pub fn small_eps_series(model: &ManifoldModel, grid: &Arc<RadialGrid>, m: i32, lambda: f64, psi: &[C64], eps: &[f64]) -> Result<SmallEpsReport> {
    if eps.len() < 2 {
        return Err(Error::Validation("need at least two epsilon values".into()));
    }
    let op = reduce(model, m, grid.clone(), Stencil::Order4, m.abs(), None)?;
    let exact = limiting_resolvent_mode(model, &op, lambda, psi, 1.0, None)?.phi;
    let scale = exact.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let mut errors = Vec::with_capacity(eps.len());
    let mut im_pairing = Vec::with_capacity(eps.len());
    for &e in eps {
        let phi = small_eps_resolvent(model, grid, m, lambda, e, psi)?;
        let ip: C64 = psi.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum::<C64>() * grid.dx;
        im_pairing.push(ip.im);
        errors.push(phi.iter().zip(&exact).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt() / scale);
    }
    let rate = loglog_slope(eps, &errors);
    Ok(SmallEpsReport { lambda, m, eps: eps.to_vec(), errors, im_pairing, rate })
}

/// Composite Gauss–Legendre with `panels` equal panels of order `order`.
pub fn high_resolution_quadrature<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let rule = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    (0..panels).map(|p| gl_fixed(&rule, a + p as f64 * h, a + (p + 1) as f64 * h, &mut f)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{EndSpec, ModelParams, Profile};

    fn model(a: Profile, b: Profile) -> ManifoldModel {
        ManifoldModel::new(vec![EndSpec::new(a), EndSpec::new(b)], ModelParams::default()).unwrap()
    }

    #[test]
    fn flat_cylinder_angular_block_is_m_squared_over_two() {
        let m = model(Profile::Flat, Profile::Flat);
        let g = Arc::new(RadialGrid::new(&m, &[6.0, 6.0], 0.1).unwrap());
        let h = dense_hamiltonian_2d(&m, g.clone(), 16).unwrap();
        assert_eq!(h.matrix.symmetry_defect(), 0.0);
        let (d0, _) = h.mode_block(0);
        for mm in 1..8 {
            let (dm, _) = h.mode_block(mm);
            for j in 0..g.n {
                assert!((dm[j] - d0[j] - 0.5 * (mm * mm) as f64).abs() < 1e-10, "m = {mm}");
            }
        }
        assert!(matches!(dense_hamiltonian_2d(&m, g, 66), Err(Error::SizeCap(_))));
    }

    #[test]
    fn mode_block_matches_reduced_stencil_to_second_order() {
        let m = model(Profile::Euclidean, Profile::Hyperbolic { kappa: 1.0 });
        let mut errs = Vec::new();
        for dx in [0.08, 0.04] {
            let g = Arc::new(RadialGrid::new(&m, &[3.5, 3.5], dx).unwrap());
            let h = dense_hamiltonian_2d(&m, g.clone(), 8).unwrap();
            let op = reduce(&m, 2, g.clone(), Stencil::Order2, 2, None).unwrap();
            let (d, off) = h.mode_block(2);
            let u: Vec<C64> = (0..g.n).map(|j| C64::new((-(g.x(j) - 0.5).powi(2)).exp(), 0.0)).collect();
            let mut reduced = vec![ZERO; g.n];
            op.apply(&u, &mut reduced);
            let mut e = 0.0f64;
            for j in 1..g.n - 1 {
                if g.x(j).abs() > 3.0 {
                    continue;
                }
                let block = u[j] * d[j] + u[j - 1] * off[j - 1] + u[j + 1] * off[j];
                e = e.max((block - reduced[j]).norm());
            }
            errs.push(e);
        }
        let rate = (errs[0] / errs[1]).log2();
        assert!(rate > 1.8, "{errs:?}");
    }

    #[test]
    fn square_well_conserves_flux_and_free_transmits() {
        let f = closed_form_scattering(Potential1d::Free, 0.7).unwrap();
        assert_eq!(f.transmission, C64::new(1.0, 0.0));
        for (v0, a, lam) in [(-1.0, 1.0, 0.5), (0.8, 1.0, 0.5), (0.8, 0.5, 1.3), (2.0, 1.0, 2.0)] {
            let c = closed_form_scattering(Potential1d::SquareWell { v0, a }, lam).unwrap();
            assert!((c.transmission.norm_sqr() + c.reflection.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn small_eps_resolvent_approaches_jost_resolvent() {
        let m = model(Profile::Euclidean, Profile::Euclidean);
        let g = Arc::new(RadialGrid::new(&m, &[12.0, 12.0], 0.01).unwrap());
        let psi: Vec<C64> = (0..g.n).map(|j| C64::new((-(g.x(j) - 1.0).powi(2)).exp(), 0.0)).collect();
        let rep = small_eps_series(&m, &g, 0, 0.5, &psi, &[0.1, 0.05, 0.025, 0.0125]).unwrap();
        assert!(rep.im_pairing.iter().all(|v| *v > 0.0));
        assert!(rep.rate >= 0.5, "{rep:?}");
    }

    #[test]
    fn flat_square_well_matches_closed_form() {
        let m = ManifoldModel::new(
            vec![EndSpec::new(Profile::Flat), EndSpec::new(Profile::Flat)],
            ModelParams { core_v: CoreFn::SquareWell { v0: 0.5, a: 1.0 }, ..ModelParams::default() },
        )
        .unwrap();
        let g = RadialGrid::new(&m, &[20.0, 20.0], 0.01).unwrap();
        let rows = compare_closed_form(&m, &g, &[0.3, 0.9], &[0, 1]).unwrap();
        assert_eq!(rows.len(), 3);
        for r in rows {
            assert!(r.max_error < 1e-4, "{r:?}");
        }
        assert!(line_potential(&model(Profile::Euclidean, Profile::Flat)).is_none());
    }

    #[test]
    fn reduced_evolution_matches_two_dimensional_oracle() {
        let m = model(Profile::Euclidean, Profile::Hyperbolic { kappa: 1.0 });
        let g = Arc::new(RadialGrid::new(&m, &[6.0, 6.0], 0.08).unwrap());
        let vals = |amp: f64, k: f64| -> Vec<C64> {
            (0..g.n).map(|j| C64::new(0.0, k * g.x(j)).exp() * amp * (-(g.x(j) - 0.5).powi(2) / 2.0).exp()).collect()
        };
        let mut psi = RadialState::zeros(g.clone(), vec![-1, 0, 2]);
        psi.data[0] = vals(0.3, -0.4);
        psi.data[1] = vals(1.0, 0.5);
        psi.data[2] = vals(0.5, 0.0);
        let c = compare_evolution(&m, g.clone(), 16, &psi, 2.0, Stencil::Order2).unwrap();
        assert!(c.relative_error < 1e-2, "{c:?}");
    }
}
