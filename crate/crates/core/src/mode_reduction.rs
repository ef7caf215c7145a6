//! Angular-mode reduction on the line coordinate.
//!
//! A surface function `ψ(r, θ) = Σ_m ψ_m(r) e^{imθ}/√(2π)` is represented by
//! the half-densities `u_m = f^{1/2} ψ_m`, for which the surface `L²` norm is
//! the flat norm `Σ_m ∫ |u_m|² dx` and the operator acts as
//! `−½ ∂_x² + W_m`, `W_m = q + m²/(2f²)`.

use crate::geometry::{Loc, ManifoldModel};
use crate::numerics::dst::Dst1;
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// `[1, −2, 1]/Δx²`.
    Order2,
    /// `[−1/12, 4/3, −5/2, 4/3, −1/12]/Δx²`.
    Order4,
    /// Sine-basis (Dirichlet) spectral second derivative.
    Spectral,
}

impl Stencil {
    pub fn from_order(order: u32) -> Result<Self> {
        match order {
            2 => Ok(Stencil::Order2),
            4 => Ok(Stencil::Order4),
            0 => Ok(Stencil::Spectral),
            o => Err(Error::Validation(format!("stencil order must be 2, 4 or 0 (spectral), got {o}"))),
        }
    }

    pub fn half_bandwidth(&self) -> usize {
        match self {
            Stencil::Order2 => 1,
            Stencil::Order4 => 2,
            Stencil::Spectral => usize::MAX,
        }
    }
}

/// Grid request: per-end outer radius, spacing, stencil and mode cap.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub rmax: Vec<f64>,
    pub dr: f64,
    pub stencil: Stencil,
    pub mmax: i32,
}

impl GridSpec {
    pub fn uniform(n_ends: usize, rmax: f64, dr: f64, stencil: Stencil, mmax: i32) -> Self {
        Self { rmax: vec![rmax; n_ends], dr, stencil, mmax }
    }

    pub fn build(&self, model: &ManifoldModel) -> Result<Arc<RadialGrid>> {
        RadialGrid::new(model, &self.rmax, self.dr).map(Arc::new)
    }

    /// Modes `−mmax..=mmax`.
    pub fn modes(&self) -> Vec<i32> {
        (-self.mmax..=self.mmax).collect()
    }
}

/// Uniform grid on the line coordinate with Dirichlet points just outside.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub x_lo: f64,
    pub dx: f64,
    pub n: usize,
    /// Radius per node (`r₀/2` on the core).
    pub radius: Vec<f64>,
    /// End index per node, `None` on the core.
    pub end_of: Vec<Option<usize>>,
    pub rmax: Vec<f64>,
}

impl RadialGrid {
    pub fn new(model: &ManifoldModel, rmax: &[f64], dx: f64) -> Result<Self> {
        if rmax.len() != model.n_ends() {
            return Err(Error::Validation(format!("need one rmax per end ({}), got {}", model.n_ends(), rmax.len())));
        }
        if !(dx > 0.0) {
            return Err(Error::Validation("grid spacing must be positive".into()));
        }
        for r in rmax {
            if !(*r > model.r0()) {
                return Err(Error::Validation(format!("rmax = {r} must exceed r0 = {}", model.r0())));
            }
        }
        let x_lo = if model.has_wall() { -model.core_half_width() } else { model.x_of(0, rmax[0]) };
        let x_hi = model.x_of(model.n_ends() - 1, *rmax.last().unwrap());
        let n = ((x_hi - x_lo) / dx).round() as usize - 1;
        if n < 8 {
            return Err(Error::Validation("grid has fewer than 8 nodes".into()));
        }
        let mut radius = Vec::with_capacity(n);
        let mut end_of = Vec::with_capacity(n);
        for j in 0..n {
            let x = x_lo + (j + 1) as f64 * dx;
            match model.locate(x) {
                Loc::End { end, r } => {
                    radius.push(r);
                    end_of.push(Some(end));
                }
                Loc::Core => {
                    radius.push(model.r0() / 2.0);
                    end_of.push(None);
                }
            }
        }
        Ok(Self { x_lo, dx, n, radius, end_of, rmax: rmax.to_vec() })
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_lo + (j + 1) as f64 * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Trapezoid weights of the interior nodes (boundary values vanish).
    pub fn weights(&self) -> Vec<f64> {
        vec![self.dx; self.n]
    }

    /// Measure of the covered interval, boundary half-cells included.
    pub fn covered_measure(&self) -> f64 {
        (self.n + 1) as f64 * self.dx
    }

    /// Node indices on `end` with radius at least `r_min`.
    pub fn end_nodes(&self, end: usize, r_min: f64) -> Vec<usize> {
        (0..self.n).filter(|&j| self.end_of[j] == Some(end) && self.radius[j] >= r_min).collect()
    }

    /// Nearest node index to line coordinate `x`.
    pub fn index_of(&self, x: f64) -> usize {
        (((x - self.x_lo) / self.dx).round() as i64 - 1).clamp(0, self.n as i64 - 1) as usize
    }
}

/// Reduced operator `−½∂² + W_m` for one angular mode.
#[derive(Debug, Clone)]
pub struct ModeOperator {
    pub m: i32,
    pub grid: Arc<RadialGrid>,
    pub w: Vec<f64>,
    pub stencil: Stencil,
    pub dirichlet_mask: Vec<bool>,
    dst: Option<Dst1>,
}

/// Builds the reduced operator of mode `m`.
///
/// With `lambda_max` set, checks that the grid carries at least 12 points per
/// local wavelength at that energy.
pub fn reduce(model: &ManifoldModel, m: i32, grid: Arc<RadialGrid>, stencil: Stencil, mmax: i32, lambda_max: Option<f64>) -> Result<ModeOperator> {
    if m.abs() > mmax {
        return Err(Error::Validation(format!("|m| = {} exceeds mmax = {mmax}", m.abs())));
    }
    let w: Vec<f64> = (0..grid.n).map(|j| model.mode_potential(grid.x(j), m)).collect();
    if let Some(lmax) = lambda_max {
        let wmin = w.iter().cloned().fold(f64::INFINITY, f64::min);
        let kmax = (2.0 * (lmax - wmin)).max(0.0).sqrt();
        if kmax > 0.0 {
            let ppw = 2.0 * std::f64::consts::PI / (kmax * grid.dx);
            if ppw < 12.0 {
                return Err(Error::Resolution(format!(
                    "{ppw:.2} points per wavelength at lambda = {lmax} (need 12); reduce dr"
                )));
            }
        }
    }
    let dst = if stencil == Stencil::Spectral { Some(Dst1::new(grid.n)) } else { None };
    let n = grid.n;
    Ok(ModeOperator { m, grid, w, stencil, dirichlet_mask: vec![false; n], dst })
}

impl ModeOperator {
    pub fn n(&self) -> usize {
        self.grid.n
    }

    /// Marks interior Dirichlet nodes (an obstacle). Not available for the
    /// spectral stencil.
    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if self.stencil == Stencil::Spectral {
            return Err(Error::Validation("Dirichlet masks need a finite-difference stencil".into()));
        }
        if mask.len() != self.n() {
            return Err(Error::Validation("mask length differs from grid".into()));
        }
        self.dirichlet_mask = mask;
        Ok(self)
    }

    fn coeffs(&self) -> &'static [f64] {
        match self.stencil {
            Stencil::Order2 => &[-2.0, 1.0],
            Stencil::Order4 => &[-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0],
            Stencil::Spectral => &[],
        }
    }

    /// Matrix entry `(i, j)` for the banded stencils.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if self.dirichlet_mask[i] || self.dirichlet_mask[j] {
            return if i == j { 1.0 } else { 0.0 };
        }
        let d = (i as i64 - j as i64).unsigned_abs() as usize;
        let c = self.coeffs();
        let mut v = if d < c.len() { -0.5 * c[d] / (self.grid.dx * self.grid.dx) } else { 0.0 };
        if i == j {
            v += self.w[i];
        }
        v
    }

    /// `out = H_m u`.
    pub fn apply(&self, u: &[C64], out: &mut [C64]) {
        let n = self.n();
        let inv = -0.5 / (self.grid.dx * self.grid.dx);
        match self.stencil {
            Stencil::Spectral => {
                let dst = self.dst.as_ref().unwrap();
                out.copy_from_slice(u);
                dst.forward(out);
                let l = (n + 1) as f64 * self.grid.dx;
                for (k, v) in out.iter_mut().enumerate() {
                    let kk = std::f64::consts::PI * (k + 1) as f64 / l;
                    *v *= 0.5 * kk * kk;
                }
                dst.inverse(out);
                for j in 0..n {
                    out[j] += u[j] * self.w[j];
                }
            }
            _ => {
                let c = self.coeffs();
                let masked = self.dirichlet_mask.iter().any(|&b| b);
                let get = |j: i64| -> C64 {
                    if j < 0 || j >= n as i64 || (masked && self.dirichlet_mask[j as usize]) {
                        C64::new(0.0, 0.0)
                    } else {
                        u[j as usize]
                    }
                };
                for i in 0..n {
                    if masked && self.dirichlet_mask[i] {
                        out[i] = C64::new(0.0, 0.0);
                        continue;
                    }
                    let ii = i as i64;
                    let mut s = get(ii) * c[0];
                    for (d, cd) in c.iter().enumerate().skip(1) {
                        s += (get(ii - d as i64) + get(ii + d as i64)) * *cd;
                    }
                    out[i] = s * inv + u[i] * self.w[i];
                }
            }
        }
    }

    /// Bounds `[e_min, e_max]` containing the spectrum of the discrete operator.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let wmin = self.w.iter().cloned().fold(f64::INFINITY, f64::min);
        let wmax = self.w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let dx2 = self.grid.dx * self.grid.dx;
        let kin = match self.stencil {
            Stencil::Order2 => 2.0 / dx2,
            Stencil::Order4 => 8.0 / (3.0 * dx2),
            Stencil::Spectral => {
                let n = self.n() as f64;
                0.5 * (std::f64::consts::PI * n / ((n + 1.0) * self.grid.dx)).powi(2)
            }
        };
        (wmin.min(0.0) - 1e-9, wmax + kin + 1e-9)
    }
}

/// Complex field per mode on a [`RadialGrid`] (half-density values).
#[derive(Debug, Clone)]
pub struct RadialState {
    pub grid: Arc<RadialGrid>,
    pub modes: Vec<i32>,
    pub data: Vec<Vec<C64>>,
}

impl RadialState {
    pub fn zeros(grid: Arc<RadialGrid>, modes: Vec<i32>) -> Self {
        let n = grid.n;
        let data = modes.iter().map(|_| vec![C64::new(0.0, 0.0); n]).collect();
        Self { grid, modes, data }
    }

    pub fn single(grid: Arc<RadialGrid>, m: i32, values: Vec<C64>) -> Self {
        assert_eq!(values.len(), grid.n);
        Self { grid, modes: vec![m], data: vec![values] }
    }

    pub fn mode_index(&self, m: i32) -> Option<usize> {
        self.modes.iter().position(|&k| k == m)
    }

    pub fn component(&self, m: i32) -> Option<&[C64]> {
        self.mode_index(m).map(|i| self.data[i].as_slice())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self, other⟩`, conjugate-linear in `self`; modes matched by label.
    pub fn inner(&self, other: &RadialState) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for (i, m) in self.modes.iter().enumerate() {
            if let Some(k) = other.mode_index(*m) {
                for (a, b) in self.data[i].iter().zip(&other.data[k]) {
                    s += a.conj() * b;
                }
            }
        }
        s * self.grid.dx
    }

    /// `self − other` on the union of modes.
    pub fn sub(&self, other: &RadialState) -> RadialState {
        let mut out = self.clone();
        for (k, m) in other.modes.iter().enumerate() {
            match out.mode_index(*m) {
                Some(i) => {
                    for (a, b) in out.data[i].iter_mut().zip(&other.data[k]) {
                        *a -= b;
                    }
                }
                None => {
                    out.modes.push(*m);
                    out.data.push(other.data[k].iter().map(|v| -v).collect());
                }
            }
        }
        out
    }

    pub fn scale(&mut self, s: C64) {
        for v in self.data.iter_mut().flatten() {
            *v *= s;
        }
    }

    pub fn conj(&self) -> RadialState {
        let mut out = self.clone();
        for v in out.data.iter_mut().flatten() {
            *v = v.conj();
        }
        out
    }

    /// Norm restricted to nodes where `keep(j)` holds.
    pub fn norm_where<F: Fn(usize) -> bool>(&self, keep: F) -> f64 {
        let mut s = 0.0;
        for d in &self.data {
            for (j, v) in d.iter().enumerate() {
                if keep(j) {
                    s += v.norm_sqr();
                }
            }
        }
        (s * self.grid.dx).sqrt()
    }
}

impl Serialize for RadialState {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = ser.serialize_struct("RadialState", 2)?;
        st.serialize_field("modes", &self.modes)?;
        st.serialize_field("data", &self.data)?;
        st.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Multiplies (forward) or divides (inverse) by `f^{1/2}` node-wise.
pub fn half_density_map(model: &ManifoldModel, state: &RadialState, direction: Direction) -> RadialState {
    let mut out = state.clone();
    for d in out.data.iter_mut() {
        for (j, v) in d.iter_mut().enumerate() {
            let g = model.log_warp_x(state.grid.x(j)).0;
            let s = (0.5 * g).exp();
            match direction {
                Direction::Forward => *v *= s,
                Direction::Inverse => *v /= s,
            }
        }
    }
    out
}

/// Co-area norm of a surface function sampled per mode: `(Σ ∫ |ψ_m|² f dx)^{1/2}`.
pub fn coarea_norm(model: &ManifoldModel, state: &RadialState) -> f64 {
    let mut s = 0.0;
    for d in &state.data {
        for (j, v) in d.iter().enumerate() {
            s += v.norm_sqr() * model.log_warp_x(state.grid.x(j)).0.exp();
        }
    }
    (s * state.grid.dx).sqrt()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BesovNorms {
    pub b: f64,
    pub b_star: f64,
    pub b_star0_defect: f64,
}

/// Dyadic annulus index of radius `r` (`r < 2` maps to 0).
pub fn annulus_index(r: f64) -> usize {
    if r < 2.0 {
        0
    } else {
        r.log2().floor() as usize
    }
}

/// `‖F_ν ψ‖` for each dyadic annulus `2^ν ≤ r < 2^{ν+1}`.
pub fn annulus_norms(state: &RadialState) -> Vec<f64> {
    let g = &state.grid;
    let top = g.radius.iter().cloned().fold(0.0, f64::max);
    let mut acc = vec![0.0; annulus_index(top) + 1];
    for d in &state.data {
        for (j, v) in d.iter().enumerate() {
            acc[annulus_index(g.radius[j])] += v.norm_sqr();
        }
    }
    acc.iter().map(|s| (s * g.dx).sqrt()).collect()
}

/// Index of the outermost annulus fully covered on every end.
pub fn outermost_complete(grid: &RadialGrid) -> usize {
    let rcov = grid.rmax.iter().cloned().fold(f64::INFINITY, f64::min);
    (rcov.log2().floor() as usize).saturating_sub(1)
}

/// Besov norms `‖·‖_B`, `‖·‖_{B*}` and the outermost-annulus coefficient.
pub fn besov_norms(state: &RadialState) -> BesovNorms {
    let a = annulus_norms(state);
    let mut b = 0.0;
    let mut bs: f64 = 0.0;
    for (nu, v) in a.iter().enumerate() {
        let rn = 2f64.powi(nu as i32);
        b += rn.sqrt() * v;
        bs = bs.max(v / rn.sqrt());
    }
    let top = outermost_complete(&state.grid).min(a.len().saturating_sub(1));
    let defect = if a.is_empty() { 0.0 } else { a[top] / 2f64.powi(top as i32).sqrt() };
    BesovNorms { b, b_star: bs, b_star0_defect: defect }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{EndSpec, ModelParams, Profile};

    fn model_a() -> ManifoldModel {
        ManifoldModel::new(vec![EndSpec::new(Profile::Euclidean), EndSpec::new(Profile::Euclidean)], ModelParams::default()).unwrap()
    }

    #[test]
    fn operator_is_symmetric() {
        let m = model_a();
        let g = Arc::new(RadialGrid::new(&m, &[12.0, 12.0], 0.1).unwrap());
        for st in [Stencil::Order2, Stencil::Order4, Stencil::Spectral] {
            let op = reduce(&m, 1, g.clone(), st, 8, None).unwrap();
            let n = op.n();
            let u: Vec<C64> = (0..n).map(|j| C64::new((j as f64 * 0.37).sin(), 0.0)).collect();
            let v: Vec<C64> = (0..n).map(|j| C64::new((j as f64 * 0.11).cos() * (j as f64 * 0.05).sin(), 0.0)).collect();
            let mut hu = vec![C64::new(0.0, 0.0); n];
            let mut hv = vec![C64::new(0.0, 0.0); n];
            op.apply(&u, &mut hu);
            op.apply(&v, &mut hv);
            let a: C64 = u.iter().zip(&hv).map(|(x, y)| x * y).sum();
            let b: C64 = hu.iter().zip(&v).map(|(x, y)| x * y).sum();
            assert!((a - b).norm() < 1e-9 * a.norm().max(1.0), "{st:?}");
        }
    }
}
