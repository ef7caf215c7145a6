//! Limiting resolvents `R(λ ± i0)` of the reduced operators.
//!
//! Each end contributes a Jost solution of `(−½∂² + W_m − λ)u = 0`. For an
//! open channel it is the outgoing solution normalized so that
//! `√b · e^{−i∫_{r₀}^r b} · u → 1` as `r → ∞`; for a closed channel it is the
//! decaying solution (arbitrary scale); at a wall it is the regular solution.
//!
//! The far field is handled with the Riccati variable `y = u'/u`, started
//! from a second-order WKB expansion at a matching radius and integrated inward
//! together with `z = ln u − i∫b`. Inside the grid the pair `(u, u')` is
//! integrated with Dormand–Prince 5(4) and kept as a continuous extension.

use crate::geometry::ManifoldModel;
use crate::mode_reduction::{annulus_index, outermost_complete, ModeOperator, RadialGrid, RadialState};
use crate::numerics::ode::{dopri45, Dense, OdeOptions};
use crate::numerics::quad::{gauss_legendre, gl_fixed, integrate, integrate_tail};
use crate::{Error, Result, C64};
use serde::Serialize;

/// Largest radius used by averaged-limit windows.
pub const R_FAR: f64 = 1e6;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JostKind {
    Outgoing,
    Decaying,
    Regular,
}

/// A solution along the whole grid, stored as `(u, u_x)` on the line coordinate.
#[derive(Debug, Clone)]
pub struct JostSolution {
    pub kind: JostKind,
    pub end: Option<usize>,
    dense: Dense<2>,
}

impl JostSolution {
    /// `(u, u_x)` at line coordinate `x`.
    pub fn eval(&self, x: f64) -> [C64; 2] {
        self.dense.eval(x)
    }

    pub fn span(&self) -> (f64, f64) {
        self.dense.span()
    }
}

/// Left/right boundary solutions of one mode at one energy (outgoing convention).
#[derive(Debug, Clone)]
pub struct JostPair {
    pub lambda: f64,
    pub m: i32,
    pub left: JostSolution,
    pub right: JostSolution,
    /// `u_L u_R' − u_L' u_R`.
    pub wronskian: C64,
}

impl JostPair {
    /// Wronskian evaluated at `x`; constant up to integration error.
    pub fn wronskian_at(&self, x: f64) -> C64 {
        let l = self.left.eval(x);
        let r = self.right.eval(x);
        l[0] * r[1] - l[1] * r[0]
    }

    /// Solution associated with the boundary opposite to `end`.
    pub fn opposite(&self, model: &ManifoldModel, end: usize) -> &JostSolution {
        if model.side(end) > 0.0 {
            &self.left
        } else {
            &self.right
        }
    }
}

/// `∫_{r₀}^{r} b` on an end at energy `λ`.
pub fn phase_integral(model: &ManifoldModel, lambda: f64, end: usize, r: f64) -> Result<f64> {
    let ctx = model.phase_ctx(lambda, end);
    let r0 = model.r0();
    if r <= r0 {
        return Ok(0.0);
    }
    let lo = ctx.r_lambda / 2.0;
    let mut breaks = vec![r0];
    for b in [lo, ctx.r_lambda] {
        if b > r0 && b < r {
            breaks.push(b);
        }
    }
    breaks.push(r);
    let mut s = 0.0;
    for w in breaks.windows(2) {
        s += integrate(|t| ctx.b(t), w[0], w[1], 1e-13, 1e-13, 4000)?.value;
    }
    Ok(s)
}

fn mode_w_r(model: &ManifoldModel, end: usize, m: i32, r: f64) -> f64 {
    model.mode_potential(model.x_of(end, r), m)
}

/// Smallest radius where the far-field expansion is imposed.
pub const R_MATCH_MIN: f64 = 2000.0;

/// Matching radius for a boundary solution needed down to `r_inner`.
pub fn match_radius(r_inner: f64) -> f64 {
    (4.0 * r_inner).max(R_MATCH_MIN)
}

/// Far-field state `(y, z)` at radius `r` of the outgoing (or decaying)
/// solution on `end`, from the WKB expansion `y = ip + y₁ + y₂`.
///
/// For the outgoing branch `z = ln u − i∫_{r₀}^r b` is fixed by requiring
/// `√b e^{−i∫b} u → 1`, which gives
/// `z(r) = −½ ln p − i∫_r^∞ [(p − b) + (y₁' + y₁²)/(2p)]`.
fn far_field(model: &ManifoldModel, end: usize, m: i32, lambda: f64, outgoing: bool, r: f64) -> Result<[C64; 2]> {
    let w = |s: f64| mode_w_r(model, end, m, s);
    if outgoing {
        let p = |s: f64| (2.0 * (lambda - w(s))).sqrt();
        let y1 = |s: f64| {
            let h = 1e-3 * s;
            let dp = (p(s + h) - p(s - h)) / (2.0 * h);
            -dp / (2.0 * p(s))
        };
        let corr = |s: f64| {
            let h = 1e-3 * s;
            let dy1 = (y1(s + h) - y1(s - h)) / (2.0 * h);
            let a = y1(s);
            (dy1 + a * a) / (2.0 * p(s))
        };
        let p0 = p(r);
        let y = I * p0 + y1(r) + I * corr(r);
        let ctx = model.channel_ctx(lambda, end, m);
        // p − b = 2(q₁ + λ − λ_ch − W)/(p + b), written without cancellation.
        let shift = lambda - ctx.lambda;
        let tail = integrate_tail(
            |s: f64| {
                let q1 = model.q1(s, end) + shift;
                let ps = p(s);
                let bs = ctx.b_bare(s);
                2.0 * (q1 - w(s)) / (ps + bs) + corr(s)
            },
            r,
            1e-15,
            1e-12,
            400,
        )?
        .value;
        let z = C64::new(-0.5 * p0.ln(), -tail);
        Ok([y, z])
    } else {
        let h = 1e-3 * r;
        let kap = |s: f64| (2.0 * (w(s) - lambda)).sqrt();
        let dk = (kap(r + h) - kap(r - h)) / (2.0 * h);
        let y = C64::new(-kap(r) - dk / (2.0 * kap(r)), 0.0);
        Ok([y, C64::new(0.0, 0.0)])
    }
}

fn riccati_opts(r_match: f64) -> OdeOptions {
    OdeOptions { rtol: 1e-12, atol: 1e-14, h_init: 1e-3 * r_match, max_steps: 2_000_000 }
}

/// `(u, u_r)` at radius `r_switch` of the boundary solution of `end`.
fn boundary_data(model: &ManifoldModel, end: usize, m: i32, lambda: f64, r_switch: f64) -> Result<([C64; 2], JostKind)> {
    let thr = model.mode_threshold(end, m);
    if (lambda - thr).abs() < 1e-9 {
        return Err(Error::Domain(format!("lambda = {lambda} sits on the channel threshold {thr} of end {end}, mode {m}")));
    }
    let outgoing = lambda > thr;
    let r_match = match_radius(r_switch);
    let start = far_field(model, end, m, lambda, outgoing, r_match)?;
    let ctx = model.channel_ctx(lambda, end, m);
    let rhs = |r: f64, s: &[C64; 2]| {
        let w = mode_w_r(model, end, m, r);
        let y = s[0];
        let dy = C64::new(2.0 * (w - lambda), 0.0) - y * y;
        let dz = if outgoing { y - I * ctx.b(r) } else { y };
        [dy, dz]
    };
    let (s, _) = dopri45(rhs, r_match, start, r_switch, &riccati_opts(r_match), false)?;
    if outgoing {
        let phase = phase_integral(model, model.channel_energy(lambda, end, m), end, r_switch)?;
        let u = (s[1] + I * phase).exp();
        Ok(([u, s[0] * u], JostKind::Outgoing))
    } else {
        let u = C64::new(1.0, 0.0);
        Ok(([u, s[0]], JostKind::Decaying))
    }
}

/// `∫_{r₀}^{r} b` at each of `radii` (any order), accumulated panel by panel.
pub fn phase_on_radii(model: &ManifoldModel, lambda: f64, end: usize, radii: &[f64]) -> Result<Vec<f64>> {
    let r0 = model.r0();
    let ctx = model.phase_ctx(lambda, end);
    let rule = gauss_legendre(8);
    let mut idx: Vec<usize> = (0..radii.len()).collect();
    idx.sort_by(|a, b| radii[*a].total_cmp(&radii[*b]));
    let mut out = vec![0.0; radii.len()];
    let mut at = r0;
    let mut acc = 0.0;
    for i in idx {
        let r = radii[i].max(r0);
        let pieces = ((r - at) / 0.5).ceil().max(1.0) as usize;
        let h = (r - at) / pieces as f64;
        for k in 0..pieces {
            let a = at + k as f64 * h;
            acc += gl_fixed(&rule, a, a + h, |t| ctx.b(t));
        }
        at = r;
        out[i] = acc;
    }
    Ok(out)
}

/// `n(r) = √b · e^{−i∫_{r₀}^r b} · u(r)` of the outgoing solution of `end` at
/// the requested radii (all at least `r₀`); tends to 1 as `r → ∞`.
pub fn asymptotic_normalization(model: &ManifoldModel, end: usize, m: i32, lambda: f64, radii: &[f64]) -> Result<Vec<C64>> {
    let ctx = model.channel_ctx(lambda, end, m);
    let inner: Vec<f64> = radii.iter().cloned().filter(|r| *r < R_MATCH_MIN).collect();
    let dense = if inner.is_empty() {
        None
    } else {
        let start = far_field(model, end, m, lambda, true, R_MATCH_MIN)?;
        let rmin = inner.iter().cloned().fold(f64::INFINITY, f64::min);
        let rhs = |r: f64, s: &[C64; 2]| {
            let w = mode_w_r(model, end, m, r);
            let y = s[0];
            [C64::new(2.0 * (w - lambda), 0.0) - y * y, y - I * ctx.b(r)]
        };
        dopri45(rhs, R_MATCH_MIN, start, rmin, &riccati_opts(R_MATCH_MIN), true)?.1
    };
    radii
        .iter()
        .map(|&r| {
            let z = if r < R_MATCH_MIN { dense.as_ref().unwrap().eval(r)[1] } else { far_field(model, end, m, lambda, true, r)?[1] };
            Ok(z.exp() * ctx.b(r).sqrt())
        })
        .collect()
}

/// Integrates `(u, u_x)` across the grid interval `[x_a, x_b]` starting from
/// `x_start` (one of the two), split at potential breakpoints.
fn sweep(model: &ManifoldModel, m: i32, lambda: f64, x_start: f64, y0: [C64; 2], x_end: f64) -> Result<Dense<2>> {
    let rhs = |x: f64, s: &[C64; 2]| [s[1], s[0] * (2.0 * (model.mode_potential(x, m) - lambda))];
    let mut cuts: Vec<f64> = model
        .breakpoints()
        .into_iter()
        .filter(|b| (b - x_start) * (x_end - b) > 0.0)
        .collect();
    if x_end < x_start {
        cuts.reverse();
    }
    cuts.push(x_end);
    let opts = OdeOptions::default();
    let mut x = x_start;
    let mut y = y0;
    let mut dense: Option<Dense<2>> = None;
    for c in cuts {
        let (y1, d) = dopri45(rhs, x, y, c, &opts, true)?;
        let d = d.unwrap();
        match dense.as_mut() {
            Some(acc) => acc.extend(d),
            None => dense = Some(d),
        }
        x = c;
        y = y1;
    }
    Ok(dense.unwrap())
}

/// Builds the Jost pair for mode `m` covering the grid.
pub fn jost_pair(model: &ManifoldModel, grid: &RadialGrid, m: i32, lambda: f64) -> Result<JostPair> {
    let x_lo = grid.x_lo;
    let x_hi = grid.x(grid.n - 1) + grid.dx;
    let right_end = model.n_ends() - 1;
    let r_hi = model.locate(x_hi);
    let r_hi = match r_hi {
        crate::geometry::Loc::End { r, .. } => r,
        _ => return Err(Error::Validation("grid must extend into the right end".into())),
    };
    let (br, kind_r) = boundary_data(model, right_end, m, lambda, r_hi)?;
    // On the right end d/dx = d/dr.
    let right = JostSolution { kind: kind_r, end: Some(right_end), dense: sweep(model, m, lambda, x_hi, br, x_lo)? };
    let left = if model.has_wall() {
        let d = sweep(model, m, lambda, x_lo, [C64::new(0.0, 0.0), C64::new(1.0, 0.0)], x_hi)?;
        JostSolution { kind: JostKind::Regular, end: None, dense: d }
    } else {
        let r_lo = match model.locate(x_lo) {
            crate::geometry::Loc::End { r, .. } => r,
            _ => return Err(Error::Validation("grid must extend into the left end".into())),
        };
        let (bl, kind_l) = boundary_data(model, 0, m, lambda, r_lo)?;
        // On the left end d/dx = −d/dr.
        let d = sweep(model, m, lambda, x_lo, [bl[0], -bl[1]], x_hi)?;
        JostSolution { kind: kind_l, end: Some(0), dense: d }
    };
    let xm = 0.5 * (x_lo + x_hi);
    let l = left.eval(xm);
    let r = right.eval(xm);
    let wr = l[0] * r[1] - l[1] * r[0];
    let scale = (l[0].norm() * r[1].norm()).max(l[1].norm() * r[0].norm());
    if !(wr.norm() > 1e-11 * scale) {
        return Err(Error::WronskianDegenerate { lambda, wronskian: wr.norm() });
    }
    Ok(JostPair { lambda, m, left, right, wronskian: wr })
}

/// Output of [`limiting_resolvent`] for one mode.
#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub phi: Vec<C64>,
    /// Exact `∂_x φ` from the Green representation.
    pub dphi: Vec<C64>,
    pub jost: JostPair,
    pub sign: f64,
}

fn conj_if(v: C64, minus: bool) -> C64 {
    if minus {
        v.conj()
    } else {
        v
    }
}

/// `φ = R(λ ± i0)ψ` for one mode via the Green kernel
/// `G(x, y) = −2 u_L(x_<) u_R(x_>) / W` (incoming solutions are the complex
/// conjugates of the outgoing ones).
pub fn limiting_resolvent_mode(model: &ManifoldModel, op: &ModeOperator, lambda: f64, psi: &[C64], sign: f64, jost: Option<JostPair>) -> Result<ResolventSolution> {
    if lambda <= model.lambda0() {
        return Err(Error::Domain(format!("lambda = {lambda} must exceed lambda0 = {}", model.lambda0())));
    }
    let grid = &op.grid;
    let jost = match jost {
        Some(j) => j,
        None => jost_pair(model, grid, op.m, lambda)?,
    };
    let minus = sign < 0.0;
    let n = grid.n;
    let ul: Vec<[C64; 2]> = (0..n).map(|j| jost.left.eval(grid.x(j))).collect();
    let ur: Vec<[C64; 2]> = (0..n).map(|j| jost.right.eval(grid.x(j))).collect();
    let c = conj_if(-2.0 / jost.wronskian, minus);
    // Cumulative sums with the diagonal split between the two halves.
    let mut il = vec![C64::new(0.0, 0.0); n];
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..n {
        let t = conj_if(ul[j][0], minus) * psi[j];
        il[j] = acc + t * 0.5;
        acc += t;
    }
    let mut ir = vec![C64::new(0.0, 0.0); n];
    acc = C64::new(0.0, 0.0);
    for j in (0..n).rev() {
        let t = conj_if(ur[j][0], minus) * psi[j];
        ir[j] = acc + t * 0.5;
        acc += t;
    }
    let dx = grid.dx;
    let mut phi = vec![C64::new(0.0, 0.0); n];
    let mut dphi = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        let (a, da) = (conj_if(ur[j][0], minus), conj_if(ur[j][1], minus));
        let (b, db) = (conj_if(ul[j][0], minus), conj_if(ul[j][1], minus));
        phi[j] = c * dx * (a * il[j] + b * ir[j]);
        dphi[j] = c * dx * (da * il[j] + db * ir[j]);
    }
    Ok(ResolventSolution { phi, dphi, jost, sign })
}

/// `R(λ ± i0)ψ` for every mode of `psi`.
pub fn limiting_resolvent(model: &ManifoldModel, ops: &[ModeOperator], lambda: f64, psi: &RadialState, sign: f64) -> Result<RadialState> {
    let mut out = RadialState::zeros(psi.grid.clone(), psi.modes.clone());
    for (i, m) in psi.modes.iter().enumerate() {
        let op = ops
            .iter()
            .find(|o| o.m == *m)
            .ok_or_else(|| Error::Validation(format!("no operator for mode {m}")))?;
        out.data[i] = limiting_resolvent_mode(model, op, lambda, &psi.data[i], sign, None)?.phi;
    }
    Ok(out)
}

/// Fourth-order central derivative on the grid (second order at the edges).
pub fn grid_derivative(grid: &RadialGrid, u: &[C64]) -> Vec<C64> {
    let n = u.len();
    let h = grid.dx;
    let get = |j: i64| if j < 0 || j >= n as i64 { C64::new(0.0, 0.0) } else { u[j as usize] };
    (0..n as i64)
        .map(|j| {
            if j >= 2 && j < n as i64 - 2 {
                (get(j - 2) - get(j - 1) * 8.0 + get(j + 1) * 8.0 - get(j + 2)) / (12.0 * h)
            } else {
                (get(j + 1) - get(j - 1)) / (2.0 * h)
            }
        })
        .collect()
}

/// Per-annulus `R_ν^{-1/2}‖F_ν r^β (A ∓ a)φ‖`, with `A = −i∂_r` on the ends.
pub fn radiation_profile(model: &ManifoldModel, phi: &RadialState, lambda: f64, sign: f64, beta: f64) -> Result<Vec<f64>> {
    let grid = &phi.grid;
    let top = grid.radius.iter().cloned().fold(0.0, f64::max);
    let mut acc = vec![0.0; annulus_index(top) + 1];
    let ctxs: Vec<_> = (0..model.n_ends()).map(|e| model.phase_ctx(lambda, e)).collect();
    let z = C64::new(lambda, 0.0);
    for d in &phi.data {
        let du = grid_derivative(grid, d);
        for j in 0..grid.n {
            let Some(e) = grid.end_of[j] else { continue };
            let r = grid.radius[j];
            let (ap, am) = ctxs[e].a_complex(z, r)?;
            let a = if sign > 0.0 { ap } else { am };
            let dr = du[j] * model.side(e);
            let v = (-I * dr - a * d[j]) * r.powf(beta);
            acc[annulus_index(r)] += v.norm_sqr();
        }
    }
    Ok(acc
        .iter()
        .enumerate()
        .map(|(nu, s)| (s * grid.dx).sqrt() / 2f64.powi(nu as i32).sqrt())
        .collect())
}

/// `‖r^β(A ∓ a)φ‖_{B*}`.
pub fn radiation_residual(model: &ManifoldModel, phi: &RadialState, lambda: f64, sign: f64, beta: f64) -> Result<f64> {
    Ok(radiation_profile(model, phi, lambda, sign, beta)?.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize)]
pub struct SommerfeldReport {
    /// `‖(H − λ)φ − ψ‖` on interior nodes, relative to `max(‖ψ‖, ‖φ‖·Δx²)`.
    pub equation_residual: f64,
    /// Outer-annulus coefficients of `(A ∓ a)φ`.
    pub radiation_tail: Vec<f64>,
    pub equation_ok: bool,
    pub radiation_ok: bool,
}

impl SommerfeldReport {
    pub fn passes(&self) -> bool {
        self.equation_ok && self.radiation_ok
    }
}

/// Checks the two characterizing conditions of `φ = R(λ ± i0)ψ`.
pub fn sommerfeld_check(model: &ManifoldModel, ops: &[ModeOperator], phi: &RadialState, psi: &RadialState, lambda: f64, sign: f64, tol_res: f64) -> Result<SommerfeldReport> {
    let grid = &phi.grid;
    let n = grid.n;
    let mut num = 0.0;
    for (i, m) in phi.modes.iter().enumerate() {
        let op = ops.iter().find(|o| o.m == *m).ok_or_else(|| Error::Validation(format!("no operator for mode {m}")))?;
        let mut hphi = vec![C64::new(0.0, 0.0); n];
        op.apply(&phi.data[i], &mut hphi);
        let src = psi.component(*m);
        for j in 2..n.saturating_sub(2) {
            let s = src.map(|v| v[j]).unwrap_or_default();
            num += (hphi[j] - phi.data[i][j] * lambda - s).norm_sqr();
        }
    }
    let scale = psi.norm().max(1e-300);
    let equation_residual = if psi.norm() == 0.0 && phi.norm() == 0.0 { 0.0 } else { (num * grid.dx).sqrt() / scale };
    let prof = radiation_profile(model, phi, lambda, sign, 0.0)?;
    let top = outermost_complete(grid).min(prof.len() - 1);
    let tail: Vec<f64> = prof[top.saturating_sub(2)..=top].to_vec();
    let radiation_ok = tail.iter().all(|v| *v == 0.0)
        || (tail.windows(2).all(|w| w[1] < w[0]) && tail[tail.len() - 1] <= 0.25 * tail[0]);
    Ok(SommerfeldReport { equation_residual, equation_ok: equation_residual <= tol_res, radiation_tail: tail, radiation_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{EndSpec, ModelParams, Profile};
    use crate::mode_reduction::{reduce, Stencil};
    use std::sync::Arc;

    #[test]
    fn free_line_jost_is_a_plane_wave() {
        let m = ManifoldModel::new(vec![EndSpec::new(Profile::Flat), EndSpec::new(Profile::Flat)], ModelParams::default()).unwrap();
        let g = Arc::new(RadialGrid::new(&m, &[20.0, 20.0], 0.1).unwrap());
        let lambda = 0.5;
        let jp = jost_pair(&m, &g, 0, lambda).unwrap();
        // u_R = e^{i∫b}; the cutoff on [r₀, 2r₀] removes exactly one radian.
        for x in [-5.0, 0.3, 7.0] {
            let u = jp.right.eval(x)[0];
            let exact = (I * (x - 3.0)).exp();
            assert!((u - exact).norm() < 1e-8, "{u} vs {exact}");
        }
        let w1 = jp.wronskian_at(-10.0);
        let w2 = jp.wronskian_at(10.0);
        assert!((w1 - w2).norm() < 1e-8 * w1.norm());
        let op = reduce(&m, 0, g.clone(), Stencil::Order4, 0, None).unwrap();
        let psi: Vec<C64> = g.xs().iter().map(|x| C64::new((-x * x * 4.0).exp(), 0.0)).collect();
        let sol = limiting_resolvent_mode(&m, &op, lambda, &psi, 1.0, Some(jp)).unwrap();
        // Free Green function (i/k) e^{ik|x − y|}, k = 1.
        let j = g.index_of(6.0);
        let x = g.x(j);
        let mut exact = C64::new(0.0, 0.0);
        for (jj, y) in g.xs().iter().enumerate() {
            exact += I * (I * (x - y).abs()).exp() * psi[jj] * g.dx;
        }
        assert!((sol.phi[j] - exact).norm() < 1e-8);
    }
}
