//! Comparison dynamics: the stationary point field, the oscillatory
//! integral `U^±(t)`, its stationary-phase leading term `U₀^±(t)`, and the
//! short-range and Dollard dynamics with their phase modifiers.
//!
//! All states are half-densities, so the density factor
//! `exp(−½∫Δr)` of the surface picture is absent from every formula here.

use crate::geometry::{ManifoldModel, PotentialClass};
use crate::mode_reduction::{RadialGrid, RadialState};
use crate::numerics::quad::{gauss_legendre, gl_fixed, integrate};
use crate::numerics::spline::CubicSpline;
use crate::resolvent::phase_integral;
use crate::{par_map, Error, Result, C64};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Energy dependence of one channel.
#[derive(Debug, Clone)]
pub enum Shape {
    /// `exp(1 − 1/(1 − s²))` on `(lo, hi)`, smooth.
    Bump { lo: f64, hi: f64 },
    /// `(1 − s²)³` on `(lo, hi)`, twice differentiable.
    Poly { lo: f64, hi: f64 },
    /// Smooth bump in the speed `√(2λ)` on `(lo, hi)`.
    VelocityBump { lo: f64, hi: f64 },
    /// Clamped cubic spline with zero values and slopes at both knot ends.
    Table(Arc<CubicSpline<C64>>),
    /// `e^{iθ(λ)}` times a base shape.
    Modulated { base: Box<Shape>, phase: Arc<CubicSpline<f64>> },
}

impl Shape {
    pub fn eval(&self, lambda: f64) -> C64 {
        match self {
            Shape::Bump { lo, hi } => {
                let s = (2.0 * lambda - lo - hi) / (hi - lo);
                if s.abs() >= 1.0 {
                    ZERO
                } else {
                    C64::new((1.0 - 1.0 / (1.0 - s * s)).exp(), 0.0)
                }
            }
            Shape::Poly { lo, hi } => {
                let s = (2.0 * lambda - lo - hi) / (hi - lo);
                if s.abs() >= 1.0 {
                    ZERO
                } else {
                    C64::new((1.0 - s * s).powi(3), 0.0)
                }
            }
            Shape::VelocityBump { lo, hi } => Shape::Bump { lo: *lo, hi: *hi }.eval((2.0 * lambda.max(0.0)).sqrt()),
            Shape::Table(sp) => sp.eval(lambda),
            Shape::Modulated { base, phase } => {
                let v = base.eval(lambda);
                if v == ZERO {
                    v
                } else {
                    v * (I * phase.eval(lambda)).exp()
                }
            }
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Shape::Bump { lo, hi } | Shape::Poly { lo, hi } => (*lo, *hi),
            Shape::VelocityBump { lo, hi } => (0.5 * lo * lo, 0.5 * hi * hi),
            Shape::Table(sp) => {
                let k = sp.knots();
                (k[0], k[k.len() - 1])
            }
            Shape::Modulated { base, .. } => base.support(),
        }
    }

    pub fn smoothness(&self) -> Smoothness {
        match self {
            Shape::Bump { .. } | Shape::VelocityBump { .. } => Smoothness::Smooth,
            Shape::Poly { .. } => Smoothness::C2,
            Shape::Table(_) => Smoothness::C1,
            Shape::Modulated { base, .. } => base.smoothness().min(Smoothness::C2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    C1,
    C2,
    Smooth,
}

#[derive(Debug, Clone)]
pub struct Channel {
    pub end: usize,
    pub m: i32,
    pub amp: C64,
    pub shape: Shape,
}

/// `h(λ)` on `I × (ends × modes)`; the norm is `(2π)^{-1}∫Σ|h|² dλ`.
#[derive(Debug, Clone, Default)]
pub struct SpectralProfile {
    pub channels: Vec<Channel>,
}

impl SpectralProfile {
    pub fn new(channels: Vec<Channel>) -> Result<Self> {
        for c in &channels {
            let (lo, hi) = c.shape.support();
            if !(hi > lo) {
                return Err(Error::Validation(format!("empty energy support [{lo}, {hi}] for end {}, mode {}", c.end, c.m)));
            }
        }
        Ok(Self { channels })
    }

    /// Single smooth bump on `(lo, hi)` for one end and mode.
    pub fn bump(end: usize, m: i32, lo: f64, hi: f64, amp: C64) -> Self {
        Self { channels: vec![Channel { end, m, amp, shape: Shape::Bump { lo, hi } }] }
    }

    /// Tabulated profile: per (end, mode) samples on a common increasing
    /// energy grid; the first and last samples must vanish.
    pub fn from_table(lambdas: Vec<f64>, rows: Vec<(usize, i32, Vec<C64>)>) -> Result<Self> {
        if lambdas.len() < 4 || !lambdas.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Validation("profile energies must be increasing, at least 4 samples".into()));
        }
        let mut channels = Vec::new();
        for (end, m, vals) in rows {
            if vals.len() != lambdas.len() {
                return Err(Error::Validation(format!("profile row for end {end}, mode {m} has {} values, expected {}", vals.len(), lambdas.len())));
            }
            if vals[0].norm() > 0.0 || vals[vals.len() - 1].norm() > 0.0 {
                return Err(Error::Validation(format!("profile row for end {end}, mode {m} must vanish at both ends of the energy grid")));
            }
            let sp = CubicSpline::clamped(lambdas.clone(), vals, ZERO, ZERO, true);
            channels.push(Channel { end, m, amp: C64::new(1.0, 0.0), shape: Shape::Table(Arc::new(sp)) });
        }
        Self::new(channels)
    }

    pub fn is_zero(&self) -> bool {
        self.channels.iter().all(|c| c.amp == ZERO)
    }

    /// `h_{end,m}(λ)`.
    pub fn eval(&self, end: usize, m: i32, lambda: f64) -> C64 {
        self.channels
            .iter()
            .filter(|c| c.end == end && c.m == m)
            .map(|c| c.amp * c.shape.eval(lambda))
            .fold(ZERO, |a, b| a + b)
    }

    /// Distinct (end, mode) pairs in first-appearance order.
    pub fn keys(&self) -> Vec<(usize, i32)> {
        let mut out: Vec<(usize, i32)> = Vec::new();
        for c in &self.channels {
            if !out.contains(&(c.end, c.m)) {
                out.push((c.end, c.m));
            }
        }
        out
    }

    pub fn modes(&self) -> Vec<i32> {
        let mut out: Vec<i32> = Vec::new();
        for c in &self.channels {
            if !out.contains(&c.m) {
                out.push(c.m);
            }
        }
        out.sort();
        out
    }

    /// Energy support of the channels on `end`.
    pub fn support_on(&self, end: usize) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in self.channels.iter().filter(|c| c.end == end && c.amp != ZERO) {
            let (a, b) = c.shape.support();
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (hi > lo).then_some((lo, hi))
    }

    pub fn smoothness(&self) -> Smoothness {
        self.channels.iter().map(|c| c.shape.smoothness()).min().unwrap_or(Smoothness::Smooth)
    }

    pub fn norm_sqr(&self) -> f64 {
        let mut s = 0.0;
        for (e, m) in self.keys() {
            let Some((lo, hi)) = self.support_on(e) else { continue };
            let mut knots: Vec<f64> = vec![lo, hi];
            for c in self.channels.iter().filter(|c| c.end == e && c.m == m) {
                if let Shape::Table(sp) = &c.shape {
                    knots.extend_from_slice(sp.knots());
                }
            }
            knots.sort_by(|a, b| a.total_cmp(b));
            knots.dedup();
            for w in knots.windows(2) {
                s += integrate(|l| self.eval(e, m, l).norm_sqr(), w[0], w[1], 1e-16, 1e-13, 2000).map(|q| q.value).unwrap_or(f64::NAN);
            }
        }
        s / (2.0 * PI)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `h̄`.
    pub fn conj(&self) -> Self {
        let channels = self
            .channels
            .iter()
            .map(|c| {
                let shape = match &c.shape {
                    Shape::Table(sp) => {
                        let v: Vec<C64> = sp.values().iter().map(|z| z.conj()).collect();
                        Shape::Table(Arc::new(CubicSpline::clamped(sp.knots().to_vec(), v, ZERO, ZERO, true)))
                    }
                    Shape::Modulated { base, phase } => {
                        let k = phase.knots().to_vec();
                        let v: Vec<f64> = phase.values().iter().map(|p| -p).collect();
                        let base = match base.as_ref() {
                            Shape::Bump { .. } | Shape::Poly { .. } | Shape::VelocityBump { .. } => base.clone(),
                            other => Box::new(SpectralProfile { channels: vec![Channel { end: 0, m: 0, amp: C64::new(1.0, 0.0), shape: other.clone() }] }.conj().channels.remove(0).shape),
                        };
                        Shape::Modulated { base, phase: Arc::new(CubicSpline::new(k, v, false)) }
                    }
                    other => other.clone(),
                };
                Channel { end: c.end, m: c.m, amp: c.amp.conj(), shape }
            })
            .collect();
        Self { channels }
    }

    /// Multiplies the channels of `end` by `e^{iθ(λ)}`.
    pub fn modulate(&self, end: usize, phase: Arc<CubicSpline<f64>>) -> Self {
        let channels = self
            .channels
            .iter()
            .map(|c| {
                if c.end != end {
                    return c.clone();
                }
                Channel { end: c.end, m: c.m, amp: c.amp, shape: Shape::Modulated { base: Box::new(c.shape.clone()), phase: phase.clone() } }
            })
            .collect();
        Self { channels }
    }
}

/// Parameters `(λ₁, r₁)` of the stationary-phase construction on one end.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CompParams {
    pub end: usize,
    pub lambda1: f64,
    pub r1: f64,
}

/// Chooses `λ₁` below the energy support and `r₁` as the smallest grid
/// radius with `r₁ ≥ max(r₀, sup_{λ ≥ λ₁} r_λ)`.
pub fn choose_params(model: &ManifoldModel, grid: &RadialGrid, h: &SpectralProfile) -> Result<Vec<CompParams>> {
    let mut out = Vec::new();
    for e in 0..model.n_ends() {
        let Some((lo, hi)) = h.support_on(e) else { continue };
        if let Some((_, m)) = h.keys().into_iter().find(|&(end, m)| end == e && model.channel_energy(1.0, e, m) != 1.0) {
            return Err(Error::Validation(format!("comparison dynamics need a decaying centrifugal term; mode {m} on end {e} has a nonzero limit")));
        }
        let l0 = model.lambda0_end(e);
        if lo <= l0 {
            return Err(Error::Domain(format!("energy support of end {e} starts at {lo}, not above lambda0 = {l0}")));
        }
        let lambda1 = l0 + 0.75 * (lo - l0);
        let mut rl: f64 = 0.0;
        let mut l = lambda1;
        while l <= 4.0 * hi.max(1.0) {
            rl = rl.max(model.r_lambda(l, e));
            l += 0.05 * (hi - lambda1).max(1e-3);
        }
        let target = rl.max(model.r0());
        let r1 = grid
            .end_nodes(e, target)
            .into_iter()
            .map(|j| grid.radius[j])
            .fold(f64::INFINITY, f64::min);
        if !r1.is_finite() {
            return Err(Error::Validation(format!("grid on end {e} does not reach r = {target}")));
        }
        out.push(CompParams { end: e, lambda1, r1 });
    }
    Ok(out)
}

/// `∫_{r₁}^r [2(λ − q₁)]^{-1/2}` and `∫_{r₁}^r [2(λ − q₁)]^{-3/2}`.
fn travel_integrals(model: &ManifoldModel, end: usize, lambda: f64, r1: f64, r: f64) -> Result<(f64, f64)> {
    let q = integrate(
        |s: f64| {
            let w = 2.0 * (lambda - model.q1(s, end));
            C64::new(w.powf(-0.5), w.powf(-1.5))
        },
        r1,
        r,
        0.0,
        1e-14,
        4000,
    )?;
    Ok((q.value.re, q.value.im))
}

/// `∂_λΘ₁(λ, t, r) = ∫_{r₁}^r [2(λ − q₁)]^{-1/2} − t`.
pub fn dlambda_theta1(model: &ManifoldModel, end: usize, lambda: f64, t: f64, r: f64, r1: f64) -> Result<f64> {
    Ok(travel_integrals(model, end, lambda, r1, r)?.0 - t)
}

/// Stationary point with its derivatives.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StationaryPoint {
    pub lambda_c: f64,
    pub dr_lambda: f64,
    pub dt_lambda: f64,
    pub residual: f64,
}

/// Solves `∂_λΘ₁(λ_c, t, r) = 0` for `λ_c > λ₁` by safeguarded Newton.
pub fn stationary_point(model: &ManifoldModel, end: usize, t: f64, r: f64, p: &CompParams) -> Result<StationaryPoint> {
    if !(t > 0.0) || r <= p.r1 {
        return Err(Error::OutsideRegion(format!("(t, r) = ({t}, {r}) needs t > 0 and r > r1 = {}", p.r1)));
    }
    let d1 = dlambda_theta1(model, end, p.lambda1, t, r, p.r1)?;
    if !(d1 > 0.0) {
        return Err(Error::OutsideRegion(format!("d_lambda Theta1(lambda1) = {d1} <= 0 at (t, r) = ({t}, {r})")));
    }
    let l0 = model.lambda0_end(end);
    let mut lo = p.lambda1;
    let mut hi = (l0 + (r - p.r1).powi(2) / (2.0 * t * t)).max(p.lambda1) * 2.0 + 1.0;
    let mut guard = 0;
    while dlambda_theta1(model, end, hi, t, r, p.r1)? > 0.0 {
        lo = hi;
        hi *= 4.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::Domain(format!("no stationary point bracket at (t, r) = ({t}, {r})")));
        }
    }
    let mut x = (l0 + (r - p.r1).powi(2) / (2.0 * t * t)).clamp(lo, hi);
    if x <= lo || x >= hi {
        x = 0.5 * (lo + hi);
    }
    let mut last = (0.0, 1.0);
    for _ in 0..200 {
        let (a, b) = travel_integrals(model, end, x, p.r1, r)?;
        let f = a - t;
        last = (f, -b);
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = f / b;
        let mut nx = x + step;
        if !(nx > lo && nx < hi) {
            nx = 0.5 * (lo + hi);
        }
        let done = (nx - x).abs() <= 1e-15 * x.abs().max(1e-300) || hi - lo <= 4e-16 * x.abs();
        x = nx;
        if done {
            break;
        }
    }
    let (a, b) = travel_integrals(model, end, x, p.r1, r)?;
    let residual = a - t;
    let _ = last;
    if residual.abs() > 1e-10 * t {
        return Err(Error::nonconv(format!("stationary point at (t, r) = ({t}, {r})"), vec![residual]));
    }
    // Implicit differentiation of ∂_λΘ₁ = 0.
    let dprime = -b;
    let br = (2.0 * (x - model.q1(r, end))).sqrt();
    let dr_lambda = -(1.0 / br) / dprime;
    let dt_lambda = 1.0 / dprime;
    Ok(StationaryPoint { lambda_c: x, dr_lambda, dt_lambda, residual })
}

/// `Θ₁(λ, t, r) = ∫_{r₁}^r b_λ − tλ` (no cutoff beyond `r₁`).
pub fn theta1(model: &ManifoldModel, end: usize, lambda: f64, t: f64, r: f64, r1: f64) -> Result<f64> {
    let q = integrate(|s: f64| (2.0 * (lambda - model.q1(s, end))).sqrt(), r1, r, 0.0, 1e-15, 4000)?;
    Ok(q.value - t * lambda)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EikonalReport {
    pub k1: f64,
    pub lambda_c: f64,
    pub dt_k1: f64,
    pub dr_k1: f64,
    /// `∂_tK₁ + λ_c`.
    pub dt_identity: f64,
    /// `∂_rK₁ − b_{λ_c}`.
    pub dr_identity: f64,
    /// `∂_tK₁ + ½(∂_rK₁)² + q₁`.
    pub hj_residual: f64,
}

/// `K₁ = Θ₁(λ_c)` with five-point finite-difference checks of its
/// derivative identities and the Hamilton–Jacobi equation.
pub fn eikonal(model: &ManifoldModel, end: usize, t: f64, r: f64, p: &CompParams) -> Result<EikonalReport> {
    let k = |t: f64, r: f64| -> Result<f64> {
        let sp = stationary_point(model, end, t, r, p)?;
        theta1(model, end, sp.lambda_c, t, r, p.r1)
    };
    let sp = stationary_point(model, end, t, r, p)?;
    let k1 = theta1(model, end, sp.lambda_c, t, r, p.r1)?;
    let ht = 1e-3 * t;
    let hr = 1e-3 * (r - p.r1).min(r);
    let d5 = |f: &dyn Fn(f64) -> Result<f64>, x: f64, h: f64| -> Result<f64> {
        Ok((f(x - 2.0 * h)? - 8.0 * f(x - h)? + 8.0 * f(x + h)? - f(x + 2.0 * h)?) / (12.0 * h))
    };
    let dt_k1 = d5(&|s| k(s, r), t, ht)?;
    let dr_k1 = d5(&|s| k(t, s), r, hr)?;
    let b = (2.0 * (sp.lambda_c - model.q1(r, end))).sqrt();
    Ok(EikonalReport {
        k1,
        lambda_c: sp.lambda_c,
        dt_k1,
        dr_k1,
        dt_identity: dt_k1 + sp.lambda_c,
        dr_identity: dr_k1 - b,
        hj_residual: dt_k1 + 0.5 * dr_k1 * dr_k1 + model.q1(r, end),
    })
}

/// Stationary data on the grid nodes of one end at one time.
#[derive(Debug, Clone, Serialize)]
pub struct StationarySlice {
    pub t: f64,
    pub end: usize,
    pub params: CompParams,
    pub nodes: Vec<usize>,
    pub radius: Vec<f64>,
    /// `None` outside `Ω_c(t)`.
    pub points: Vec<Option<StationaryPoint>>,
    /// `K = Θ(λ_c) = K₁ + ∫_{r₀}^{r₁} b̃_{λ_c}` on `Ω_c(t)`.
    pub k: Vec<f64>,
}

/// Stationary field over `(t, r)` on the ends carrying `h`.
#[derive(Debug, Clone, Serialize)]
pub struct StationaryField {
    pub slices: Vec<StationarySlice>,
}

/// Builds the stationary data on every node of `end` at time `t`, limited
/// to energies up to `lambda_max` (nodes beyond are left outside).
pub fn stationary_slice(model: &ManifoldModel, grid: &RadialGrid, t: f64, p: &CompParams, lambda_max: f64) -> Result<StationarySlice> {
    let e = p.end;
    let mut nodes = grid.end_nodes(e, p.r1);
    nodes.retain(|&j| grid.radius[j] > p.r1);
    nodes.sort_by(|a, b| grid.radius[*a].total_cmp(&grid.radius[*b]));
    let radius: Vec<f64> = nodes.iter().map(|&j| grid.radius[j]).collect();
    // Ω_c and the energy cap are monotone in r: λ_c increases with r.
    let res = par_map(radius.len(), |i| -> Result<(Option<StationaryPoint>, f64)> {
        let r = radius[i];
        if dlambda_theta1(model, e, p.lambda1, t, r, p.r1)? <= 0.0 {
            return Ok((None, 0.0));
        }
        if dlambda_theta1(model, e, lambda_max, t, r, p.r1)? > 0.0 {
            return Ok((None, 0.0));
        }
        let sp = stationary_point(model, e, t, r, p)?;
        let k1 = theta1(model, e, sp.lambda_c, t, r, p.r1)?;
        let shift = phase_integral(model, sp.lambda_c, e, p.r1)?;
        Ok((Some(sp), k1 + shift))
    });
    let mut points = Vec::with_capacity(res.len());
    let mut k = Vec::with_capacity(res.len());
    for v in res {
        let (a, b) = v?;
        points.push(a);
        k.push(b);
    }
    Ok(StationarySlice { t, end: e, params: *p, nodes, radius, points, k })
}

pub fn stationary_field(model: &ManifoldModel, grid: &RadialGrid, h: &SpectralProfile, times: &[f64]) -> Result<StationaryField> {
    let params = choose_params(model, grid, h)?;
    let mut slices = Vec::new();
    for &t in times {
        for p in &params {
            let hi = h.support_on(p.end).map(|s| s.1).unwrap_or(p.lambda1);
            slices.push(stationary_slice(model, grid, t, p, hi)?);
        }
    }
    Ok(StationaryField { slices })
}

fn phase_sign(sign: f64) -> f64 {
    if sign >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `U₀^±(t)h`: `(2π)^{-1/2} e^{∓3πi/4} 1_{Ω_c} e^{±iK} (∂_rλ_c)^{1/2} h(λ_c)`.
pub fn leading_term(model: &ManifoldModel, grid: &Arc<RadialGrid>, h: &SpectralProfile, t: f64, sign: f64) -> Result<RadialState> {
    let s = phase_sign(sign);
    let params = choose_params(model, grid, h)?;
    let mut out = RadialState::zeros(grid.clone(), h.modes());
    if h.is_zero() {
        return Ok(out);
    }
    if !(t > 0.0) {
        return Err(Error::Domain("leading term needs t > 0".into()));
    }
    let pre = (2.0 * PI).powf(-0.5) * (-I * s * 0.75 * PI).exp();
    for p in &params {
        let (_, hi) = h.support_on(p.end).unwrap();
        let sl = stationary_slice(model, grid, t, p, hi)?;
        fill_leading(&sl, h, pre, s, &mut out);
    }
    Ok(out)
}

fn fill_leading(sl: &StationarySlice, h: &SpectralProfile, pre: C64, s: f64, out: &mut RadialState) {
    for (i, pt) in sl.points.iter().enumerate() {
        let Some(pt) = pt else { continue };
        let j = sl.nodes[i];
        let amp = pre * (I * s * sl.k[i]).exp() * pt.dr_lambda.sqrt();
        for (mi, m) in out.modes.clone().iter().enumerate() {
            let hv = h.eval(sl.end, *m, pt.lambda_c);
            if hv != ZERO {
                out.data[mi][j] = amp * hv;
            }
        }
    }
}

/// `U₀^±(t)h` from a precomputed field slice set (same `h`).
pub fn leading_term_from_field(grid: &Arc<RadialGrid>, h: &SpectralProfile, field: &StationaryField, t: f64, sign: f64) -> RadialState {
    let s = phase_sign(sign);
    let pre = (2.0 * PI).powf(-0.5) * (-I * s * 0.75 * PI).exp();
    let mut out = RadialState::zeros(grid.clone(), h.modes());
    for sl in field.slices.iter().filter(|sl| sl.t == t) {
        fill_leading(sl, h, pre, s, &mut out);
    }
    out
}

/// Quadrature bookkeeping of [`comparison_state`].
#[derive(Debug, Clone, Serialize)]
pub struct OscillatoryReport {
    pub samples: usize,
    /// Largest change on the check nodes when the sample count doubled.
    pub check_change: f64,
}

/// Options of the oscillatory quadrature.
#[derive(Debug, Clone, Copy)]
pub struct OscillatoryOptions {
    pub points_per_oscillation: f64,
    pub tol: f64,
    pub max_samples: usize,
}

impl Default for OscillatoryOptions {
    fn default() -> Self {
        Self { points_per_oscillation: 20.0, tol: 1e-8, max_samples: 1 << 18 }
    }
}

/// Trapezoid sum over `n + 1` equispaced energies of the integrand of
/// `U^±(t)h` at the given end nodes, for every mode.
fn oscillatory_sum(model: &ManifoldModel, grid: &RadialGrid, h: &SpectralProfile, end: usize, nodes: &[usize], modes: &[i32], lo: f64, hi: f64, n: usize, t: f64, s: f64) -> Vec<Vec<C64>> {
    let radii: Vec<f64> = nodes.iter().map(|&j| grid.radius[j]).collect();
    let r0 = model.r0();
    let rule = gauss_legendre(3);
    let dl = (hi - lo) / n as f64;
    let chunks = 64.min(n - 1).max(1);
    let per = (n - 1).div_ceil(chunks);
    let partial = par_map(chunks, |c| {
        let mut acc = vec![vec![ZERO; radii.len()]; modes.len()];
        let k0 = 1 + c * per;
        let k1 = (k0 + per).min(n);
        for k in k0..k1 {
            let lambda = lo + k as f64 * dl;
            let hv: Vec<C64> = modes.iter().map(|m| h.eval(end, *m, lambda)).collect();
            if hv.iter().all(|v| *v == ZERO) {
                continue;
            }
            let ctx = model.phase_ctx(lambda, end);
            let tphase = (-I * s * t * lambda).exp();
            let mut at = r0;
            let mut phase = 0.0;
            for (i, &r) in radii.iter().enumerate() {
                if r > at {
                    let pieces = ((r - at) / 0.25).ceil() as usize;
                    let hh = (r - at) / pieces as f64;
                    for q in 0..pieces {
                        let a = at + q as f64 * hh;
                        phase += gl_fixed(&rule, a, a + hh, |x| ctx.b(x));
                    }
                    at = r;
                }
                let eta = ctx.eta(r);
                if eta == 0.0 {
                    continue;
                }
                let amp = eta * (2.0 * (lambda - model.q1(r, end))).powf(-0.25);
                let w = tphase * (I * s * phase).exp() * amp;
                for (mi, v) in hv.iter().enumerate() {
                    acc[mi][i] += w * *v;
                }
            }
        }
        acc
    });
    let mut total = vec![vec![ZERO; radii.len()]; modes.len()];
    for part in partial {
        for (mi, row) in part.into_iter().enumerate() {
            for (i, v) in row.into_iter().enumerate() {
                total[mi][i] += v;
            }
        }
    }
    let pref = 1.0 / (I * s * 2.0 * PI) * dl;
    for row in total.iter_mut() {
        for v in row.iter_mut() {
            *v *= pref;
        }
    }
    total
}

/// `U^±(t)h = (±2πi)^{-1}∫ e^{∓itλ} φ^±_λ[h(λ)] dλ` on the grid, by a
/// trapezoid rule with at least `points_per_oscillation` samples per period
/// of the phase; the sample count doubles until a subset of check nodes
/// moves by less than `tol·‖h‖`.
pub fn comparison_state(model: &ManifoldModel, grid: &Arc<RadialGrid>, h: &SpectralProfile, t: f64, sign: f64, opts: &OscillatoryOptions) -> Result<(RadialState, OscillatoryReport)> {
    let s = phase_sign(sign);
    let modes = h.modes();
    let mut out = RadialState::zeros(grid.clone(), modes.clone());
    let mut report = OscillatoryReport { samples: 0, check_change: 0.0 };
    if h.is_zero() {
        return Ok((out, report));
    }
    let hnorm = h.norm().max(1e-300);
    for e in 0..model.n_ends() {
        let Some((lo, hi)) = h.support_on(e) else { continue };
        let mut nodes = grid.end_nodes(e, model.r0());
        nodes.sort_by(|a, b| grid.radius[*a].total_cmp(&grid.radius[*b]));
        if nodes.is_empty() {
            continue;
        }
        let rmax = nodes.iter().map(|&j| grid.radius[j]).fold(0.0, f64::max);
        let bmin = (2.0 * (lo - model.lambda0_end(e))).sqrt().max(1e-3);
        let slope = t + (rmax - model.r0()) / bmin;
        let osc = slope * (hi - lo) / (2.0 * PI);
        let mut n = ((opts.points_per_oscillation * osc).ceil() as usize).max(64);
        let check: Vec<usize> = nodes.iter().cloned().step_by(17).collect();
        let mut change = f64::INFINITY;
        let mut prev = oscillatory_sum(model, grid, h, e, &check, &modes, lo, hi, n, t, s);
        while n * 2 <= opts.max_samples {
            let next = oscillatory_sum(model, grid, h, e, &check, &modes, lo, hi, 2 * n, t, s);
            change = prev.iter().flatten().zip(next.iter().flatten()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            n *= 2;
            prev = next;
            if change <= opts.tol * hnorm {
                break;
            }
        }
        if change > opts.tol * hnorm {
            return Err(Error::Budget(format!("oscillatory quadrature at t = {t} did not settle within {} samples (change {change:e})", opts.max_samples)));
        }
        let vals = oscillatory_sum(model, grid, h, e, &nodes, &modes, lo, hi, n, t, s);
        for (mi, row) in vals.into_iter().enumerate() {
            for (i, v) in row.into_iter().enumerate() {
                out.data[mi][nodes[i]] = v;
            }
        }
        report.samples = report.samples.max(n);
        report.check_change = report.check_change.max(change);
    }
    Ok((out, report))
}

/// Simplified dynamics of short-range or Dollard type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimpleKind {
    Sr,
    Do,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimpleState {
    pub state: RadialState,
    /// Ends whose class does not match the requested kind.
    pub class_mismatch: Vec<usize>,
}

/// `∫_{r₀}^r (q₁ − λ₀)` at sorted radii.
fn q1_excess_integral(model: &ManifoldModel, end: usize, radii: &[f64]) -> Vec<f64> {
    let r0 = model.r0();
    let l0 = model.lambda0_end(end);
    let rule = gauss_legendre(6);
    let mut at = r0;
    let mut acc = 0.0;
    radii
        .iter()
        .map(|&r| {
            if r > at {
                let pieces = ((r - at) / 0.5).ceil() as usize;
                let hh = (r - at) / pieces as f64;
                for q in 0..pieces {
                    let a = at + q as f64 * hh;
                    acc += gl_fixed(&rule, a, a + hh, |x| model.q1(x, end) - l0);
                }
                at = r;
            }
            acc
        })
        .collect()
}

/// `U_sr^±(t)h` or `U_do^±(t)h`:
/// `(2π)^{-1/2} e^{∓3πi/4} 1_{r ≥ r₀} e^{±iK} ((r − r₀)/t²)^{1/2} h((r − r₀)²/(2t²) + λ₀)`.
pub fn simple_state(model: &ManifoldModel, grid: &Arc<RadialGrid>, h: &SpectralProfile, t: f64, sign: f64, kind: SimpleKind) -> Result<SimpleState> {
    if !(t > 0.0) {
        return Err(Error::Domain("simplified dynamics need t > 0".into()));
    }
    let s = phase_sign(sign);
    let modes = h.modes();
    let mut out = RadialState::zeros(grid.clone(), modes.clone());
    let mut class_mismatch = Vec::new();
    let pre = (2.0 * PI).powf(-0.5) * (-I * s * 0.75 * PI).exp();
    let r0 = model.r0();
    for e in 0..model.n_ends() {
        if h.support_on(e).is_none() {
            continue;
        }
        let ok = match kind {
            SimpleKind::Sr => model.class_of(e) == PotentialClass::ShortRange,
            SimpleKind::Do => model.class_of(e) != PotentialClass::LongRange,
        };
        if !ok {
            class_mismatch.push(e);
        }
        let l0 = model.lambda0_end(e);
        let mut nodes = grid.end_nodes(e, r0);
        nodes.sort_by(|a, b| grid.radius[*a].total_cmp(&grid.radius[*b]));
        let radii: Vec<f64> = nodes.iter().map(|&j| grid.radius[j]).collect();
        let qint = if kind == SimpleKind::Do { q1_excess_integral(model, e, &radii) } else { vec![0.0; radii.len()] };
        for (i, &j) in nodes.iter().enumerate() {
            let d = radii[i] - r0;
            if d <= 0.0 {
                continue;
            }
            let mut k = d * d / (2.0 * t) - t * l0;
            if kind == SimpleKind::Do {
                k -= t / d * qint[i];
            }
            let lam = d * d / (2.0 * t * t) + l0;
            let amp = pre * (I * s * k).exp() * (d / (t * t)).sqrt();
            for (mi, m) in modes.iter().enumerate() {
                let hv = h.eval(e, *m, lam);
                if hv != ZERO {
                    out.data[mi][j] = amp * hv;
                }
            }
        }
    }
    Ok(SimpleState { state: out, class_mismatch })
}

pub fn shortrange_state(model: &ManifoldModel, grid: &Arc<RadialGrid>, h: &SpectralProfile, t: f64, sign: f64) -> Result<SimpleState> {
    simple_state(model, grid, h, t, sign, SimpleKind::Sr)
}

pub fn dollard_state(model: &ManifoldModel, grid: &Arc<RadialGrid>, h: &SpectralProfile, t: f64, sign: f64) -> Result<SimpleState> {
    simple_state(model, grid, h, t, sign, SimpleKind::Do)
}

/// `b_sr = √(2(λ − λ₀))` or `b_do = b_sr + (λ₀ − q₁)/b_sr` at radius `r`.
pub fn simple_phase(model: &ManifoldModel, lambda: f64, end: usize, r: f64, kind: SimpleKind) -> f64 {
    let l0 = model.lambda0_end(end);
    let bsr = (2.0 * (lambda - l0)).sqrt();
    match kind {
        SimpleKind::Sr => bsr,
        SimpleKind::Do => bsr + (l0 - model.q1(r, end)) / bsr,
    }
}

/// `θ = ∫_{r₀}^∞ (b_kind − b̃)` measured against the cutoff phase `b̃`,
/// so that `F_kind^± = e^{∓iθ}F^±` with the transforms of [`crate::fourier`].
///
/// Dyadic shell integrals past `r_λ` must shrink with a fitted decay
/// exponent below −0.05 (in the shell index, log base 2) or the tail is
/// declared divergent; the remainder past the horizon is summed shell by
/// shell and closed with the geometric series of the fitted ratio.
pub fn phase_modifier(model: &ManifoldModel, lambda: f64, end: usize, kind: SimpleKind) -> Result<f64> {
    let l0 = model.lambda0_end(end);
    if lambda <= l0 {
        return Err(Error::Domain(format!("lambda = {lambda} must exceed lambda0 = {l0} of end {end}")));
    }
    let ctx = model.phase_ctx(lambda, end);
    let r0 = model.r0();
    let f = |r: f64| {
        let bk = simple_phase(model, lambda, end, r, kind);
        if ctx.eta(r) < 1.0 {
            return bk - ctx.b(r);
        }
        // b_kind − b without cancellation in the far region.
        let b = ctx.b_bare(r);
        let bsr = (2.0 * (lambda - l0)).sqrt();
        let q = model.q1(r, end) - l0;
        match kind {
            SimpleKind::Sr => 2.0 * q / (bsr + b),
            SimpleKind::Do => 2.0 * q * q / (bsr * (bsr + b) * (bsr + b)),
        }
    };
    let r_lam = ctx.r_lambda;
    let mut total = integrate(f, r0, r_lam, 1e-14, 1e-13, 4000)?.value;
    let mut shells = Vec::new();
    let mut r = r_lam;
    let horizon = model.params.horizon;
    while r < horizon {
        let v = integrate(f, r, 2.0 * r, 1e-16, 1e-13, 4000)?.value;
        shells.push(v);
        total += v;
        r *= 2.0;
    }
    let tail_n = shells.len().min(8);
    let tail = &shells[shells.len() - tail_n..];
    let mags: Vec<f64> = tail.iter().map(|v| v.abs().max(1e-300)).collect();
    if mags.iter().all(|m| *m < 1e-15) {
        return Ok(total);
    }
    let xs: Vec<f64> = (0..tail_n).map(|i| i as f64).collect();
    let ys: Vec<f64> = mags.iter().map(|m| m.log2()).collect();
    let (slope, _) = crate::numerics::linear_fit(&xs, &ys);
    if slope > -0.05 {
        return Err(Error::Divergent(format!("shell integrals of the {kind:?} phase difference do not decay (log2 slope {slope:.3}) on end {end}")));
    }
    // Past the horizon the shells keep their fitted ratio; sum them until
    // negligible and close with the geometric remainder.
    let ratio = slope.exp2();
    let mut last = *shells.last().unwrap();
    for _ in 0..400 {
        if last.abs() <= 1e-17 * total.abs().max(1e-300) {
            break;
        }
        last = integrate(f, r, 2.0 * r, 1e-18, 1e-13, 4000)?.value;
        total += last;
        r *= 2.0;
    }
    Ok(total + last * ratio / (1.0 - ratio))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{EndSpec, ModelParams, Profile, RadialFn};

    fn model_a() -> ManifoldModel {
        ManifoldModel::new(vec![EndSpec::new(Profile::Euclidean), EndSpec::new(Profile::Euclidean)], ModelParams::default()).unwrap()
    }

    fn model_c() -> ManifoldModel {
        ManifoldModel::new(
            vec![EndSpec::new(Profile::Euclidean).with_long(RadialFn::Power { c: 1.0, p: 0.8 }), EndSpec::new(Profile::Euclidean)],
            ModelParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn stationary_point_is_exact_for_free_tail() {
        let m = model_a();
        let p = CompParams { end: 1, lambda1: 0.1, r1: 4.0 };
        for (t, r) in [(10.0, 20.0), (100.0, 130.0), (7.0, 9.5)] {
            let sp = stationary_point(&m, 1, t, r, &p).unwrap();
            let exact = (r - 4.0f64).powi(2) / (2.0 * t * t);
            assert!((sp.lambda_c - exact).abs() <= 1e-12 * exact.max(1.0), "{} vs {exact}", sp.lambda_c);
            assert!(sp.dr_lambda > 0.0);
            let ek = eikonal(&m, 1, t, r, &p).unwrap();
            assert!((ek.k1 - (r - 4.0).powi(2) / (2.0 * t)).abs() < 1e-9 * ek.k1.abs().max(1.0));
            assert!(ek.hj_residual.abs() < 1e-6);
        }
        assert!(matches!(stationary_point(&m, 1, 10.0, 4.5, &p), Err(Error::OutsideRegion(_))));
    }

    #[test]
    fn dollard_stationary_point_obeys_two_sided_bound() {
        let m = model_c();
        let p = CompParams { end: 0, lambda1: 0.2, r1: 40.0 };
        for (t, r) in [(20.0, 70.0), (50.0, 120.0), (100.0, 200.0)] {
            let sp = stationary_point(&m, 0, t, r, &p).unwrap();
            let ratio = (sp.lambda_c - m.lambda0_end(0)) * t * t / (r - p.r1).powi(2);
            assert!(ratio > 0.0 && ratio <= 1.0, "{ratio}");
            let ek = eikonal(&m, 0, t, r, &p).unwrap();
            assert!(ek.hj_residual.abs() < 1e-6, "{}", ek.hj_residual);
            assert!(ek.dt_identity.abs() < 1e-6);
        }
    }

    #[test]
    fn leading_term_is_isometric() {
        let m = model_a();
        let g = Arc::new(RadialGrid::new(&m, &[20.0, 160.0], 0.02).unwrap());
        let h = SpectralProfile::bump(1, 0, 0.3, 0.7, C64::new(1.0, 0.5));
        for t in [10.0, 100.0] {
            let u = leading_term(&m, &g, &h, t, 1.0).unwrap();
            assert!((u.norm() - h.norm()).abs() < 1e-8, "t = {t}: {} vs {}", u.norm(), h.norm());
        }
    }

    #[test]
    fn comparison_state_obeys_time_reversal_and_approaches_leading_term() {
        let m = model_a();
        let g = Arc::new(RadialGrid::new(&m, &[20.0, 500.0], 0.05).unwrap());
        let h = SpectralProfile::bump(1, 0, 0.3, 0.7, C64::new(1.0, 0.0));
        let opts = OscillatoryOptions::default();
        let (up, _) = comparison_state(&m, &g, &h, 20.0, 1.0, &opts).unwrap();
        let (um, _) = comparison_state(&m, &g, &h.conj(), 20.0, -1.0, &opts).unwrap();
        assert!(up.conj().sub(&um).norm() < 1e-12);
        let gap = |t: f64| {
            let (u, _) = comparison_state(&m, &g, &h, t, 1.0, &opts).unwrap();
            u.sub(&leading_term(&m, &g, &h, t, 1.0).unwrap()).norm() / h.norm()
        };
        let (early, late) = (gap(20.0), gap(320.0));
        assert!(late < 0.3 && late < 0.5 * early, "{early} -> {late}");
    }

    #[test]
    fn shortrange_modulus_matches_closed_form() {
        let m = model_a();
        let g = Arc::new(RadialGrid::new(&m, &[20.0, 100.0], 0.05).unwrap());
        let h = SpectralProfile::bump(1, 0, 0.3, 0.7, C64::new(1.0, 0.0));
        let t = 30.0;
        let s = shortrange_state(&m, &g, &h, t, 1.0).unwrap();
        assert!(s.class_mismatch.is_empty());
        let d = dollard_state(&m, &g, &h, t, 1.0).unwrap();
        assert!(s.state.sub(&d.state).norm() == 0.0);
        for j in g.end_nodes(1, 30.0).into_iter().step_by(50) {
            let r = g.radius[j];
            let lam = (r - 2.0).powi(2) / (2.0 * t * t);
            let exact = (2.0 * PI).powf(-0.5) * ((r - 2.0) / (t * t)).sqrt() * h.eval(1, 0, lam).norm();
            assert!((s.state.data[0][j].norm() - exact).abs() < 1e-14);
        }
        assert!(s.state.norm() <= h.norm() + 1e-12);
    }

    #[test]
    fn phase_modifier_matches_brute_force() {
        // q₁ − λ₀ = r^{-2} with λ − λ₀ = 1/2.
        let m = ManifoldModel::new(vec![EndSpec::new(Profile::Flat).with_long(RadialFn::Power { c: 1.0, p: 2.0 }), EndSpec::new(Profile::Flat)], ModelParams::default()).unwrap();
        let lambda = 0.5;
        let theta = phase_modifier(&m, lambda, 0, SimpleKind::Sr).unwrap();
        let ctx = m.phase_ctx(lambda, 0);
        let f = |r: f64| 1.0 - ctx.b(r);
        let mut brute = 0.0;
        let mut a: f64 = 2.0;
        let rule = gauss_legendre(20);
        while a < 1e9 {
            let b = (a * 1.05).max(a + 0.01);
            brute += gl_fixed(&rule, a, b, f);
            a = b;
        }
        brute += 1.0 / a;
        assert!((theta - brute).abs() < 1e-8, "{theta} vs {brute}");
        let do_theta = phase_modifier(&m, lambda, 0, SimpleKind::Do).unwrap();
        assert!(do_theta.is_finite());
    }

    #[test]
    fn phase_modifier_rejects_divergent_tails() {
        let m = model_c();
        assert!(matches!(phase_modifier(&m, 0.5, 0, SimpleKind::Sr), Err(Error::Divergent(_))));
        let r = phase_modifier(&m, 0.5, 0, SimpleKind::Do);
        assert!(r.is_ok(), "{r:?}");
    }
}
