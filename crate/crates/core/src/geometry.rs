//! Surfaces of revolution with one or two ends.
//!
//! Everything lives on a single line coordinate `x`. The core occupies
//! `|x| < c` (`c` = `core_half_width`). With two ends, end 0 sits on the left
//! (`x ≤ −c`) and end 1 on the right (`x ≥ c`); with one end, the end is on
//! the right and `x = −c` is a Dirichlet wall. On an end the radial function
//! is `r = r₀/2 + |x| − c`, so `|dr| = 1` there.
//!
//! The log-warp `g = ln f` is taken from the end profiles on the ends and
//! from a quintic Hermite blend on the core, which matches `g, g', g''` at
//! both junctions and keeps `f` positive and `C²`.

use crate::numerics::spline::CubicSpline;
use crate::numerics::{fd_step, loglog_slope};
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Warp profile `f(r)` of an end.
#[derive(Debug, Clone)]
pub enum Profile {
    /// `f = r`.
    Euclidean,
    /// `f = e^{κ r}`.
    Hyperbolic { kappa: f64 },
    /// `f = α r`.
    Conic { alpha: f64 },
    /// `f ≡ 1` (a half-cylinder).
    Flat,
    /// Cubic spline of `ln f` over `r`, extended linearly past the last sample.
    Table(Arc<CubicSpline<f64>>),
}

impl Profile {
    pub fn from_table(r: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if r.len() < 4 {
            return Err(Error::Validation("warp table needs at least 4 rows".into()));
        }
        if let Some(bad) = f.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Validation(format!("warp table has non-positive f = {bad}")));
        }
        if !r.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Validation("warp table radii must increase".into()));
        }
        let lf = f.iter().map(|v| v.ln()).collect();
        Ok(Profile::Table(Arc::new(CubicSpline::new(r, lf, false))))
    }

    pub fn name(&self) -> String {
        match self {
            Profile::Euclidean => "euclidean".into(),
            Profile::Hyperbolic { kappa } => format!("hyperbolic({kappa})"),
            Profile::Conic { alpha } => format!("conic({alpha})"),
            Profile::Flat => "flat".into(),
            Profile::Table(_) => "custom-table".into(),
        }
    }

    /// `(ln f, f'/f, ∂_r(f'/f))` at `r`.
    pub fn log_warp(&self, r: f64) -> (f64, f64, f64) {
        match self {
            Profile::Euclidean => (r.ln(), 1.0 / r, -1.0 / (r * r)),
            Profile::Hyperbolic { kappa } => (kappa * r, *kappa, 0.0),
            Profile::Conic { alpha } => ((alpha * r).ln(), 1.0 / r, -1.0 / (r * r)),
            Profile::Flat => (0.0, 0.0, 0.0),
            Profile::Table(s) => (s.eval(r), s.deriv(r), s.deriv2(r)),
        }
    }

    /// Limit of `(1/8)[(f'/f)² + 2∂_r(f'/f)]` as `r → ∞`.
    pub fn curvature_limit(&self) -> f64 {
        match self {
            Profile::Hyperbolic { kappa } => kappa * kappa / 8.0,
            Profile::Table(s) => {
                let last = *s.knots().last().unwrap();
                s.deriv(last).powi(2) / 8.0
            }
            _ => 0.0,
        }
    }

    /// Limit of `1/f²` as `r → ∞` (nonzero only for cylinder-like ends).
    pub fn inv_f2_limit(&self) -> f64 {
        match self {
            Profile::Flat => 1.0,
            Profile::Table(s) => {
                let last = *s.knots().last().unwrap();
                if s.deriv(last).abs() < 1e-14 {
                    (-2.0 * s.eval(last)).exp()
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    }
}

/// A real function of the radius on an end.
#[derive(Debug, Clone)]
pub enum RadialFn {
    Zero,
    Const(f64),
    /// `c · r^{−p}`.
    Power { c: f64, p: f64 },
    /// `c · e^{−a r}`.
    Exp { c: f64, a: f64 },
    /// Spline of samples, held at the last value past the table.
    Table(Arc<CubicSpline<f64>>),
}

impl RadialFn {
    pub fn from_table(r: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if r.len() < 4 || !r.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Validation("potential table needs ≥ 4 rows with increasing r".into()));
        }
        let last = *v.last().unwrap();
        let mut rr = r;
        let mut vv = v;
        // Pad with a flat stretch so the held value is reached smoothly.
        let rl = *rr.last().unwrap();
        let step = rl - rr[rr.len() - 2];
        for k in 1..=3 {
            rr.push(rl + k as f64 * step);
            vv.push(last);
        }
        Ok(RadialFn::Table(Arc::new(CubicSpline::new(rr, vv, false))))
    }

    pub fn value(&self, r: f64) -> f64 {
        match self {
            RadialFn::Zero => 0.0,
            RadialFn::Const(c) => *c,
            RadialFn::Power { c, p } => c * r.powf(-p),
            RadialFn::Exp { c, a } => c * (-a * r).exp(),
            RadialFn::Table(s) => {
                let last = *s.knots().last().unwrap();
                if r >= last {
                    *s.values().last().unwrap()
                } else {
                    s.eval(r)
                }
            }
        }
    }

    pub fn deriv(&self, r: f64) -> f64 {
        match self {
            RadialFn::Zero | RadialFn::Const(_) => 0.0,
            RadialFn::Power { c, p } => -p * c * r.powf(-p - 1.0),
            RadialFn::Exp { c, a } => -a * c * (-a * r).exp(),
            RadialFn::Table(s) => {
                if r >= *s.knots().last().unwrap() {
                    0.0
                } else {
                    s.deriv(r)
                }
            }
        }
    }

    pub fn limit(&self) -> f64 {
        match self {
            RadialFn::Const(c) => *c,
            RadialFn::Table(s) => *s.values().last().unwrap(),
            _ => 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, RadialFn::Zero)
    }
}

/// Potential on the line coordinate, meant for the core.
#[derive(Debug, Clone)]
pub enum CoreFn {
    Zero,
    /// `v0` on `|x| < a`, zero elsewhere.
    SquareWell { v0: f64, a: f64 },
    /// `h · exp(−x²/(2w²))`.
    Gaussian { h: f64, w: f64 },
    /// Spline of samples over `x`, zero outside.
    Table(Arc<CubicSpline<f64>>),
}

impl CoreFn {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            CoreFn::Zero => 0.0,
            CoreFn::SquareWell { v0, a } => {
                if x.abs() < *a {
                    *v0
                } else {
                    0.0
                }
            }
            CoreFn::Gaussian { h, w } => h * (-x * x / (2.0 * w * w)).exp(),
            CoreFn::Table(s) => s.eval(x),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            CoreFn::SquareWell { a, .. } => vec![-a, *a],
            _ => vec![],
        }
    }
}

/// How the effective potential is split into the long-range part `q₁` and
/// the remainder `q₂` on an end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// `q₁ = lim curvature term + v_long`; curvature decay and `v_short` go to `q₂`.
    Asymptotic,
    /// `q₁ = q` (the whole effective potential), `q₂ = 0`.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialClass {
    ShortRange,
    Dollard,
    LongRange,
}

#[derive(Debug, Clone)]
pub struct EndSpec {
    pub profile: Profile,
    pub v_long: RadialFn,
    pub v_short: RadialFn,
    pub split: Split,
}

impl EndSpec {
    pub fn new(profile: Profile) -> Self {
        Self { profile, v_long: RadialFn::Zero, v_short: RadialFn::Zero, split: Split::Asymptotic }
    }

    pub fn with_long(mut self, v: RadialFn) -> Self {
        self.v_long = v;
        self
    }

    pub fn with_short(mut self, v: RadialFn) -> Self {
        self.v_short = v;
        self
    }

    pub fn with_split(mut self, s: Split) -> Self {
        self.split = s;
        self
    }
}

/// Per-end data derived at construction.
#[derive(Debug, Clone, Serialize)]
pub struct EndProfile {
    pub id: usize,
    pub profile: String,
    pub lambda0_end: f64,
    pub class_tag: PotentialClass,
    pub fitted_exponent: f64,
}

/// Parameters for building a [`ManifoldModel`].
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub r0: f64,
    pub core_half_width: f64,
    pub core_v: CoreFn,
    /// Decay parameters `(σ, τ, ρ)`.
    pub decay: (f64, f64, f64),
    /// Horizon used for tail suprema and the classification window.
    pub horizon: f64,
    /// Margin `ε` of the short-range / Dollard thresholds.
    pub class_eps: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { r0: 2.0, core_half_width: 1.0, core_v: CoreFn::Zero, decay: (1.0, 1.0, 1.0), horizon: 1e6, class_eps: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loc {
    End { end: usize, r: f64 },
    Core,
}

/// Immutable model of the surface and its potential.
#[derive(Debug, Clone)]
pub struct ManifoldModel {
    pub ends: Vec<EndSpec>,
    pub params: ModelParams,
    blend: [f64; 6],
    end_info: Vec<EndProfile>,
    lambda0: f64,
}

fn quintic_hermite(y0: [f64; 3], y1: [f64; 3]) -> [f64; 6] {
    let (a0, a1, a2) = (y0[0], y0[1], 0.5 * y0[2]);
    let a = y1[0] - (a0 + a1 + a2);
    let b = y1[1] - (a1 + 2.0 * a2);
    let c = y1[2] - 2.0 * a2;
    [a0, a1, a2, 10.0 * a - 4.0 * b + 0.5 * c, -15.0 * a + 7.0 * b - c, 6.0 * a - 3.0 * b + 0.5 * c]
}

/// Smooth cutoff: 1 on `t ≤ 1`, 0 on `t ≥ 2`, non-increasing.
pub fn chi(t: f64) -> f64 {
    if t <= 1.0 {
        return 1.0;
    }
    if t >= 2.0 {
        return 0.0;
    }
    let s = t - 1.0;
    let psi = |x: f64| if x <= 0.0 { 0.0 } else { (-1.0 / x).exp() };
    let a = psi(1.0 - s);
    a / (a + psi(s))
}

/// The cutoffs derived from [`chi`].
#[derive(Debug, Clone, Copy)]
pub struct CutoffFamily {
    pub r0: f64,
}

impl CutoffFamily {
    pub fn chi(&self, t: f64) -> f64 {
        chi(t)
    }

    /// `η(r) = 1 − χ(2r/r₀)`.
    pub fn eta(&self, r: f64) -> f64 {
        1.0 - chi(2.0 * r / self.r0)
    }

    /// `η_λ(r) = 1 − χ(2r/r_λ)`.
    pub fn eta_lambda(&self, r: f64, r_lambda: f64) -> f64 {
        1.0 - chi(2.0 * r / r_lambda)
    }
}

/// Sup-over-tail estimate with Aitken extrapolation across three doublings.
fn tail_limsup<F: Fn(f64) -> f64>(f: F, horizon: f64) -> Result<f64> {
    let per_octave = 64usize;
    let start = horizon / 8.0;
    let far = horizon * 1024.0;
    let total = ((far / start).log2() * per_octave as f64).ceil() as usize;
    let samples: Vec<f64> = (0..=total).map(|j| f(start * 2f64.powf(j as f64 / per_octave as f64))).collect();
    let mut t = [0.0; 4];
    for (k, tk) in t.iter_mut().enumerate() {
        *tk = samples[k * per_octave..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    }
    let d1 = t[2] - t[1];
    let d2 = t[3] - t[2];
    let d0 = t[1] - t[0];
    let scale = 1.0 + t[3].abs();
    if d2.abs() > 1e-3 * scale || d2.abs() > d0.abs() * (1.0 + 1e-9) + 1e-15 * scale {
        return Err(Error::nonconv("tail supremum of q1", t.to_vec()));
    }
    let denom = d2 - d1;
    if denom.abs() <= 1e-14 * scale || d1.abs() <= 1e-15 * scale {
        return Ok(t[3]);
    }
    Ok(t[3] - d2 * d2 / denom)
}

impl ManifoldModel {
    pub fn new(ends: Vec<EndSpec>, params: ModelParams) -> Result<Self> {
        if ends.is_empty() || ends.len() > 2 {
            return Err(Error::Validation(format!(
                "a surface of revolution carries one or two ends, got {}",
                ends.len()
            )));
        }
        if !(params.r0 >= 2.0) {
            return Err(Error::Validation(format!("r0 must be at least 2, got {}", params.r0)));
        }
        if !(params.core_half_width > 0.0) {
            return Err(Error::Validation("core_half_width must be positive".into()));
        }
        if !(params.horizon >= params.r0 * 128.0) {
            return Err(Error::Validation("horizon must cover at least 8 dyadic samples beyond r0".into()));
        }
        for (i, e) in ends.iter().enumerate() {
            match e.profile {
                Profile::Hyperbolic { kappa } if !(kappa > 0.0) => {
                    return Err(Error::Validation(format!("end {}: hyperbolic rate must be positive", i + 1)))
                }
                Profile::Conic { alpha } if !(alpha > 0.0) => {
                    return Err(Error::Validation(format!("end {}: conic factor must be positive", i + 1)))
                }
                Profile::Table(ref s) if s.knots()[0] > params.r0 / 2.0 => {
                    return Err(Error::Validation(format!("end {}: warp table must start at or below r0/2", i + 1)))
                }
                _ => {}
            }
        }
        let c = params.core_half_width;
        let h = 2.0 * c;
        let rj = params.r0 / 2.0;
        let right = ends.len() - 1;
        let (gr, dr, ddr) = ends[right].profile.log_warp(rj);
        let y1 = [gr, dr * h, ddr * h * h];
        let y0 = if ends.len() == 2 {
            let (gl, dl, ddl) = ends[0].profile.log_warp(rj);
            [gl, -dl * h, ddl * h * h]
        } else {
            [gr, 0.0, 0.0]
        };
        let blend = quintic_hermite(y0, y1);
        let mut model = Self { ends, params, blend, end_info: Vec::new(), lambda0: 0.0 };
        model.end_info = (0..model.ends.len())
            .map(|e| EndProfile {
                id: e,
                profile: model.ends[e].profile.name(),
                lambda0_end: 0.0,
                class_tag: PotentialClass::ShortRange,
                fitted_exponent: f64::INFINITY,
            })
            .collect();
        let (l0, per_end) = model.critical_energy()?;
        model.lambda0 = l0;
        for (e, v) in per_end.iter().enumerate() {
            model.end_info[e].lambda0_end = *v;
        }
        let classes = model.classify_potential()?;
        for (e, (cl, p)) in classes.into_iter().enumerate() {
            model.end_info[e].class_tag = cl;
            model.end_info[e].fitted_exponent = p;
        }
        Ok(model)
    }

    pub fn n_ends(&self) -> usize {
        self.ends.len()
    }

    pub fn r0(&self) -> f64 {
        self.params.r0
    }

    pub fn core_half_width(&self) -> f64 {
        self.params.core_half_width
    }

    pub fn end_info(&self) -> &[EndProfile] {
        &self.end_info
    }

    /// Global critical energy (max over ends).
    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn lambda0_end(&self, end: usize) -> f64 {
        self.end_info[end].lambda0_end
    }

    pub fn class_of(&self, end: usize) -> PotentialClass {
        self.end_info[end].class_tag
    }

    pub fn cutoffs(&self) -> CutoffFamily {
        CutoffFamily { r0: self.params.r0 }
    }

    /// `+1` if the end extends to `x → +∞`, `−1` otherwise.
    pub fn side(&self, end: usize) -> f64 {
        if self.ends.len() == 2 && end == 0 {
            -1.0
        } else {
            1.0
        }
    }

    /// Whether the left boundary of the line is a Dirichlet wall.
    pub fn has_wall(&self) -> bool {
        self.ends.len() == 1
    }

    /// Line coordinate of radius `r` on `end`.
    pub fn x_of(&self, end: usize, r: f64) -> f64 {
        self.side(end) * (self.params.core_half_width + r - self.params.r0 / 2.0)
    }

    pub fn locate(&self, x: f64) -> Loc {
        let c = self.params.core_half_width;
        let rj = self.params.r0 / 2.0;
        if x >= c {
            Loc::End { end: self.ends.len() - 1, r: rj + x - c }
        } else if x <= -c && self.ends.len() == 2 {
            Loc::End { end: 0, r: rj - x - c }
        } else {
            Loc::Core
        }
    }

    /// Radius used for dyadic bookkeeping; core points count as `r₀/2`.
    pub fn radius(&self, x: f64) -> f64 {
        match self.locate(x) {
            Loc::End { r, .. } => r,
            Loc::Core => self.params.r0 / 2.0,
        }
    }

    /// `(g, g_x, g_xx)` with `g = ln f` on the line coordinate.
    pub fn log_warp_x(&self, x: f64) -> (f64, f64, f64) {
        match self.locate(x) {
            Loc::End { end, r } => {
                let (g, d, dd) = self.ends[end].profile.log_warp(r);
                (g, self.side(end) * d, dd)
            }
            Loc::Core => {
                let c = self.params.core_half_width;
                let h = 2.0 * c;
                let s = (x + c) / h;
                let b = &self.blend;
                let g = b[0] + s * (b[1] + s * (b[2] + s * (b[3] + s * (b[4] + s * b[5]))));
                let d = b[1] + s * (2.0 * b[2] + s * (3.0 * b[3] + s * (4.0 * b[4] + s * 5.0 * b[5])));
                let dd = 2.0 * b[2] + s * (6.0 * b[3] + s * (12.0 * b[4] + s * 20.0 * b[5]));
                (g, d / h, dd / (h * h))
            }
        }
    }

    /// Bounded potential `V` on the line coordinate.
    pub fn potential_x(&self, x: f64) -> f64 {
        let core = self.params.core_v.value(x);
        match self.locate(x) {
            Loc::End { end, r } => core + self.ends[end].v_long.value(r) + self.ends[end].v_short.value(r),
            Loc::Core => core,
        }
    }

    /// Effective potential `q = V + (1/8)(g_x² + 2 g_xx)` on the line.
    pub fn effective_q_x(&self, x: f64) -> f64 {
        let (_, d, dd) = self.log_warp_x(x);
        self.potential_x(x) + 0.125 * (d * d + 2.0 * dd)
    }

    /// Reduced potential `W_m = q + m²/(2f²)` of angular mode `m`.
    pub fn mode_potential(&self, x: f64, m: i32) -> f64 {
        let (g, d, dd) = self.log_warp_x(x);
        let cent = if m == 0 { 0.0 } else { 0.5 * (m as f64).powi(2) * (-2.0 * g).exp() };
        self.potential_x(x) + 0.125 * (d * d + 2.0 * dd) + cent
    }

    /// `lim_{r→∞} W_m` on an end.
    pub fn mode_threshold(&self, end: usize, m: i32) -> f64 {
        let e = &self.ends[end];
        e.profile.curvature_limit()
            + e.v_long.limit()
            + e.v_short.limit()
            + 0.5 * (m as f64).powi(2) * e.profile.inv_f2_limit()
    }

    /// Potential breakpoints on the line where `W_m` may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.params.core_v.breakpoints();
        b.sort_by(|a, b| a.partial_cmp(b).unwrap());
        b
    }

    /// Effective potential at radius `r` on `end`.
    pub fn effective_potential(&self, r: f64, end: usize) -> Result<f64> {
        self.check_end(end)?;
        if !(r >= self.params.r0 / 2.0) {
            return Err(Error::Domain(format!("r = {r} is below r0/2 = {}", self.params.r0 / 2.0)));
        }
        let (g, _, _) = self.ends[end].profile.log_warp(r);
        if !g.is_finite() {
            return Err(Error::Domain(format!("warp not positive at r = {r}")));
        }
        Ok(self.effective_q_x(self.x_of(end, r)))
    }

    fn check_end(&self, end: usize) -> Result<()> {
        if end >= self.ends.len() {
            return Err(Error::Validation(format!("no end with index {end}")));
        }
        Ok(())
    }

    /// Long-range part `q₁` on an end.
    pub fn q1(&self, r: f64, end: usize) -> f64 {
        let e = &self.ends[end];
        match e.split {
            Split::Asymptotic => e.profile.curvature_limit() + e.v_long.value(r),
            Split::Full => self.effective_q_x(self.x_of(end, r)),
        }
    }

    /// `∂_r q₁`, analytic when available.
    pub fn q1_deriv(&self, r: f64, end: usize) -> f64 {
        let e = &self.ends[end];
        match (e.split, &e.v_long) {
            (Split::Asymptotic, RadialFn::Table(_)) | (Split::Full, _) => {
                let h = fd_step(r);
                (self.q1(r + h, end) - self.q1(r - h, end)) / (2.0 * h)
            }
            (Split::Asymptotic, v) => v.deriv(r),
        }
    }

    /// Remainder `q₂ = q − q₁` on an end.
    pub fn q2(&self, r: f64, end: usize) -> f64 {
        self.effective_q_x(self.x_of(end, r)) - self.q1(r, end)
    }

    /// Critical energy and its per-end values.
    pub fn critical_energy(&self) -> Result<(f64, Vec<f64>)> {
        let mut per_end = Vec::with_capacity(self.ends.len());
        for e in 0..self.ends.len() {
            per_end.push(tail_limsup(|r| self.q1(r, e), self.params.horizon)?);
        }
        let l0 = per_end.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok((l0, per_end))
    }

    /// Tags each end by the fitted decay exponent of `|q₁ − λ₀(σ)|`.
    pub fn classify_potential(&self) -> Result<Vec<(PotentialClass, f64)>> {
        let eps = self.params.class_eps;
        let mut out = Vec::new();
        for e in 0..self.ends.len() {
            let l0 = self.end_info[e].lambda0_end;
            let mut rs = Vec::new();
            let mut r = self.params.r0;
            while r <= self.params.horizon * (1.0 + 1e-12) {
                rs.push(r);
                r *= 2.0;
            }
            if rs.len() < 8 {
                return Err(Error::Validation(format!("only {} dyadic samples in the fit window", rs.len())));
            }
            let floor = 1e-13 * (1.0 + l0.abs());
            let (xs, ys): (Vec<f64>, Vec<f64>) = rs
                .iter()
                .map(|&r| (r, (self.q1(r, e) - l0).abs()))
                .filter(|(_, v)| *v > floor)
                .unzip();
            let p = if xs.len() < 2 { f64::INFINITY } else { -loglog_slope(&xs, &ys) };
            let cl = if p >= 1.0 + eps {
                PotentialClass::ShortRange
            } else if p >= 0.5 * (1.0 + eps) {
                PotentialClass::Dollard
            } else {
                PotentialClass::LongRange
            };
            out.push((cl, p));
        }
        Ok(out)
    }

    /// Cutoff radius `r_λ`: the smallest admissible value `≥ 2r₀` with
    /// `λ + λ₀ − 2q₁ ≥ 0` on `r ≥ r_λ/2`. Monotone non-increasing in `λ`.
    pub fn r_lambda(&self, lambda: f64, end: usize) -> f64 {
        let base = 2.0 * self.params.r0;
        let l0 = self.lambda0;
        let ok = |r: f64| lambda + l0 - 2.0 * self.q1(r, end) >= 0.0;
        // Scan a geometric grid downward from the horizon for the last failure.
        let per_octave = 32.0;
        let lo = self.params.r0 / 2.0;
        let n = ((self.params.horizon / lo).log2() * per_octave).ceil() as i64;
        let mut last_fail: Option<f64> = None;
        for j in (0..=n).rev() {
            let r = lo * 2f64.powf(j as f64 / per_octave);
            if !ok(r) {
                last_fail = Some(lo * 2f64.powf((j + 1) as f64 / per_octave));
                break;
            }
        }
        match last_fail {
            Some(r) => base.max(2.0 * r),
            None => base,
        }
    }

    /// Energy carried by the phase of mode `m` on `end`: `λ` minus the
    /// centrifugal limit `m²/(2f²)`, which is nonzero only on ends whose warp
    /// stays bounded.
    pub fn channel_energy(&self, lambda: f64, end: usize, m: i32) -> f64 {
        lambda - 0.5 * (m as f64).powi(2) * self.ends[end].profile.inv_f2_limit()
    }

    /// [`phase_ctx`](Self::phase_ctx) at the channel energy of mode `m`.
    pub fn channel_ctx(&self, lambda: f64, end: usize, m: i32) -> PhaseCtx<'_> {
        self.phase_ctx(self.channel_energy(lambda, end, m), end)
    }

    /// Precomputed phase data at fixed energy on one end.
    pub fn phase_ctx(&self, lambda: f64, end: usize) -> PhaseCtx<'_> {
        PhaseCtx { model: self, end, lambda, r_lambda: self.r_lambda(lambda, end) }
    }

    /// `b = η_λ √(2(z − q₁))` (principal branch) and `b̃ = b`.
    pub fn phase_b(&self, z: C64, r: f64, end: usize) -> Result<(C64, f64)> {
        self.check_end(end)?;
        let ctx = self.phase_ctx(z.re, end);
        let b = ctx.b_complex(z, r)?;
        Ok((b, b.re))
    }

    /// `a_± = b ∓ (i/4) η_λ ∂_r q₁ / (z − q₁)`.
    pub fn phase_a(&self, z: C64, r: f64, end: usize) -> Result<(C64, C64)> {
        self.check_end(end)?;
        self.phase_ctx(z.re, end).a_complex(z, r)
    }

    /// `|±p^r a + a² − 2(z − q₁)|` with `p^r = −i∂_r`, derivative by central differences.
    pub fn riccati_residual(&self, z: C64, r: f64, end: usize, sign: f64, use_b: bool) -> Result<f64> {
        self.check_end(end)?;
        let ctx = self.phase_ctx(z.re, end);
        let pick = |rr: f64| -> Result<C64> {
            if use_b {
                ctx.b_complex(z, rr)
            } else {
                let (ap, am) = ctx.a_complex(z, rr)?;
                Ok(if sign > 0.0 { ap } else { am })
            }
        };
        let h = fd_step(r);
        let a = pick(r)?;
        let da = (pick(r + h)? - pick(r - h)?) / (2.0 * h);
        let pa = C64::new(0.0, -1.0) * da;
        let res = pa * sign + a * a - (z - self.q1(r, end)) * 2.0;
        let eta = self.cutoffs().eta_lambda(r, ctx.r_lambda);
        // Outside the cutoff support both phases vanish identically.
        if eta == 0.0 {
            return Ok(0.0);
        }
        Ok(res.norm())
    }

    /// Fitted exponents for the `q₂` decay bound and the radial convexity
    /// margin `min r·(f'/f)` on sampled spheres.
    pub fn structure_checks(&self) -> Vec<StructureCheck> {
        (0..self.ends.len())
            .map(|e| {
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                let mut conv = f64::INFINITY;
                let mut r = self.params.r0;
                while r <= self.params.horizon {
                    let q2 = self.q2(r, e).abs();
                    if q2 > 1e-300 {
                        xs.push(r);
                        ys.push(q2);
                    }
                    let (_, d, _) = self.ends[e].profile.log_warp(r);
                    conv = conv.min(r * d);
                    r *= 2.0;
                }
                let q2_exponent = if xs.len() < 2 { f64::INFINITY } else { -loglog_slope(&xs, &ys) };
                StructureCheck { end: e, q2_decay_exponent: q2_exponent, convexity_margin: conv }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureCheck {
    pub end: usize,
    pub q2_decay_exponent: f64,
    pub convexity_margin: f64,
}

/// Phase quantities at fixed energy on one end, with `r_λ` cached.
#[derive(Debug, Clone, Copy)]
pub struct PhaseCtx<'a> {
    pub model: &'a ManifoldModel,
    pub end: usize,
    pub lambda: f64,
    pub r_lambda: f64,
}

impl PhaseCtx<'_> {
    pub fn eta(&self, r: f64) -> f64 {
        self.model.cutoffs().eta_lambda(r, self.r_lambda)
    }

    pub fn b_complex(&self, z: C64, r: f64) -> Result<C64> {
        let eta = self.eta(r);
        if eta == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let w = (z - self.model.q1(r, self.end)) * 2.0;
        if z.im == 0.0 && w.re <= 0.0 {
            return Err(Error::Branch(format!("2(λ − q₁) = {} ≤ 0 at r = {r}", w.re)));
        }
        Ok(w.sqrt() * eta)
    }

    /// Real phase `b` at the context energy.
    pub fn b(&self, r: f64) -> f64 {
        let eta = self.eta(r);
        if eta == 0.0 {
            return 0.0;
        }
        let w = 2.0 * (self.lambda - self.model.q1(r, self.end));
        eta * w.max(0.0).sqrt()
    }

    /// `[2(λ − q₁)]^{1/2}` without the cutoff.
    pub fn b_bare(&self, r: f64) -> f64 {
        (2.0 * (self.lambda - self.model.q1(r, self.end))).max(0.0).sqrt()
    }

    pub fn a_complex(&self, z: C64, r: f64) -> Result<(C64, C64)> {
        let b = self.b_complex(z, r)?;
        let eta = self.eta(r);
        if eta == 0.0 {
            return Ok((C64::new(0.0, 0.0), C64::new(0.0, 0.0)));
        }
        let corr = C64::new(0.0, 0.25) * eta * self.model.q1_deriv(r, self.end) / (z - self.model.q1(r, self.end));
        Ok((b - corr, b + corr))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_ends(a: Profile, b: Profile) -> ManifoldModel {
        ManifoldModel::new(vec![EndSpec::new(a), EndSpec::new(b)], ModelParams::default()).unwrap()
    }

    #[test]
    fn blend_is_c2_at_junctions() {
        let m = two_ends(Profile::Euclidean, Profile::Hyperbolic { kappa: 1.0 });
        let c = m.core_half_width();
        for x in [-c, c] {
            let a = m.log_warp_x(x - 1e-9);
            let b = m.log_warp_x(x + 1e-9);
            assert!((a.0 - b.0).abs() < 1e-8);
            assert!((a.1 - b.1).abs() < 1e-7);
            assert!((a.2 - b.2).abs() < 1e-6);
        }
    }

    #[test]
    fn chi_shape() {
        assert_eq!(chi(0.5), 1.0);
        assert_eq!(chi(2.5), 0.0);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = chi(1.0 + i as f64 / 100.0);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn dollard_tail_pushes_cutoff_radius() {
        let m = ManifoldModel::new(
            vec![EndSpec::new(Profile::Euclidean).with_long(RadialFn::Power { c: 1.0, p: 0.8 }), EndSpec::new(Profile::Euclidean)],
            ModelParams::default(),
        )
        .unwrap();
        let r = m.r_lambda(0.3, 0);
        assert!(r > 2.0 * (2.0f64 / 0.3).powf(1.25) * 0.95);
        assert!(m.r_lambda(0.6, 0) <= r);
        assert_eq!(m.r_lambda(0.3, 1), 4.0);
    }
}
