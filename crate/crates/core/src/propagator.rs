//! Time evolution `e^{−itH}` of the reduced operators and the dynamical
//! diagnostics built on it: the Cook integrand, wave-operator estimates,
//! the adjoint identity against the distorted Fourier transform, end
//! projections and the cross-ends transmission experiment.

use crate::dynamics::{choose_params, leading_term, leading_term_from_field, stationary_slice, SpectralProfile, StationaryField};
use crate::fourier::{distorted_ft, scattering_matrix};
use crate::geometry::ManifoldModel;
use crate::mode_reduction::{reduce, ModeOperator, RadialGrid, RadialState, Stencil};
use crate::numerics::banded::BandLu;
use crate::numerics::cheb::{cheb_coeffs, evolution_coefficients, jackson, series_apply};
use crate::numerics::quad::gauss_legendre;
use crate::resolvent::grid_derivative;
use crate::{par_map, Error, Result, C64};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    CrankNicolson,
    Chebyshev,
}

/// Mask layer at the outer edge of every end: each step multiplies by
/// `exp(−strength·dt·s²)`, `s ∈ [0, 1]` the depth into the layer.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Absorber {
    pub width: f64,
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvolutionConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub stencil: Stencil,
    pub absorber: Option<Absorber>,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self { scheme: Scheme::Chebyshev, dt: 2.0, stencil: Stencil::Spectral, absorber: None }
    }
}

/// Largest allowed `dt·max|W_m|` for Crank–Nicolson.
pub const CN_POTENTIAL_STEP: f64 = 1.0;
/// Relative norm growth reported as an instability.
pub const GROWTH_LIMIT: f64 = 1e-3;

/// Mode-wise propagator on a fixed grid.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub grid: Arc<RadialGrid>,
    pub ops: Vec<ModeOperator>,
    pub cfg: EvolutionConfig,
    mask: Option<Vec<f64>>,
}

impl Propagator {
    pub fn new(model: &ManifoldModel, grid: Arc<RadialGrid>, modes: &[i32], cfg: EvolutionConfig) -> Result<Self> {
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(Error::Validation(format!("time step must be positive, got {}", cfg.dt)));
        }
        if cfg.scheme == Scheme::CrankNicolson && cfg.stencil == Stencil::Spectral {
            return Err(Error::Validation("Crank-Nicolson needs a banded (order 2 or 4) stencil".into()));
        }
        let mmax = modes.iter().map(|m| m.abs()).max().unwrap_or(0);
        let ops = modes
            .iter()
            .map(|&m| reduce(model, m, grid.clone(), cfg.stencil, mmax, None))
            .collect::<Result<Vec<_>>>()?;
        if cfg.scheme == Scheme::CrankNicolson {
            for op in &ops {
                let wmax = op.w.iter().fold(0.0f64, |a, w| a.max(w.abs()));
                if cfg.dt * wmax > CN_POTENTIAL_STEP {
                    return Err(Error::Validation(format!("dt * max|W_{}| = {:.3} exceeds {CN_POTENTIAL_STEP}", op.m, cfg.dt * wmax)));
                }
            }
        }
        let mask = match cfg.absorber {
            None => None,
            Some(a) => {
                if !(a.width > 0.0 && a.strength >= 0.0) {
                    return Err(Error::Validation("absorber needs positive width and non-negative strength".into()));
                }
                let mut mask = vec![1.0; grid.n];
                for (j, mv) in mask.iter_mut().enumerate() {
                    let Some(e) = grid.end_of[j] else { continue };
                    let rmax = grid.rmax[e];
                    if a.width > rmax / 2.0 {
                        return Err(Error::Validation(format!("absorber width {} reaches inside r = {}", a.width, rmax / 2.0)));
                    }
                    let s = (grid.radius[j] - (rmax - a.width)) / a.width;
                    if s > 0.0 {
                        *mv = (-a.strength * cfg.dt * s * s).exp();
                    }
                }
                Some(mask)
            }
        };
        Ok(Self { grid, ops, cfg, mask })
    }

    fn op(&self, m: i32) -> Result<&ModeOperator> {
        self.ops.iter().find(|o| o.m == m).ok_or_else(|| Error::Validation(format!("propagator has no mode {m}")))
    }

    fn check_state(&self, psi: &RadialState) -> Result<()> {
        if psi.grid.n != self.grid.n || psi.grid.dx != self.grid.dx || psi.grid.x_lo != self.grid.x_lo {
            return Err(Error::Validation("state lives on a different grid".into()));
        }
        for m in &psi.modes {
            self.op(*m)?;
        }
        Ok(())
    }

    /// `Hψ`.
    pub fn apply_h(&self, psi: &RadialState) -> Result<RadialState> {
        self.check_state(psi)?;
        let mut out = psi.clone();
        for (i, m) in psi.modes.iter().enumerate() {
            self.op(*m)?.apply(&psi.data[i], &mut out.data[i]);
        }
        Ok(out)
    }

    /// `e^{−itH}ψ` (`t` of either sign).
    pub fn evolve(&self, psi: &RadialState, t: f64) -> Result<RadialState> {
        self.check_state(psi)?;
        if t == 0.0 {
            return Ok(psi.clone());
        }
        if !t.is_finite() {
            return Err(Error::Validation("evolution time must be finite".into()));
        }
        let steps = (t.abs() / self.cfg.dt).ceil().max(1.0) as usize;
        let tau = t / steps as f64;
        let rows = par_map(psi.modes.len(), |i| -> Result<Vec<C64>> {
            let op = self.op(psi.modes[i])?;
            let mut u = psi.data[i].clone();
            match self.cfg.scheme {
                Scheme::Chebyshev => {
                    let (lo, hi) = op.spectral_bounds();
                    let (coeffs, centre, half) = evolution_coefficients(lo, hi, tau);
                    for _ in 0..steps {
                        u = series_apply(|v, o| op.apply(v, o), &coeffs, centre, half, &u);
                        self.absorb(&mut u);
                    }
                }
                Scheme::CrankNicolson => {
                    let hb = op.stencil.half_bandwidth();
                    let lu = BandLu::factor(op.n(), hb, hb, |a, b| {
                        let d = if a == b { 1.0 } else { 0.0 };
                        C64::new(d, 0.5 * tau * op.entry(a, b))
                    })?;
                    let mut hu = vec![ZERO; op.n()];
                    for _ in 0..steps {
                        op.apply(&u, &mut hu);
                        for (v, w) in u.iter_mut().zip(&hu) {
                            *v -= I * (0.5 * tau) * w;
                        }
                        lu.solve(&mut u);
                        self.absorb(&mut u);
                    }
                }
            }
            Ok(u)
        });
        let mut out = psi.clone();
        for (i, r) in rows.into_iter().enumerate() {
            out.data[i] = r?;
        }
        let (n0, n1) = (psi.norm(), out.norm());
        if n1 > n0 * (1.0 + GROWTH_LIMIT) + 1e-300 || !n1.is_finite() {
            return Err(Error::Instability(format!("norm grew from {n0:e} to {n1:e} over t = {t}")));
        }
        if self.mask.is_none() && (n1 - n0).abs() > GROWTH_LIMIT * n0 {
            return Err(Error::Instability(format!("norm drifted from {n0:e} to {n1:e} over t = {t}")));
        }
        Ok(out)
    }

    fn absorb(&self, u: &mut [C64]) {
        if let Some(mask) = &self.mask {
            for (v, m) in u.iter_mut().zip(mask) {
                *v *= *m;
            }
        }
    }

    /// `g(H)ψ` for the smooth window `g = ½[tanh((E − lo)/ramp) − tanh((E − hi)/ramp)]`
    /// through a Jackson-damped Chebyshev expansion of the given degree.
    pub fn energy_filter(&self, psi: &RadialState, lo: f64, hi: f64, ramp: f64, degree: usize) -> Result<RadialState> {
        self.check_state(psi)?;
        if !(hi > lo && ramp > 0.0 && degree >= 2) {
            return Err(Error::Validation("energy filter needs lo < hi, ramp > 0 and degree >= 2".into()));
        }
        let mut out = psi.clone();
        for (i, m) in psi.modes.iter().enumerate() {
            let op = self.op(*m)?;
            let (a, b) = op.spectral_bounds();
            let (c, d) = (0.5 * (a + b), 0.5 * (b - a));
            let g = |x: f64| {
                let e = c + d * x;
                0.5 * (((e - lo) / ramp).tanh() - ((e - hi) / ramp).tanh())
            };
            let mut coef = cheb_coeffs(g, degree);
            for (ck, jk) in coef.iter_mut().zip(jackson(degree)) {
                *ck *= jk;
            }
            let coef: Vec<C64> = coef.into_iter().map(|v| C64::new(v, 0.0)).collect();
            out.data[i] = series_apply(|v, o| op.apply(v, o), &coef, c, d, &psi.data[i]);
        }
        Ok(out)
    }
}

/// Gaussian packet `amp·(2πw²)^{−1/4} exp(−(r − r_c)²/(4w²) + ik(r − r_c))`
/// on one end and mode; `k > 0` moves outward.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Packet {
    pub end: usize,
    pub m: i32,
    pub center: f64,
    pub width: f64,
    pub momentum: f64,
    pub amp: C64,
}

impl Packet {
    pub fn sample(&self, grid: &Arc<RadialGrid>) -> RadialState {
        let norm = (2.0 * PI * self.width * self.width).powf(-0.25);
        let vals = (0..grid.n)
            .map(|j| {
                if grid.end_of[j] != Some(self.end) {
                    return ZERO;
                }
                let d = grid.radius[j] - self.center;
                let env = (-d * d / (4.0 * self.width * self.width)).exp();
                if env < 1e-300 {
                    return ZERO;
                }
                self.amp * norm * env * (I * self.momentum * d).exp()
            })
            .collect();
        RadialState::single(grid.clone(), self.m, vals)
    }
}

fn sign_of(sign: f64) -> f64 {
    if sign >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `‖(H − G^+(t))U₀^+(t)h‖` (or `‖(H + G^−(t))U₀^−(t)h‖`) with
/// `G^± = Re(b̃_{λ_c}A) ∓ ½b̃²_{λ_c} ± q₁` and `Re(bA)` the symmetric
/// product `−(i/2)(b∂_r + ∂_r b)`.
pub fn cook_integrand(model: &ManifoldModel, prop: &Propagator, h: &SpectralProfile, t: f64, sign: f64) -> Result<f64> {
    if h.is_zero() {
        return Ok(0.0);
    }
    let s = sign_of(sign);
    let grid = &prop.grid;
    let params = choose_params(model, grid, h)?;
    let mut slices = Vec::new();
    let mut speed = vec![0.0; grid.n];
    let mut q1 = vec![0.0; grid.n];
    for p in &params {
        let (_, hi) = h.support_on(p.end).unwrap();
        let sl = stationary_slice(model, grid, t, p, hi)?;
        for (i, pt) in sl.points.iter().enumerate() {
            if let Some(pt) = pt {
                let j = sl.nodes[i];
                let r = grid.radius[j];
                q1[j] = model.q1(r, p.end);
                speed[j] = model.phase_ctx(pt.lambda_c, p.end).b(r);
            }
        }
        slices.push(sl);
    }
    let field = StationaryField { slices };
    let u0 = leading_term_from_field(grid, h, &field, t, s);
    let hu = prop.apply_h(&u0)?;
    let side: Vec<f64> = (0..grid.n).map(|j| grid.end_of[j].map(|e| model.side(e)).unwrap_or(0.0)).collect();
    let mut total = 0.0;
    for (i, u) in u0.data.iter().enumerate() {
        let du = grid_derivative(grid, u);
        let bu: Vec<C64> = u.iter().zip(&speed).map(|(v, b)| v * *b).collect();
        let dbu = grid_derivative(grid, &bu);
        for j in 0..grid.n {
            let sym = -0.5 * I * side[j] * (du[j] * speed[j] + dbu[j]);
            let gu = sym + u[j] * (-s * 0.5 * speed[j] * speed[j] + s * q1[j]);
            total += (hu.data[i][j] - gu * s).norm_sqr();
        }
    }
    Ok((total * grid.dx).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct CauchyReport {
    pub times: Vec<f64>,
    /// `‖ω(t_{k+1}) − ω(t_k)‖`.
    pub differences: Vec<f64>,
    pub leading_norms: Vec<f64>,
    pub h_norm: f64,
    pub estimate_norm: f64,
    pub tol: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveOperatorEstimate {
    pub state: RadialState,
    pub report: CauchyReport,
}

/// `ω(t) = e^{±itH}U₀^±(t)h` along `t_grid`. The last iterate is the
/// estimate of `W^±h`; convergence needs the last difference below `tol`
/// and non-increasing differences over the last three steps.
pub fn wave_operator(model: &ManifoldModel, prop: &Propagator, h: &SpectralProfile, t_grid: &[f64], sign: f64, tol: f64) -> Result<WaveOperatorEstimate> {
    if t_grid.len() < 2 || !t_grid.windows(2).all(|w| w[1] > w[0]) || t_grid[0] <= 0.0 {
        return Err(Error::Validation("t-grid must be positive, increasing, with at least two times".into()));
    }
    let s = sign_of(sign);
    let leading = t_grid.iter().map(|&t| leading_term(model, &prop.grid, h, t, s)).collect::<Result<Vec<_>>>()?;
    let k = t_grid.len();
    // Jobs 0..k−1 advance U₀(t_{j+1}) back to t_j; job k−1 maps U₀(t_K) to time 0.
    let jobs = par_map(k, |j| -> Result<RadialState> {
        if j + 1 < k {
            prop.evolve(&leading[j + 1], -s * (t_grid[j + 1] - t_grid[j]))
        } else {
            prop.evolve(&leading[k - 1], -s * t_grid[k - 1])
        }
    });
    let mut differences = Vec::with_capacity(k - 1);
    let mut state = None;
    for (j, r) in jobs.into_iter().enumerate() {
        let v = r?;
        if j + 1 < k {
            differences.push(v.sub(&leading[j]).norm());
        } else {
            state = Some(v);
        }
    }
    let state = state.unwrap();
    let last = *differences.last().unwrap();
    let tail = &differences[differences.len().saturating_sub(3)..];
    let converged = last <= tol && tail.windows(2).all(|w| w[1] <= w[0]);
    let report = CauchyReport {
        times: t_grid.to_vec(),
        leading_norms: leading.iter().map(|u| u.norm()).collect(),
        h_norm: h.norm(),
        estimate_norm: state.norm(),
        differences,
        tol,
        converged,
    };
    Ok(WaveOperatorEstimate { state, report })
}

#[derive(Debug, Clone, Serialize)]
pub struct AdjointReport {
    /// `⟨ψ, W^±h⟩` per family member.
    pub lhs: Vec<C64>,
    /// `(2π)^{-1}∫⟨F^±(λ)ψ, h(λ)⟩dλ` per family member.
    pub rhs: Vec<C64>,
    /// `|lhs − rhs|/(‖ψ‖‖h‖)`.
    pub defects: Vec<f64>,
    pub max_defect: f64,
    /// Largest change of `rhs` (same scaling) when the energy nodes double.
    pub quadrature_change: f64,
}

/// `(2π)^{-1}∫⟨F^±(λ)ψ, h(λ)⟩dλ` by Gauss–Legendre on the energy support.
fn fourier_pairing(model: &ManifoldModel, ft_grid: &Arc<RadialGrid>, h: &SpectralProfile, psis: &[RadialState], sign: f64, nodes: usize) -> Result<Vec<C64>> {
    let (x, w) = gauss_legendre(nodes);
    let mut jobs = Vec::new();
    for e in 0..model.n_ends() {
        let Some((lo, hi)) = h.support_on(e) else { continue };
        for (xi, wi) in x.iter().zip(&w) {
            let lam = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xi;
            jobs.push((e, lam, 0.5 * (hi - lo) * wi));
        }
    }
    let parts = par_map(jobs.len(), |q| -> Result<Vec<C64>> {
        let (e, lam, wt) = jobs[q];
        psis.iter()
            .map(|psi| {
                let f = distorted_ft(model, ft_grid, lam, psi, sign)?;
                let mut acc = ZERO;
                for &m in &psi.modes {
                    acc += f.get(e, m).conj() * h.eval(e, m, lam);
                }
                Ok(acc * wt / (2.0 * PI))
            })
            .collect()
    });
    let mut out = vec![ZERO; psis.len()];
    for p in parts {
        for (o, v) in out.iter_mut().zip(p?) {
            *o += v;
        }
    }
    Ok(out)
}

/// Checks `⟨ψ, W^±h⟩ = (2π)^{-1}∫⟨F^±(λ)ψ, h(λ)⟩dλ` over a packet family.
/// The wave-operator side uses `estimate` on its own grid; the transforms
/// are taken on `ft_grid`, which must contain the packets.
pub fn adjoint_identity_check(model: &ManifoldModel, estimate: &RadialState, ft_grid: &Arc<RadialGrid>, h: &SpectralProfile, family: &[Packet], sign: f64, nodes: usize) -> Result<AdjointReport> {
    let hn = h.norm();
    if h.is_zero() || hn == 0.0 {
        let z = vec![ZERO; family.len()];
        return Ok(AdjointReport { lhs: z.clone(), rhs: z, defects: vec![0.0; family.len()], max_defect: 0.0, quadrature_change: 0.0 });
    }
    let big: Vec<RadialState> = family.iter().map(|p| p.sample(&estimate.grid)).collect();
    let small: Vec<RadialState> = family.iter().map(|p| p.sample(ft_grid)).collect();
    let lhs: Vec<C64> = big.iter().map(|psi| psi.inner(estimate)).collect();
    let rhs = fourier_pairing(model, ft_grid, h, &small, sign, nodes)?;
    let rhs2 = fourier_pairing(model, ft_grid, h, &small, sign, 2 * nodes)?;
    let scale: Vec<f64> = big.iter().map(|p| p.norm() * hn).collect();
    let defects: Vec<f64> = lhs.iter().zip(&rhs2).zip(&scale).map(|((a, b), s)| (a - b).norm() / s).collect();
    let quadrature_change = rhs.iter().zip(&rhs2).zip(&scale).map(|((a, b), s)| (a - b).norm() / s).fold(0.0, f64::max);
    let max_defect = defects.iter().cloned().fold(0.0, f64::max);
    Ok(AdjointReport { lhs, rhs: rhs2, defects, max_defect, quadrature_change })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionReport {
    pub end: usize,
    pub times: Vec<f64>,
    /// `‖1_{E_i}e^{∓itH}ψ‖` per time.
    pub masses: Vec<f64>,
    /// Sum over all ends of the restricted squared norms, per time.
    pub total_end_mass_sqr: Vec<f64>,
    pub psi_norm: f64,
    /// Relative change of the mass between the last two times.
    pub last_change: f64,
    pub stabilized: bool,
}

/// Nodes of `end` beyond `r₀`.
fn end_indicator(model: &ManifoldModel, grid: &RadialGrid, end: usize) -> Vec<bool> {
    (0..grid.n).map(|j| grid.end_of[j] == Some(end) && grid.radius[j] > model.r0()).collect()
}

fn restrict(psi: &RadialState, keep: &[bool]) -> RadialState {
    let mut out = psi.clone();
    for d in out.data.iter_mut() {
        for (v, k) in d.iter_mut().zip(keep) {
            if !k {
                *v = ZERO;
            }
        }
    }
    out
}

/// `P_i^±ψ ≈ e^{±itH}1_{E_i}e^{∓itH}ψ` at the last time of `times`, with the
/// mass history. Stabilized when the last relative change is below `tol`.
pub fn end_projection(model: &ManifoldModel, prop: &Propagator, psi: &RadialState, end: usize, sign: f64, times: &[f64], tol: f64) -> Result<(RadialState, ProjectionReport)> {
    if end >= model.n_ends() {
        return Err(Error::Validation(format!("end {end} does not exist")));
    }
    if times.is_empty() || !times.windows(2).all(|w| w[1] > w[0]) || times[0] <= 0.0 {
        return Err(Error::Validation("projection times must be positive and increasing".into()));
    }
    let s = sign_of(sign);
    let masks: Vec<Vec<bool>> = (0..model.n_ends()).map(|e| end_indicator(model, &prop.grid, e)).collect();
    let mut cur = psi.clone();
    let mut at = 0.0;
    let mut masses = Vec::new();
    let mut totals = Vec::new();
    for &t in times {
        cur = prop.evolve(&cur, s * (t - at))?;
        at = t;
        let mass = restrict(&cur, &masks[end]).norm();
        masses.push(mass);
        totals.push(masks.iter().map(|k| restrict(&cur, k).norm_sqr()).sum());
    }
    let projected = prop.evolve(&restrict(&cur, &masks[end]), -s * at)?;
    let n = masses.len();
    let last_change = if n >= 2 { (masses[n - 1] - masses[n - 2]).abs() / masses[n - 1].max(1e-300) } else { f64::INFINITY };
    let report = ProjectionReport {
        end,
        times: times.to_vec(),
        masses,
        total_end_mass_sqr: totals,
        psi_norm: psi.norm(),
        last_change,
        stabilized: last_change <= tol,
    };
    Ok((projected, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Nonzero,
    Indeterminate,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransmissionReport {
    pub from: usize,
    pub to: usize,
    pub t_prepare: f64,
    pub t_evolve: f64,
    pub psi_norm: f64,
    /// Mass on the target end after the evolution.
    pub transmitted: f64,
    /// Mass remaining on the source end.
    pub reflected: f64,
    /// `((2π)^{-1}∫Σ_m|S_{ij}(λ)h_j(λ)|²dλ)^{1/2}`.
    pub predicted: f64,
    /// `min_λ σ_min(S_{ij}(λ))·‖h‖`.
    pub lower_bound: f64,
    pub sigma_min: Vec<(f64, f64)>,
    pub ratio: f64,
    pub verdict: Verdict,
}

/// Prepares the incoming packet `ψ = U₀^−(t₀)h` on end `from`, evolves it
/// by `2t₀` and compares the mass arriving on end `to` with the
/// scattering-matrix prediction computed on `s_grid`.
pub fn transmission_experiment(model: &ManifoldModel, prop: &Propagator, s_grid: &RadialGrid, h: &SpectralProfile, from: usize, to: usize, t_prepare: f64, nodes: usize) -> Result<TransmissionReport> {
    if from == to {
        return Err(Error::Validation("transmission needs distinct ends".into()));
    }
    if from >= model.n_ends() || to >= model.n_ends() {
        return Err(Error::Validation(format!("ends ({from}, {to}) out of range")));
    }
    if h.is_zero() || (0..model.n_ends()).any(|e| e != from && h.support_on(e).is_some()) {
        return Err(Error::Validation(format!("packet is not asymptotically incoming from end {from}")));
    }
    let psi = leading_term(model, &prop.grid, h, t_prepare, -1.0)?;
    let hn = h.norm();
    if (psi.norm() - hn).abs() > 1e-3 * hn {
        return Err(Error::Validation(format!("incoming packet lost mass on the grid: {} vs {hn}", psi.norm())));
    }
    let t_evolve = 2.0 * t_prepare;
    let out = prop.evolve(&psi, t_evolve)?;
    let transmitted = restrict(&out, &end_indicator(model, &prop.grid, to)).norm();
    let reflected = restrict(&out, &end_indicator(model, &prop.grid, from)).norm();

    let (lo, hi) = h.support_on(from).unwrap();
    let (x, w) = gauss_legendre(nodes);
    let modes = h.modes();
    let rows = par_map(nodes, |q| -> Result<(f64, f64, f64)> {
        let lam = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x[q];
        let sb = scattering_matrix(model, s_grid, lam, &modes)?;
        let mut acc = 0.0;
        for &m in &modes {
            let sij = sb.entry(m, to, from).unwrap_or(ZERO);
            acc += (sij * h.eval(from, m, lam)).norm_sqr();
        }
        let smin = sb.offdiag_sv.iter().find(|o| o.i == to && o.j == from).map(|o| o.sigma_min).unwrap_or(0.0);
        Ok((lam, acc * 0.5 * (hi - lo) * w[q] / (2.0 * PI), smin))
    });
    let mut pred = 0.0;
    let mut sigma_min = Vec::with_capacity(nodes);
    for r in rows {
        let (lam, a, smin) = r?;
        pred += a;
        sigma_min.push((lam, smin));
    }
    let predicted = pred.sqrt();
    let smin = sigma_min.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let lower_bound = smin * hn;
    let ratio = transmitted / predicted.max(1e-300);
    let verdict = if transmitted > 1e-6 * hn && smin > 0.0 { Verdict::Nonzero } else { Verdict::Indeterminate };
    Ok(TransmissionReport { from, to, t_prepare, t_evolve, psi_norm: psi.norm(), transmitted, reflected, predicted, lower_bound, sigma_min, ratio, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{EndSpec, ModelParams, Profile};

    fn flat() -> ManifoldModel {
        ManifoldModel::new(vec![EndSpec::new(Profile::Flat), EndSpec::new(Profile::Flat)], ModelParams::default()).unwrap()
    }

    fn moments(psi: &RadialState) -> (f64, f64) {
        let g = &psi.grid;
        let w: Vec<f64> = psi.data[0].iter().map(|v| v.norm_sqr() * g.dx).collect();
        let n: f64 = w.iter().sum();
        let mean = (0..g.n).map(|j| g.x(j) * w[j]).sum::<f64>() / n;
        let var = (0..g.n).map(|j| (g.x(j) - mean).powi(2) * w[j]).sum::<f64>() / n;
        (mean, var)
    }

    #[test]
    fn free_packet_spreads_like_the_closed_form() {
        let m = flat();
        let g = Arc::new(RadialGrid::new(&m, &[80.0, 80.0], 0.05).unwrap());
        let sigma = 1.5;
        let p = Packet { end: 1, m: 0, center: 20.0, width: sigma, momentum: 1.0, amp: C64::new(1.0, 0.0) };
        let psi = p.sample(&g);
        let (_, v0) = moments(&psi);
        assert!((v0 - sigma * sigma).abs() < 1e-8);
        for scheme in [Scheme::Chebyshev, Scheme::CrankNicolson] {
            let cfg = EvolutionConfig { scheme, dt: if scheme == Scheme::Chebyshev { 2.0 } else { 0.01 }, stencil: if scheme == Scheme::Chebyshev { Stencil::Spectral } else { Stencil::Order4 }, absorber: None };
            let prop = Propagator::new(&m, g.clone(), &[0], cfg).unwrap();
            let t = 10.0;
            let out = prop.evolve(&psi, t).unwrap();
            let (mean, var) = moments(&out);
            let exact = sigma * sigma + t * t / (4.0 * sigma * sigma);
            assert!((var - exact).abs() < 1e-4 * exact, "{scheme:?}: {var} vs {exact}");
            assert!((mean - (psi_mean(&psi) + t)).abs() < 1e-3, "{scheme:?}: mean {mean}");
            assert!((out.norm() - psi.norm()).abs() < 1e-6 * t);
            let back = prop.evolve(&out, -t).unwrap();
            assert!(back.sub(&psi).norm() < 1e-6, "{scheme:?}");
        }
    }

    fn psi_mean(psi: &RadialState) -> f64 {
        moments(psi).0
    }

    #[test]
    fn zero_time_is_identity_and_filter_keeps_window() {
        let m = flat();
        let g = Arc::new(RadialGrid::new(&m, &[40.0, 40.0], 0.1).unwrap());
        let prop = Propagator::new(&m, g.clone(), &[0], EvolutionConfig::default()).unwrap();
        let psi = Packet { end: 0, m: 0, center: 15.0, width: 3.0, momentum: 1.5, amp: C64::new(0.5, 0.2) }.sample(&g);
        assert!(prop.evolve(&psi, 0.0).unwrap().sub(&psi).norm() == 0.0);
        // Momenta within six deviations of 1.5 keep the energy inside [0.1, 3.2].
        let f = prop.energy_filter(&psi, 0.02, 5.0, 0.01, 1500).unwrap();
        assert!(f.sub(&psi).norm() < 1e-3 * psi.norm());
    }

    #[test]
    fn crank_nicolson_rejects_spectral_stencil() {
        let m = flat();
        let g = Arc::new(RadialGrid::new(&m, &[40.0, 40.0], 0.1).unwrap());
        let cfg = EvolutionConfig { scheme: Scheme::CrankNicolson, ..Default::default() };
        assert!(matches!(Propagator::new(&m, g, &[0], cfg), Err(Error::Validation(_))));
    }

    #[test]
    fn cook_integrand_decays_on_free_ends() {
        let m = ManifoldModel::new(vec![EndSpec::new(Profile::Euclidean), EndSpec::new(Profile::Euclidean)], ModelParams::default()).unwrap();
        let g = Arc::new(RadialGrid::new(&m, &[20.0, 700.0], 0.1).unwrap());
        let prop = Propagator::new(&m, g.clone(), &[0], EvolutionConfig::default()).unwrap();
        let h = SpectralProfile::bump(1, 0, 0.2, 1.2, C64::new(1.0, 0.0));
        assert_eq!(cook_integrand(&m, &prop, &SpectralProfile::default(), 10.0, 1.0).unwrap(), 0.0);
        let ts = [20.0, 40.0, 80.0, 160.0, 320.0];
        let vals: Vec<f64> = ts.iter().map(|&t| cook_integrand(&m, &prop, &h, t, 1.0).unwrap()).collect();
        let slope = crate::numerics::loglog_slope(&ts, &vals);
        assert!(slope <= -1.2, "{vals:?} slope {slope}");
    }
}
