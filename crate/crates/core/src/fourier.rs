//! Distorted Fourier transforms `F^±(λ)`, the scattering matrix, WKB
//! generalized eigenfunctions and their asymptotic decomposition.
//!
//! States live in the half-density representation of the reduced problem,
//! so a boundary coefficient `ξ` on an open end corresponds to the radial
//! profile `b^{-1/2} e^{±i∫b} ξ`. With the Jost normalization of
//! [`crate::resolvent`], the transform of one mode on end `e` is
//! `F^+_e ψ = (−2/W) ∫ u_opp ψ`, where `u_opp` is the boundary solution of
//! the other side, and `F^−` is its time-reversed counterpart.

use crate::geometry::ManifoldModel;
use crate::mode_reduction::{annulus_norms, outermost_complete, RadialGrid, RadialState};
use crate::numerics::quad::gauss_legendre;
use crate::resolvent::{asymptotic_normalization, grid_derivative, jost_pair, phase_on_radii, JostKind, JostPair, R_FAR};
use crate::{par_map, Error, Result, C64};
use nalgebra::DMatrix;
use serde::Serialize;
use std::sync::Arc;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Boundary data: one coefficient per (mode, end).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryField {
    pub n_ends: usize,
    pub modes: Vec<i32>,
    /// `coeffs[k][e]` for mode `modes[k]` on end `e`.
    pub coeffs: Vec<Vec<C64>>,
}

impl BoundaryField {
    pub fn zeros(n_ends: usize, modes: Vec<i32>) -> Self {
        let coeffs = vec![vec![ZERO; n_ends]; modes.len()];
        Self { n_ends, modes, coeffs }
    }

    pub fn get(&self, end: usize, m: i32) -> C64 {
        self.modes.iter().position(|k| *k == m).map(|k| self.coeffs[k][end]).unwrap_or(ZERO)
    }

    pub fn set(&mut self, end: usize, m: i32, v: C64) {
        match self.modes.iter().position(|k| *k == m) {
            Some(k) => self.coeffs[k][end] = v,
            None => {
                self.modes.push(m);
                let mut row = vec![ZERO; self.n_ends];
                row[end] = v;
                self.coeffs.push(row);
            }
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().flatten().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self, other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &BoundaryField) -> C64 {
        let mut s = ZERO;
        for (k, m) in self.modes.iter().enumerate() {
            for e in 0..self.n_ends {
                s += self.coeffs[k][e].conj() * other.get(e, *m);
            }
        }
        s
    }

    /// Largest coefficient difference.
    pub fn max_diff(&self, other: &BoundaryField) -> f64 {
        let mut d: f64 = 0.0;
        for (k, m) in self.modes.iter().enumerate() {
            for e in 0..self.n_ends {
                d = d.max((self.coeffs[k][e] - other.get(e, *m)).norm());
            }
        }
        for (k, m) in other.modes.iter().enumerate() {
            if !self.modes.contains(m) {
                d = d.max(other.coeffs[k].iter().map(|c| c.norm()).fold(0.0, f64::max));
            }
        }
        d
    }
}

fn end_solution<'a>(model: &ManifoldModel, jost: &'a JostPair, end: usize) -> &'a crate::resolvent::JostSolution {
    if model.side(end) > 0.0 {
        &jost.right
    } else {
        &jost.left
    }
}

/// Whether the channel of `end` is open in `jost`.
pub fn is_open(model: &ManifoldModel, jost: &JostPair, end: usize) -> bool {
    end_solution(model, jost, end).kind == JostKind::Outgoing
}

/// Transform of one mode sampled on the grid, one value per end.
pub fn mode_transform(model: &ManifoldModel, grid: &RadialGrid, jost: &JostPair, psi: &[C64], sign: f64) -> Vec<C64> {
    let c = -2.0 / jost.wronskian;
    (0..model.n_ends())
        .map(|e| {
            if !is_open(model, jost, e) {
                return ZERO;
            }
            let u = jost.opposite(model, e);
            let mut s = ZERO;
            for (j, p) in psi.iter().enumerate() {
                if *p == ZERO {
                    continue;
                }
                let v = u.eval(grid.x(j))[0];
                s += if sign > 0.0 { v * p } else { v.conj() * p };
            }
            if sign > 0.0 {
                c * s * grid.dx
            } else {
                c.conj() * s * grid.dx
            }
        })
        .collect()
}

/// `F^±(λ)ψ` over every mode of `psi`.
pub fn distorted_ft(model: &ManifoldModel, grid: &RadialGrid, lambda: f64, psi: &RadialState, sign: f64) -> Result<BoundaryField> {
    check_energy(model, lambda)?;
    let rows = par_map(psi.modes.len(), |k| -> Result<Vec<C64>> {
        if psi.data[k].iter().all(|v| *v == ZERO) {
            return Ok(vec![ZERO; model.n_ends()]);
        }
        let jost = jost_pair(model, grid, psi.modes[k], lambda)?;
        Ok(mode_transform(model, grid, &jost, &psi.data[k], sign))
    });
    let coeffs = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(BoundaryField { n_ends: model.n_ends(), modes: psi.modes.clone(), coeffs })
}

fn check_energy(model: &ManifoldModel, lambda: f64) -> Result<()> {
    if lambda <= model.lambda0() {
        return Err(Error::Domain(format!("lambda = {lambda} must exceed lambda0 = {}", model.lambda0())));
    }
    Ok(())
}

/// Averaged-limit sequence of one (end, mode) entry.
#[derive(Debug, Clone, Serialize)]
pub struct AveragedSequence {
    pub end: usize,
    pub m: i32,
    /// Left endpoints `R` of the averaging windows `[R, 2R]`.
    pub radii: Vec<f64>,
    pub values: Vec<C64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FtReport {
    /// Plain limit `r → ∞` (exact through the Jost normalization).
    pub plain: BoundaryField,
    /// Averaged limit at the first window where the sequence stabilized.
    pub averaged: BoundaryField,
    pub sequences: Vec<AveragedSequence>,
    /// Largest `|plain − averaged|`.
    pub plain_vs_averaged: f64,
}

/// `F^±(λ)ψ` together with the averaged limit of
/// `√b e^{∓i∫b} R(λ ± i0)ψ` over windows `[R, 2R]` with `R` doubling.
///
/// Outside the support of `ψ` the resolvent is a multiple of the boundary
/// solution of that end, so the windows continue past the grid edge with the
/// far-field Riccati solution. Stops when two consecutive window means differ
/// by at most `tol`.
pub fn distorted_ft_certified(model: &ManifoldModel, grid: &RadialGrid, lambda: f64, psi: &RadialState, sign: f64, tol: f64) -> Result<FtReport> {
    let plain = distorted_ft(model, grid, lambda, psi, sign)?;
    let rule = gauss_legendre(24);
    let mut averaged = plain.clone();
    let mut sequences = Vec::new();
    for (k, m) in plain.modes.iter().enumerate() {
        for e in 0..model.n_ends() {
            let f = plain.coeffs[k][e];
            if f == ZERO {
                continue;
            }
            let r_start = (2.0 * model.r_lambda(lambda, e)).max(grid.rmax[e]).max(16.0);
            let mut windows = Vec::new();
            let mut r = r_start;
            while 2.0 * r <= R_FAR / 2.0 {
                windows.push(r);
                r *= 2.0;
            }
            let mut nodes = Vec::new();
            for &r in &windows {
                let half = 0.5 * r;
                for x in &rule.0 {
                    nodes.push(1.5 * r + half * x);
                }
            }
            let n = asymptotic_normalization(model, e, *m, lambda, &nodes)?;
            let mut radii = Vec::new();
            let mut values: Vec<C64> = Vec::new();
            let mut converged = false;
            for (w, &r) in windows.iter().enumerate() {
                let mut mean = ZERO;
                for (q, wt) in rule.1.iter().enumerate() {
                    let v = n[w * rule.0.len() + q];
                    mean += if sign > 0.0 { v } else { v.conj() } * *wt;
                }
                mean *= 0.5;
                radii.push(r);
                values.push(f * mean);
                if values.len() >= 2 && (values[values.len() - 1] - values[values.len() - 2]).norm() <= tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::nonconv(
                    format!("averaged limit of F at end {e}, mode {m}"),
                    values.iter().map(|v| v.norm()).collect(),
                ));
            }
            averaged.coeffs[k][e] = *values.last().unwrap();
            sequences.push(AveragedSequence { end: e, m: *m, radii, values, converged });
        }
    }
    let plain_vs_averaged = plain.max_diff(&averaged);
    Ok(FtReport { plain, averaged, sequences, plain_vs_averaged })
}

/// `F^±(λ)^* ξ` on the grid: `Σ_e conj(kernel_e) ξ_e` per mode.
pub fn ft_adjoint(model: &ManifoldModel, grid: &Arc<RadialGrid>, lambda: f64, xi: &BoundaryField, sign: f64) -> Result<RadialState> {
    check_energy(model, lambda)?;
    let mut out = RadialState::zeros(grid.clone(), xi.modes.clone());
    for (k, m) in xi.modes.iter().enumerate() {
        let jost = jost_pair(model, grid, *m, lambda)?;
        let c = -2.0 / jost.wronskian;
        for e in 0..model.n_ends() {
            let x = xi.coeffs[k][e];
            if x == ZERO || !is_open(model, &jost, e) {
                continue;
            }
            let u = jost.opposite(model, e);
            for j in 0..grid.n {
                let v = u.eval(grid.x(j))[0];
                out.data[k][j] += if sign > 0.0 { (c * v).conj() * x } else { c * v * x };
            }
        }
    }
    Ok(out)
}

/// WKB state `φ^±[ξ]`: on end `e`, `η_λ [2(λ − q₁)]^{-1/4} e^{±i∫_{r₀}^r b} ξ_e`.
pub fn wkb_eigenfunction(model: &ManifoldModel, grid: &Arc<RadialGrid>, lambda: f64, xi: &BoundaryField, sign: f64) -> Result<RadialState> {
    check_energy(model, lambda)?;
    let mut out = RadialState::zeros(grid.clone(), xi.modes.clone());
    for e in 0..model.n_ends() {
        let nodes = grid.end_nodes(e, model.r0());
        let radii: Vec<f64> = nodes.iter().map(|&j| grid.radius[j]).collect();
        for (k, m) in xi.modes.iter().enumerate() {
            let x = xi.coeffs[k][e];
            if x == ZERO {
                continue;
            }
            let ctx = model.channel_ctx(lambda, e, *m);
            let phase = phase_on_radii(model, ctx.lambda, e, &radii)?;
            for (i, &j) in nodes.iter().enumerate() {
                let r = radii[i];
                let eta = ctx.eta(r);
                if eta == 0.0 {
                    continue;
                }
                let amp = eta / ctx.b_bare(r).sqrt();
                out.data[k][j] = (I * sign * phase[i]).exp() * amp * x;
            }
        }
    }
    Ok(out)
}

/// Output of [`eigenfunction_decompose`].
#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    pub xi_plus: BoundaryField,
    pub xi_minus: BoundaryField,
    pub sequences_plus: Vec<AveragedSequence>,
    pub sequences_minus: Vec<AveragedSequence>,
    /// Annulus coefficients `R^{-1/2}‖F_ν(φ − φ^+[ξ_+] + φ^−[ξ_−])‖`, outermost three.
    pub defect_tail: Vec<f64>,
}

fn window_sequence(values: &[C64], radii: &[f64], nodes_r: &[f64]) -> (Vec<f64>, Vec<C64>) {
    let top = nodes_r.iter().cloned().fold(0.0, f64::max);
    let mut rs = Vec::new();
    let mut vs = Vec::new();
    for &r in radii {
        if 2.0 * r > top {
            break;
        }
        let sel: Vec<usize> = (0..nodes_r.len()).filter(|&i| nodes_r[i] >= r && nodes_r[i] <= 2.0 * r).collect();
        if sel.len() < 2 {
            continue;
        }
        // Trapezoid mean over the window.
        let mut s = ZERO;
        let mut len = 0.0;
        for w in sel.windows(2) {
            let h = (nodes_r[w[1]] - nodes_r[w[0]]).abs();
            s += (values[w[0]] + values[w[1]]) * (0.5 * h);
            len += h;
        }
        rs.push(r);
        vs.push(s / len);
    }
    (rs, vs)
}

/// Splits a generalized eigenfunction into outgoing and incoming boundary
/// data via averaged limits of `½ e^{∓i∫b} b^{-1/2}(A ± b)φ`, `A = −i∂_r`.
///
/// The windows `[R, 2R]` use the grid only; the last two means must agree to
/// `tol` (relative to `max(1, |ξ|)`).
pub fn eigenfunction_decompose(model: &ManifoldModel, phi: &RadialState, lambda: f64, tol: f64) -> Result<Decomposition> {
    check_energy(model, lambda)?;
    let grid = &phi.grid;
    let n_ends = model.n_ends();
    let mut xi_plus = BoundaryField::zeros(n_ends, phi.modes.clone());
    let mut xi_minus = BoundaryField::zeros(n_ends, phi.modes.clone());
    let mut sequences_plus = Vec::new();
    let mut sequences_minus = Vec::new();
    let derivs: Vec<Vec<C64>> = phi.data.iter().map(|d| grid_derivative(grid, d)).collect();
    for e in 0..n_ends {
        let ctx = model.phase_ctx(lambda, e);
        let r_min = ctx.r_lambda.max(4.0);
        let nodes = grid.end_nodes(e, r_min);
        if nodes.len() < 8 {
            return Err(Error::Validation(format!("end {e} has too few nodes beyond r = {r_min}")));
        }
        let radii: Vec<f64> = nodes.iter().map(|&j| grid.radius[j]).collect();
        let mut windows = Vec::new();
        let mut r = 2f64.powf(r_min.log2().ceil());
        while 2.0 * r <= grid.rmax[e] {
            windows.push(r);
            r *= 2.0;
        }
        for (k, m) in phi.modes.iter().enumerate() {
            if lambda <= model.mode_threshold(e, *m) {
                continue;
            }
            let ctx = model.channel_ctx(lambda, e, *m);
            let phase = phase_on_radii(model, ctx.lambda, e, &radii)?;
            let mut plus = Vec::with_capacity(nodes.len());
            let mut minus = Vec::with_capacity(nodes.len());
            for (i, &j) in nodes.iter().enumerate() {
                let b = ctx.b(radii[i]);
                let a_phi = -I * derivs[k][j] * model.side(e);
                let u = phi.data[k][j];
                let pre = 0.5 / b.sqrt();
                plus.push((-I * phase[i]).exp() * pre * (a_phi + u * b));
                minus.push((I * phase[i]).exp() * pre * (a_phi - u * b));
            }
            for (vals, field, seqs) in [(&plus, &mut xi_plus, &mut sequences_plus), (&minus, &mut xi_minus, &mut sequences_minus)] {
                let (rs, vs) = window_sequence(vals, &windows, &radii);
                if vs.len() < 2 {
                    return Err(Error::Validation(format!("end {e} too short for two averaging windows")));
                }
                let last = vs[vs.len() - 1];
                let diff = (last - vs[vs.len() - 2]).norm();
                let converged = diff <= tol * last.norm().max(1.0);
                if !converged {
                    return Err(Error::nonconv(format!("averaged limit of boundary data at end {e}, mode {m}"), vs.iter().map(|v| v.norm()).collect()));
                }
                field.coeffs[k][e] = last;
                seqs.push(AveragedSequence { end: e, m: *m, radii: rs, values: vs, converged });
            }
        }
    }
    let gridc = phi.grid.clone();
    let wp = wkb_eigenfunction(model, &gridc, lambda, &xi_plus, 1.0)?;
    let wm = wkb_eigenfunction(model, &gridc, lambda, &xi_minus, -1.0)?;
    let mut rest = phi.sub(&wp);
    for (k, d) in rest.data.iter_mut().enumerate() {
        for (j, v) in d.iter_mut().enumerate() {
            *v += wm.data[k][j];
        }
    }
    let a = annulus_norms(&rest);
    let top = outermost_complete(grid).min(a.len().saturating_sub(1));
    let defect_tail = (top.saturating_sub(2)..=top).map(|nu| a[nu] / 2f64.powi(nu as i32).sqrt()).collect();
    Ok(Decomposition { xi_plus, xi_minus, sequences_plus, sequences_minus, defect_tail })
}

/// Window means of `Σ_{e,m} |b^{1/2} φ|²` over `[R, 2R]` on the common
/// range of the ends; the limit is `2‖ξ_±‖²` for generalized eigenfunctions.
pub fn flux_means(model: &ManifoldModel, phi: &RadialState, lambda: f64) -> Result<Vec<(f64, f64)>> {
    check_energy(model, lambda)?;
    let grid = &phi.grid;
    let rtop = grid.rmax.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut out = Vec::new();
    let mut r = 8.0;
    while 2.0 * r <= rtop {
        let mut total = 0.0;
        for e in 0..model.n_ends() {
            let nodes = grid.end_nodes(e, r);
            let radii: Vec<f64> = nodes.iter().map(|&j| grid.radius[j]).collect();
            let mut vals = vec![ZERO; nodes.len()];
            for (d, m) in phi.data.iter().zip(&phi.modes) {
                let ctx = model.channel_ctx(lambda, e, *m);
                for (i, &j) in nodes.iter().enumerate() {
                    vals[i] += C64::new(ctx.b(radii[i]) * d[j].norm_sqr(), 0.0);
                }
            }
            let (_, vs) = window_sequence(&vals, &[r], &radii);
            total += vs.first().map(|v| v.re).unwrap_or(0.0);
        }
        out.push((r, total));
        r *= 2.0;
    }
    Ok(out)
}

/// One mode block of `S(λ)` over the open ends of that mode.
#[derive(Debug, Clone, Serialize)]
pub struct ModeBlock {
    pub m: i32,
    pub open_ends: Vec<usize>,
    /// `s[i][j]` maps incoming data on `open_ends[j]` to outgoing on `open_ends[i]`.
    pub s: Vec<Vec<C64>>,
    /// `F^+` images of the test family (rows: open ends).
    pub f_plus: Vec<Vec<C64>>,
    pub f_minus: Vec<Vec<C64>>,
    pub unitarity_defect: f64,
    pub condition: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OffDiagonal {
    pub i: usize,
    pub j: usize,
    pub sigma_min: f64,
}

/// `S(λ)` at one energy, block-diagonal over modes.
#[derive(Debug, Clone, Serialize)]
pub struct ScatteringBlock {
    pub lambda: f64,
    pub n_ends: usize,
    pub blocks: Vec<ModeBlock>,
    pub unitarity_defect: f64,
    pub condition: f64,
    pub offdiag_sv: Vec<OffDiagonal>,
}

impl ScatteringBlock {
    /// Entry `S_{ij}` of mode `m`, `None` when either channel is closed.
    pub fn entry(&self, m: i32, i: usize, j: usize) -> Option<C64> {
        let b = self.blocks.iter().find(|b| b.m == m)?;
        let a = b.open_ends.iter().position(|e| *e == i)?;
        let c = b.open_ends.iter().position(|e| *e == j)?;
        Some(b.s[a][c])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScatteringData {
    pub lambdas: Vec<f64>,
    pub blocks: Vec<ScatteringBlock>,
}

/// Condition number above which the test images are declared not spanning.
pub const CONDITION_CAP: f64 = 1e10;

/// Smooth bump supported on `[a, b]`.
fn bump(t: f64, a: f64, b: f64) -> f64 {
    let s = (2.0 * t - a - b) / (b - a);
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Test family: two bumps per end, spanning the dyadic annuli `[r₀, 4r₀]`
/// and `[2r₀, 8r₀]`.
pub fn test_family(model: &ManifoldModel, grid: &RadialGrid) -> Result<Vec<(usize, Vec<C64>)>> {
    let r0 = model.r0();
    let mut out = Vec::new();
    for e in 0..model.n_ends() {
        if grid.rmax[e] < 8.0 * r0 {
            return Err(Error::Validation(format!("end {e} must reach r = {} for the scattering test family", 8.0 * r0)));
        }
        for k in 0..2 {
            let (a, b) = (r0 * 2f64.powi(k), r0 * 2f64.powi(k + 2));
            let v: Vec<C64> = (0..grid.n)
                .map(|j| if grid.end_of[j] == Some(e) { C64::new(bump(grid.radius[j], a, b), 0.0) } else { ZERO })
                .collect();
            out.push((e, v));
        }
    }
    Ok(out)
}

fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max)
}

/// `S(λ)` from the least-squares system `S·[F^−ψ_k] = [F^+ψ_k]` over the
/// test family, mode by mode.
pub fn scattering_matrix(model: &ManifoldModel, grid: &RadialGrid, lambda: f64, modes: &[i32]) -> Result<ScatteringBlock> {
    check_energy(model, lambda)?;
    let family = test_family(model, grid)?;
    let n_ends = model.n_ends();
    let blocks = par_map(modes.len(), |k| -> Result<ModeBlock> {
        let m = modes[k];
        // No channel of this mode propagates; a threshold at λ is closed too.
        if (0..n_ends).all(|e| lambda <= model.mode_threshold(e, m) + 1e-9) {
            return Ok(ModeBlock { m, open_ends: vec![], s: vec![], f_plus: vec![], f_minus: vec![], unitarity_defect: 0.0, condition: 1.0 });
        }
        let jost = jost_pair(model, grid, m, lambda)?;
        let open: Vec<usize> = (0..n_ends).filter(|&e| is_open(model, &jost, e)).collect();
        let cols: Vec<&(usize, Vec<C64>)> = family.iter().filter(|(e, _)| open.contains(e)).collect();
        let mut fp = DMatrix::<C64>::zeros(open.len(), cols.len());
        let mut fm = DMatrix::<C64>::zeros(open.len(), cols.len());
        for (c, (_, psi)) in cols.iter().enumerate() {
            let p = mode_transform(model, grid, &jost, psi, 1.0);
            let q = mode_transform(model, grid, &jost, psi, -1.0);
            for (r, e) in open.iter().enumerate() {
                fp[(r, c)] = p[*e];
                fm[(r, c)] = q[*e];
            }
        }
        let to_rows = |a: &DMatrix<C64>| (0..a.nrows()).map(|r| (0..a.ncols()).map(|c| a[(r, c)]).collect()).collect::<Vec<Vec<C64>>>();
        if open.is_empty() {
            return Ok(ModeBlock { m, open_ends: open, s: vec![], f_plus: vec![], f_minus: vec![], unitarity_defect: 0.0, condition: 1.0 });
        }
        let svd = fm.clone().svd(true, true);
        let sv = &svd.singular_values;
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(condition <= CONDITION_CAP) {
            return Err(Error::RankDeficient(condition));
        }
        let pinv = svd.pseudo_inverse(smax * 1e-14).map_err(|e| Error::Validation(e.to_string()))?;
        let s = &fp * pinv;
        let id = DMatrix::<C64>::identity(open.len(), open.len());
        let unitarity_defect = spectral_norm(&(s.adjoint() * &s - id));
        Ok(ModeBlock { m, open_ends: open, s: to_rows(&s), f_plus: to_rows(&fp), f_minus: to_rows(&fm), unitarity_defect, condition })
    });
    let blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    let unitarity_defect = blocks.iter().map(|b| b.unitarity_defect).fold(0.0, f64::max);
    let condition = blocks.iter().map(|b| b.condition).fold(1.0, f64::max);
    let mut out = ScatteringBlock { lambda, n_ends, blocks, unitarity_defect, condition, offdiag_sv: vec![] };
    for i in 0..n_ends {
        for j in 0..n_ends {
            if i != j {
                if let Ok(s) = transmission_metric(&out, i, j) {
                    out.offdiag_sv.push(OffDiagonal { i, j, sigma_min: s });
                }
            }
        }
    }
    Ok(out)
}

/// `S(λ)` on a list of energies.
pub fn scattering_data(model: &ManifoldModel, grid: &RadialGrid, lambdas: &[f64], modes: &[i32]) -> Result<ScatteringData> {
    let blocks = par_map(lambdas.len(), |k| scattering_matrix(model, grid, lambdas[k], modes));
    Ok(ScatteringData { lambdas: lambdas.to_vec(), blocks: blocks.into_iter().collect::<Result<Vec<_>>>()? })
}

/// Smallest singular value of the block `S_{ij}` over the modes open on
/// end `j` (a mode closed on `i` contributes zero).
pub fn transmission_metric(s: &ScatteringBlock, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Err(Error::Validation("transmission metric needs two distinct ends".into()));
    }
    if i >= s.n_ends || j >= s.n_ends {
        return Err(Error::Validation(format!("end index out of range (model has {} ends)", s.n_ends)));
    }
    let mut sigma = f64::INFINITY;
    for b in &s.blocks {
        if !b.open_ends.contains(&j) {
            continue;
        }
        sigma = sigma.min(s.entry(b.m, i, j).map(|v| v.norm()).unwrap_or(0.0));
    }
    if sigma.is_infinite() {
        return Err(Error::Domain(format!("no open channel on end {j}")));
    }
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{EndSpec, ModelParams, Profile};
    use crate::mode_reduction::{reduce, Stencil};
    use crate::resolvent::limiting_resolvent;

    fn model(a: Profile, b: Profile) -> ManifoldModel {
        ManifoldModel::new(vec![EndSpec::new(a), EndSpec::new(b)], ModelParams::default()).unwrap()
    }

    fn bump_state(grid: &Arc<RadialGrid>, x0: f64, w: f64) -> RadialState {
        let v = grid.xs().iter().map(|x| C64::new(bump(*x, x0 - w, x0 + w), 0.0)).collect();
        RadialState::single(grid.clone(), 0, v)
    }

    #[test]
    fn free_line_transmits_fully() {
        let m = model(Profile::Flat, Profile::Flat);
        let g = RadialGrid::new(&m, &[40.0, 40.0], 0.05).unwrap();
        let s = scattering_matrix(&m, &g, 0.5, &[0]).unwrap();
        assert!(s.unitarity_defect < 1e-6, "{}", s.unitarity_defect);
        assert!((s.entry(0, 1, 0).unwrap().norm() - 1.0).abs() < 1e-6);
        assert!(s.entry(0, 0, 0).unwrap().norm() < 1e-6);
        assert!((transmission_metric(&s, 0, 1).unwrap() - 1.0).abs() < 1e-6);
        assert!(transmission_metric(&s, 1, 1).is_err());
    }

    #[test]
    fn parseval_matches_resolvent_on_euclidean_ends() {
        let m = model(Profile::Euclidean, Profile::Euclidean);
        let g = Arc::new(RadialGrid::new(&m, &[30.0, 30.0], 0.05).unwrap());
        let op = reduce(&m, 0, g.clone(), Stencil::Order4, 0, None).unwrap();
        let psi = bump_state(&g, 2.0, 3.0);
        for lambda in [0.3, 1.1] {
            let f = distorted_ft(&m, &g, lambda, &psi, 1.0).unwrap();
            let phi = limiting_resolvent(&m, std::slice::from_ref(&op), lambda, &psi, 1.0).unwrap();
            let rhs = 2.0 * psi.inner(&phi).im;
            assert!((f.norm_sqr() - rhs).abs() < 1e-6 * psi.norm_sqr(), "{} vs {rhs}", f.norm_sqr());
            // Time reversal: F^−ψ̄ = conj(F^+ψ) for real ψ.
            let fm = distorted_ft(&m, &g, lambda, &psi.conj(), -1.0).unwrap();
            for e in 0..2 {
                assert!((fm.get(e, 0) - f.get(e, 0).conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn averaged_limit_agrees_with_plain_limit() {
        let m = model(Profile::Euclidean, Profile::Euclidean);
        let g = Arc::new(RadialGrid::new(&m, &[20.0, 20.0], 0.05).unwrap());
        let psi = bump_state(&g, -4.0, 2.0);
        let rep = distorted_ft_certified(&m, &g, 0.5, &psi, 1.0, 1e-4).unwrap();
        assert!(rep.plain_vs_averaged < 2e-4, "{}", rep.plain_vs_averaged);
        let zero = RadialState::zeros(g.clone(), vec![0]);
        assert_eq!(distorted_ft(&m, &g, 0.5, &zero, 1.0).unwrap().norm(), 0.0);
    }

    #[test]
    fn intertwining_annihilates_range_of_h_minus_lambda() {
        let m = model(Profile::Euclidean, Profile::Hyperbolic { kappa: 1.0 });
        let g = Arc::new(RadialGrid::new(&m, &[20.0, 20.0], 0.01).unwrap());
        let op = reduce(&m, 1, g.clone(), Stencil::Order4, 1, None).unwrap();
        let chi: Vec<C64> = g.xs().iter().map(|x| C64::new(bump(*x, -3.0, 4.0), 0.0)).collect();
        let mut h = vec![ZERO; g.n];
        op.apply(&chi, &mut h);
        let lambda = 0.7;
        let v: Vec<C64> = h.iter().zip(&chi).map(|(a, b)| a - b * lambda).collect();
        let f = distorted_ft(&m, &g, lambda, &RadialState::single(g.clone(), 1, v), 1.0).unwrap();
        let scale = distorted_ft(&m, &g, lambda, &RadialState::single(g.clone(), 1, chi), 1.0).unwrap().norm();
        assert!(f.norm() < 1e-5 * scale.max(1.0), "{}", f.norm());
    }

    #[test]
    fn decomposition_recovers_outgoing_data() {
        let m = model(Profile::Euclidean, Profile::Euclidean);
        let g = Arc::new(RadialGrid::new(&m, &[300.0, 300.0], 0.05).unwrap());
        let lambda = 0.5;
        let mut xi = BoundaryField::zeros(2, vec![0]);
        xi.set(0, 0, C64::new(0.3, -0.4));
        xi.set(1, 0, C64::new(1.0, 0.2));
        // Pure WKB outgoing state.
        let w = wkb_eigenfunction(&m, &g, lambda, &xi, 1.0).unwrap();
        let d = eigenfunction_decompose(&m, &w, lambda, 1e-2).unwrap();
        assert!(d.xi_plus.max_diff(&xi) < 1e-2, "{:?}", d.xi_plus);
        assert!(d.xi_minus.norm() < 1e-2);
        // Generalized eigenfunction i F^+* ξ.
        let phi = ft_adjoint(&m, &g, lambda, &xi, 1.0).unwrap();
        let mut phi = phi;
        phi.scale(I);
        let d = eigenfunction_decompose(&m, &phi, lambda, 1e-2).unwrap();
        assert!(d.xi_plus.max_diff(&xi) < 1e-2, "{:?} vs {:?}", d.xi_plus, xi);
        let flux = flux_means(&m, &phi, lambda).unwrap();
        let last = flux.last().unwrap().1;
        assert!((last - 2.0 * xi.norm_sqr()).abs() < 2e-2 * xi.norm_sqr(), "{last}");
    }
}
