//! Command-line driver: loads a model from a preset or config file, runs one
//! experiment and writes JSON reports and CSV data into `--out`.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 when a numerical
//! procedure fails or a reported quantity misses its tolerance. An
//! `error.json` is written whenever the run stops with an error.

pub mod inputs;
pub mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ends_scatter::config::{self, Config, Preset};
use ends_scatter::dynamics::{comparison_state, dollard_state, leading_term, shortrange_state, OscillatoryOptions};
use ends_scatter::fourier::scattering_data;
use ends_scatter::mode_reduction::{besov_norms, reduce, RadialGrid, RadialState, Stencil};
use ends_scatter::numerics::loglog_slope;
use ends_scatter::oracle::{compare_closed_form, compare_evolution, small_eps_series};
use ends_scatter::propagator::{adjoint_identity_check, transmission_experiment, wave_operator, EvolutionConfig, Propagator};
use ends_scatter::resolvent::{limiting_resolvent_mode, sommerfeld_check};
use ends_scatter::{Error, Result, C64};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const THREADS_ENV: &str = "ENDS_SCATTER_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ends-scatter", version, about = "Scattering experiments on surfaces of revolution with one or two ends")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Reference model: A, B, C, D or free.
    #[arg(long, global = true, conflicts_with = "config")]
    pub preset: Option<String>,
    /// Model config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Outer radius per end (comma separated; one value applies to all ends).
    #[arg(long, global = true, value_delimiter = ',')]
    pub rmax: Option<Vec<f64>>,
    /// Grid spacing.
    #[arg(long, global = true)]
    pub dr: Option<f64>,
    /// Stencil order: 2, 4 or 0 (spectral).
    #[arg(long = "stencil-order", global = true)]
    pub stencil_order: Option<u32>,
    /// Largest angular mode.
    #[arg(long, global = true)]
    pub mmax: Option<i32>,
    /// Unitarity tolerance for S (default 1e-6).
    #[arg(long = "tol-s", global = true)]
    pub tol_s: Option<f64>,
    /// Tolerance of the averaged Fourier limit (default 1e-4).
    #[arg(long = "tol-f", global = true)]
    pub tol_f: Option<f64>,
    /// Cauchy tolerance of the wave operator (default 1e-3).
    #[arg(long = "tol-w", global = true)]
    pub tol_w: Option<f64>,
    /// Adjoint identity tolerance (default 1e-3).
    #[arg(long = "tol-adj", global = true)]
    pub tol_adj: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Exact,
    Leading,
    Sr,
    Do,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    Evolution,
    Resolvent,
    ClosedForm,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Thresholds, potential classes and effective potentials of the model.
    ModelCheck,
    /// Limiting resolvent of one mode applied to a sampled right-hand side.
    Resolvent {
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        mode: i32,
        /// CSV `x, re, im`; default is `exp(−x²)`.
        #[arg(long)]
        rhs: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "plus")]
        sign: Sign,
    },
    /// Scattering matrix on an energy grid `a:b:n`.
    Smatrix {
        #[arg(long = "lambda-grid")]
        lambda_grid: String,
        /// Overrides --tol-s.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Comparison dynamics applied to a spectral profile.
    Dynamics {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        #[arg(long, value_enum, default_value = "leading")]
        variant: Variant,
        #[arg(long, value_enum, default_value = "plus")]
        sign: Sign,
    },
    /// Wave operator by Cauchy iteration, with an optional adjoint check.
    Waveop {
        #[arg(long)]
        profile: PathBuf,
        /// Packet family (JSON) for the adjoint identity.
        #[arg(long)]
        packets: Option<PathBuf>,
        #[arg(long = "t-grid", value_delimiter = ',', default_value = "10,20,40,80,160,320")]
        t_grid: Vec<f64>,
        /// Overrides --tol-w.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value = "plus")]
        sign: Sign,
        /// Chebyshev step.
        #[arg(long, default_value_t = 5.0)]
        dt: f64,
        /// Outer radius of the grid used for Fourier transforms of packets.
        #[arg(long = "ft-rmax", default_value_t = 30.0)]
        ft_rmax: f64,
        #[arg(long = "ft-dr", default_value_t = 0.05)]
        ft_dr: f64,
        /// Gauss–Legendre nodes in energy.
        #[arg(long, default_value_t = 48)]
        nodes: usize,
    },
    /// Incoming packet from one end, mass arriving on another.
    Transmission {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        from: usize,
        #[arg(long)]
        to: usize,
        #[arg(long = "t-prepare")]
        t_prepare: f64,
        #[arg(long, default_value_t = 5.0)]
        dt: f64,
        /// Outer radius of the grid used for S.
        #[arg(long = "s-rmax", default_value_t = 40.0)]
        s_rmax: f64,
        #[arg(long, default_value_t = 32)]
        nodes: usize,
    },
    /// Brute-force cross-checks.
    Oracle {
        #[arg(long, value_enum)]
        kind: OracleKind,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        mode: i32,
        #[arg(long = "lambda-grid", default_value = "0.3:1.0:8")]
        lambda_grid: String,
        #[arg(long, default_value_t = 5.0)]
        t: f64,
        #[arg(long = "n-theta", default_value_t = 48)]
        n_theta: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ModelCheck => "model-check",
            Command::Resolvent { .. } => "resolvent",
            Command::Smatrix { .. } => "smatrix",
            Command::Dynamics { .. } => "dynamics",
            Command::Waveop { .. } => "waveop",
            Command::Transmission { .. } => "transmission",
            Command::Oracle { .. } => "oracle",
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

#[derive(Serialize)]
struct ErrorBody {
    kind: &'static str,
    message: String,
    exit_code: i32,
}

/// Runs the parsed command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let name = cli.command.name();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error: {e}");
            let body = ErrorBody { kind: if code == 3 { "numerical" } else { "validation" }, message: e.to_string(), exit_code: code };
            let model = cli.common.preset.clone().unwrap_or_else(|| "custom".into());
            if let Err(w) = output::write_json(&cli.common.out, "error.json", name, &model, &body) {
                eprintln!("error: could not write error.json: {w}");
            }
            code
        }
    }
}

/// Parses `a:b:n` into `n` equally spaced values from `a` to `b`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Validation(format!("energy grid '{spec}' must look like a:b:n"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() || (n > 1 && !(b > a)) {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
}

/// Loads the config and applies the command-line overrides.
pub fn resolve_config(c: &Common) -> Result<Config> {
    let mut cfg = match (&c.preset, &c.config) {
        (Some(p), None) => Preset::parse(p).ok_or_else(|| Error::Validation(format!("unknown preset '{p}' (A, B, C, D, free)")))?.config()?,
        (None, Some(path)) => config::load(path)?,
        (None, None) => return Err(Error::Validation("pass --preset or --config".into())),
        (Some(_), Some(_)) => return Err(Error::Validation("--preset and --config are exclusive".into())),
    };
    let n = cfg.model.n_ends();
    if let Some(r) = &c.rmax {
        cfg.grid.rmax = match r.len() {
            1 => vec![r[0]; n],
            k if k == n => r.clone(),
            k => return Err(Error::Validation(format!("--rmax takes 1 or {n} values, got {k}"))),
        };
    }
    if let Some(dr) = c.dr {
        cfg.grid.dr = dr;
    }
    if let Some(o) = c.stencil_order {
        cfg.grid.stencil = Stencil::from_order(o)?;
    }
    if let Some(m) = c.mmax {
        if m < 0 {
            return Err(Error::Validation("--mmax must be non-negative".into()));
        }
        cfg.grid.mmax = m;
    }
    let tol = &mut cfg.run.tol;
    for (flag, dst) in [(c.tol_s, &mut tol.s), (c.tol_f, &mut tol.f), (c.tol_w, &mut tol.w), (c.tol_adj, &mut tol.adj)] {
        if let Some(v) = flag {
            if !(v > 0.0) {
                return Err(Error::Validation(format!("tolerances must be positive, got {v}")));
            }
            *dst = v;
        }
    }
    Ok(cfg)
}

/// Caps the global pool at the smaller of `ENDS_SCATTER_THREADS` and the
/// config's `threads`. Later calls in the same process keep the first pool.
pub fn configure_threads(from_config: Option<usize>) -> Result<()> {
    let env = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().ok().filter(|n| *n > 0).ok_or_else(|| Error::Validation(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?),
        Err(_) => None,
    };
    let n = match (env, from_config) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<i32> {
    let cfg = resolve_config(&cli.common)?;
    configure_threads(cfg.run.threads)?;
    let out = cli.common.out.as_path();
    output::ensure_dir(out)?;
    let name = cli.command.name();
    match &cli.command {
        Command::ModelCheck => model_check(&cfg, out, name),
        Command::Resolvent { lambda, mode, rhs, sign } => resolvent(&cfg, out, name, *lambda, *mode, rhs.as_deref(), sign.value()),
        Command::Smatrix { lambda_grid, tol } => smatrix(&cfg, out, name, &parse_grid(lambda_grid)?, tol.unwrap_or(cfg.run.tol.s)),
        Command::Dynamics { profile, times, variant, sign } => dynamics(&cfg, out, name, profile, times, *variant, sign.value()),
        Command::Waveop { profile, packets, t_grid, tol, sign, dt, ft_rmax, ft_dr, nodes } => {
            let ft = FtGrid { rmax: *ft_rmax, dr: *ft_dr, nodes: *nodes };
            waveop(&cfg, out, name, profile, packets.as_deref(), t_grid, tol.unwrap_or(cfg.run.tol.w), sign.value(), *dt, ft)
        }
        Command::Transmission { profile, from, to, t_prepare, dt, s_rmax, nodes } => transmission(&cfg, out, name, profile, *from, *to, *t_prepare, *dt, *s_rmax, *nodes),
        Command::Oracle { kind, lambda, mode, lambda_grid, t, n_theta } => oracle(&cfg, out, name, *kind, *lambda, *mode, lambda_grid, *t, *n_theta),
    }
}

#[derive(Serialize)]
struct ModelCheck {
    n_ends: usize,
    r0: f64,
    lambda0: f64,
    per_end: Vec<f64>,
    classes: Vec<ends_scatter::geometry::PotentialClass>,
    fitted_exponents: Vec<Option<f64>>,
    profiles: Vec<String>,
    /// `q` on each end at `r = r₀`.
    effective_potential_r0: Vec<f64>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn model_check(cfg: &Config, out: &Path, name: &str) -> Result<i32> {
    let m = &cfg.model;
    let info = m.end_info();
    let body = ModelCheck {
        n_ends: m.n_ends(),
        r0: m.r0(),
        lambda0: m.lambda0(),
        per_end: info.iter().map(|e| e.lambda0_end).collect(),
        classes: info.iter().map(|e| e.class_tag).collect(),
        fitted_exponents: info.iter().map(|e| finite(e.fitted_exponent)).collect(),
        profiles: info.iter().map(|e| e.profile.clone()).collect(),
        effective_potential_r0: (0..m.n_ends()).map(|e| m.effective_potential(m.r0(), e)).collect::<Result<_>>()?,
    };
    output::write_json(out, "model_check.json", name, &cfg.name, &body)?;
    Ok(0)
}

#[derive(Serialize)]
struct ResolventBody {
    lambda: f64,
    mode: i32,
    sign: f64,
    wronskian: C64,
    equation_residual: f64,
    radiation_tail: Vec<f64>,
    passes: bool,
    besov_rhs: ends_scatter::mode_reduction::BesovNorms,
    besov_solution: ends_scatter::mode_reduction::BesovNorms,
}

fn resolvent(cfg: &Config, out: &Path, name: &str, lambda: f64, m: i32, rhs: Option<&Path>, sign: f64) -> Result<i32> {
    let model = &cfg.model;
    let grid = cfg.grid.build(model)?;
    let op = reduce(model, m, grid.clone(), cfg.grid.stencil, cfg.grid.mmax.max(m.abs()), None)?;
    let psi = match rhs {
        Some(p) => inputs::load_rhs(p, &grid, m)?,
        None => RadialState::single(grid.clone(), m, grid.xs().iter().map(|x| C64::new((-x * x).exp(), 0.0)).collect()),
    };
    let sol = limiting_resolvent_mode(model, &op, lambda, &psi.data[0], sign, None)?;
    let phi = RadialState::single(grid.clone(), m, sol.phi.clone());
    let ops = [op];
    let check = sommerfeld_check(model, &ops, &phi, &psi, lambda, sign, 1e-3)?;
    let body = ResolventBody {
        lambda,
        mode: m,
        sign,
        wronskian: sol.jost.wronskian,
        equation_residual: check.equation_residual,
        radiation_tail: check.radiation_tail.clone(),
        passes: check.passes(),
        besov_rhs: besov_norms(&psi),
        besov_solution: besov_norms(&phi),
    };
    output::write_text(out, "resolvent.csv", &output::state_csv(model, &phi))?;
    output::write_json(out, "resolvent.json", name, &cfg.name, &body)?;
    Ok(if body.passes { 0 } else { 3 })
}

#[derive(Serialize)]
struct SEntry {
    m: i32,
    /// 1-based ends whose channel is open in this mode.
    open_ends: Vec<usize>,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
    unitarity_defect: f64,
}

#[derive(Serialize)]
struct SPoint {
    lambda: f64,
    unitarity_defect: f64,
    condition: f64,
    /// `(i, j, σ_min(S_ij))` with 1-based ends.
    offdiag_sv: Vec<(usize, usize, f64)>,
    #[serde(rename = "S")]
    s: Vec<SEntry>,
}

#[derive(Serialize)]
struct SBody {
    tol: f64,
    max_unitarity_defect: f64,
    passes: bool,
    modes: Vec<i32>,
    points: Vec<SPoint>,
}

fn smatrix(cfg: &Config, out: &Path, name: &str, lambdas: &[f64], tol: f64) -> Result<i32> {
    let model = &cfg.model;
    let grid = cfg.grid.build(model)?;
    let modes = cfg.grid.modes();
    let data = scattering_data(model, &grid, lambdas, &modes)?;
    let mut csv = String::from("lambda,m,i,j,re,im,abs\n");
    let mut points = Vec::new();
    for b in &data.blocks {
        let mut s = Vec::new();
        for blk in &b.blocks {
            for (a, i) in blk.open_ends.iter().enumerate() {
                for (c, j) in blk.open_ends.iter().enumerate() {
                    let v = blk.s[a][c];
                    let _ = writeln!(csv, "{},{},{},{},{:e},{:e},{:e}", b.lambda, blk.m, i + 1, j + 1, v.re, v.im, v.norm());
                }
            }
            s.push(SEntry {
                m: blk.m,
                open_ends: blk.open_ends.iter().map(|e| e + 1).collect(),
                re: blk.s.iter().map(|r| r.iter().map(|v| v.re).collect()).collect(),
                im: blk.s.iter().map(|r| r.iter().map(|v| v.im).collect()).collect(),
                unitarity_defect: blk.unitarity_defect,
            });
        }
        points.push(SPoint {
            lambda: b.lambda,
            unitarity_defect: b.unitarity_defect,
            condition: b.condition,
            offdiag_sv: b.offdiag_sv.iter().map(|o| (o.i + 1, o.j + 1, o.sigma_min)).collect(),
            s,
        });
    }
    let max_unitarity_defect = points.iter().map(|p| p.unitarity_defect).fold(0.0, f64::max);
    let passes = max_unitarity_defect <= tol;
    let body = SBody { tol, max_unitarity_defect, passes, modes, points };
    output::write_text(out, "smatrix.csv", &csv)?;
    output::write_json(out, "smatrix.json", name, &cfg.name, &body)?;
    Ok(if passes { 0 } else { 3 })
}

#[derive(Serialize)]
struct DynamicsBody {
    variant: &'static str,
    sign: f64,
    h_norm: f64,
    times: Vec<f64>,
    norms: Vec<f64>,
    /// `‖state − U₀(t)h‖`; empty for the leading variant.
    distance_to_leading: Vec<f64>,
    /// Log-log slope of `distance_to_leading` against `t`.
    decay_slope: Option<f64>,
    files: Vec<String>,
}

fn dynamics(cfg: &Config, out: &Path, name: &str, profile: &Path, times: &[f64], variant: Variant, sign: f64) -> Result<i32> {
    let model = &cfg.model;
    let grid = cfg.grid.build(model)?;
    let h = inputs::load_profile(profile, model.n_ends())?;
    if let Some(t) = times.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::Validation(format!("times must be positive, got {t}")));
    }
    let mut norms = Vec::new();
    let mut dist = Vec::new();
    let mut files = Vec::new();
    for &t in times {
        let state = match variant {
            Variant::Leading => leading_term(model, &grid, &h, t, sign)?,
            Variant::Exact => comparison_state(model, &grid, &h, t, sign, &OscillatoryOptions::default())?.0,
            Variant::Sr => shortrange_state(model, &grid, &h, t, sign)?.state,
            Variant::Do => dollard_state(model, &grid, &h, t, sign)?.state,
        };
        norms.push(state.norm());
        if variant != Variant::Leading {
            dist.push(state.sub(&leading_term(model, &grid, &h, t, sign)?).norm());
        }
        let file = format!("state_t{t}.csv");
        output::write_text(out, &file, &output::state_csv(model, &state))?;
        files.push(file);
    }
    let decay_slope = (dist.len() >= 2 && dist.iter().all(|d| *d > 0.0)).then(|| loglog_slope(times, &dist));
    let body = DynamicsBody {
        variant: match variant {
            Variant::Exact => "exact",
            Variant::Leading => "leading",
            Variant::Sr => "sr",
            Variant::Do => "do",
        },
        sign,
        h_norm: h.norm(),
        times: times.to_vec(),
        norms,
        distance_to_leading: dist,
        decay_slope,
        files,
    };
    output::write_json(out, "dynamics.json", name, &cfg.name, &body)?;
    Ok(0)
}

#[derive(Debug, Clone, Copy)]
struct FtGrid {
    rmax: f64,
    dr: f64,
    nodes: usize,
}

#[derive(Serialize)]
struct WaveopBody {
    sign: f64,
    cauchy: ends_scatter::propagator::CauchyReport,
    adjoint: Option<ends_scatter::propagator::AdjointReport>,
    tol_adj: f64,
    passes: bool,
}

#[allow(clippy::too_many_arguments)]
fn waveop(cfg: &Config, out: &Path, name: &str, profile: &Path, packets: Option<&Path>, t_grid: &[f64], tol: f64, sign: f64, dt: f64, ft: FtGrid) -> Result<i32> {
    let model = &cfg.model;
    let grid = cfg.grid.build(model)?;
    let h = inputs::load_profile(profile, model.n_ends())?;
    let ecfg = EvolutionConfig { dt, stencil: cfg.grid.stencil, ..EvolutionConfig::default() };
    let prop = Propagator::new(model, grid, &h.modes(), ecfg)?;
    let est = wave_operator(model, &prop, &h, t_grid, sign, tol)?;
    let adjoint = match packets {
        Some(p) => {
            let family = inputs::load_packets(p, model.n_ends())?;
            let ft_grid = Arc::new(RadialGrid::new(model, &vec![ft.rmax; model.n_ends()], ft.dr)?);
            Some(adjoint_identity_check(model, &est.state, &ft_grid, &h, &family, sign, ft.nodes)?)
        }
        None => None,
    };
    let tol_adj = cfg.run.tol.adj;
    let passes = est.report.converged && adjoint.as_ref().map(|a| a.max_defect <= tol_adj).unwrap_or(true);
    output::write_text(out, "waveop_state.csv", &output::state_csv(model, &est.state))?;
    output::write_json(out, "waveop.json", name, &cfg.name, &WaveopBody { sign, cauchy: est.report, adjoint, tol_adj, passes })?;
    Ok(if passes { 0 } else { 3 })
}

#[allow(clippy::too_many_arguments)]
fn transmission(cfg: &Config, out: &Path, name: &str, profile: &Path, from: usize, to: usize, t_prepare: f64, dt: f64, s_rmax: f64, nodes: usize) -> Result<i32> {
    let model = &cfg.model;
    let n = model.n_ends();
    if from == 0 || to == 0 || from > n || to > n {
        return Err(Error::Validation(format!("ends must lie in 1..={n}")));
    }
    let grid = cfg.grid.build(model)?;
    let h = inputs::load_profile(profile, n)?;
    let ecfg = EvolutionConfig { dt, stencil: cfg.grid.stencil, ..EvolutionConfig::default() };
    let prop = Propagator::new(model, grid, &h.modes(), ecfg)?;
    let s_grid = RadialGrid::new(model, &vec![s_rmax; n], cfg.grid.dr)?;
    let mut rep = transmission_experiment(model, &prop, &s_grid, &h, from - 1, to - 1, t_prepare, nodes)?;
    rep.from += 1;
    rep.to += 1;
    output::write_json(out, "transmission.json", name, &cfg.name, &rep)?;
    Ok(0)
}

#[derive(Serialize)]
#[serde(untagged)]
enum OracleBody {
    Evolution(ends_scatter::oracle::OracleComparison),
    Resolvent(ends_scatter::oracle::SmallEpsReport),
    ClosedForm { rows: Vec<ends_scatter::oracle::ClosedFormRow>, max_error: f64 },
}

#[allow(clippy::too_many_arguments)]
fn oracle(cfg: &Config, out: &Path, name: &str, kind: OracleKind, lambda: f64, mode: i32, lambda_grid: &str, t: f64, n_theta: usize) -> Result<i32> {
    let model = &cfg.model;
    let grid = cfg.grid.build(model)?;
    let body = match kind {
        OracleKind::Evolution => {
            let modes: Vec<i32> = (-cfg.grid.mmax.min(2)..=cfg.grid.mmax.min(2)).collect();
            let mut psi = RadialState::zeros(grid.clone(), modes.clone());
            for (k, m) in modes.iter().enumerate() {
                let amp = 1.0 / (1.0 + m.abs() as f64);
                let kick = 0.25 * *m as f64 + 0.5;
                psi.data[k] = grid.xs().iter().map(|x| C64::new(0.0, kick * x).exp() * amp * (-(x - 0.5).powi(2) / 2.0).exp()).collect();
            }
            OracleBody::Evolution(compare_evolution(model, grid, n_theta, &psi, t, cfg.grid.stencil)?)
        }
        OracleKind::Resolvent => {
            let psi: Vec<C64> = grid.xs().iter().map(|x| C64::new((-(x - 1.0).powi(2)).exp(), 0.0)).collect();
            OracleBody::Resolvent(small_eps_series(model, &grid, mode, lambda, &psi, &[0.1, 0.05, 0.025, 0.0125])?)
        }
        OracleKind::ClosedForm => {
            let rows = compare_closed_form(model, &grid, &parse_grid(lambda_grid)?, &cfg.grid.modes())?;
            let max_error = rows.iter().map(|r| r.max_error).fold(0.0, f64::max);
            OracleBody::ClosedForm { rows, max_error }
        }
    };
    output::write_json(out, "oracle.json", name, &cfg.name, &body)?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_grid_parsing() {
        assert_eq!(parse_grid("0.3:1.0:8").unwrap().len(), 8);
        assert_eq!(parse_grid("0.5:0.5:1").unwrap(), vec![0.5]);
        for bad in ["0.3:1.0", "1:0.3:4", "a:1:3", "0:1:0"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn overrides_apply_on_top_of_presets() {
        let cli = Cli::parse_from(["ends-scatter", "--preset", "B", "--rmax", "30", "--mmax", "2", "--tol-s", "1e-7", "model-check"]);
        let cfg = resolve_config(&cli.common).unwrap();
        assert_eq!(cfg.grid.rmax, vec![30.0, 30.0]);
        assert_eq!(cfg.grid.modes(), vec![-2, -1, 0, 1, 2]);
        assert_eq!(cfg.run.tol.s, 1e-7);
        let cli = Cli::parse_from(["ends-scatter", "model-check"]);
        assert!(matches!(resolve_config(&cli.common), Err(Error::Validation(_))));
    }

    fn scratch(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("ends-scatter-cli-{name}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        dir
    }

    fn json(path: &Path) -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    fn run_args(args: &[&str]) -> i32 {
        run(&Cli::parse_from(std::iter::once("ends-scatter").chain(args.iter().copied())))
    }

    #[test]
    fn model_check_reports_thresholds_of_preset_b() {
        let out = scratch("model-check");
        assert_eq!(run_args(&["--preset", "B", "--out", out.to_str().unwrap(), "model-check"]), 0);
        let v = json(&out.join("model_check.json"));
        assert_eq!(v["schema"], 1);
        assert_eq!(v["lambda0"], 0.125);
        assert_eq!(v["per_end"], serde_json::json!([0.0, 0.125]));
        assert_eq!(v["classes"], serde_json::json!(["short_range", "short_range"]));
        let _ = std::fs::remove_dir_all(&out);
    }

    #[test]
    fn malformed_config_exits_with_validation_code() {
        let out = scratch("malformed");
        std::fs::create_dir_all(&out).unwrap();
        let cfg = out.join("bad.cfg");
        std::fs::write(&cfg, "[model]\npreset = A\n\n[grid]\ndr = fast\n").unwrap();
        assert_eq!(run_args(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "model-check"]), 2);
        let v = json(&out.join("error.json"));
        assert_eq!(v["exit_code"], 2);
        let msg = v["message"].as_str().unwrap();
        assert!(msg.contains("line 5, column 6"), "{msg}");
        let _ = std::fs::remove_dir_all(&out);
    }

    #[test]
    fn smatrix_on_free_model_is_unitary() {
        let out = scratch("smatrix");
        assert_eq!(run_args(&["--preset", "free", "--out", out.to_str().unwrap(), "smatrix", "--lambda-grid", "0.3:1.0:8"]), 0);
        let v = json(&out.join("smatrix.json"));
        let points = v["points"].as_array().unwrap();
        assert_eq!(points.len(), 8);
        for p in points {
            assert!(p["unitarity_defect"].as_f64().unwrap() <= 1e-6);
        }
        let csv = std::fs::read_to_string(out.join("smatrix.csv")).unwrap();
        assert!(csv.starts_with("lambda,m,i,j,re,im,abs\n"));
        let _ = std::fs::remove_dir_all(&out);
    }

    #[test]
    fn missed_tolerance_exits_with_code_three() {
        let out = scratch("tolerance");
        let code = run_args(&["--preset", "A", "--mmax", "1", "--rmax", "30", "--tol-s", "1e-30", "--out", out.to_str().unwrap(), "smatrix", "--lambda-grid", "0.5:0.6:2"]);
        assert_eq!(code, 3);
        let v = json(&out.join("smatrix.json"));
        assert_eq!(v["passes"], false);
        let _ = std::fs::remove_dir_all(&out);
    }
}
