//! Plain-text model grammar and the reference presets.
//!
//! A config file is a sequence of `[section]` headers and `key = value`
//! lines; `#` starts a comment. Sections and keys:
//!
//! ```text
//! [model]
//! preset = B              # A, B, C, D or free; later keys override it
//! r0 = 2
//! core_half_width = 1
//! horizon = 1e6
//! class_eps = 0.05
//! decay = 1, 1, 1         # sigma, tau, rho
//!
//! [ends.1]                # one section per end; [ends.2] adds a second end
//! profile = euclidean     # euclidean | hyperbolic(k) | conic(a) | flat | table("warp.csv")
//! v_long = power(1, 0.8)  # zero | const(c) | power(c, p) | exp(c, a) | table("v.csv")
//! v_short = zero
//! split = asymptotic      # asymptotic | full
//!
//! [potential]
//! core = square_well(0.5, 1)   # zero | square_well(v0, a) | gaussian(h, w) | table("core.csv")
//!
//! [grid]
//! rmax = 40, 40           # one value per end
//! dr = 0.1
//! stencil_order = 4       # 2, 4 or 0 (spectral)
//! mmax = 8
//!
//! [run]
//! threads = 4
//! tol_s = 1e-6
//! tol_f = 1e-4
//! tol_w = 1e-3
//! tol_adj = 1e-3
//! ```
//!
//! Tables are two-column CSV files (`r, value`; a non-numeric first row is
//! skipped), resolved relative to the config file. Warp tables hold `f`, not
//! `ln f`.

use crate::geometry::{CoreFn, EndSpec, ManifoldModel, ModelParams, Profile, RadialFn, Split};
use crate::mode_reduction::{GridSpec, Stencil};
use crate::numerics::spline::CubicSpline;
use crate::{Error, Result};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Height of the core barrier in preset D.
pub const PRESET_D_BARRIER: f64 = 0.5;
/// Amplitude and exponent of the long-range tail in preset C.
pub const PRESET_C_TAIL: (f64, f64) = (1.0, 0.8);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Two Euclidean ends, no potential.
    A,
    /// Euclidean and hyperbolic (`κ = 1`) ends.
    B,
    /// Preset A with a `r^{−0.8}` long-range tail on the second end.
    C,
    /// Two flat ends with a square barrier on the core.
    D,
    /// Two flat ends, no potential: the free line in every mode.
    Free,
}

impl Preset {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Some(Preset::A),
            "b" => Some(Preset::B),
            "c" => Some(Preset::C),
            "d" => Some(Preset::D),
            "free" => Some(Preset::Free),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::A => "A",
            Preset::B => "B",
            Preset::C => "C",
            Preset::D => "D",
            Preset::Free => "free",
        }
    }

    fn draft(&self) -> Draft {
        let e = EndSpec::new;
        let (ends, core) = match self {
            Preset::A => (vec![e(Profile::Euclidean), e(Profile::Euclidean)], CoreFn::Zero),
            Preset::B => (vec![e(Profile::Euclidean), e(Profile::Hyperbolic { kappa: 1.0 })], CoreFn::Zero),
            Preset::C => (
                vec![
                    e(Profile::Euclidean),
                    e(Profile::Euclidean).with_long(RadialFn::Power { c: PRESET_C_TAIL.0, p: PRESET_C_TAIL.1 }),
                ],
                CoreFn::Zero,
            ),
            Preset::D => (vec![e(Profile::Flat), e(Profile::Flat)], CoreFn::SquareWell { v0: PRESET_D_BARRIER, a: 1.0 }),
            Preset::Free => (vec![e(Profile::Flat), e(Profile::Flat)], CoreFn::Zero),
        };
        let mut d = Draft::default();
        d.params.core_v = core;
        d.ends = ends.into_iter().map(Some).collect();
        d.name = self.name().to_string();
        d
    }

    pub fn model(&self) -> Result<ManifoldModel> {
        self.draft().finish().map(|c| c.model)
    }

    pub fn config(&self) -> Result<Config> {
        self.draft().finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub s: f64,
    pub f: f64,
    pub w: f64,
    pub adj: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { s: 1e-6, f: 1e-4, w: 1e-3, adj: 1e-3 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSpec {
    pub threads: Option<usize>,
    pub tol: Tolerances,
}

#[derive(Debug, Clone)]
pub struct Config {
    /// Preset name, or `custom` when the file defines the model from scratch.
    pub name: String,
    pub model: ManifoldModel,
    pub grid: GridSpec,
    pub run: RunSpec,
}

#[derive(Debug, Clone)]
struct Draft {
    name: String,
    params: ModelParams,
    ends: Vec<Option<EndSpec>>,
    grid: GridSpec,
    run: RunSpec,
}

impl Default for Draft {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            params: ModelParams::default(),
            ends: Vec::new(),
            grid: GridSpec { rmax: Vec::new(), dr: 0.1, stencil: Stencil::Order4, mmax: 8 },
            run: RunSpec::default(),
        }
    }
}

impl Draft {
    fn finish(mut self) -> Result<Config> {
        let ends = self
            .ends
            .iter()
            .enumerate()
            .map(|(i, e)| e.clone().ok_or_else(|| Error::Validation(format!("section [ends.{}] is missing", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        if ends.is_empty() {
            return Err(Error::Validation("no [ends.1] section and no preset".into()));
        }
        if self.grid.rmax.is_empty() {
            self.grid.rmax = vec![40.0; ends.len()];
        } else if self.grid.rmax.len() == 1 && ends.len() == 2 {
            self.grid.rmax.push(self.grid.rmax[0]);
        }
        let model = ManifoldModel::new(ends, self.params)?;
        Ok(Config { name: self.name, model, grid: self.grid, run: self.run })
    }
}

/// Reads and parses a config file; tables resolve against its directory.
pub fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse(&text, path.parent())
}

pub fn parse(text: &str, base: Option<&Path>) -> Result<Config> {
    let mut d = Draft::default();
    let mut section: Option<Section> = None;
    let mut seen: Vec<(String, String)> = Vec::new();
    let mut preset_seen = false;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let err = |col: usize, msg: String| Error::Config { line, col, msg };
        if trimmed.starts_with('[') {
            if !trimmed.ends_with(']') {
                return Err(err(indent + trimmed.len() + 1, "expected ']' to close the section header".into()));
            }
            let name = trimmed[1..trimmed.len() - 1].trim();
            section = Some(Section::parse(name).ok_or_else(|| err(indent + 2, format!("unknown section [{name}]")))?);
            if let Some(Section::End(i)) = section {
                if d.ends.len() <= i {
                    d.ends.resize(i + 1, None);
                }
                if d.ends[i].is_none() {
                    d.ends[i] = Some(EndSpec::new(Profile::Euclidean));
                }
            }
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(err(indent + 1, "expected 'key = value'".into()));
        };
        let key = content[..eq].trim();
        let vstart = eq + 1 + (content[eq + 1..].len() - content[eq + 1..].trim_start().len());
        let value = content[eq + 1..].trim();
        let kcol = indent + 1;
        let vcol = vstart + 1;
        if key.is_empty() {
            return Err(err(kcol, "missing key before '='".into()));
        }
        if value.is_empty() {
            return Err(err(vcol, format!("missing value for '{key}'")));
        }
        let Some(sec) = section else {
            return Err(err(kcol, format!("key '{key}' appears before any section header")));
        };
        let tag = (sec.label(), key.to_string());
        if seen.contains(&tag) {
            return Err(err(kcol, format!("duplicate key '{key}' in [{}]", sec.label())));
        }
        seen.push(tag);
        let verr = |msg: String| Error::Config { line, col: vcol, msg };
        let expr = Expr::parse(value).map_err(|m| verr(m))?;
        match (sec, key) {
            (Section::Model, "preset") => {
                if model_keys_before_preset(&seen) || preset_seen {
                    return Err(err(kcol, "preset must be the first key of [model] and precede [ends.*]".into()));
                }
                if d.ends.iter().any(|e| e.is_some()) {
                    return Err(err(kcol, "preset must precede every [ends.*] section".into()));
                }
                let p = Preset::parse(expr.word().map_err(&verr)?).ok_or_else(|| verr(format!("unknown preset '{value}'")))?;
                let grid = d.grid.clone();
                let run = d.run.clone();
                d = p.draft();
                d.grid = grid;
                d.run = run;
                preset_seen = true;
            }
            (Section::Model, "r0") => d.params.r0 = expr.number().map_err(&verr)?,
            (Section::Model, "core_half_width") => d.params.core_half_width = expr.number().map_err(&verr)?,
            (Section::Model, "horizon") => d.params.horizon = expr.number().map_err(&verr)?,
            (Section::Model, "class_eps") => d.params.class_eps = expr.number().map_err(&verr)?,
            (Section::Model, "decay") => {
                let v = expr.numbers().map_err(&verr)?;
                if v.len() != 3 {
                    return Err(verr(format!("decay takes 3 numbers, got {}", v.len())));
                }
                d.params.decay = (v[0], v[1], v[2]);
            }
            (Section::End(i), k) => {
                let end = d.ends[i].as_mut().expect("end section registered on header");
                match k {
                    "profile" => end.profile = profile(&expr, base).map_err(&verr)?,
                    "v_long" => end.v_long = radial_fn(&expr, base).map_err(&verr)?,
                    "v_short" => end.v_short = radial_fn(&expr, base).map_err(&verr)?,
                    "split" => {
                        end.split = match expr.word().map_err(&verr)? {
                            "asymptotic" => Split::Asymptotic,
                            "full" => Split::Full,
                            w => return Err(verr(format!("unknown split '{w}'"))),
                        }
                    }
                    _ => return Err(err(kcol, format!("unknown key '{k}' in [ends.{}]", i + 1))),
                }
            }
            (Section::Potential, "core") => d.params.core_v = core_fn(&expr, base).map_err(&verr)?,
            (Section::Grid, "rmax") => d.grid.rmax = expr.numbers().map_err(&verr)?,
            (Section::Grid, "dr") => d.grid.dr = expr.number().map_err(&verr)?,
            (Section::Grid, "stencil_order") => {
                d.grid.stencil = Stencil::from_order(expr.count().map_err(&verr)? as u32).map_err(|e| verr(e.to_string()))?
            }
            (Section::Grid, "mmax") => d.grid.mmax = expr.count().map_err(&verr)? as i32,
            (Section::Run, "threads") => d.run.threads = Some(expr.count().map_err(&verr)?),
            (Section::Run, "tol_s") => d.run.tol.s = positive(expr.number().map_err(&verr)?).map_err(&verr)?,
            (Section::Run, "tol_f") => d.run.tol.f = positive(expr.number().map_err(&verr)?).map_err(&verr)?,
            (Section::Run, "tol_w") => d.run.tol.w = positive(expr.number().map_err(&verr)?).map_err(&verr)?,
            (Section::Run, "tol_adj") => d.run.tol.adj = positive(expr.number().map_err(&verr)?).map_err(&verr)?,
            (s, k) => return Err(err(kcol, format!("unknown key '{k}' in [{}]", s.label()))),
        }
    }
    if let Some(i) = d.ends.iter().position(|e| e.is_none()) {
        return Err(Error::Config { line: text.lines().count().max(1), col: 1, msg: format!("section [ends.{}] is missing", i + 1) });
    }
    d.finish()
}

fn model_keys_before_preset(seen: &[(String, String)]) -> bool {
    seen.iter().filter(|(s, _)| s == "model").count() > 1
}

fn positive(v: f64) -> std::result::Result<f64, String> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("tolerance must be positive, got {v}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Model,
    End(usize),
    Potential,
    Grid,
    Run,
}

impl Section {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "model" => Some(Section::Model),
            "potential" => Some(Section::Potential),
            "grid" => Some(Section::Grid),
            "run" => Some(Section::Run),
            "ends.1" => Some(Section::End(0)),
            "ends.2" => Some(Section::End(1)),
            _ => None,
        }
    }

    fn label(&self) -> String {
        match self {
            Section::Model => "model".into(),
            Section::End(i) => format!("ends.{}", i + 1),
            Section::Potential => "potential".into(),
            Section::Grid => "grid".into(),
            Section::Run => "run".into(),
        }
    }
}

/// A value: a bare list of numbers, a word, or `word(args)`.
#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Numbers(Vec<f64>),
    Call { name: String, args: Vec<Arg> },
}

#[derive(Debug, Clone, PartialEq)]
enum Arg {
    Num(f64),
    Str(String),
}

type PResult<T> = std::result::Result<T, String>;

impl Expr {
    fn parse(s: &str) -> PResult<Self> {
        let first = s.chars().next().unwrap_or(' ');
        if first.is_ascii_alphabetic() || first == '_' {
            let (name, rest) = match s.find('(') {
                Some(p) => (&s[..p], Some(&s[p + 1..])),
                None => (s, None),
            };
            let name = name.trim();
            if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(format!("malformed name '{name}'"));
            }
            let args = match rest {
                None => Vec::new(),
                Some(r) => {
                    let inner = r.trim_end().strip_suffix(')').ok_or("expected ')' at the end of the value")?;
                    split_args(inner)?.into_iter().map(|a| parse_arg(&a)).collect::<PResult<Vec<_>>>()?
                }
            };
            return Ok(Expr::Call { name: name.to_ascii_lowercase(), args });
        }
        let nums = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| format!("'{}' is not a number", t.trim())))
            .collect::<PResult<Vec<_>>>()?;
        if let Some(bad) = nums.iter().find(|v| !v.is_finite()) {
            return Err(format!("non-finite number {bad}"));
        }
        Ok(Expr::Numbers(nums))
    }

    fn number(&self) -> PResult<f64> {
        match self {
            Expr::Numbers(v) if v.len() == 1 => Ok(v[0]),
            _ => Err("expected a single number".into()),
        }
    }

    fn numbers(&self) -> PResult<Vec<f64>> {
        match self {
            Expr::Numbers(v) => Ok(v.clone()),
            _ => Err("expected a comma-separated list of numbers".into()),
        }
    }

    fn count(&self) -> PResult<usize> {
        let v = self.number()?;
        if v >= 0.0 && v.fract() == 0.0 && v < 1e9 {
            Ok(v as usize)
        } else {
            Err(format!("expected a non-negative integer, got {v}"))
        }
    }

    fn word(&self) -> PResult<&str> {
        match self {
            Expr::Call { name, args } if args.is_empty() => Ok(name),
            Expr::Numbers(_) => Err("expected a name, got a number".into()),
            _ => Err("expected a bare name".into()),
        }
    }

    fn call(&self) -> PResult<(&str, &[Arg])> {
        match self {
            Expr::Call { name, args } => Ok((name, args)),
            Expr::Numbers(_) => Err("expected a name, got a number".into()),
        }
    }
}

fn split_args(s: &str) -> PResult<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    for c in s.chars() {
        match c {
            '"' => {
                quoted = !quoted;
                cur.push(c);
            }
            ',' if !quoted => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    if quoted {
        return Err("unterminated string".into());
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

fn parse_arg(a: &str) -> PResult<Arg> {
    let a = a.trim();
    if let Some(s) = a.strip_prefix('"') {
        return s.strip_suffix('"').map(|s| Arg::Str(s.to_string())).ok_or_else(|| format!("malformed string {a}"));
    }
    a.parse::<f64>().ok().filter(|v| v.is_finite()).map(Arg::Num).ok_or_else(|| format!("'{a}' is not a number"))
}

fn nums<const N: usize>(name: &str, args: &[Arg]) -> PResult<[f64; N]> {
    if args.len() != N {
        return Err(format!("{name} takes {N} argument(s), got {}", args.len()));
    }
    let mut out = [0.0; N];
    for (o, a) in out.iter_mut().zip(args) {
        *o = match a {
            Arg::Num(v) => *v,
            Arg::Str(_) => return Err(format!("{name} takes numbers")),
        };
    }
    Ok(out)
}

fn table_path(name: &str, args: &[Arg], base: Option<&Path>) -> PResult<PathBuf> {
    match args {
        [Arg::Str(p)] => Ok(base.map(|b| b.join(p)).unwrap_or_else(|| PathBuf::from(p))),
        _ => Err(format!("{name} takes one quoted file path")),
    }
}

/// Two-column CSV with an optional header row.
pub fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<f64>> = cols.iter().map(|c| c.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 => {
                xs.push(v[0]);
                ys.push(v[1]);
            }
            None if xs.is_empty() => continue,
            _ => {
                return Err(Error::Config { line: i + 1, col: 1, msg: format!("{}: expected two numeric columns", path.display()) })
            }
        }
    }
    Ok((xs, ys))
}

fn profile(e: &Expr, base: Option<&Path>) -> PResult<Profile> {
    let (name, args) = e.call()?;
    match name {
        "euclidean" => nums::<0>(name, args).map(|_| Profile::Euclidean),
        "flat" => nums::<0>(name, args).map(|_| Profile::Flat),
        "hyperbolic" => nums::<1>(name, args).map(|[k]| Profile::Hyperbolic { kappa: k }),
        "conic" => nums::<1>(name, args).map(|[a]| Profile::Conic { alpha: a }),
        "table" => {
            let (r, f) = read_table(&table_path(name, args, base)?).map_err(|e| e.to_string())?;
            Profile::from_table(r, f).map_err(|e| e.to_string())
        }
        _ => Err(format!("unknown profile '{name}'")),
    }
}

fn radial_fn(e: &Expr, base: Option<&Path>) -> PResult<RadialFn> {
    let (name, args) = e.call()?;
    match name {
        "zero" => nums::<0>(name, args).map(|_| RadialFn::Zero),
        "const" => nums::<1>(name, args).map(|[c]| RadialFn::Const(c)),
        "power" => nums::<2>(name, args).map(|[c, p]| RadialFn::Power { c, p }),
        "exp" => nums::<2>(name, args).map(|[c, a]| RadialFn::Exp { c, a }),
        "table" => {
            let (r, v) = read_table(&table_path(name, args, base)?).map_err(|e| e.to_string())?;
            RadialFn::from_table(r, v).map_err(|e| e.to_string())
        }
        _ => Err(format!("unknown potential '{name}'")),
    }
}

fn core_fn(e: &Expr, base: Option<&Path>) -> PResult<CoreFn> {
    let (name, args) = e.call()?;
    match name {
        "zero" => nums::<0>(name, args).map(|_| CoreFn::Zero),
        "square_well" => nums::<2>(name, args).map(|[v0, a]| CoreFn::SquareWell { v0, a }),
        "gaussian" => nums::<2>(name, args).map(|[h, w]| CoreFn::Gaussian { h, w }),
        "table" => {
            let (x, v) = read_table(&table_path(name, args, base)?).map_err(|e| e.to_string())?;
            if x.len() < 4 || !x.windows(2).all(|w| w[1] > w[0]) {
                return Err("core table needs at least 4 rows with increasing x".into());
            }
            Ok(CoreFn::Table(Arc::new(CubicSpline::new(x, v, true))))
        }
        _ => Err(format!("unknown core potential '{name}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PotentialClass;

    #[test]
    fn presets_have_expected_thresholds() {
        let b = Preset::B.model().unwrap();
        assert!((b.lambda0() - 0.125).abs() < 1e-9);
        let classes: Vec<_> = b.end_info().iter().map(|e| e.class_tag).collect();
        assert_eq!(classes, vec![PotentialClass::ShortRange, PotentialClass::ShortRange]);
        let c = Preset::C.model().unwrap();
        assert_eq!(c.end_info()[1].class_tag, PotentialClass::Dollard);
        for p in [Preset::A, Preset::D, Preset::Free] {
            assert_eq!(p.model().unwrap().lambda0(), 0.0);
        }
    }

    #[test]
    fn parses_full_file_and_overrides_preset() {
        let text = "# comment\n[model]\npreset = A\nr0 = 3\n\n[ends.2]\nprofile = hyperbolic(2)  # steep\nv_long = power(0.5, 1.5)\n[potential]\ncore = gaussian(0.2, 0.5)\n[grid]\nrmax = 30, 50\ndr = 0.05\nstencil_order = 0\nmmax = 3\n[run]\nthreads = 2\ntol_s = 1e-7\n";
        let c = parse(text, None).unwrap();
        assert_eq!(c.name, "A");
        assert_eq!(c.model.r0(), 3.0);
        assert_eq!(c.model.ends[1].profile.name(), "hyperbolic(2)");
        assert_eq!(c.grid, GridSpec { rmax: vec![30.0, 50.0], dr: 0.05, stencil: Stencil::Spectral, mmax: 3 });
        assert_eq!(c.run.threads, Some(2));
        assert_eq!(c.run.tol.s, 1e-7);
        assert_eq!(c.run.tol.w, 1e-3);
        assert!((c.model.lambda0() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn errors_carry_line_and_column() {
        let cases: [(&str, usize, usize); 6] = [
            ("[model]\nr0 = abc\n", 2, 6),
            ("[ends.1]\nprofile = banana\n", 2, 11),
            ("[model\n", 1, 7),
            ("[ends.1]\n  profile euclidean\n", 2, 3),
            ("[nope]\n", 1, 2),
            ("[ends.1]\nprofile = hyperbolic(1, 2)\n", 2, 11),
        ];
        for (text, line, col) in cases {
            match parse(text, None) {
                Err(Error::Config { line: l, col: c, .. }) => assert_eq!((l, c), (line, col), "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
        assert!(matches!(parse("[ends.2]\nprofile = flat\n", None), Err(Error::Config { .. })));
    }

    #[test]
    fn reads_tables_relative_to_the_file() {
        let dir = std::env::temp_dir().join(format!("ends_scatter_cfg_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let rows: String = (0..12).map(|i| format!("{},{}\n", 0.5 + i as f64, 1.0 + 0.5 + i as f64)).collect();
        std::fs::write(dir.join("warp.csv"), format!("r,f\n{rows}")).unwrap();
        std::fs::write(dir.join("m.cfg"), "[ends.1]\nprofile = table(\"warp.csv\")\n").unwrap();
        let c = load(&dir.join("m.cfg")).unwrap();
        assert_eq!(c.model.n_ends(), 1);
        assert_eq!(c.grid.rmax, vec![40.0]);
        std::fs::remove_dir_all(&dir).ok();
    }
}
