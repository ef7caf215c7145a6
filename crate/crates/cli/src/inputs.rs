//! Readers for the input files: spectral profiles and packet families
//! (JSON), and sampled right-hand sides (CSV).
//!
//! End indices in every file start at 1, matching the `[ends.i]` sections.

use ends_scatter::dynamics::{Channel, Shape, SpectralProfile};
use ends_scatter::mode_reduction::{RadialGrid, RadialState};
use ends_scatter::numerics::spline::CubicSpline;
use ends_scatter::propagator::Packet;
use ends_scatter::{Error, Result, C64};
use serde::Deserialize;
use std::path::Path;
use std::sync::Arc;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Config { line: e.line(), col: e.column(), msg: e.to_string() }
}

fn end_index(end: usize, n_ends: usize) -> Result<usize> {
    if end == 0 || end > n_ends {
        return Err(Error::Validation(format!("end {end} out of range 1..={n_ends}")));
    }
    Ok(end - 1)
}

fn one() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    #[serde(default)]
    channels: Vec<ChannelSpec>,
    table: Option<TableSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSpec {
    end: usize,
    #[serde(default)]
    m: i32,
    #[serde(default = "one")]
    amp: [f64; 2],
    shape: ShapeSpec,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ShapeSpec {
    Bump { lo: f64, hi: f64 },
    Poly { lo: f64, hi: f64 },
    VelocityBump { lo: f64, hi: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableSpec {
    lambda: Vec<f64>,
    rows: Vec<TableRow>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableRow {
    end: usize,
    #[serde(default)]
    m: i32,
    re: Vec<f64>,
    #[serde(default)]
    im: Vec<f64>,
}

/// Parses a profile `h`:
///
/// ```json
/// {"channels": [{"end": 1, "m": 0, "amp": [1, 0],
///                "shape": {"kind": "bump", "lo": 0.3, "hi": 0.7}}],
///  "table": {"lambda": [0.2, 0.3, 0.4, 0.5],
///            "rows": [{"end": 2, "m": 1, "re": [0, 1, 1, 0], "im": [0, 0, 0, 0]}]}}
/// ```
///
/// Shapes are `bump`, `poly` (`(1 − s²)³`) and `velocity_bump` (a bump in
/// `√(2λ)` on `(lo, hi)`). Table rows must vanish at both ends of the grid.
pub fn parse_profile(text: &str, n_ends: usize) -> Result<SpectralProfile> {
    let f: ProfileFile = serde_json::from_str(text).map_err(json_error)?;
    let mut channels = Vec::new();
    if let Some(t) = f.table {
        let rows = t
            .rows
            .into_iter()
            .map(|r| {
                let im = if r.im.is_empty() { vec![0.0; r.re.len()] } else { r.im };
                if im.len() != r.re.len() {
                    return Err(Error::Validation("table row has re and im of different lengths".into()));
                }
                let v = r.re.iter().zip(&im).map(|(a, b)| C64::new(*a, *b)).collect();
                Ok((end_index(r.end, n_ends)?, r.m, v))
            })
            .collect::<Result<Vec<_>>>()?;
        channels.extend(SpectralProfile::from_table(t.lambda, rows)?.channels);
    }
    for c in f.channels {
        let shape = match c.shape {
            ShapeSpec::Bump { lo, hi } => Shape::Bump { lo, hi },
            ShapeSpec::Poly { lo, hi } => Shape::Poly { lo, hi },
            ShapeSpec::VelocityBump { lo, hi } => Shape::VelocityBump { lo, hi },
        };
        channels.push(Channel { end: end_index(c.end, n_ends)?, m: c.m, amp: C64::new(c.amp[0], c.amp[1]), shape });
    }
    if channels.is_empty() {
        return Err(Error::Validation("profile has no channels".into()));
    }
    SpectralProfile::new(channels)
}

pub fn load_profile(path: &Path, n_ends: usize) -> Result<SpectralProfile> {
    parse_profile(&read(path)?, n_ends)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PacketSpec {
    end: usize,
    #[serde(default)]
    m: i32,
    center: f64,
    width: f64,
    #[serde(default)]
    momentum: f64,
    #[serde(default = "one")]
    amp: [f64; 2],
}

/// Parses a JSON list of Gaussian packets
/// `{"end", "m", "center", "width", "momentum", "amp"}`.
pub fn parse_packets(text: &str, n_ends: usize) -> Result<Vec<Packet>> {
    let specs: Vec<PacketSpec> = serde_json::from_str(text).map_err(json_error)?;
    specs
        .into_iter()
        .map(|p| {
            if !(p.width > 0.0) {
                return Err(Error::Validation(format!("packet width must be positive, got {}", p.width)));
            }
            Ok(Packet { end: end_index(p.end, n_ends)?, m: p.m, center: p.center, width: p.width, momentum: p.momentum, amp: C64::new(p.amp[0], p.amp[1]) })
        })
        .collect()
}

pub fn load_packets(path: &Path, n_ends: usize) -> Result<Vec<Packet>> {
    parse_packets(&read(path)?, n_ends)
}

/// Reads a CSV `x, re, im` (header optional) and interpolates it onto the
/// grid for mode `m`; zero outside the sampled range.
pub fn load_rhs(path: &Path, grid: &Arc<RadialGrid>, m: i32) -> Result<RadialState> {
    let text = read(path)?;
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Option<Vec<f64>> = line.split(',').map(|c| c.trim().parse().ok()).collect();
        match cols {
            Some(c) if c.len() == 3 => {
                xs.push(c[0]);
                vs.push(C64::new(c[1], c[2]));
            }
            None if xs.is_empty() => continue,
            _ => return Err(Error::Config { line: i + 1, col: 1, msg: format!("{}: expected columns x, re, im", path.display()) }),
        }
    }
    if xs.len() < 4 || !xs.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::Validation("right-hand side needs at least 4 rows with increasing x".into()));
    }
    let sp = CubicSpline::new(xs, vs, true);
    Ok(RadialState::single(grid.clone(), m, grid.xs().iter().map(|x| sp.eval(*x)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_accepts_shapes_and_tables() {
        let text = r#"{"channels": [{"end": 1, "shape": {"kind": "bump", "lo": 0.3, "hi": 0.7}},
                                    {"end": 2, "m": 1, "amp": [0, 2], "shape": {"kind": "velocity_bump", "lo": 0.5, "hi": 2}}],
                       "table": {"lambda": [0.2, 0.3, 0.4, 0.5], "rows": [{"end": 2, "re": [0, 1, 1, 0]}]}}"#;
        let h = parse_profile(text, 2).unwrap();
        assert_eq!(h.channels.len(), 3);
        let mut keys = h.keys();
        keys.sort();
        assert_eq!(keys, vec![(0, 0), (1, 0), (1, 1)]);
        assert!(matches!(parse_profile(r#"{"channels": [{"end": 3, "shape": {"kind": "bump", "lo": 0.3, "hi": 0.7}}]}"#, 2), Err(Error::Validation(_))));
        match parse_profile("{\n  \"channels\": [}", 2) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn packets_default_to_unit_amplitude() {
        let p = parse_packets(r#"[{"end": 2, "center": 6, "width": 1, "momentum": 2}]"#, 2).unwrap();
        assert_eq!(p[0].end, 1);
        assert_eq!(p[0].amp, C64::new(1.0, 0.0));
        assert!(parse_packets(r#"[{"end": 1, "center": 6, "width": 0}]"#, 2).is_err());
    }
}
