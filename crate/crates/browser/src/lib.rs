//! Browser bindings: model summary, an |S| scan over energy and the
//! leading-term density of an outgoing packet. Results cross the boundary
//! as JSON strings or flat `Float64Array`s.

use ends_scatter::config::Preset;
use ends_scatter::dynamics::{leading_term, SpectralProfile};
use ends_scatter::fourier::scattering_data;
use ends_scatter::geometry::ManifoldModel;
use ends_scatter::mode_reduction::RadialGrid;
use ends_scatter::{Error, Result, C64};
use serde::Serialize;
use std::sync::Arc;
use wasm_bindgen::prelude::*;

/// Grid used by the scans; small enough to stay interactive.
const SCAN_RMAX: f64 = 30.0;
const SCAN_DR: f64 = 0.1;
const MAX_POINTS: usize = 200;
const MAX_MODE: i32 = 6;

fn preset_model(name: &str) -> Result<ManifoldModel> {
    Preset::parse(name).ok_or_else(|| Error::Validation(format!("unknown preset '{name}'")))?.model()
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[derive(Serialize)]
struct Summary {
    lambda0: f64,
    per_end: Vec<f64>,
    classes: Vec<String>,
    profiles: Vec<String>,
}

pub fn summary_json(preset: &str) -> Result<String> {
    let m = preset_model(preset)?;
    let info = m.end_info();
    let s = Summary {
        lambda0: m.lambda0(),
        per_end: info.iter().map(|e| e.lambda0_end).collect(),
        classes: info.iter().map(|e| format!("{:?}", e.class_tag)).collect(),
        profiles: info.iter().map(|e| e.profile.clone()).collect(),
    };
    serde_json::to_string(&s).map_err(|e| Error::Io(e.to_string()))
}

#[derive(Serialize)]
struct ModeCurve {
    m: i32,
    /// `|S_21|` per energy; `null` where the mode is closed.
    transmission: Vec<Option<f64>>,
    reflection: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct Scan {
    lambdas: Vec<f64>,
    max_unitarity_defect: f64,
    modes: Vec<ModeCurve>,
}

pub fn scan_json(preset: &str, lo: f64, hi: f64, points: usize, mmax: i32) -> Result<String> {
    if !(hi > lo) || points < 2 || points > MAX_POINTS || !(0..=MAX_MODE).contains(&mmax) {
        return Err(Error::Validation(format!("need lo < hi, 2..={MAX_POINTS} points and mmax in 0..={MAX_MODE}")));
    }
    let m = preset_model(preset)?;
    if m.n_ends() != 2 {
        return Err(Error::Validation("the scan needs two ends".into()));
    }
    let g = RadialGrid::new(&m, &[SCAN_RMAX, SCAN_RMAX], SCAN_DR)?;
    let lambdas: Vec<f64> = (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect();
    let modes: Vec<i32> = (0..=mmax).collect();
    let data = scattering_data(&m, &g, &lambdas, &modes)?;
    let curves = modes
        .iter()
        .map(|&k| ModeCurve {
            m: k,
            transmission: data.blocks.iter().map(|b| b.entry(k, 1, 0).map(|v| v.norm())).collect(),
            reflection: data.blocks.iter().map(|b| b.entry(k, 0, 0).map(|v| v.norm())).collect(),
        })
        .collect();
    let max_unitarity_defect = data.blocks.iter().map(|b| b.unitarity_defect).fold(0.0, f64::max);
    serde_json::to_string(&Scan { lambdas, max_unitarity_defect, modes: curves }).map_err(|e| Error::Io(e.to_string()))
}

/// `[r₀, ρ₀, r₁, ρ₁, …]` with `ρ = |U₀^+(t)h|²` on the second end, for a
/// bump `h` on `[lo, hi]` in mode 0.
pub fn density(preset: &str, lo: f64, hi: f64, t: f64) -> Result<Vec<f64>> {
    if !(t > 0.0 && t <= 400.0) {
        return Err(Error::Validation("t must lie in (0, 400]".into()));
    }
    let m = preset_model(preset)?;
    let end = m.n_ends() - 1;
    let h = SpectralProfile::bump(end, 0, lo, hi, C64::new(1.0, 0.0));
    let rmax = 40.0 + 1.2 * (2.0 * hi).sqrt() * t;
    let mut rm = vec![SCAN_RMAX; m.n_ends()];
    rm[end] = rmax;
    let g = Arc::new(RadialGrid::new(&m, &rm, (rmax / 2000.0).max(0.05))?);
    let u = leading_term(&m, &g, &h, t, 1.0)?;
    let mut out = Vec::new();
    for j in g.end_nodes(end, m.r0()) {
        out.push(g.radius[j]);
        out.push(u.data[0][j].norm_sqr());
    }
    Ok(out)
}

#[wasm_bindgen(js_name = modelSummary)]
pub fn model_summary(preset: &str) -> std::result::Result<String, JsError> {
    summary_json(preset).map_err(js)
}

#[wasm_bindgen(js_name = scatteringScan)]
pub fn scattering_scan(preset: &str, lo: f64, hi: f64, points: usize, mmax: i32) -> std::result::Result<String, JsError> {
    scan_json(preset, lo, hi, points, mmax).map_err(js)
}

#[wasm_bindgen(js_name = packetDensity)]
pub fn packet_density(preset: &str, lo: f64, hi: f64, t: f64) -> std::result::Result<Vec<f64>, JsError> {
    density(preset, lo, hi, t).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_preset_b() {
        let s: serde_json::Value = serde_json::from_str(&summary_json("B").unwrap()).unwrap();
        assert_eq!(s["lambda0"], 0.125);
        assert!(summary_json("Z").is_err());
    }

    #[test]
    fn free_scan_transmits() {
        let s: serde_json::Value = serde_json::from_str(&scan_json("free", 0.3, 1.0, 4, 1).unwrap()).unwrap();
        assert!(s["max_unitarity_defect"].as_f64().unwrap() < 1e-6);
        for v in s["modes"][0]["transmission"].as_array().unwrap() {
            assert!((v.as_f64().unwrap() - 1.0).abs() < 1e-6);
        }
        assert!(scan_json("free", 1.0, 0.3, 4, 1).is_err());
    }

    #[test]
    fn density_carries_the_norm() {
        let d = density("A", 0.3, 0.7, 20.0).unwrap();
        let h = SpectralProfile::bump(1, 0, 0.3, 0.7, C64::new(1.0, 0.0));
        let dr = d[2] - d[0];
        let mass: f64 = d.chunks(2).map(|p| p[1]).sum::<f64>() * dr;
        assert!((mass - h.norm_sqr()).abs() < 1e-6 * h.norm_sqr(), "{mass}");
    }
}
