//! JSON and CSV writers. Every JSON artifact carries `"schema": 1`, the
//! command and the model name; keys inside bodies keep declaration order.

use ends_scatter::geometry::ManifoldModel;
use ends_scatter::mode_reduction::RadialState;
use ends_scatter::{Error, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

pub const SCHEMA: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    command: &'a str,
    model: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))
}

pub fn json_string<T: Serialize>(command: &str, model: &str, body: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope { schema: SCHEMA, command, model, body }).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(dir: &Path, file: &str, command: &str, model: &str, body: &T) -> Result<()> {
    ensure_dir(dir)?;
    let path = dir.join(file);
    std::fs::write(&path, json_string(command, model, body)?).map_err(|e| io(&path, e))
}

pub fn write_text(dir: &Path, file: &str, text: &str) -> Result<()> {
    ensure_dir(dir)?;
    let path = dir.join(file);
    std::fs::write(&path, text).map_err(|e| io(&path, e))
}

/// `x,r,end,m,re,im`; `end` is 1-based and 0 on the core.
pub fn state_csv(model: &ManifoldModel, state: &RadialState) -> String {
    let g = &state.grid;
    let mut s = String::from("x,r,end,m,re,im\n");
    for (k, m) in state.modes.iter().enumerate() {
        for j in 0..g.n {
            let end = g.end_of[j].map(|e| e + 1).unwrap_or(0);
            let v = state.data[k][j];
            let _ = writeln!(s, "{},{},{end},{m},{:e},{:e}", g.x(j), model.radius(g.x(j)), v.re, v.im);
        }
    }
    s
}
