//! File output: diagnostics tables, snapshots and sweep results.
//!
//! Floats are written with 17 significant digits so every value reparses to
//! the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::OutputFormat;
use crate::diagnostics::{fmt_f64, to_csv, DiagRecord, CSV_HEADER};
use crate::elliptic::compute_velocity;
use crate::error::{Error, Result};
use crate::experiments::SweepResult;
use crate::grid::{Field, Grid};
use crate::model::{ModelParams, SimState};

/// Contents of one `snapshot_t<t>.json` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
}

impl Snapshot {
    pub fn from_state(state: &SimState, p: &ModelParams) -> Result<Self> {
        let phi = compute_velocity(&state.u, p)?;
        Ok(Snapshot {
            t: state.t,
            x: state.u.grid().x().to_vec(),
            u: state.u.values().to_vec(),
            phi: phi.into_values(),
        })
    }

    /// Rebuilds the density on a fresh grid with the same node count.
    pub fn density(&self) -> Result<Field> {
        Field::new(Grid::new(self.u.len())?, self.u.clone())
    }

    pub fn to_json(&self) -> String {
        let mut s = String::with_capacity(80 * (self.x.len() + 1));
        write!(s, "{{\"t\": {}", fmt_f64(self.t)).unwrap();
        for (name, values) in [("x", &self.x), ("u", &self.u), ("phi", &self.phi)] {
            write!(s, ", \"{name}\": [").unwrap();
            for (i, v) in values.iter().enumerate() {
                if i > 0 {
                    s.push_str(", ");
                }
                s.push_str(&fmt_f64(*v));
            }
            s.push(']');
        }
        s.push_str("}\n");
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("bad snapshot: {e}")))
    }
}

pub fn snapshot_filename(t: f64) -> String {
    format!("snapshot_t{t:.6}.json")
}

pub fn write_snapshot(dir: &Path, state: &SimState, p: &ModelParams) -> Result<PathBuf> {
    let path = dir.join(snapshot_filename(state.t));
    fs::write(&path, Snapshot::from_state(state, p)?.to_json())?;
    Ok(path)
}

pub fn diag_json(series: &[DiagRecord]) -> String {
    let names: Vec<&str> = CSV_HEADER.split(',').collect();
    let mut s = String::from("[\n");
    for (k, rec) in series.iter().enumerate() {
        s.push_str("  {");
        for (i, (name, v)) in names.iter().zip(rec.values()).enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            write!(s, "\"{name}\": {}", fmt_f64(v)).unwrap();
        }
        s.push('}');
        if k + 1 < series.len() {
            s.push(',');
        }
        s.push('\n');
    }
    s.push_str("]\n");
    s
}

/// Writes `diag.csv` or `diag.json`.
pub fn write_diag(dir: &Path, series: &[DiagRecord], format: OutputFormat) -> Result<PathBuf> {
    let (name, body) = match format {
        OutputFormat::Csv => ("diag.csv", to_csv(series)),
        OutputFormat::Json => ("diag.json", diag_json(series)),
    };
    let path = dir.join(name);
    fs::write(&path, body)?;
    Ok(path)
}

/// Writes `sweep.csv` and `summary.json`.
pub fn write_sweep(dir: &Path, result: &SweepResult, summary: &impl Serialize) -> Result<()> {
    fs::write(dir.join("sweep.csv"), result.to_csv())?;
    write_summary(dir, summary)?;
    Ok(())
}

pub fn write_summary(dir: &Path, summary: &impl Serialize) -> Result<PathBuf> {
    let path = dir.join("summary.json");
    let mut body = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::invalid(format!("cannot serialize summary: {e}")))?;
    body.push('\n');
    fs::write(&path, body)?;
    Ok(path)
}
