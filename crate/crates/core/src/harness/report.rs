use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Model, Reduction, RunConfig};
use crate::error::{Error, Result};
use crate::timing::TimingBreakdown;

/// Where and why a simulation stopped early.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    /// `offline`, `reference` or `online`.
    pub stage: String,
    pub kind: String,
    pub message: String,
}

impl Failure {
    pub fn new(stage: &str, e: &Error) -> Self {
        let kind = match e {
            Error::EimInstability { .. } => "eim_instability",
            Error::DryState { .. } => "dry_state",
            Error::Aborted { .. } => "aborted",
            Error::Singular(_) => "singular",
            _ => "error",
        };
        Self { stage: stage.into(), kind: kind.into(), message: e.to_string() }
    }

    pub fn is_eim_instability(&self) -> bool {
        self.kind == "eim_instability"
    }
}

/// One training parameter draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub run_id: usize,
    pub h0: f64,
    pub a0: f64,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HostInfo {
    pub cores: usize,
    pub profile: String,
    pub repetitions: usize,
}

impl HostInfo {
    pub fn current(repetitions: usize) -> Self {
        Self {
            cores: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            profile: if cfg!(debug_assertions) { "debug" } else { "release" }.into(),
            repetitions,
        }
    }
}

/// Outcome of [`super::run`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: Model,
    pub benchmark: String,
    pub reduction: Reduction,
    pub nh: usize,
    /// One entry per reduced variable (`eta`, then `q` for EB).
    pub n_rb: Vec<usize>,
    pub n_eim: Vec<usize>,
    pub eim_exhausted: Option<bool>,
    pub t_end: f64,
    pub t_reached: f64,
    pub steps: usize,
    /// Fastest repetition of the evaluated method.
    pub timing: Option<TimingBreakdown>,
    /// Fastest repetition of the reference FOM, for reduced runs.
    pub fom_timing: Option<TimingBreakdown>,
    pub time_ratio: Option<f64>,
    pub error_final: Option<f64>,
    pub error_time_avg: Option<f64>,
    pub failure: Option<Failure>,
    pub draws: Vec<Draw>,
    pub host: HostInfo,
    pub config: RunConfig,
}

impl RunReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

/// Row of an error/cost study against basis size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n_rb: usize,
    /// Zero for the pdROM.
    pub n_eim: usize,
    pub error: f64,
    pub time_ratio: f64,
}

/// Row of a sweep map; failed runs carry `NaN`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub a0: f64,
    pub h0: f64,
    pub eps: f64,
    pub mu: f64,
    pub error_pdrom: f64,
    pub error_eimrom: f64,
}

#[derive(Serialize)]
struct ProfileRow {
    t: f64,
    x: f64,
    value: f64,
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Format(format!("csv: {other:?}")),
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format `t, x, value` table.
pub fn write_profiles(path: &Path, x: &[f64], profiles: &[(f64, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if profiles.is_empty() {
        w.write_record(["t", "x", "value"]).map_err(csv_err)?;
    }
    for (t, v) in profiles {
        for (&x, &value) in x.iter().zip(v) {
            w.serialize(ProfileRow { t: *t, x, value }).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}
