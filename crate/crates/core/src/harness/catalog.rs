//! Benchmark registry: test horizons, named override sets, training ranges.

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Model, RunConfig};
use crate::bbm::{bbm_benchmark, build_bbm_problem, BbmProblem};
use crate::eb::{build_eb_problem, eb_benchmark, EbProblem, EbState};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub model: Model,
    pub name: &'static str,
    /// Online test horizon.
    pub online_t_end: f64,
    pub horizon_note: &'static str,
    /// Draw range for `h0` as multiples of the nominal depth.
    pub h0_factor: [f64; 2],
    /// Draw range for `a0` as multiples of the nominal amplitude; `None` keeps `a0` fixed.
    pub a0_factor: Option<[f64; 2]>,
    /// Overrides for the extrapolation test.
    pub out_of_training: Value,
    /// `(tol_pod, tol_eim)` pairs used for the published reduced runs.
    pub tolerances: Vec<(f64, f64)>,
}

pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            model: Model::Bbm,
            name: "monochromatic",
            online_t_end: 250.0,
            horizon_note: "in-training test beyond the 200 s training window",
            h0_factor: [0.7, 1.3],
            a0_factor: None,
            out_of_training: json!({ "h0": 0.63, "a0": 0.05, "initial": "two_cosine" }),
            tolerances: vec![(0.3, 0.03), (0.3, 3e-4)],
        },
        CatalogEntry {
            model: Model::Bbm,
            name: "undular_bore",
            online_t_end: 15.0,
            horizon_note: "bore front still inside the domain",
            h0_factor: [0.7, 1.3],
            a0_factor: None,
            out_of_training: json!({ "h0": 0.63, "a0": 0.03 }),
            tolerances: vec![(0.03, 0.03), (3e-3, 0.01)],
        },
        CatalogEntry {
            model: Model::Bbm,
            name: "solitary_bar",
            online_t_end: 60.0,
            horizon_note: "pulse has crossed the bar",
            h0_factor: [0.7, 1.3],
            a0_factor: None,
            out_of_training: json!({ "h0": 0.63, "a0": 0.15 }),
            tolerances: vec![(0.01, 0.03), (1e-3, 1e-3)],
        },
        CatalogEntry {
            model: Model::Eb,
            name: "solitary_bar",
            online_t_end: 25.0,
            horizon_note: "periodic solitary wave after several bar crossings",
            h0_factor: [0.8, 1.2],
            a0_factor: Some([0.8, 1.2]),
            out_of_training: json!({ "h0": 0.76, "a0": 0.252 }),
            tolerances: vec![(0.03, 3e-4), (0.01, 1e-3)],
        },
        CatalogEntry {
            model: Model::Eb,
            name: "monochromatic_bar",
            online_t_end: 40.0,
            horizon_note: "generated wave train fully developed over the bar",
            h0_factor: [0.8, 1.2],
            a0_factor: Some([0.8, 1.2]),
            out_of_training: json!({ "h0": 0.4, "a0": 0.027 }),
            tolerances: vec![(0.01, 1e-4), (1e-3, 3e-5)],
        },
    ]
}

pub fn entry(model: Model, name: &str) -> Result<CatalogEntry> {
    catalog()
        .into_iter()
        .find(|e| e.model == model && e.name == name)
        .ok_or_else(|| Error::config(format!("no catalog entry for {model:?} benchmark '{name}'")))
}

/// Named override set for `name`; `None` yields no extra overrides.
pub fn preset(entry: &CatalogEntry, name: Option<&str>) -> Result<Value> {
    match name {
        None | Some("in_training") => Ok(json!({})),
        Some("out_of_training") => Ok(entry.out_of_training.clone()),
        Some(other) => Err(Error::config(format!("unknown preset '{other}'"))),
    }
}

/// A problem built from the catalog together with its initial state.
pub enum Setup {
    Bbm { problem: BbmProblem, eta0: Vec<f64> },
    Eb { problem: EbProblem, state0: EbState },
}

impl Setup {
    pub fn build(config: &RunConfig, extra: &Value) -> Result<Self> {
        match config.model {
            Model::Bbm => {
                let (c, eta0) = bbm_benchmark(config.benchmark.parse()?, &config.bbm_overrides(extra)?)?;
                let problem = build_bbm_problem(c, Some(&eta0))?;
                Ok(Setup::Bbm { problem, eta0 })
            }
            Model::Eb => {
                let (c, state0) = eb_benchmark(config.benchmark.parse()?, &config.eb_overrides(extra)?)?;
                Ok(Setup::Eb { problem: build_eb_problem(c)?, state0 })
            }
        }
    }

    pub fn nh(&self) -> usize {
        match self {
            Setup::Bbm { problem, .. } => problem.nh(),
            Setup::Eb { problem, .. } => problem.nh(),
        }
    }

    pub fn x(&self) -> Vec<f64> {
        match self {
            Setup::Bbm { problem, .. } => problem.grid().nodes(),
            Setup::Eb { problem, .. } => problem.grid().nodes(),
        }
    }

    /// `(h0, a0, t_end, domain length)` as configured.
    pub fn nominal(&self) -> (f64, f64, f64, f64) {
        match self {
            Setup::Bbm { problem: p, .. } => (p.config.h0, p.config.a0, p.config.t_end, p.grid().length()),
            Setup::Eb { problem: p, .. } => (p.config.h0, p.config.a0, p.config.t_end, p.grid().length()),
        }
    }
}
