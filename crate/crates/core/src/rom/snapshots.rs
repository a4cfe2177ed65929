use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a snapshot column came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub params: BTreeMap<String, f64>,
    pub t: f64,
    pub run_id: usize,
}

/// State columns, optional flux columns at the same instants, and provenance.
#[derive(Clone, Debug)]
pub struct SnapshotSet {
    pub states: DMatrix<f64>,
    pub fluxes: Option<DMatrix<f64>>,
    pub meta: Vec<SnapshotMeta>,
}

impl SnapshotSet {
    pub fn new(states: DMatrix<f64>, fluxes: Option<DMatrix<f64>>, meta: Vec<SnapshotMeta>) -> Result<Self> {
        let s = Self { states, fluxes, meta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.states.ncols();
        if self.meta.len() != k {
            return Err(Error::arg(format!("{} metadata records for {k} snapshots", self.meta.len())));
        }
        if let Some(f) = &self.fluxes {
            if f.ncols() != k || f.nrows() != self.states.nrows() {
                return Err(Error::arg("flux snapshot shape does not match states"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dof(&self) -> usize {
        self.states.nrows()
    }

    /// Concatenates columns of several sets with equal row counts.
    pub fn concat(sets: Vec<SnapshotSet>) -> Result<SnapshotSet> {
        let mut it = sets.into_iter();
        let first = it.next().ok_or_else(|| Error::arg("no snapshot sets to concatenate"))?;
        let mut cols_s: Vec<DMatrix<f64>> = vec![first.states];
        let mut cols_f: Option<Vec<DMatrix<f64>>> = first.fluxes.map(|f| vec![f]);
        let mut meta = first.meta;
        for s in it {
            if s.states.nrows() != cols_s[0].nrows() {
                return Err(Error::arg("snapshot sets differ in dof"));
            }
            cols_s.push(s.states);
            match (&mut cols_f, s.fluxes) {
                (Some(v), Some(f)) => v.push(f),
                (None, None) => {}
                _ => return Err(Error::arg("some snapshot sets lack fluxes")),
            }
            meta.extend(s.meta);
        }
        let join = |parts: Vec<DMatrix<f64>>| {
            let n = parts[0].nrows();
            let k: usize = parts.iter().map(|p| p.ncols()).sum();
            let mut out = DMatrix::zeros(n, k);
            let mut c = 0;
            for p in parts {
                out.columns_mut(c, p.ncols()).copy_from(&p);
                c += p.ncols();
            }
            out
        };
        SnapshotSet::new(join(cols_s), cols_f.map(join), meta)
    }
}

/// Accumulates snapshot columns during a run.
#[derive(Debug, Default)]
pub struct SnapshotRecorder {
    pub states: Vec<Vec<f64>>,
    pub fluxes: Vec<Vec<f64>>,
    pub times: Vec<f64>,
}

impl SnapshotRecorder {
    pub fn push(&mut self, t: f64, state: Vec<f64>, flux: Option<Vec<f64>>) {
        self.times.push(t);
        self.states.push(state);
        if let Some(f) = flux {
            self.fluxes.push(f);
        }
    }

    pub fn finish(self, params: BTreeMap<String, f64>, run_id: usize) -> Result<SnapshotSet> {
        let n = self.states.first().map(|s| s.len()).unwrap_or(0);
        let cols = |v: &[Vec<f64>]| DMatrix::from_fn(n, v.len(), |i, j| v[j][i]);
        let states = cols(&self.states);
        let fluxes = if self.fluxes.is_empty() { None } else { Some(cols(&self.fluxes)) };
        let meta = self.times.iter().map(|&t| SnapshotMeta { params: params.clone(), t, run_id }).collect();
        SnapshotSet::new(states, fluxes, meta)
    }
}
