//! Empirical interpolation of nonlinear fluxes and the reduced models built on it.

mod bbm;
mod eb;

pub use bbm::{eimrom_bbm_step, run_eimrom_bbm, EimBbm};
pub use eb::{eimrom_eb_step, EimEbFlux, EimEb};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{DenseLu, Grid1D};

/// Nodes on each side of a magic point needed to evaluate a flux there.
pub const STENCIL_HALF_WIDTH: usize = 2;

/// Stopping rule for the greedy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EimSize {
    /// Residual tolerance relative to the largest snapshot max-norm.
    Tol(f64),
    Count(usize),
}

/// Magic points and cardinal interpolation basis.
#[derive(Clone, Debug)]
pub struct EimSpace {
    pub z: Vec<usize>,
    /// `psi[z_i, j] = delta_ij`
    pub psi: DMatrix<f64>,
    pub stencils: Vec<Vec<usize>>,
    /// Absolute stopping tolerance (zero for a fixed count).
    pub tol: f64,
    /// Max training residual with `k` points, for `k = 0..=n_eim`.
    pub history: Vec<f64>,
    /// Set when the requested accuracy or size could not be reached with the
    /// available snapshot rank.
    pub exhausted: bool,
}

impl EimSpace {
    pub fn n_eim(&self) -> usize {
        self.z.len()
    }

    pub fn dof(&self) -> usize {
        self.psi.nrows()
    }

    /// Interpolant `Psi phi(Z)` on every node.
    pub fn interpolate(&self, phi_z: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len("magic-point values", phi_z.len(), self.n_eim())?;
        let mut out = vec![0.0; self.dof()];
        crate::numcore::matvec_into(&self.psi, phi_z, 0.0, &mut out);
        Ok(out)
    }

    /// `test^T Psi`, the matrix mapping magic-point values to reduced fluxes.
    pub fn projection(&self, test: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        crate::error::check_len("test space rows", test.nrows(), self.dof())?;
        Ok(test.tr_mul(&self.psi))
    }
}

/// Greedy selection over the columns of `fluxes`.
///
/// Each pass takes the column with the largest interpolation residual, adds
/// the residual's argmax as a magic point and removes that direction from
/// all residuals. Ties resolve to the lowest index, so smaller tolerances
/// extend the point sequence of larger ones.
pub fn eim_greedy(fluxes: &DMatrix<f64>, size: EimSize, grid: &Grid1D) -> Result<EimSpace> {
    let (dof, ns) = fluxes.shape();
    if ns == 0 || dof == 0 {
        return Err(Error::arg("EIM needs at least one flux snapshot"));
    }
    crate::error::check_len("flux snapshot rows", dof, grid.nh)?;
    let (tol, max_n) = match size {
        EimSize::Tol(t) if t > 0.0 => (t, dof.min(ns)),
        EimSize::Count(n) if n > 0 => (0.0, n),
        _ => return Err(Error::arg(format!("invalid EIM size {size:?}"))),
    };
    let mut r = fluxes.clone();
    let col_max = |r: &DMatrix<f64>| {
        let mut best = (0usize, -1.0f64);
        for (c, col) in r.column_iter().enumerate() {
            let m = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if m > best.1 {
                best = (c, m);
            }
        }
        best
    };
    let (_, scale) = col_max(&r);
    if !scale.is_finite() {
        return Err(Error::arg("non-finite flux snapshots"));
    }
    let tol_abs = tol * scale;
    let floor = 1e-13 * scale;
    let mut z: Vec<usize> = Vec::new();
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut history = vec![scale];
    let mut exhausted = false;
    let (mut c, mut err) = col_max(&r);
    let by_tol = matches!(size, EimSize::Tol(_));
    loop {
        if err <= floor {
            // nothing left to interpolate
            exhausted = err > tol_abs || !by_tol;
            break;
        }
        let col = r.column(c);
        let zi = col.iamax();
        let xi: Vec<f64> = col.iter().map(|v| v / col[zi]).collect();
        for mut rc in r.column_iter_mut() {
            let a = rc[zi];
            if a != 0.0 {
                rc.iter_mut().zip(&xi).for_each(|(v, x)| *v -= a * x);
            }
        }
        z.push(zi);
        q.push(xi);
        (c, err) = col_max(&r);
        history.push(err);
        if z.len() >= max_n {
            exhausted = by_tol && err > tol_abs;
            break;
        }
        if by_tol && err <= tol_abs {
            break;
        }
    }
    if z.is_empty() {
        return Err(Error::arg("flux snapshots are identically zero"));
    }
    let n = z.len();
    let qm = DMatrix::from_fn(dof, n, |i, j| q[j][i]);
    let p = DMatrix::from_fn(n, n, |i, j| qm[(z[i], j)]);
    // Psi = Q P^{-1}, i.e. P^T Psi^T = Q^T
    let psi = DenseLu::new(&p.transpose())?.solve_matrix(&qm.transpose())?.transpose();
    let stencils = z.iter().map(|&zi| grid.stencil_nodes(zi, STENCIL_HALF_WIDTH)).collect();
    Ok(EimSpace { z, psi, stencils, tol: tol_abs, history, exhausted })
}

/// Reduced flux `b phi(Z)` from magic-point values.
pub fn eim_reduced_flux(b: &DMatrix<f64>, phi_z: &[f64]) -> Result<Vec<f64>> {
    crate::error::check_len("magic-point values", phi_z.len(), b.ncols())?;
    let mut out = vec![0.0; b.nrows()];
    crate::numcore::matvec_into(b, phi_z, 0.0, &mut out);
    Ok(out)
}

/// Gathers the union of the five-point windows around a set of nodes.
#[derive(Clone, Debug)]
pub struct Sampler {
    /// Sorted distinct grid nodes touched by any window.
    pub nodes: Vec<usize>,
    /// For each centre, positions in `nodes` of its window `j-2..=j+2`.
    pub windows: Vec<[usize; 5]>,
}

impl Sampler {
    pub fn new(grid: &Grid1D, centres: &[usize]) -> Self {
        let mut nodes: Vec<usize> =
            centres.iter().flat_map(|&c| grid.stencil_nodes(c, STENCIL_HALF_WIDTH)).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let pos = |n: usize| nodes.binary_search(&n).unwrap();
        let windows = centres
            .iter()
            .map(|&c| {
                let mut w = [0; 5];
                for (k, wk) in w.iter_mut().enumerate() {
                    *wk = pos(grid.resolve(c as isize + k as isize - 2));
                }
                w
            })
            .collect();
        Self { nodes, windows }
    }

    /// Rows of `m` at the sampled nodes.
    pub fn rows(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.nodes.len(), m.ncols(), |i, j| m[(self.nodes[i], j)])
    }

    pub fn values(&self, v: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&n| v[n]).collect()
    }

    #[inline]
    pub fn window(&self, vals: &[f64], k: usize) -> [f64; 5] {
        self.windows[k].map(|p| vals[p])
    }
}

/// Wraps simulation failures inside an EIM model so callers can tell them apart.
pub(crate) fn as_instability(e: Error, step: usize, t: f64) -> Error {
    match e {
        Error::EimInstability { .. } => e,
        Error::Aborted { step, t, reason } => Error::EimInstability { step, t, reason },
        Error::DryState { node, h, t } => {
            Error::EimInstability { step, t, reason: format!("dry state at node {node} (h = {h})") }
        }
        Error::Singular(reason) => Error::EimInstability { step, t, reason },
        other => other,
    }
}

/// Blow-up check on sampled surface values.
pub(crate) fn check_sampled(vals: &[f64], bound: f64, step: usize, t: f64) -> Result<()> {
    if let Some(v) = vals.iter().find(|v| !(v.abs() <= bound)) {
        return Err(Error::EimInstability { step, t, reason: format!("sampled elevation {v} exceeds {bound}") });
    }
    Ok(())
}
