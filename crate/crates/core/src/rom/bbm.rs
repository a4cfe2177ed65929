//! Reduced BBM-KdV steppers: pdROM and the reduced-dispersion variant.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{ReducedBasis, SnapshotRecorder, SnapshotSet};
use crate::bbm::{bbm_dt, bbm_explicit_rhs, shu_osher, BbmProblem};
use crate::driver::{check_finite, integrate, uniform_times, DtPolicy, Integration, Stepper};
use crate::error::{check_len, Error, Result};
use crate::numcore::{matvec_into, tr_matvec_into, DenseLu, TimeScheme};
use crate::timing::{Category, Timer};

/// Runs the FOM storing `eta - lift` and the explicit flux at `n_snapshots`
/// uniform instants of `[0, t_end]`.
pub fn collect_bbm_snapshots(
    problem: &BbmProblem,
    eta0: &[f64],
    t_end: f64,
    n_snapshots: usize,
    params: BTreeMap<String, f64>,
    run_id: usize,
) -> Result<SnapshotSet> {
    if n_snapshots == 0 {
        return Err(Error::arg("snapshot schedule is empty"));
    }
    let times = uniform_times(t_end, n_snapshots);
    let mut rec = SnapshotRecorder::default();
    crate::bbm::run_bbm_fom(problem, eta0, t_end, &times, DtPolicy::Adaptive, |_, t, eta| {
        let flux = bbm_explicit_rhs(problem, eta)?;
        rec.push(t, subtract_lift(problem, eta), Some(flux));
        Ok(())
    })?;
    rec.finish(params, run_id)
}

pub(crate) fn subtract_lift(problem: &BbmProblem, eta: &[f64]) -> Vec<f64> {
    match &problem.lift {
        Some(l) => eta.iter().zip(l).map(|(e, l)| e - l).collect(),
        None => eta.to_vec(),
    }
}

/// `(I - alpha D2)^{-1} diag(omega) D3 u`, so that `Phi(u) = -elliptic_map(u)`.
fn elliptic_map(problem: &BbmProblem, lu: &crate::numcore::BandedLu, u: &[f64]) -> Vec<f64> {
    let mut r = problem.phi_rhs(u);
    r.iter_mut().for_each(|x| *x = -*x);
    lu.solve_in_place(&mut r);
    r
}

fn masked_w(problem: &BbmProblem, basis: &ReducedBasis) -> DMatrix<f64> {
    let mut w = basis.w.clone();
    if problem.masks_left() {
        w.row_mut(0).fill(0.0);
    }
    w
}

/// Precomputed pdROM operators.
#[derive(Clone, Debug)]
pub struct ReducedBbmOps {
    /// `W^T mask (I - alpha D2)^{-1} diag(omega) D3 V`
    pub a_rb: DMatrix<f64>,
    /// `W^T V`
    pub m_rb: DMatrix<f64>,
    pub m_lu: DenseLu,
    /// `mask W m_rb^{-T}`: projects a full flux straight to a coefficient update.
    pub proj: DMatrix<f64>,
    /// `m_rb^{-1} a_rb`
    pub k_mat: DMatrix<f64>,
    /// Lift contribution to the dispersive term, already multiplied by `m_rb^{-1}`.
    pub k_lift: DVector<f64>,
    pub lift: Option<Vec<f64>>,
}

/// Assembles the pdROM operators column by column with tridiagonal solves.
pub fn build_bbm_reduced(problem: &BbmProblem, basis: &ReducedBasis) -> Result<ReducedBbmOps> {
    check_len("basis dof", basis.dof(), problem.nh())?;
    let n_rb = basis.n_rb();
    let lu = problem.elliptic.factor()?;
    let wm = masked_w(problem, basis);
    let mut av = DMatrix::zeros(problem.nh(), n_rb);
    for (j, col) in basis.v.column_iter().enumerate() {
        let a = elliptic_map(problem, &lu, col.as_slice());
        av.column_mut(j).copy_from_slice(&a);
    }
    let a_rb = wm.tr_mul(&av);
    let m_rb = basis.w.tr_mul(&basis.v);
    let m_lu = DenseLu::new(&m_rb).map_err(|e| Error::Singular(format!("reduced mass matrix: {e}")))?;
    let m_inv = m_lu.inverse()?;
    let proj = &wm * m_inv.transpose();
    let k_mat = &m_inv * &a_rb;
    let k_lift = match &problem.lift {
        Some(l) => {
            let al = elliptic_map(problem, &lu, l);
            proj.tr_mul(&DVector::from_vec(al))
        }
        None => DVector::zeros(n_rb),
    };
    Ok(ReducedBbmOps { a_rb, m_rb, m_lu, proj, k_mat, k_lift, lift: problem.lift.clone() })
}

impl ReducedBbmOps {
    pub fn n_rb(&self) -> usize {
        self.m_rb.nrows()
    }

    /// Test-space projection of a full state, `m_rb^{-1} W^T (eta - lift)`.
    pub fn project(&self, basis: &ReducedBasis, eta: &[f64]) -> Result<Vec<f64>> {
        let e: Vec<f64> = match &self.lift {
            Some(l) => eta.iter().zip(l).map(|(a, b)| a - b).collect(),
            None => eta.to_vec(),
        };
        let wt = basis.w.tr_mul(&DVector::from_vec(e));
        self.m_lu.solve(wt.as_slice())
    }

    /// `lift + V eta_hat`.
    pub fn reconstruct_into(&self, basis: &ReducedBasis, eta_hat: &[f64], out: &mut [f64]) {
        match &self.lift {
            Some(l) => {
                out.copy_from_slice(l);
                matvec_into(&basis.v, eta_hat, 1.0, out);
            }
            None => matvec_into(&basis.v, eta_hat, 0.0, out),
        }
    }

    pub fn reconstruct(&self, basis: &ReducedBasis, eta_hat: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; basis.dof()];
        self.reconstruct_into(basis, eta_hat, &mut out);
        out
    }

    /// Fills `eta` with the reconstruction of `eta_hat` and `out` with `proj^T F(eta)`.
    pub fn flux_term(&self, problem: &BbmProblem, basis: &ReducedBasis, eta_hat: &[f64], eta: &mut [f64], out: &mut [f64]) {
        self.reconstruct_into(basis, eta_hat, eta);
        let mut f = vec![0.0; eta.len()];
        problem.explicit_rhs_into(eta, &mut f);
        tr_matvec_into(&self.proj, &f, out);
    }
}

/// pdROM stepper over reduced coefficients.
pub struct PdromBbm<'a> {
    pub problem: &'a BbmProblem,
    pub ops: &'a ReducedBbmOps,
    pub basis: &'a ReducedBasis,
    pub scheme: TimeScheme,
    pub timer: Timer,
    /// When set, every full flux evaluated is appended here.
    pub recorded: Option<Vec<Vec<f64>>>,
    eta: Vec<f64>,
    f: Vec<f64>,
    /// Last evaluated coefficients and their residual; `eta` holds their reconstruction.
    cached: Option<(Vec<f64>, Vec<f64>)>,
}

impl<'a> PdromBbm<'a> {
    pub fn new(problem: &'a BbmProblem, ops: &'a ReducedBbmOps, basis: &'a ReducedBasis) -> Self {
        Self {
            problem,
            ops,
            basis,
            scheme: TimeScheme::ssprk22(),
            timer: Timer::new(),
            recorded: None,
            eta: vec![0.0; problem.nh()],
            f: vec![0.0; problem.nh()],
            cached: None,
        }
    }

    fn residual(&mut self, eta_hat: &[f64]) -> Result<Vec<f64>> {
        if let Some((x, r)) = &self.cached {
            if x == eta_hat {
                return Ok(r.clone());
            }
        }
        let mut r = vec![0.0; eta_hat.len()];
        self.ops.reconstruct_into(self.basis, eta_hat, &mut self.eta);
        self.problem.explicit_rhs_into(&self.eta, &mut self.f);
        tr_matvec_into(&self.ops.proj, &self.f, &mut r);
        self.timer.lap(Category::Flux);
        if let Some(rec) = &mut self.recorded {
            rec.push(self.f.clone());
        }
        matvec_into(&self.ops.k_mat, eta_hat, 1.0, &mut r);
        for (a, b) in r.iter_mut().zip(self.ops.k_lift.iter()) {
            *a = -*a - b;
        }
        self.timer.lap(Category::LinearSolve);
        self.cached = Some((eta_hat.to_vec(), r.clone()));
        Ok(r)
    }
}

impl Stepper for PdromBbm<'_> {
    type State = Vec<f64>;

    fn dt(&mut self, eta_hat: &Vec<f64>) -> Result<f64> {
        // the first stage residual is evaluated here so the sweep over V also yields eta
        self.residual(eta_hat)?;
        let dt = bbm_dt(self.problem, &self.eta);
        self.timer.lap(Category::Other);
        dt
    }

    fn step(&mut self, eta_hat: &Vec<f64>, t: f64, dt: f64, step: usize) -> Result<Vec<f64>> {
        let scheme = self.scheme.clone();
        let out = shu_osher(&scheme, eta_hat, dt, |u| self.residual(u))?;
        check_finite(&out, step, t + dt, "reduced coefficients")?;
        self.timer.lap(Category::Other);
        Ok(out)
    }
}

/// One pdROM SSPRK(2,2) step.
pub fn pdrom_bbm_step(
    ops: &ReducedBbmOps,
    problem: &BbmProblem,
    basis: &ReducedBasis,
    eta_hat: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    check_len("reduced state", eta_hat.len(), ops.n_rb())?;
    PdromBbm::new(problem, ops, basis).step(&eta_hat.to_vec(), 0.0, dt, 0)
}

/// Integrates the pdROM from the projection of `eta0`; `observe` receives
/// reduced coefficients.
pub fn run_pdrom_bbm(
    problem: &BbmProblem,
    ops: &ReducedBbmOps,
    basis: &ReducedBasis,
    eta0: &[f64],
    t_end: f64,
    samples: &[f64],
    policy: DtPolicy,
    observe: impl FnMut(usize, f64, &Vec<f64>) -> Result<()>,
) -> Result<(Integration<Vec<f64>>, Timer)> {
    let mut rom = PdromBbm::new(problem, ops, basis);
    let x0 = ops.project(basis, eta0)?;
    rom.timer = Timer::new();
    let out = integrate(&mut rom, x0, 0.0, t_end, samples, policy, observe)?;
    rom.timer.lap(Category::Other);
    Ok((out, rom.timer))
}

/// Reduced closure for the dispersive term only.
#[derive(Clone, Debug)]
pub struct PhiOnlyOps {
    /// `W^T (I - alpha D2) V`
    pub b: DMatrix<f64>,
    /// `W B^{-T}`, so that `Phi_hat = -q^T (omega D3 eta)`.
    pub q: DMatrix<f64>,
}

pub fn build_phi_only(problem: &BbmProblem, basis: &ReducedBasis) -> Result<PhiOnlyOps> {
    check_len("basis dof", basis.dof(), problem.nh())?;
    let mut av = DMatrix::zeros(problem.nh(), basis.n_rb());
    for (j, col) in basis.v.column_iter().enumerate() {
        av.column_mut(j).copy_from_slice(&problem.elliptic.matvec(col.as_slice()));
    }
    let b = basis.w.tr_mul(&av);
    let b_inv = DenseLu::new(&b)?.inverse()?;
    let q = &basis.w * b_inv.transpose();
    Ok(PhiOnlyOps { b, q })
}

/// Full-space hyperbolic update with the reduced dispersive closure.
pub struct PhiOnlyBbm<'a> {
    pub problem: &'a BbmProblem,
    pub ops: &'a PhiOnlyOps,
    pub basis: &'a ReducedBasis,
    pub scheme: TimeScheme,
    pub timer: Timer,
}

impl<'a> PhiOnlyBbm<'a> {
    pub fn new(problem: &'a BbmProblem, ops: &'a PhiOnlyOps, basis: &'a ReducedBasis) -> Self {
        Self { problem, ops, basis, scheme: TimeScheme::ssprk22(), timer: Timer::new() }
    }

    fn residual(&mut self, eta: &[f64]) -> Result<Vec<f64>> {
        let mut f = bbm_explicit_rhs(self.problem, eta)?;
        let rhs = self.problem.phi_rhs(eta);
        self.timer.lap(Category::Flux);
        let mut phi_hat = vec![0.0; self.basis.n_rb()];
        tr_matvec_into(&self.ops.q, &rhs, &mut phi_hat);
        let mut phi = vec![0.0; eta.len()];
        matvec_into(&self.basis.v, &phi_hat, 0.0, &mut phi);
        self.timer.lap(Category::LinearSolve);
        for (fi, p) in f.iter_mut().zip(phi.iter()) {
            *fi = p - *fi;
        }
        self.problem.apply_mask(&mut f);
        self.timer.lap(Category::Other);
        Ok(f)
    }
}

impl Stepper for PhiOnlyBbm<'_> {
    type State = Vec<f64>;

    fn dt(&mut self, eta: &Vec<f64>) -> Result<f64> {
        let dt = bbm_dt(self.problem, eta);
        self.timer.lap(Category::Other);
        dt
    }

    fn step(&mut self, eta: &Vec<f64>, t: f64, dt: f64, step: usize) -> Result<Vec<f64>> {
        let scheme = self.scheme.clone();
        let out = shu_osher(&scheme, eta, dt, |u| self.residual(u))?;
        check_finite(&out, step, t + dt, "eta")?;
        self.timer.lap(Category::Other);
        Ok(out)
    }
}

/// One step of the reduced-dispersion variant on a full state.
pub fn phi_only_step(
    problem: &BbmProblem,
    ops: &PhiOnlyOps,
    basis: &ReducedBasis,
    eta: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    check_len("eta", eta.len(), problem.nh())?;
    PhiOnlyBbm::new(problem, ops, basis).step(&eta.to_vec(), 0.0, dt, 0)
}

pub fn run_phi_only(
    problem: &BbmProblem,
    ops: &PhiOnlyOps,
    basis: &ReducedBasis,
    eta0: &[f64],
    t_end: f64,
    samples: &[f64],
    policy: DtPolicy,
    observe: impl FnMut(usize, f64, &Vec<f64>) -> Result<()>,
) -> Result<(Integration<Vec<f64>>, Timer)> {
    let mut rom = PhiOnlyBbm::new(problem, ops, basis);
    rom.timer = Timer::new();
    let out = integrate(&mut rom, eta0.to_vec(), 0.0, t_end, samples, policy, observe)?;
    rom.timer.lap(Category::Other);
    Ok((out, rom.timer))
}
