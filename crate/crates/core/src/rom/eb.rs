//! Galerkin pdROM for the enhanced Boussinesq system.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{pod_basis, BasisMode, PodSize, ReducedBasis, SnapshotMeta, SnapshotSet};
use crate::driver::{check_finite, integrate, uniform_times, DtPolicy, Integration, Stepper};
use crate::eb::{run_eb_fom, EbProblem, EbState, LhsCache};
use crate::error::{check_len, Error, Result};
use crate::numcore::{matvec_into, tr_matvec_into, Banded, DenseLu, TimeScheme};
use crate::timing::{Category, Timer};

/// How the dispersive correction enters the reduced momentum update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EbVariant {
    /// Solve for the reduced auxiliary `psi`, then update `q`.
    #[default]
    Psi,
    /// Eliminate `psi` into one system `(M - Tt + dt S) q = ...`. Matches
    /// `Psi` only without sponge layers.
    Fused,
}

/// Runs the FOM storing stacked `[eta; q]` states and `[N^eta; N^q]` fluxes.
pub fn collect_eb_snapshots(
    problem: &EbProblem,
    state0: &EbState,
    t_end: f64,
    n_snapshots: usize,
    params: BTreeMap<String, f64>,
    run_id: usize,
) -> Result<SnapshotSet> {
    if n_snapshots == 0 {
        return Err(Error::arg("snapshot schedule is empty"));
    }
    let n = problem.nh();
    let times: Vec<f64> = uniform_times(t_end, n_snapshots).iter().map(|t| t + state0.t).collect();
    let mut states = DMatrix::zeros(2 * n, times.len());
    let mut fluxes = DMatrix::zeros(2 * n, times.len());
    let mut meta = Vec::with_capacity(times.len());
    let (mut ne, mut nq) = (vec![0.0; n], vec![0.0; n]);
    run_eb_fom(problem, state0, state0.t + t_end, &times, DtPolicy::Adaptive, |k, t, s| {
        problem.nonlinear_into(&s.eta, &s.q, &mut ne, &mut nq);
        let mut col = states.column_mut(k);
        col.rows_mut(0, n).copy_from_slice(&s.eta);
        col.rows_mut(n, n).copy_from_slice(&s.q);
        let mut col = fluxes.column_mut(k);
        col.rows_mut(0, n).copy_from_slice(&ne);
        col.rows_mut(n, n).copy_from_slice(&nq);
        meta.push(SnapshotMeta { params: params.clone(), t, run_id });
        Ok(())
    })?;
    SnapshotSet::new(states, Some(fluxes), meta)
}

/// Separate Galerkin POD bases for `eta` and `q` from stacked snapshots.
pub fn eb_pod_bases(snaps: &SnapshotSet, size_eta: PodSize, size_q: PodSize) -> Result<(ReducedBasis, ReducedBasis)> {
    let n = snaps.dof() / 2;
    if n == 0 || snaps.dof() % 2 != 0 {
        return Err(Error::arg("EB snapshots must stack eta and q"));
    }
    let top = snaps.states.rows(0, n).into_owned();
    let bottom = snaps.states.rows(n, n).into_owned();
    Ok((
        pod_basis(&top, size_eta, BasisMode::Galerkin, None)?,
        pod_basis(&bottom, size_q, BasisMode::Galerkin, None)?,
    ))
}

fn triple(a: &DMatrix<f64>, m: &Banded, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut mb = DMatrix::zeros(b.nrows(), b.ncols());
    for (j, col) in b.column_iter().enumerate() {
        mb.column_mut(j).copy_from_slice(&m.matvec(col.as_slice()));
    }
    a.transpose() * mb
}

/// Projected operators; every product is `V^T (.) V` with the matching bases.
#[derive(Clone, Debug)]
pub struct ReducedEbOps {
    pub m_eta: DMatrix<f64>,
    pub m_q: DMatrix<f64>,
    pub tt: DMatrix<f64>,
    /// `Vq^T Tx Veta`, with `Tx` acting through the auxiliary `w`.
    pub tx: DMatrix<f64>,
    pub s_eta: DMatrix<f64>,
    pub s_q: DMatrix<f64>,
    /// `Veta^T M f_iwg`
    pub f_iwg: Option<DVector<f64>>,
    /// `Tt_hat Mq_hat^{-1}`
    pub tt_minv: DMatrix<f64>,
    /// Factored `Mq_hat - Tt_hat`.
    pub psi_lu: DenseLu,
    /// `Mq_hat - Tt_hat`
    pub m_minus_t: DMatrix<f64>,
    pub has_sponge: bool,
}

pub fn build_eb_reduced(problem: &EbProblem, v_eta: &ReducedBasis, v_q: &ReducedBasis) -> Result<ReducedEbOps> {
    check_len("eta basis rows", v_eta.dof(), problem.nh())?;
    check_len("q basis rows", v_q.dof(), problem.nh())?;
    let mats = &problem.mats;
    let (ve, vq) = (&v_eta.v, &v_q.v);
    let m_eta = triple(ve, &mats.mass, ve);
    let m_q = triple(vq, &mats.mass, vq);
    let tt = triple(vq, &mats.tt, vq);
    let mut txv = DMatrix::zeros(problem.nh(), ve.ncols());
    for (j, col) in ve.column_iter().enumerate() {
        txv.column_mut(j).copy_from_slice(&problem.tx_apply(col.as_slice()));
    }
    let tx = vq.transpose() * txv;
    let s_eta = triple(ve, &mats.sponge, ve);
    let s_q = triple(vq, &mats.sponge, vq);
    let f_iwg = problem
        .f_iwg
        .as_ref()
        .map(|f| ve.transpose() * DVector::from_vec(mats.mass.matvec(f)));
    let m_lu = DenseLu::new(&m_q)?;
    // Tt M^{-1} = (M^{-T} Tt^T)^T
    let tt_minv = m_lu.solve_matrix(&tt.transpose())?.transpose();
    let m_minus_t = &m_q - &tt;
    let psi_lu = DenseLu::new(&m_minus_t)?;
    Ok(ReducedEbOps {
        m_eta,
        m_q,
        tt,
        tx,
        s_eta,
        s_q,
        f_iwg,
        tt_minv,
        psi_lu,
        m_minus_t,
        has_sponge: !mats.sponge.is_zero(),
    })
}

/// Reduced coefficients of `eta` and `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct EbReducedState {
    pub eta: Vec<f64>,
    pub q: Vec<f64>,
}

impl EbReducedState {
    pub fn project(v_eta: &ReducedBasis, v_q: &ReducedBasis, state: &EbState) -> Result<Self> {
        check_len("eta", state.eta.len(), v_eta.dof())?;
        check_len("q", state.q.len(), v_q.dof())?;
        let mut eta = vec![0.0; v_eta.n_rb()];
        let mut q = vec![0.0; v_q.n_rb()];
        tr_matvec_into(&v_eta.v, &state.eta, &mut eta);
        tr_matvec_into(&v_q.v, &state.q, &mut q);
        Ok(Self { eta, q })
    }

    pub fn reconstruct(&self, v_eta: &ReducedBasis, v_q: &ReducedBasis, t: f64) -> EbState {
        EbState { eta: v_eta.reconstruct(&self.eta), q: v_q.reconstruct(&self.q), t }
    }
}

/// Reduced nonlinear terms: `(W_eta^T N^eta, W_q^T N^q)` or an approximation.
pub trait ReducedEbFlux {
    fn eval(&mut self, x: &EbReducedState, t: f64, step: usize, n_eta: &mut [f64], n_q: &mut [f64]) -> Result<()>;

    /// Largest `|q/h| + sqrt(g h)` over the nodes the evaluator sees.
    fn max_speed(&mut self, x: &EbReducedState, t: f64) -> Result<f64>;

    /// Lets approximate evaluators relabel failures of the model using them.
    fn classify(&self, e: Error, _step: usize, _t: f64) -> Error {
        e
    }
}

/// Exact projection: reconstruct, evaluate at every node, project.
pub struct ProjectedEbFlux<'a> {
    pub problem: &'a EbProblem,
    pub v_eta: &'a ReducedBasis,
    pub v_q: &'a ReducedBasis,
    /// When set, every full `(N^eta, N^q)` pair evaluated is appended here.
    pub recorded: Option<Vec<(Vec<f64>, Vec<f64>)>>,
    eta: Vec<f64>,
    q: Vec<f64>,
    ne: Vec<f64>,
    nq: Vec<f64>,
    recon_of: Option<EbReducedState>,
}

impl<'a> ProjectedEbFlux<'a> {
    pub fn new(problem: &'a EbProblem, v_eta: &'a ReducedBasis, v_q: &'a ReducedBasis) -> Self {
        let n = problem.nh();
        Self {
            problem,
            v_eta,
            v_q,
            recorded: None,
            eta: vec![0.0; n],
            q: vec![0.0; n],
            ne: vec![0.0; n],
            nq: vec![0.0; n],
            recon_of: None,
        }
    }

    fn reconstruct(&mut self, x: &EbReducedState, t: f64, step: usize) -> Result<()> {
        if self.recon_of.as_ref() != Some(x) {
            matvec_into(&self.v_eta.v, &x.eta, 0.0, &mut self.eta);
            matvec_into(&self.v_q.v, &x.q, 0.0, &mut self.q);
            self.recon_of = Some(x.clone());
        }
        self.problem.check_wet(&self.eta, step, t)?;
        check_finite(&self.q, step, t, "reconstructed q")
    }
}

impl ReducedEbFlux for ProjectedEbFlux<'_> {
    fn eval(&mut self, x: &EbReducedState, t: f64, step: usize, n_eta: &mut [f64], n_q: &mut [f64]) -> Result<()> {
        self.reconstruct(x, t, step)?;
        self.problem.nonlinear_into(&self.eta, &self.q, &mut self.ne, &mut self.nq);
        tr_matvec_into(&self.v_eta.v, &self.ne, n_eta);
        tr_matvec_into(&self.v_q.v, &self.nq, n_q);
        if let Some(rec) = &mut self.recorded {
            rec.push((self.ne.clone(), self.nq.clone()));
        }
        Ok(())
    }

    fn max_speed(&mut self, x: &EbReducedState, t: f64) -> Result<f64> {
        self.reconstruct(x, t, 0)?;
        Ok(self.problem.max_speed(&self.eta, &self.q))
    }
}

struct DtFactors {
    eta: DenseLu,
    q: DenseLu,
}

/// Reduced SSPRK stepper, generic over the nonlinear evaluation.
pub struct ReducedEb<'a, F> {
    pub problem: &'a EbProblem,
    pub ops: &'a ReducedEbOps,
    pub flux: F,
    pub variant: EbVariant,
    pub scheme: TimeScheme,
    pub timer: Timer,
    factors: LhsCache<DtFactors>,
}

pub type PdromEb<'a> = ReducedEb<'a, ProjectedEbFlux<'a>>;

impl<'a> PdromEb<'a> {
    pub fn pdrom(
        problem: &'a EbProblem,
        ops: &'a ReducedEbOps,
        v_eta: &'a ReducedBasis,
        v_q: &'a ReducedBasis,
        variant: EbVariant,
    ) -> Self {
        ReducedEb::new(problem, ops, ProjectedEbFlux::new(problem, v_eta, v_q), variant)
    }
}

impl<'a, F: ReducedEbFlux> ReducedEb<'a, F> {
    pub fn new(problem: &'a EbProblem, ops: &'a ReducedEbOps, flux: F, variant: EbVariant) -> Self {
        Self {
            problem,
            ops,
            flux,
            variant,
            scheme: TimeScheme::ssprk22(),
            timer: Timer::new(),
            factors: LhsCache::default(),
        }
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

impl<F: ReducedEbFlux> Stepper for ReducedEb<'_, F> {
    type State = EbReducedState;

    fn dt(&mut self, x: &EbReducedState) -> Result<f64> {
        let lam = self.flux.max_speed(x, 0.0).map_err(|e| self.flux.classify(e, 0, 0.0))?;
        self.timer.lap(Category::Flux);
        if !(lam.is_finite() && lam > 0.0) {
            let e = Error::Aborted { step: 0, t: 0.0, reason: format!("invalid reduced wave speed {lam}") };
            return Err(self.flux.classify(e, 0, 0.0));
        }
        Ok(self.problem.config.cfl * self.problem.grid().dx / lam)
    }

    fn step(&mut self, x: &EbReducedState, t: f64, dt: f64, step: usize) -> Result<EbReducedState> {
        self.advance(x, t, dt, step).map_err(|e| self.flux.classify(e, step, t))
    }
}

impl<F: ReducedEbFlux> ReducedEb<'_, F> {
    fn advance(&mut self, x: &EbReducedState, t: f64, dt: f64, step: usize) -> Result<EbReducedState> {
        let ops = self.ops;
        let p = self.problem;
        let (ne_n, nq_n) = (ops.m_eta.nrows(), ops.m_q.nrows());
        let variant = self.variant;
        let f = self.factors.get(dt, |dt| {
            Ok(DtFactors {
                eta: DenseLu::new(&(&ops.m_eta + dt * &ops.s_eta))?,
                q: match variant {
                    EbVariant::Psi => DenseLu::new(&(&ops.m_q + dt * &ops.s_q))?,
                    EbVariant::Fused => DenseLu::new(&(&ops.m_minus_t + dt * &ops.s_q))?,
                },
            })
        })?;
        self.timer.lap(Category::LinearSolve);
        let scheme = &self.scheme;
        let c = scheme.abscissae();
        let stages = scheme.stages();
        let mut xs = vec![x.clone()];
        let mut n_eta: Vec<Vec<f64>> = Vec::with_capacity(stages);
        let mut n_q: Vec<Vec<f64>> = Vec::with_capacity(stages);
        let mut disp: Vec<Vec<f64>> = Vec::with_capacity(stages);
        for s in 0..stages {
            let ts = t + c[s] * dt;
            let mut a = vec![0.0; ne_n];
            let mut b = vec![0.0; nq_n];
            self.flux.eval(&xs[s], ts, step, &mut a, &mut b)?;
            self.timer.lap(Category::Flux);
            let mut d = vec![0.0; nq_n];
            matvec_into(&ops.tx, &xs[s].eta, 0.0, &mut d);
            match variant {
                EbVariant::Psi => matvec_into(&ops.tt_minv, &b, 1.0, &mut d),
                EbVariant::Fused => axpy(&mut d, 1.0, &b),
            }
            n_eta.push(a);
            n_q.push(b);
            disp.push(d);

            let c_next = if s + 1 < stages { c[s + 1] } else { 1.0 };
            let (rho, theta) = (&scheme.rho[s], &scheme.theta[s]);
            let mut a_eta = vec![0.0; ne_n];
            let mut a_q = vec![0.0; nq_n];
            let mut f_eta = vec![0.0; ne_n];
            let mut f_q = vec![0.0; nq_n];
            let mut f_d = vec![0.0; nq_n];
            let mut gen_shift = -p.generator_amplitude(t + c_next * dt);
            for r in 0..=s {
                if rho[r] != 0.0 {
                    axpy(&mut a_eta, rho[r], &xs[r].eta);
                    axpy(&mut a_q, rho[r], &xs[r].q);
                    gen_shift += rho[r] * p.generator_amplitude(t + c[r] * dt);
                }
                if theta[r] != 0.0 {
                    axpy(&mut f_eta, theta[r], &n_eta[r]);
                    axpy(&mut f_q, theta[r], &n_q[r]);
                    axpy(&mut f_d, theta[r], &disp[r]);
                }
            }
            let mut rhs = vec![0.0; ne_n];
            matvec_into(&ops.m_eta, &a_eta, 0.0, &mut rhs);
            if let Some(fh) = &ops.f_iwg {
                axpy(&mut rhs, gen_shift, fh.as_slice());
            }
            axpy(&mut rhs, -dt, &f_eta);
            let eta = f.eta.solve(&rhs)?;
            let q = match variant {
                EbVariant::Psi => {
                    f_d.iter_mut().for_each(|v| *v = -*v);
                    let psi = ops.psi_lu.solve(&f_d)?;
                    axpy(&mut a_q, dt, &psi);
                    let mut rhs = vec![0.0; nq_n];
                    matvec_into(&ops.m_q, &a_q, 0.0, &mut rhs);
                    axpy(&mut rhs, -dt, &f_q);
                    f.q.solve(&rhs)?
                }
                EbVariant::Fused => {
                    let mut rhs = vec![0.0; nq_n];
                    matvec_into(&ops.m_minus_t, &a_q, 0.0, &mut rhs);
                    axpy(&mut rhs, -dt, &f_d);
                    f.q.solve(&rhs)?
                }
            };
            self.timer.lap(Category::LinearSolve);
            xs.push(EbReducedState { eta, q });
        }
        let out = xs.pop().unwrap();
        check_finite(&out.eta, step, t + dt, "reduced eta")?;
        check_finite(&out.q, step, t + dt, "reduced q")?;
        self.timer.lap(Category::Other);
        Ok(out)
    }
}

/// One pdROM SSPRK(2,2) step from `x` at time `t`.
#[allow(clippy::too_many_arguments)]
pub fn pdrom_eb_step(
    ops: &ReducedEbOps,
    problem: &EbProblem,
    v_eta: &ReducedBasis,
    v_q: &ReducedBasis,
    x: &EbReducedState,
    t: f64,
    dt: f64,
    variant: EbVariant,
) -> Result<EbReducedState> {
    check_len("reduced eta", x.eta.len(), v_eta.n_rb())?;
    check_len("reduced q", x.q.len(), v_q.n_rb())?;
    if !(dt > 0.0) {
        return Err(Error::arg(format!("time step {dt} must be positive")));
    }
    PdromEb::pdrom(problem, ops, v_eta, v_q, variant).step(x, t, dt, 0)
}

/// Integrates a reduced EB model from the projection of `state0`.
#[allow(clippy::too_many_arguments)]
pub fn run_reduced_eb<F: ReducedEbFlux>(
    model: &mut ReducedEb<'_, F>,
    v_eta: &ReducedBasis,
    v_q: &ReducedBasis,
    state0: &EbState,
    t_end: f64,
    samples: &[f64],
    policy: DtPolicy,
    observe: impl FnMut(usize, f64, &EbReducedState) -> Result<()>,
) -> Result<Integration<EbReducedState>> {
    let x0 = EbReducedState::project(v_eta, v_q, state0)?;
    model.timer = Timer::new();
    let out = integrate(model, x0, state0.t, t_end, samples, policy, observe)?;
    model.timer.lap(Category::Other);
    Ok(out)
}

/// Integrates the pdROM; `observe` receives reduced coefficients.
#[allow(clippy::too_many_arguments)]
pub fn run_pdrom_eb(
    problem: &EbProblem,
    ops: &ReducedEbOps,
    v_eta: &ReducedBasis,
    v_q: &ReducedBasis,
    state0: &EbState,
    t_end: f64,
    samples: &[f64],
    policy: DtPolicy,
    variant: EbVariant,
    observe: impl FnMut(usize, f64, &EbReducedState) -> Result<()>,
) -> Result<(Integration<EbReducedState>, Timer)> {
    let mut rom = PdromEb::pdrom(problem, ops, v_eta, v_q, variant);
    let out = run_reduced_eb(&mut rom, v_eta, v_q, state0, t_end, samples, policy, observe)?;
    Ok((out, rom.timer))
}
