use nalgebra::DMatrix;

use super::{as_instability, check_sampled, EimSpace, Sampler};
use crate::bbm::{shu_osher, BbmProblem};
use crate::driver::{check_finite, integrate, DtPolicy, Integration, Stepper};
use crate::error::{check_len, Error, Result};
use crate::numcore::{matvec_into, TimeScheme};
use crate::rom::bbm::ReducedBbmOps;
use crate::rom::ReducedBasis;
use crate::timing::{Category, Timer};

/// pdROM with the flux replaced by its interpolant at magic points.
pub struct EimBbm<'a> {
    pub problem: &'a BbmProblem,
    pub ops: &'a ReducedBbmOps,
    pub space: &'a EimSpace,
    pub scheme: TimeScheme,
    pub timer: Timer,
    sampler: Sampler,
    /// Rows of `V` at sampled nodes.
    v_rows: DMatrix<f64>,
    lift_vals: Option<Vec<f64>>,
    /// `proj^T Psi`
    b: DMatrix<f64>,
    gamma_win: Vec<[f64; 3]>,
    vals: Vec<f64>,
    phi_z: Vec<f64>,
    step: usize,
    t: f64,
}

impl<'a> EimBbm<'a> {
    pub fn new(problem: &'a BbmProblem, ops: &'a ReducedBbmOps, basis: &ReducedBasis, space: &'a EimSpace) -> Result<Self> {
        check_len("EIM space rows", space.dof(), problem.nh())?;
        let grid = problem.grid();
        let sampler = Sampler::new(grid, &space.z);
        let v_rows = sampler.rows(&basis.v);
        let lift_vals = ops.lift.as_ref().map(|l| sampler.values(l));
        let b = space.projection(&ops.proj)?;
        let gamma_win = space.z.iter().map(|&z| grid.window3(&problem.gamma, z)).collect();
        Ok(Self {
            problem,
            ops,
            space,
            scheme: TimeScheme::ssprk22(),
            timer: Timer::new(),
            vals: vec![0.0; sampler.nodes.len()],
            phi_z: vec![0.0; space.n_eim()],
            sampler,
            v_rows,
            lift_vals,
            b,
            gamma_win,
            step: 0,
            t: 0.0,
        })
    }

    /// Surface at the sampled nodes, with the blow-up check.
    fn sample(&mut self, eta_hat: &[f64]) -> Result<()> {
        match &self.lift_vals {
            Some(l) => {
                self.vals.copy_from_slice(l);
                matvec_into(&self.v_rows, eta_hat, 1.0, &mut self.vals);
            }
            None => matvec_into(&self.v_rows, eta_hat, 0.0, &mut self.vals),
        }
        check_sampled(&self.vals, 10.0 * self.problem.config.h0, self.step, self.t)
    }

    fn residual(&mut self, eta_hat: &[f64]) -> Result<Vec<f64>> {
        self.sample(eta_hat)?;
        for (k, &z) in self.space.z.iter().enumerate() {
            let w = self.sampler.window(&self.vals, k);
            self.phi_z[k] = self.problem.flux_at(z, &w, &self.gamma_win[k]);
        }
        let mut r = vec![0.0; eta_hat.len()];
        matvec_into(&self.b, &self.phi_z, 0.0, &mut r);
        self.timer.lap(Category::Flux);
        matvec_into(&self.ops.k_mat, eta_hat, 1.0, &mut r);
        for (a, b) in r.iter_mut().zip(self.ops.k_lift.iter()) {
            *a = -*a - b;
        }
        self.timer.lap(Category::LinearSolve);
        Ok(r)
    }
}

impl Stepper for EimBbm<'_> {
    type State = Vec<f64>;

    fn dt(&mut self, eta_hat: &Vec<f64>) -> Result<f64> {
        self.sample(eta_hat)?;
        let p = self.problem;
        let emax = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lam = p.gamma_max + p.delta * emax;
        self.timer.lap(Category::Other);
        Ok(p.config.cfl * p.grid().dx / lam)
    }

    fn step(&mut self, eta_hat: &Vec<f64>, t: f64, dt: f64, step: usize) -> Result<Vec<f64>> {
        self.step = step;
        self.t = t;
        let scheme = self.scheme.clone();
        let out = shu_osher(&scheme, eta_hat, dt, |u| self.residual(u))
            .and_then(|out| check_finite(&out, step, t + dt, "reduced coefficients").map(|_| out))
            .map_err(|e| as_instability(e, step, t))?;
        self.timer.lap(Category::Other);
        Ok(out)
    }
}

/// One EIMROM SSPRK(2,2) step.
pub fn eimrom_bbm_step(
    problem: &BbmProblem,
    ops: &ReducedBbmOps,
    basis: &ReducedBasis,
    space: &EimSpace,
    eta_hat: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    check_len("reduced state", eta_hat.len(), ops.n_rb())?;
    if !(dt > 0.0) {
        return Err(Error::arg(format!("time step {dt} must be positive")));
    }
    EimBbm::new(problem, ops, basis, space)?.step(&eta_hat.to_vec(), 0.0, dt, 0)
}

/// Integrates the EIMROM from the projection of `eta0`.
#[allow(clippy::too_many_arguments)]
pub fn run_eimrom_bbm(
    problem: &BbmProblem,
    ops: &ReducedBbmOps,
    basis: &ReducedBasis,
    space: &EimSpace,
    eta0: &[f64],
    t_end: f64,
    samples: &[f64],
    policy: DtPolicy,
    observe: impl FnMut(usize, f64, &Vec<f64>) -> Result<()>,
) -> Result<(Integration<Vec<f64>>, Timer)> {
    let mut rom = EimBbm::new(problem, ops, basis, space)?;
    let x0 = ops.project(basis, eta0)?;
    rom.timer = Timer::new();
    let out = integrate(&mut rom, x0, 0.0, t_end, samples, policy, observe)?;
    rom.timer.lap(Category::Other);
    Ok((out, rom.timer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbm::{bbm_benchmark, build_bbm_problem, BbmBenchmark, BbmOverrides};
    use crate::eim::{eim_greedy, EimSize};
    use crate::rom::bbm::{build_bbm_reduced, collect_bbm_snapshots, PdromBbm};
    use crate::rom::{pod_basis, BasisMode, PodSize};
    use std::collections::BTreeMap;

    fn setup(name: BbmBenchmark) -> (BbmProblem, Vec<f64>) {
        let ov = BbmOverrides { nh: Some(200), ..Default::default() };
        let (c, eta0) = bbm_benchmark(name, &ov).unwrap();
        (build_bbm_problem(c, Some(&eta0)).unwrap(), eta0)
    }

    #[test]
    fn training_replay_matches_pdrom() {
        for name in [BbmBenchmark::Monochromatic, BbmBenchmark::UndularBore] {
            let (p, eta0) = setup(name);
            let snaps = collect_bbm_snapshots(&p, &eta0, 2.0, 40, BTreeMap::new(), 0).unwrap();
            let th = |v: &[f64]| p.theta_apply(v);
            let basis = pod_basis(&snaps.states, PodSize::Count(8), BasisMode::Energy, Some(&th)).unwrap();
            let ops = build_bbm_reduced(&p, &basis).unwrap();
            let dt = 0.01;
            let n_steps = 50;
            let mut rom = PdromBbm::new(&p, &ops, &basis);
            rom.recorded = Some(Vec::new());
            let mut x = ops.project(&basis, &eta0).unwrap();
            let mut traj = vec![x.clone()];
            for k in 0..n_steps {
                x = rom.step(&x, k as f64 * dt, dt, k).unwrap();
                traj.push(x.clone());
            }
            let rec = rom.recorded.take().unwrap();
            let f = DMatrix::from_fn(p.nh(), rec.len(), |i, j| rec[j][i]);
            let space = eim_greedy(&f, EimSize::Tol(1e-15), p.grid()).unwrap();
            let mut eim = EimBbm::new(&p, &ops, &basis, &space).unwrap();
            let mut y = traj[0].clone();
            for k in 0..n_steps {
                y = eim.step(&y, k as f64 * dt, dt, k).unwrap();
                let scale = traj[k + 1].iter().fold(1e-3f64, |m, v| m.max(v.abs()));
                let err = y.iter().zip(&traj[k + 1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err <= 1e-8 * scale, "{name:?} step {k}: {err}");
            }
        }
    }

    #[test]
    fn zero_state_is_fixed_point() {
        let (p, eta0) = setup(BbmBenchmark::Monochromatic);
        let snaps = collect_bbm_snapshots(&p, &eta0, 1.0, 20, BTreeMap::new(), 0).unwrap();
        let th = |v: &[f64]| p.theta_apply(v);
        let basis = pod_basis(&snaps.states, PodSize::Count(5), BasisMode::Energy, Some(&th)).unwrap();
        let ops = build_bbm_reduced(&p, &basis).unwrap();
        let space = eim_greedy(snaps.fluxes.as_ref().unwrap(), EimSize::Count(6), p.grid()).unwrap();
        let y = eimrom_bbm_step(&p, &ops, &basis, &space, &[0.0; 5], 0.01).unwrap();
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn blow_up_is_flagged() {
        let (p, eta0) = setup(BbmBenchmark::Monochromatic);
        let snaps = collect_bbm_snapshots(&p, &eta0, 1.0, 20, BTreeMap::new(), 0).unwrap();
        let th = |v: &[f64]| p.theta_apply(v);
        let basis = pod_basis(&snaps.states, PodSize::Count(5), BasisMode::Energy, Some(&th)).unwrap();
        let ops = build_bbm_reduced(&p, &basis).unwrap();
        let space = eim_greedy(snaps.fluxes.as_ref().unwrap(), EimSize::Count(6), p.grid()).unwrap();
        let huge = vec![1e6; 5];
        assert!(matches!(
            eimrom_bbm_step(&p, &ops, &basis, &space, &huge, 0.01),
            Err(Error::EimInstability { .. })
        ));
    }
}
