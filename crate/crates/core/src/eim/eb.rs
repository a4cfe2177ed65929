use nalgebra::DMatrix;

use super::{as_instability, check_sampled, EimSpace, Sampler};
use crate::driver::{check_finite, Stepper};
use crate::eb::EbProblem;
use crate::error::{check_len, Error, Result};
use crate::numcore::matvec_into;
use crate::rom::eb::{EbReducedState, EbVariant, ReducedEb, ReducedEbFlux, ReducedEbOps};
use crate::rom::ReducedBasis;

/// Interpolated `(N^eta, N^q)` from separate magic-point sets.
pub struct EimEbFlux<'a> {
    pub problem: &'a EbProblem,
    pub space_eta: &'a EimSpace,
    pub space_q: &'a EimSpace,
    /// Windows `0..n_eta` belong to the `eta` points, the rest to `q`.
    sampler: Sampler,
    ve_rows: DMatrix<f64>,
    vq_rows: DMatrix<f64>,
    hbar_win: Vec<[f64; 5]>,
    b_eta: DMatrix<f64>,
    b_q: DMatrix<f64>,
    eta: Vec<f64>,
    q: Vec<f64>,
    phi_eta: Vec<f64>,
    phi_q: Vec<f64>,
}

impl<'a> EimEbFlux<'a> {
    pub fn new(
        problem: &'a EbProblem,
        v_eta: &ReducedBasis,
        v_q: &ReducedBasis,
        space_eta: &'a EimSpace,
        space_q: &'a EimSpace,
    ) -> Result<Self> {
        check_len("eta EIM rows", space_eta.dof(), problem.nh())?;
        check_len("q EIM rows", space_q.dof(), problem.nh())?;
        let grid = problem.grid();
        let centres: Vec<usize> = space_eta.z.iter().chain(&space_q.z).copied().collect();
        let sampler = Sampler::new(grid, &centres);
        let hbar_win = centres.iter().map(|&c| grid.window5(&problem.hbar, c)).collect();
        let m = sampler.nodes.len();
        Ok(Self {
            problem,
            space_eta,
            space_q,
            ve_rows: sampler.rows(&v_eta.v),
            vq_rows: sampler.rows(&v_q.v),
            b_eta: space_eta.projection(&v_eta.v)?,
            b_q: space_q.projection(&v_q.v)?,
            sampler,
            hbar_win,
            eta: vec![0.0; m],
            q: vec![0.0; m],
            phi_eta: vec![0.0; space_eta.n_eim()],
            phi_q: vec![0.0; space_q.n_eim()],
        })
    }

    fn sample(&mut self, x: &EbReducedState, t: f64, step: usize) -> Result<()> {
        matvec_into(&self.ve_rows, &x.eta, 0.0, &mut self.eta);
        matvec_into(&self.vq_rows, &x.q, 0.0, &mut self.q);
        check_sampled(&self.eta, 10.0 * self.problem.config.h0, step, t)?;
        check_finite(&self.q, step, t, "sampled q").map_err(|e| as_instability(e, step, t))?;
        for (k, (&n, e)) in self.sampler.nodes.iter().zip(&self.eta).enumerate() {
            let h = self.problem.hbar[n] + e;
            if !(h > 0.0) {
                return Err(Error::EimInstability {
                    step,
                    t,
                    reason: format!("dry state at sampled node {n} (h = {h}, sample {k})"),
                });
            }
        }
        Ok(())
    }
}

impl ReducedEbFlux for EimEbFlux<'_> {
    fn eval(&mut self, x: &EbReducedState, t: f64, step: usize, n_eta: &mut [f64], n_q: &mut [f64]) -> Result<()> {
        self.sample(x, t, step)?;
        let ne = self.space_eta.n_eim();
        for k in 0..self.sampler.windows.len() {
            let e = self.sampler.window(&self.eta, k);
            let q = self.sampler.window(&self.q, k);
            let (a, b) = self.problem.nonlinear_at(&e, &q, &self.hbar_win[k]);
            if k < ne {
                self.phi_eta[k] = a;
            } else {
                self.phi_q[k - ne] = b;
            }
        }
        matvec_into(&self.b_eta, &self.phi_eta, 0.0, n_eta);
        matvec_into(&self.b_q, &self.phi_q, 0.0, n_q);
        Ok(())
    }

    fn max_speed(&mut self, x: &EbReducedState, t: f64) -> Result<f64> {
        self.sample(x, t, 0)?;
        let g = self.problem.config.g;
        Ok(self
            .sampler
            .nodes
            .iter()
            .zip(self.eta.iter().zip(&self.q))
            .map(|(&n, (e, q))| {
                let h = self.problem.hbar[n] + e;
                (q / h).abs() + (g * h).sqrt()
            })
            .fold(0.0f64, f64::max))
    }

    fn classify(&self, e: Error, step: usize, t: f64) -> Error {
        as_instability(e, step, t)
    }
}

pub type EimEb<'a> = ReducedEb<'a, EimEbFlux<'a>>;

impl<'a> EimEb<'a> {
    pub fn eim(
        problem: &'a EbProblem,
        ops: &'a ReducedEbOps,
        flux: EimEbFlux<'a>,
        variant: EbVariant,
    ) -> Self {
        ReducedEb::new(problem, ops, flux, variant)
    }
}

/// One EIMROM SSPRK(2,2) step; failures are reported as EIM instabilities.
#[allow(clippy::too_many_arguments)]
pub fn eimrom_eb_step(
    problem: &EbProblem,
    ops: &ReducedEbOps,
    v_eta: &ReducedBasis,
    v_q: &ReducedBasis,
    space_eta: &EimSpace,
    space_q: &EimSpace,
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
    let flux = EimEbFlux::new(problem, v_eta, v_q, space_eta, space_q)?;
    EimEb::eim(problem, ops, flux, variant).step(x, t, dt, 0).map_err(|e| as_instability(e, 0, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::DtPolicy;
    use crate::eb::{build_eb_problem, eb_benchmark, EbBenchmark, EbOverrides};
    use crate::eim::{eim_greedy, EimSize};
    use crate::rom::eb::{build_eb_reduced, collect_eb_snapshots, eb_pod_bases, run_reduced_eb, PdromEb};
    use crate::rom::PodSize;
    use std::collections::BTreeMap;

    #[test]
    fn training_replay_matches_pdrom() {
        let ov = EbOverrides { nh: Some(1000), ..Default::default() };
        let (c, s0) = eb_benchmark(EbBenchmark::SolitaryBar, &ov).unwrap();
        let p = build_eb_problem(c).unwrap();
        let snaps = collect_eb_snapshots(&p, &s0, 1.0, 30, BTreeMap::new(), 0).unwrap();
        let (ve, vq) = eb_pod_bases(&snaps, PodSize::Count(10), PodSize::Count(10)).unwrap();
        let ops = build_eb_reduced(&p, &ve, &vq).unwrap();
        let dt = 0.01;
        let steps = 40;
        let mut rom = PdromEb::pdrom(&p, &ops, &ve, &vq, EbVariant::Psi);
        rom.flux.recorded = Some(Vec::new());
        let mut x = EbReducedState::project(&ve, &vq, &s0).unwrap();
        let mut traj = vec![x.clone()];
        for k in 0..steps {
            x = rom.step(&x, k as f64 * dt, dt, k).unwrap();
            traj.push(x.clone());
        }
        let rec = rom.flux.recorded.take().unwrap();
        let fe = DMatrix::from_fn(p.nh(), rec.len(), |i, j| rec[j].0[i]);
        let fq = DMatrix::from_fn(p.nh(), rec.len(), |i, j| rec[j].1[i]);
        let se = eim_greedy(&fe, EimSize::Tol(1e-15), p.grid()).unwrap();
        let sq = eim_greedy(&fq, EimSize::Tol(1e-15), p.grid()).unwrap();
        let flux = EimEbFlux::new(&p, &ve, &vq, &se, &sq).unwrap();
        let mut eim = EimEb::eim(&p, &ops, flux, EbVariant::Psi);
        let mut y = traj[0].clone();
        for k in 0..steps {
            y = eim.step(&y, k as f64 * dt, dt, k).unwrap();
            let want = &traj[k + 1];
            let scale = want.eta.iter().chain(&want.q).fold(1e-3f64, |m, v| m.max(v.abs()));
            let err = y.eta.iter().zip(&want.eta).chain(y.q.iter().zip(&want.q)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-8 * scale, "step {k}: {err}");
        }
    }

    #[test]
    fn snapshot_eim_runs_and_rest_is_fixed() {
        let ov = EbOverrides { nh: Some(1000), ..Default::default() };
        let (c, s0) = eb_benchmark(EbBenchmark::SolitaryBar, &ov).unwrap();
        let p = build_eb_problem(c).unwrap();
        let snaps = collect_eb_snapshots(&p, &s0, 1.0, 30, BTreeMap::new(), 0).unwrap();
        let (ve, vq) = eb_pod_bases(&snaps, PodSize::Count(8), PodSize::Count(8)).unwrap();
        let ops = build_eb_reduced(&p, &ve, &vq).unwrap();
        let f = snaps.fluxes.as_ref().unwrap();
        let se = eim_greedy(&f.rows(0, 1000).into_owned(), EimSize::Count(16), p.grid()).unwrap();
        let sq = eim_greedy(&f.rows(1000, 1000).into_owned(), EimSize::Count(16), p.grid()).unwrap();
        let zero = EbReducedState { eta: vec![0.0; 8], q: vec![0.0; 8] };
        let y = eimrom_eb_step(&p, &ops, &ve, &vq, &se, &sq, &zero, 0.0, 0.01, EbVariant::Psi).unwrap();
        assert!(y.eta.iter().chain(&y.q).all(|v| *v == 0.0));
        let flux = EimEbFlux::new(&p, &ve, &vq, &se, &sq).unwrap();
        let mut eim = EimEb::eim(&p, &ops, flux, EbVariant::Psi);
        let out = run_reduced_eb(&mut eim, &ve, &vq, &s0, 1.0, &[1.0], DtPolicy::Adaptive, |_, _, _| Ok(()));
        assert!(out.is_ok());
        let huge = EbReducedState { eta: vec![1e3; 8], q: vec![0.0; 8] };
        assert!(matches!(
            eimrom_eb_step(&p, &ops, &ve, &vq, &se, &sq, &huge, 0.0, 0.01, EbVariant::Psi),
            Err(Error::EimInstability { .. })
        ));
    }
}
