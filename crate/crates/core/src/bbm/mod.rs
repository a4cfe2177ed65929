//! Modified BBM-KdV equation with variable bathymetry, finite differences.

mod benchmarks;

pub use benchmarks::{bbm_benchmark, BbmBenchmark, BbmOverrides};
pub(crate) use benchmarks::trapezoid;

use serde::{Deserialize, Serialize};

use crate::driver::{check_finite, integrate, DtPolicy, Integration, Stepper};
use crate::error::{check_len, Error, Result};
use crate::numcore::{
    banded_from_rows, cip_w, d1_w, d3_w, Banded, BoundaryKind, FdOperator, Grid1D, StencilMatrix, TimeScheme,
};
use crate::timing::{Category, Timer};

/// Physical and numerical parameters of one BBM-KdV run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BbmConfig {
    pub h0: f64,
    pub g: f64,
    pub a0: f64,
    /// Dispersion parameter, `alpha_p = 1/6 - p`.
    pub p: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub grid: Grid1D,
    /// Dimensionless `beta * b(x)` per node.
    pub bathy: Vec<f64>,
    pub d_cip: f64,
}

impl BbmConfig {
    pub fn validate(&self) -> Result<()> {
        check_len("bathymetry", self.bathy.len(), self.grid.nh).map_err(|e| Error::config(e.to_string()))?;
        if !(self.h0 > 0.0 && self.g > 0.0) {
            return Err(Error::config("h0 and g must be positive"));
        }
        if self.p > 1.0 / 6.0 + 1e-15 {
            return Err(Error::config(format!("p = {} exceeds 1/6", self.p)));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::config(format!("cfl = {} outside (0, 1)", self.cfl)));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::config("t_end must be nonnegative"));
        }
        if !(self.d_cip >= 0.0) {
            return Err(Error::config("d_cip must be nonnegative"));
        }
        if let Some(i) = self.bathy.iter().position(|&b| !(1.0 - b > 0.0)) {
            return Err(Error::config(format!("dry node {i}: 1 - bathy = {}", 1.0 - self.bathy[i])));
        }
        Ok(())
    }

    pub fn alpha_p(&self) -> f64 {
        1.0 / 6.0 - self.p
    }
}

/// Dimensional per-node coefficients and assembled operators.
#[derive(Clone, Debug)]
pub struct BbmProblem {
    pub config: BbmConfig,
    pub c: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta: f64,
    pub alpha: f64,
    pub omega: Vec<f64>,
    pub nu: Vec<f64>,
    /// `I - alpha D2`
    pub elliptic: Banded,
    /// First-derivative matrix used by the energy product.
    pub d_matrix: StencilMatrix,
    /// Time-frozen profile held at the left node, for lifted runs.
    pub lift: Option<Vec<f64>>,
    pub gamma_max: f64,
}

/// Evolving BBM state.
#[derive(Clone, Debug, PartialEq)]
pub struct BbmState {
    pub eta: Vec<f64>,
    pub t: f64,
    pub step_index: usize,
}

/// Builds coefficients and operators. `eta0` supplies the lift for
/// Dirichlet-left runs and is ignored otherwise.
pub fn build_bbm_problem(config: BbmConfig, eta0: Option<&[f64]>) -> Result<BbmProblem> {
    config.validate()?;
    let grid = &config.grid;
    let (h0, g) = (config.h0, config.g);
    let c0 = (g * h0).sqrt();
    let c: Vec<f64> = config.bathy.iter().map(|b| (g * h0 * (1.0 - b)).sqrt()).collect();
    let omega: Vec<f64> = c.iter().map(|ci| h0 * h0 * ci.powi(5) / (6.0 * c0.powi(4))).collect();
    let nu: Vec<f64> = crate::numcore::fd_apply(FdOperator::D, &c, grid)?.iter().map(|d| 1.5 * d).collect();
    let alpha = config.alpha_p() * h0 * h0;
    let k = alpha / (grid.dx * grid.dx);
    let elliptic = banded_from_rows(grid, |_| [-k, 1.0 + 2.0 * k, -k]);
    let lift = match grid.bc {
        BoundaryKind::DirichletLeftLifted => {
            let e = eta0.ok_or_else(|| Error::config("lifted boundary needs the initial profile"))?;
            check_len("lift profile", e.len(), grid.nh)?;
            Some(e.to_vec())
        }
        _ => None,
    };
    let gamma_max = c.iter().cloned().fold(0.0, f64::max);
    Ok(BbmProblem {
        d_matrix: StencilMatrix::from_operator(FdOperator::D, grid),
        gamma: c.clone(),
        c,
        delta: 1.5 * c0 / h0,
        alpha,
        omega,
        nu,
        elliptic,
        lift,
        gamma_max,
        config,
    })
}

impl BbmProblem {
    pub fn grid(&self) -> &Grid1D {
        &self.config.grid
    }

    pub fn nh(&self) -> usize {
        self.config.grid.nh
    }

    /// True when node 0 is held by the lift.
    pub fn masks_left(&self) -> bool {
        self.lift.is_some()
    }

    /// Zeroes the held node in place.
    pub fn apply_mask(&self, v: &mut [f64]) {
        if self.masks_left() {
            v[0] = 0.0;
        }
    }

    /// Energy product `Theta v = dx (v + alpha D^T D v)`.
    pub fn theta_apply(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let dx = self.grid().dx;
        let mut out = vec![0.0; n];
        for k in (0..2).chain(n - 2..n) {
            out[k] = self.theta_at(v, k);
        }
        for (k, w) in v.windows(5).enumerate() {
            out[k + 2] = self.theta_interior(w.try_into().unwrap(), dx);
        }
        out
    }

    /// `(Theta v)_k` from the centered five values, valid away from non-periodic ends.
    #[inline]
    pub(crate) fn theta_interior(&self, w: &[f64; 5], dx: f64) -> f64 {
        dx * w[2] + self.alpha * (2.0 * w[2] - w[0] - w[4]) / (4.0 * dx)
    }

    /// `(Theta v)_k` for any node, read off the assembled `D` rows.
    pub(crate) fn theta_at(&self, v: &[f64], k: usize) -> f64 {
        let grid = self.grid();
        let mut rows = [k, grid.resolve(k as isize - 1), grid.resolve(k as isize + 1)];
        rows.sort_unstable();
        let mut dtd = 0.0;
        for (idx, &i) in rows.iter().enumerate() {
            if idx > 0 && rows[idx - 1] == i {
                continue;
            }
            let row = &self.d_matrix.rows[i];
            if let Some(&(_, wk)) = row.iter().find(|(c, _)| *c == k) {
                dtd += wk * row.iter().map(|&(c, w)| w * v[c]).sum::<f64>();
            }
        }
        grid.dx * (v[k] + self.alpha * dtd)
    }

    /// Flux at a single node from the five surrounding values.
    #[inline]
    pub(crate) fn flux_at(&self, j: usize, w: &[f64; 5], gam: &[f64; 3]) -> f64 {
        let dx = self.config.grid.dx;
        let lam = [
            gam[0] + self.delta * w[1].abs(),
            gam[1] + self.delta * w[2].abs(),
            gam[2] + self.delta * w[3].abs(),
        ];
        (self.gamma[j] + self.delta * w[2]) * d1_w(w, dx) + self.nu[j] * w[2] + cip_w(w, &lam, self.config.d_cip, dx)
    }

    pub(crate) fn explicit_rhs_into(&self, eta: &[f64], out: &mut [f64]) {
        let grid = self.grid();
        let n = grid.nh;
        for j in (0..2).chain(n - 2..n) {
            out[j] = self.flux_at(j, &grid.window5(eta, j), &grid.window3(&self.gamma, j));
        }
        // interior nodes need no ghost resolution
        for (k, (w, g)) in eta.windows(5).zip(self.gamma[1..].windows(3)).enumerate() {
            let j = k + 2;
            out[j] = self.flux_at(j, w.try_into().unwrap(), g.try_into().unwrap());
        }
    }

    /// `-omega D3 eta`, the right side of the elliptic problem.
    pub(crate) fn phi_rhs(&self, eta: &[f64]) -> Vec<f64> {
        let grid = self.grid();
        let dx = grid.dx;
        let n = grid.nh;
        let mut out = vec![0.0; n];
        for j in (0..2).chain(n - 2..n) {
            out[j] = -self.omega[j] * d3_w(&grid.window5(eta, j), dx);
        }
        for (k, w) in eta.windows(5).enumerate() {
            out[k + 2] = -self.omega[k + 2] * d3_w(w.try_into().unwrap(), dx);
        }
        out
    }

    /// `mask (-F(eta) + Phi(eta))`, with timing charged to `timer`.
    pub fn residual_timed(&self, eta: &[f64], timer: &mut Timer) -> Result<Vec<f64>> {
        let mut f = vec![0.0; self.nh()];
        self.explicit_rhs_into(eta, &mut f);
        let rhs = self.phi_rhs(eta);
        timer.lap(Category::Flux);
        let phi = self.elliptic.solve(&rhs)?;
        timer.lap(Category::LinearSolve);
        for (fi, p) in f.iter_mut().zip(&phi) {
            *fi = p - *fi;
        }
        self.apply_mask(&mut f);
        timer.lap(Category::Other);
        Ok(f)
    }
}

/// `(gamma + delta eta) D eta + nu eta + J(eta, lambda)`, `lambda = gamma + delta |eta|`.
pub fn bbm_explicit_rhs(problem: &BbmProblem, eta: &[f64]) -> Result<Vec<f64>> {
    check_len("eta", eta.len(), problem.nh())?;
    let mut out = vec![0.0; problem.nh()];
    problem.explicit_rhs_into(eta, &mut out);
    Ok(out)
}

/// Solves `(I - alpha D2) Phi = -omega D3 eta`.
pub fn bbm_phi_solve(problem: &BbmProblem, eta: &[f64]) -> Result<Vec<f64>> {
    check_len("eta", eta.len(), problem.nh())?;
    problem.elliptic.solve(&problem.phi_rhs(eta))
}

/// CFL step `cfl dx / max(gamma + delta |eta|)`.
pub fn bbm_dt(problem: &BbmProblem, eta: &[f64]) -> Result<f64> {
    let lam = eta
        .iter()
        .zip(&problem.gamma)
        .map(|(e, g)| g + problem.delta * e.abs())
        .fold(0.0f64, |m, l| if l.is_nan() || m.is_nan() { f64::NAN } else { m.max(l) });
    if !(lam.is_finite() && lam > 0.0) {
        return Err(Error::Aborted { step: 0, t: 0.0, reason: format!("invalid wave speed {lam}") });
    }
    Ok(problem.config.cfl * problem.grid().dx / lam)
}

/// Energy `eta^T Theta eta`.
pub fn bbm_energy(problem: &BbmProblem, eta: &[f64]) -> f64 {
    let dx = problem.grid().dx;
    let de = problem.d_matrix.apply(eta);
    dx * (eta.iter().map(|e| e * e).sum::<f64>() + problem.alpha * de.iter().map(|d| d * d).sum::<f64>())
}

/// Runs the Shu–Osher stages of `scheme` for `u' = residual(u)`.
pub(crate) fn shu_osher(
    scheme: &TimeScheme,
    u0: &[f64],
    dt: f64,
    mut residual: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let mut us: Vec<Vec<f64>> = vec![u0.to_vec()];
    let mut ls: Vec<Vec<f64>> = Vec::with_capacity(scheme.stages());
    for s in 0..scheme.stages() {
        ls.push(residual(&us[s])?);
        let mut next = vec![0.0; u0.len()];
        for r in 0..=s {
            let (rho, th) = (scheme.rho[s][r], scheme.theta[s][r]);
            if rho != 0.0 {
                next.iter_mut().zip(&us[r]).for_each(|(n, u)| *n += rho * u);
            }
            if th != 0.0 {
                next.iter_mut().zip(&ls[r]).for_each(|(n, l)| *n += dt * th * l);
            }
        }
        us.push(next);
    }
    Ok(us.pop().expect("at least one stage"))
}

/// One SSPRK(2,2) step.
pub fn bbm_step(problem: &BbmProblem, state: &BbmState, dt: f64) -> Result<BbmState> {
    let mut fom = BbmFom::new(problem);
    let eta = fom.step(&state.eta, state.t, dt, state.step_index)?;
    Ok(BbmState { eta, t: state.t + dt, step_index: state.step_index + 1 })
}

/// Full-order stepper with timing instrumentation.
pub struct BbmFom<'a> {
    pub problem: &'a BbmProblem,
    pub scheme: TimeScheme,
    pub timer: Timer,
}

impl<'a> BbmFom<'a> {
    pub fn new(problem: &'a BbmProblem) -> Self {
        Self { problem, scheme: TimeScheme::ssprk22(), timer: Timer::new() }
    }
}

impl Stepper for BbmFom<'_> {
    type State = Vec<f64>;

    fn dt(&mut self, eta: &Vec<f64>) -> Result<f64> {
        let dt = bbm_dt(self.problem, eta);
        self.timer.lap(Category::Other);
        dt
    }

    fn step(&mut self, eta: &Vec<f64>, t: f64, dt: f64, step: usize) -> Result<Vec<f64>> {
        if !(dt > 0.0) {
            return Err(Error::arg(format!("time step must be positive, got {dt}")));
        }
        let (p, timer) = (self.problem, &mut self.timer);
        let out = shu_osher(&self.scheme, eta, dt, |u| p.residual_timed(u, timer)).map_err(|e| match e {
            Error::Singular(m) => Error::Aborted { step, t, reason: format!("elliptic solve failed: {m}") },
            other => other,
        })?;
        check_finite(&out, step, t + dt, "eta")?;
        self.timer.lap(Category::Other);
        Ok(out)
    }
}

/// Integrates the FOM, observing at `samples`.
pub fn run_bbm_fom(
    problem: &BbmProblem,
    eta0: &[f64],
    t_end: f64,
    samples: &[f64],
    policy: DtPolicy,
    observe: impl FnMut(usize, f64, &Vec<f64>) -> Result<()>,
) -> Result<(Integration<Vec<f64>>, Timer)> {
    check_len("initial eta", eta0.len(), problem.nh())?;
    let mut fom = BbmFom::new(problem);
    fom.timer = Timer::new();
    let out = integrate(&mut fom, eta0.to_vec(), 0.0, t_end, samples, policy, observe)?;
    fom.timer.lap(Category::Other);
    Ok((out, fom.timer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{dense_solve, fd_apply};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(nh: usize, bc: BoundaryKind, bathy: Option<Vec<f64>>) -> BbmConfig {
        let grid = Grid1D::new(0.0, 20.0, nh, bc).unwrap();
        let bathy = bathy.unwrap_or_else(|| grid.nodes().iter().map(|x| 0.2 * (-(x - 10.0f64).powi(2)).exp()).collect());
        BbmConfig { h0: 1.0, g: 9.81, a0: 0.05, p: 0.0, cfl: 0.2, t_end: 1.0, grid, bathy, d_cip: 1.0 }
    }

    fn random_eta(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-0.05..0.05)).collect()
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let n: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        n / b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300)
    }

    #[test]
    fn flat_bottom_coefficients() {
        let cfg = config(100, BoundaryKind::Periodic, Some(vec![0.0; 100]));
        let p = build_bbm_problem(cfg, None).unwrap();
        assert!(p.gamma.iter().all(|&g| (g - 9.81f64.sqrt()).abs() < 1e-14));
        assert!((p.gamma[0] - 3.132091952673165).abs() < 1e-12);
        assert!(p.nu.iter().all(|&n| n == 0.0));
        assert!(p.omega.iter().all(|&w| (w - 9.81f64.sqrt() / 6.0).abs() < 1e-14));
    }

    #[test]
    fn kdv_limit_has_identity_elliptic_part() {
        let mut cfg = config(50, BoundaryKind::Periodic, None);
        cfg.p = 1.0 / 6.0;
        let p = build_bbm_problem(cfg, None).unwrap();
        assert_eq!(p.alpha, 0.0);
        let e = random_eta(50, 1);
        assert_eq!(p.elliptic.matvec(&e), e);
        let want: Vec<f64> = e.iter().map(|x| p.grid().dx * x * x).collect();
        assert!((bbm_energy(&p, &e) - want.iter().sum::<f64>()).abs() < 1e-15);
        let phi = bbm_phi_solve(&p, &e).unwrap();
        let d3 = fd_apply(FdOperator::D3, &e, p.grid()).unwrap();
        for i in 0..50 {
            assert!((phi[i] + p.omega[i] * d3[i]).abs() < 1e-12 * d3[i].abs().max(1.0));
        }
    }

    #[test]
    fn constant_bathymetry_has_no_source() {
        let p = build_bbm_problem(config(40, BoundaryKind::Extrapolated, Some(vec![0.3; 40])), None).unwrap();
        assert!(p.nu.iter().all(|&n| n == 0.0));
    }

    #[test]
    fn dry_bathymetry_rejected() {
        let cfg = config(40, BoundaryKind::Periodic, Some(vec![1.0; 40]));
        assert!(matches!(build_bbm_problem(cfg, None), Err(Error::Config(_))));
    }

    #[test]
    fn explicit_rhs_trivial_cases() {
        let p = build_bbm_problem(config(60, BoundaryKind::Periodic, Some(vec![0.0; 60])), None).unwrap();
        assert!(bbm_explicit_rhs(&p, &[0.0; 60]).unwrap().iter().all(|&v| v == 0.0));
        assert!(bbm_explicit_rhs(&p, &[0.3; 60]).unwrap().iter().all(|&v| v.abs() < 1e-12));
        assert!(bbm_phi_solve(&p, &[0.3; 60]).unwrap().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn explicit_rhs_matches_term_by_term_oracle() {
        for bc in [BoundaryKind::Periodic, BoundaryKind::Extrapolated] {
            let p = build_bbm_problem(config(80, bc, None), None).unwrap();
            let eta = random_eta(80, 2);
            let g = p.grid();
            let d = fd_apply(FdOperator::D, &eta, g).unwrap();
            let lam: Vec<f64> = eta.iter().zip(&p.gamma).map(|(e, ga)| ga + p.delta * e.abs()).collect();
            let j = crate::numcore::cip_apply(&eta, &lam, 1.0, g).unwrap();
            let want: Vec<f64> =
                (0..80).map(|i| (p.gamma[i] + p.delta * eta[i]) * d[i] + p.nu[i] * eta[i] + j[i]).collect();
            assert!(rel(&bbm_explicit_rhs(&p, &eta).unwrap(), &want) < 1e-12);
        }
    }

    #[test]
    fn phi_matches_dense_oracle() {
        for bc in [BoundaryKind::Periodic, BoundaryKind::Extrapolated] {
            let p = build_bbm_problem(config(90, bc, None), None).unwrap();
            let eta = random_eta(90, 3);
            let g = p.grid();
            let d2 = StencilMatrix::from_operator(FdOperator::D2, g).to_dense();
            let a = nalgebra::DMatrix::<f64>::identity(90, 90) - d2 * p.alpha;
            let d3 = fd_apply(FdOperator::D3, &eta, g).unwrap();
            let rhs: Vec<f64> = (0..90).map(|i| -p.omega[i] * d3[i]).collect();
            let want = dense_solve(&a, &rhs).unwrap();
            assert!(rel(&bbm_phi_solve(&p, &eta).unwrap(), &want) < 1e-11);
        }
    }

    #[test]
    fn monochromatic_dt_at_rest() {
        let (cfg, _) = bbm_benchmark(BbmBenchmark::Monochromatic, &BbmOverrides::default()).unwrap();
        let p = build_bbm_problem(cfg, None).unwrap();
        let dt = bbm_dt(&p, &vec![0.0; 2000]).unwrap();
        assert!((dt - 2.00612e-3).abs() < 1e-7, "{dt}");
        let mut p2 = p.clone();
        p2.config.cfl *= 2.0;
        assert!((bbm_dt(&p2, &vec![0.0; 2000]).unwrap() - 2.0 * dt).abs() < 1e-15);
        assert!(bbm_dt(&p, &vec![0.1; 2000]).unwrap() < dt);
        assert!(bbm_dt(&p, &[f64::NAN; 2000]).is_err());
    }

    #[test]
    fn energy_of_constant_and_zero() {
        let p = build_bbm_problem(config(64, BoundaryKind::Periodic, None), None).unwrap();
        assert!((bbm_energy(&p, &[1.0; 64]) - p.grid().dx * 64.0).abs() < 1e-12);
        assert_eq!(bbm_energy(&p, &[0.0; 64]), 0.0);
    }

    #[test]
    fn energy_matches_quadrature_oracle() {
        let p = build_bbm_problem(config(64, BoundaryKind::Extrapolated, None), None).unwrap();
        let eta = random_eta(64, 4);
        let dx = p.grid().dx;
        let mut q = 0.0;
        for i in 0..64 {
            let l = eta[(i as usize).saturating_sub(1)];
            let r = eta[(i + 1).min(63)];
            let de = (r - l) / (2.0 * dx);
            q += dx * (eta[i] * eta[i] + p.alpha * de * de);
        }
        assert!((bbm_energy(&p, &eta) - q).abs() <= 1e-12 * q);
        let theta_e = p.theta_apply(&eta);
        let quad: f64 = eta.iter().zip(&theta_e).map(|(a, b)| a * b).sum();
        assert!((quad - q).abs() <= 1e-12 * q);
    }

    #[test]
    fn theta_matches_dense_product() {
        for bc in [BoundaryKind::Periodic, BoundaryKind::Extrapolated, BoundaryKind::DirichletLeftLifted] {
            let p = build_bbm_problem(config(40, bc, None), Some(&random_eta(40, 8))).unwrap();
            let d = p.d_matrix.to_dense();
            let theta = (nalgebra::DMatrix::<f64>::identity(40, 40) + d.transpose() * &d * p.alpha) * p.grid().dx;
            let v = random_eta(40, 9);
            let want = &theta * nalgebra::DVector::from_vec(v.clone());
            assert!(rel(&p.theta_apply(&v), want.as_slice()) < 1e-13, "{bc:?}");
        }
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let p = build_bbm_problem(config(50, BoundaryKind::Extrapolated, None), None).unwrap();
        let mut s = BbmState { eta: vec![0.0; 50], t: 0.0, step_index: 0 };
        for _ in 0..10 {
            s = bbm_step(&p, &s, 1e-2).unwrap();
        }
        assert!(s.eta.iter().all(|&v| v == 0.0));
        assert_eq!(s.step_index, 10);
    }

    #[test]
    fn increment_is_first_order_in_dt() {
        let p = build_bbm_problem(config(100, BoundaryKind::Periodic, None), None).unwrap();
        let eta: Vec<f64> = p.grid().nodes().iter().map(|x| 0.05 * (x * std::f64::consts::PI / 10.0).sin()).collect();
        let s = BbmState { eta: eta.clone(), t: 0.0, step_index: 0 };
        let inc = |dt: f64| {
            let n = bbm_step(&p, &s, dt).unwrap();
            n.eta.iter().zip(&eta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        };
        let r = inc(1e-4) / inc(5e-5);
        assert!((r - 2.0).abs() < 1e-3, "{r}");
    }

    #[test]
    fn step_matches_hand_rolled_euler_composition() {
        let p = build_bbm_problem(config(70, BoundaryKind::Extrapolated, None), None).unwrap();
        let eta = random_eta(70, 5);
        let dt = 1e-3;
        let euler = |u: &[f64]| -> Vec<f64> {
            let f = bbm_explicit_rhs(&p, u).unwrap();
            let phi = bbm_phi_solve(&p, u).unwrap();
            (0..u.len()).map(|i| u[i] + dt * (phi[i] - f[i])).collect()
        };
        let u1 = euler(&eta);
        let u2e = euler(&u1);
        let want: Vec<f64> = eta.iter().zip(&u2e).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
        let got = bbm_step(&p, &BbmState { eta, t: 0.0, step_index: 0 }, dt).unwrap();
        for (g, w) in got.eta.iter().zip(&want) {
            assert!((g - w).abs() < 1e-13);
        }
    }

    #[test]
    fn lifted_run_holds_left_value() {
        let (cfg, eta0) = bbm_benchmark(BbmBenchmark::UndularBore, &BbmOverrides { nh: Some(200), ..Default::default() }).unwrap();
        let p = build_bbm_problem(cfg, Some(&eta0)).unwrap();
        let (out, _) = run_bbm_fom(&p, &eta0, 0.5, &[], DtPolicy::Adaptive, |_, _, _| Ok(())).unwrap();
        assert_eq!(out.state[0], eta0[0]);
        assert!(out.steps > 0);
    }

    #[test]
    fn nan_aborts_with_step_index() {
        let p = build_bbm_problem(config(30, BoundaryKind::Periodic, None), None).unwrap();
        let mut eta = vec![0.0; 30];
        eta[4] = f64::NAN;
        let err = bbm_step(&p, &BbmState { eta, t: 0.0, step_index: 7 }, 1e-3).unwrap_err();
        assert!(matches!(err, Error::Aborted { step: 7, .. }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn translation_equivariance_on_flat_periodic(k in 1usize..40, seed in any::<u64>()) {
            let p = build_bbm_problem(config(64, BoundaryKind::Periodic, Some(vec![0.0; 64])), None).unwrap();
            let eta = random_eta(64, seed);
            let shifted: Vec<f64> = (0..64).map(|i| eta[(i + 64 - k) % 64]).collect();
            let a = bbm_step(&p, &BbmState { eta, t: 0.0, step_index: 0 }, 1e-3).unwrap().eta;
            let b = bbm_step(&p, &BbmState { eta: shifted, t: 0.0, step_index: 0 }, 1e-3).unwrap().eta;
            for i in 0..64 {
                prop_assert!((b[i] - a[(i + 64 - k) % 64]).abs() < 1e-13);
            }
        }
    }
}
