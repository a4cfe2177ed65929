//! Enhanced Boussinesq (Madsen–Sørensen) system with P1 finite elements.

mod benchmarks;
mod solitary;

pub use benchmarks::{eb_benchmark, EbBenchmark, EbOverrides};
pub use solitary::{solitary_celerity, solitary_wave_init, solitary_wave_init_with, SolitaryWave};

use serde::{Deserialize, Serialize};

use crate::driver::{check_finite, integrate, DtPolicy, Integration, Stepper};
use crate::error::{check_len, Error, Result};
use crate::numcore::{banded_from_rows, cip_w, Banded, BandedLu, Grid1D, TimeScheme};
use crate::timing::{Category, Timer};

pub const DEFAULT_B2: f64 = 1.0 / 15.0;
pub const DEFAULT_B1: f64 = DEFAULT_B2 + 1.0 / 3.0;

/// Internal wave generator `h_iwg = A f(x) sin(2 pi t / T)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub x_iwg: f64,
    pub period: f64,
    pub alpha_iwg: f64,
    pub amplitude: f64,
}

/// Absorbing layer between `x_s1` (inner end) and `x_s2` (outer end).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sponge {
    pub x_s1: f64,
    pub x_s2: f64,
    pub n1: f64,
    pub n2: f64,
}

impl Sponge {
    pub fn nu(&self, x: f64) -> f64 {
        let (lo, hi) = (self.x_s1.min(self.x_s2), self.x_s1.max(self.x_s2));
        if x < lo || x > hi {
            return 0.0;
        }
        let s = (x - self.x_s1) / (self.x_s2 - self.x_s1);
        self.n1 * (1.0 - (self.n2 * s).exp()) / (1.0 - std::f64::consts::E)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EbConfig {
    pub h0: f64,
    pub g: f64,
    pub a0: f64,
    pub b1: f64,
    pub b2: f64,
    pub grid: Grid1D,
    /// Bottom elevation `b(x)` above the reference level, so `hbar = h0 - b`.
    pub bathy: Vec<f64>,
    pub cfl: f64,
    pub t_end: f64,
    pub d_cip: f64,
    pub generator: Option<Generator>,
    pub sponges: Vec<Sponge>,
}

impl EbConfig {
    pub fn validate(&self) -> Result<()> {
        check_len("bathymetry", self.bathy.len(), self.grid.nh).map_err(|e| Error::config(e.to_string()))?;
        if !(self.h0 > 0.0 && self.g > 0.0) {
            return Err(Error::config("h0 and g must be positive"));
        }
        if !(self.b1 > self.b2 && self.b2 > 0.0) {
            return Err(Error::config(format!("need B1 > B2 > 0, got B1 = {}, B2 = {}", self.b1, self.b2)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::config(format!("cfl = {} outside (0, 1]", self.cfl)));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::config("t_end must be nonnegative"));
        }
        if !(self.d_cip >= 0.0) {
            return Err(Error::config("d_cip must be nonnegative"));
        }
        if let Some(i) = self.bathy.iter().position(|&b| !(self.h0 - b > 0.0)) {
            return Err(Error::config(format!("dry rest state at node {i}: hbar = {}", self.h0 - self.bathy[i])));
        }
        let (x0, x1) = (self.grid.x0, self.grid.x1);
        let inside = |x: f64| x >= x0 - 1e-12 && x <= x1 + 1e-12;
        if let Some(gen) = &self.generator {
            if !inside(gen.x_iwg) || !(gen.period > 0.0) {
                return Err(Error::config("wave generator outside the domain or with nonpositive period"));
            }
        }
        for s in &self.sponges {
            if !inside(s.x_s1) || !inside(s.x_s2) || s.x_s1 == s.x_s2 {
                return Err(Error::config(format!("sponge [{}, {}] invalid for the domain", s.x_s1, s.x_s2)));
            }
        }
        Ok(())
    }

    pub fn hbar(&self) -> Vec<f64> {
        self.bathy.iter().map(|b| self.h0 - b).collect()
    }

    /// Sponge viscosity at each node.
    pub fn nu(&self) -> Vec<f64> {
        self.grid.nodes().iter().map(|&x| self.sponges.iter().map(|s| s.nu(x)).sum()).collect()
    }
}

/// Assembled tridiagonal finite element operators.
#[derive(Clone, Debug)]
pub struct FemMatrices {
    pub mass: Banded,
    /// Full dispersion matrix, Laplacian plus bathymetry-gradient part.
    pub tt: Banded,
    /// Bathymetry-gradient part of `tt` alone.
    pub tt_grad: Banded,
    pub tx1: Banded,
    pub tx2: Banded,
    pub sponge: Banded,
}

pub fn assemble_eb_matrices(config: &EbConfig) -> Result<FemMatrices> {
    config.validate()?;
    let grid = &config.grid;
    let dx = grid.dx;
    let hb = config.hbar();
    let nu = config.nu();
    let (b1, b2, g) = (config.b1, config.b2, config.g);

    let mass = banded_from_rows(grid, |_| [dx / 6.0, 4.0 * dx / 6.0, dx / 6.0]);
    let lap = banded_from_rows(grid, |j| {
        let k = b1 * hb[j] * hb[j] / dx;
        [k, -2.0 * k, k]
    });
    let tt_grad = banded_from_rows(grid, |j| {
        let [hm, h, hp] = grid.window3(&hb, j);
        let cm = (h - hm) * (2.0 * h + hm);
        let cp = (hp - h) * (2.0 * h + hp);
        let s = 1.0 / (18.0 * dx);
        [-s * cm, s * (cm - cp), s * cp]
    });
    let tt = lap.add_scaled(1.0, &tt_grad)?;
    let tx1 = banded_from_rows(grid, |j| {
        let [hm, h, hp] = grid.window3(&hb, j);
        let (am, ap) = ((h + hm).powi(3) / 4.0, (h + hp).powi(3) / 4.0);
        let k = -b2 * g / 6.0;
        [k * (-am - h.powi(3)), k * (am - ap), k * (ap + h.powi(3))]
    });
    let tx2 = banded_from_rows(grid, |j| {
        let [hm, h, hp] = grid.window3(&hb, j);
        let (dm, dp) = (h - hm, hp - h);
        let (mm, mp) = (0.25 * (h + hm).powi(2), 0.25 * (h + hp).powi(2));
        let k = -g * b2 / 3.0;
        [k * dm * mm, k * (dm * (h * h + mm) + dp * (h * h + mp)), k * dp * mp]
    });
    let sponge = banded_from_rows(grid, |j| {
        let [nm, n0, np] = grid.window3(&nu, j);
        let s = 1.0 / (8.0 * dx);
        [-s * (n0 + nm), s * (nm + 2.0 * n0 + np), -s * (n0 + np)]
    });
    Ok(FemMatrices { mass, tt, tt_grad, tx1, tx2, sponge })
}

/// Configuration plus the time-independent operators and factorizations.
#[derive(Clone, Debug)]
pub struct EbProblem {
    pub config: EbConfig,
    pub hbar: Vec<f64>,
    pub mats: FemMatrices,
    /// `tx1 + tx2`
    pub tx: Banded,
    pub mass_lu: BandedLu,
    /// Factorization of `M - Tt`.
    pub psi_lu: BandedLu,
    /// Generator shape `f_iwg`, if a generator is configured.
    pub f_iwg: Option<Vec<f64>>,
}

pub fn build_eb_problem(config: EbConfig) -> Result<EbProblem> {
    let mats = assemble_eb_matrices(&config)?;
    let tx = mats.tx1.add_scaled(1.0, &mats.tx2)?;
    let mass_lu = mats.mass.factor()?;
    let psi_lu = mats.mass.add_scaled(-1.0, &mats.tt)?.factor()?;
    let f_iwg = config.generator.as_ref().map(|gen| generator_profile(&config, gen));
    Ok(EbProblem { hbar: config.hbar(), mats, tx, mass_lu, psi_lu, f_iwg, config })
}

fn generator_profile(config: &EbConfig, gen: &Generator) -> Vec<f64> {
    let (g, h0, t) = (config.g, config.h0, gen.period);
    let gamma = 0.185 * (g / h0).sqrt() * t;
    let d2 = g * gen.alpha_iwg * gen.alpha_iwg * h0 * t * t / 80.0;
    let grid = &config.grid;
    grid.nodes().iter().map(|&x| gamma * (-grid.signed_distance(x, gen.x_iwg).powi(2) / d2).exp()).collect()
}

/// Generator amplitude `A sin(2 pi t / T)` and spatial profile; `None` without a generator.
pub fn wave_generator_value(config: &EbConfig, t: f64) -> Option<(f64, Vec<f64>)> {
    let gen = config.generator.as_ref()?;
    Some((generator_amplitude(gen, t), generator_profile(config, gen)))
}

fn generator_amplitude(gen: &Generator, t: f64) -> f64 {
    gen.amplitude * (2.0 * std::f64::consts::PI * t / gen.period).sin()
}

/// Surface elevation, discharge and time.
#[derive(Clone, Debug, PartialEq)]
pub struct EbState {
    pub eta: Vec<f64>,
    pub q: Vec<f64>,
    pub t: f64,
}

impl EbState {
    pub fn rest(nh: usize) -> Self {
        Self { eta: vec![0.0; nh], q: vec![0.0; nh], t: 0.0 }
    }
}

impl EbProblem {
    pub fn grid(&self) -> &Grid1D {
        &self.config.grid
    }

    pub fn nh(&self) -> usize {
        self.config.grid.nh
    }

    pub fn generator_amplitude(&self, t: f64) -> f64 {
        self.config.generator.as_ref().map_or(0.0, |g| generator_amplitude(g, t))
    }

    /// `Tx eta`, realized on the auxiliary second difference `w`.
    pub fn tx_apply(&self, eta: &[f64]) -> Vec<f64> {
        let grid = self.grid();
        let dx2 = grid.dx * grid.dx;
        let w: Vec<f64> = (0..grid.nh)
            .map(|j| {
                let [a, b, c] = grid.window3(eta, j);
                (a - 2.0 * b + c) / dx2
            })
            .collect();
        self.tx.matvec(&w)
    }

    /// Fails on a non-finite or non-positive total depth.
    pub fn check_wet(&self, eta: &[f64], step: usize, t: f64) -> Result<()> {
        check_finite(eta, step, t, "eta")?;
        for (j, (e, hb)) in eta.iter().zip(&self.hbar).enumerate() {
            let h = hb + e;
            if !(h > 0.0) {
                return Err(Error::DryState { node: j, h, t });
            }
        }
        Ok(())
    }

    /// Nonlinear terms at node `j` from the five-point windows of `eta`, `q`
    /// and `hbar`. Returns `(N^eta + J(eta), N^q + J(q))`.
    #[inline]
    pub(crate) fn nonlinear_at(&self, e: &[f64; 5], q: &[f64; 5], hb: &[f64; 5]) -> (f64, f64) {
        let g = self.config.g;
        let dx = self.config.grid.dx;
        let d = self.config.d_cip;
        let h = [hb[1] + e[1], hb[2] + e[2], hb[3] + e[3]];
        let lam = [
            (q[1] / h[0]).abs() + (g * h[0]).sqrt(),
            (q[2] / h[1]).abs() + (g * h[1]).sqrt(),
            (q[3] / h[2]).abs() + (g * h[2]).sqrt(),
        ];
        let n_eta = 0.5 * (q[3] - q[1]) + cip_w(e, &lam, d, dx);
        let adv = 0.5 * (q[3] * q[3] / h[2] - q[1] * q[1] / h[0]);
        let grav = g / 6.0 * ((2.0 * h[1] + h[2]) * (e[3] - e[2]) + (2.0 * h[1] + h[0]) * (e[2] - e[1]));
        (n_eta, adv + grav + cip_w(q, &lam, d, dx))
    }

    pub(crate) fn nonlinear_node(&self, eta: &[f64], q: &[f64], j: usize) -> (f64, f64) {
        let grid = self.grid();
        self.nonlinear_at(&grid.window5(eta, j), &grid.window5(q, j), &grid.window5(&self.hbar, j))
    }

    pub(crate) fn nonlinear_into(&self, eta: &[f64], q: &[f64], n_eta: &mut [f64], n_q: &mut [f64]) {
        for j in 0..self.nh() {
            let (a, b) = self.nonlinear_node(eta, q, j);
            n_eta[j] = a;
            n_q[j] = b;
        }
    }

    /// Wave speeds `|q/h| + sqrt(g h)`.
    pub fn max_speed(&self, eta: &[f64], q: &[f64]) -> f64 {
        let g = self.config.g;
        eta.iter()
            .zip(q)
            .zip(&self.hbar)
            .map(|((e, qq), hb)| {
                let h = hb + e;
                (qq / h).abs() + (g * h).sqrt()
            })
            .fold(0.0f64, |m, l| if l.is_nan() || m.is_nan() { f64::NAN } else { m.max(l) })
    }
}

/// `(N^eta + J(eta), N^q + J(q))` for a wet state.
pub fn eb_nonlinear_ops(problem: &EbProblem, eta: &[f64], q: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len("eta", eta.len(), problem.nh())?;
    check_len("q", q.len(), problem.nh())?;
    problem.check_wet(eta, 0, 0.0)?;
    let mut ne = vec![0.0; problem.nh()];
    let mut nq = vec![0.0; problem.nh()];
    problem.nonlinear_into(eta, q, &mut ne, &mut nq);
    Ok((ne, nq))
}

/// CFL step `cfl dx / max(|q/h| + sqrt(g h))`.
pub fn eb_dt(problem: &EbProblem, state: &EbState) -> Result<f64> {
    problem.check_wet(&state.eta, 0, state.t)?;
    let lam = problem.max_speed(&state.eta, &state.q);
    if !(lam.is_finite() && lam > 0.0) {
        return Err(Error::Aborted { step: 0, t: state.t, reason: format!("invalid wave speed {lam}") });
    }
    Ok(problem.config.cfl * problem.grid().dx / lam)
}

/// Discrete mass `sum_j (M eta)_j`.
pub fn eb_mass(problem: &EbProblem, eta: &[f64]) -> f64 {
    problem.mats.mass.matvec(eta).iter().sum()
}

/// `M + dt S`, factored; reused while dt is unchanged.
#[derive(Clone, Debug)]
pub(crate) struct LhsCache<T> {
    entry: Option<(f64, T)>,
}

impl<T> Default for LhsCache<T> {
    fn default() -> Self {
        Self { entry: None }
    }
}

impl<T> LhsCache<T> {
    pub(crate) fn get(&mut self, dt: f64, build: impl FnOnce(f64) -> Result<T>) -> Result<&T> {
        let stale = match &self.entry {
            Some((d, _)) => (dt - d).abs() > 1e-12 * d.abs(),
            None => true,
        };
        if stale {
            self.entry = Some((dt, build(dt)?));
        }
        Ok(&self.entry.as_ref().unwrap().1)
    }
}

/// Full order stepper.
pub struct EbFom<'a> {
    pub problem: &'a EbProblem,
    pub scheme: TimeScheme,
    pub timer: Timer,
    lhs: LhsCache<BandedLu>,
}

impl<'a> EbFom<'a> {
    pub fn new(problem: &'a EbProblem) -> Self {
        Self { problem, scheme: TimeScheme::ssprk22(), timer: Timer::new(), lhs: LhsCache::default() }
    }
}

impl Stepper for EbFom<'_> {
    type State = EbState;

    fn dt(&mut self, state: &EbState) -> Result<f64> {
        let dt = eb_dt(self.problem, state);
        self.timer.lap(Category::Other);
        dt
    }

    fn step(&mut self, state: &EbState, t: f64, dt: f64, step: usize) -> Result<EbState> {
        let p = self.problem;
        let n = p.nh();
        let scheme = &self.scheme;
        let c = scheme.abscissae();
        let stages = scheme.stages();
        let mass = &p.mats.mass;
        let sponge = &p.mats.sponge;
        let lhs = self.lhs.get(dt, |dt| mass.add_scaled(dt, sponge)?.factor())?;
        self.timer.lap(Category::LinearSolve);

        let mut etas = vec![state.eta.clone()];
        let mut qs = vec![state.q.clone()];
        let mut n_eta: Vec<Vec<f64>> = Vec::with_capacity(stages);
        let mut n_q: Vec<Vec<f64>> = Vec::with_capacity(stages);
        let mut disp: Vec<Vec<f64>> = Vec::with_capacity(stages);
        for s in 0..stages {
            let ts = t + c[s] * dt;
            p.check_wet(&etas[s], step, ts)?;
            check_finite(&qs[s], step, ts, "q")?;
            let mut ne = vec![0.0; n];
            let mut nq = vec![0.0; n];
            p.nonlinear_into(&etas[s], &qs[s], &mut ne, &mut nq);
            self.timer.lap(Category::Flux);
            // Tt M^{-1} N^q + Tx eta
            let mut d = p.mats.tt.matvec(&p.mass_lu.solve(&nq));
            d.iter_mut().zip(p.tx_apply(&etas[s])).for_each(|(a, b)| *a += b);
            self.timer.lap(Category::LinearSolve);
            n_eta.push(ne);
            n_q.push(nq);
            disp.push(d);

            let c_next = if s + 1 < stages { c[s + 1] } else { 1.0 };
            let (rho, theta) = (&scheme.rho[s], &scheme.theta[s]);
            let mut a_eta = vec![0.0; n];
            let mut a_q = vec![0.0; n];
            let mut f_eta = vec![0.0; n];
            let mut f_q = vec![0.0; n];
            let mut f_d = vec![0.0; n];
            let mut gen_shift = -p.generator_amplitude(t + c_next * dt);
            for r in 0..=s {
                if rho[r] != 0.0 {
                    axpy(&mut a_eta, rho[r], &etas[r]);
                    axpy(&mut a_q, rho[r], &qs[r]);
                    gen_shift += rho[r] * p.generator_amplitude(t + c[r] * dt);
                }
                if theta[r] != 0.0 {
                    axpy(&mut f_eta, theta[r], &n_eta[r]);
                    axpy(&mut f_q, theta[r], &n_q[r]);
                    axpy(&mut f_d, theta[r], &disp[r]);
                }
            }
            if let Some(f) = &p.f_iwg {
                axpy(&mut a_eta, gen_shift, f);
            }
            self.timer.lap(Category::Other);

            let mut rhs = mass.matvec(&a_eta);
            axpy(&mut rhs, -dt, &f_eta);
            lhs.solve_in_place(&mut rhs);
            let eta_next = rhs;

            f_d.iter_mut().for_each(|v| *v = -*v);
            p.psi_lu.solve_in_place(&mut f_d);
            let psi = f_d;
            axpy(&mut a_q, dt, &psi);
            let mut rhs = mass.matvec(&a_q);
            axpy(&mut rhs, -dt, &f_q);
            lhs.solve_in_place(&mut rhs);
            self.timer.lap(Category::LinearSolve);
            etas.push(eta_next);
            qs.push(rhs);
        }
        let eta = etas.pop().unwrap();
        let q = qs.pop().unwrap();
        check_finite(&q, step, t + dt, "q")?;
        p.check_wet(&eta, step, t + dt)?;
        self.timer.lap(Category::Other);
        Ok(EbState { eta, q, t: t + dt })
    }
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

/// One SSPRK(2,2) step.
pub fn eb_step(problem: &EbProblem, state: &EbState, dt: f64) -> Result<EbState> {
    if !(dt > 0.0) {
        return Err(Error::arg(format!("time step {dt} must be positive")));
    }
    EbFom::new(problem).step(state, state.t, dt, 0)
}

/// Integrates the FOM from `state0`; `observe` sees every sample.
pub fn run_eb_fom(
    problem: &EbProblem,
    state0: &EbState,
    t_end: f64,
    samples: &[f64],
    policy: DtPolicy,
    observe: impl FnMut(usize, f64, &EbState) -> Result<()>,
) -> Result<(Integration<EbState>, Timer)> {
    check_len("initial eta", state0.eta.len(), problem.nh())?;
    check_len("initial q", state0.q.len(), problem.nh())?;
    let mut fom = EbFom::new(problem);
    fom.timer = Timer::new();
    let out = integrate(&mut fom, state0.clone(), state0.t, t_end, samples, policy, observe)?;
    fom.timer.lap(Category::Other);
    Ok((out, fom.timer))
}
