//! Offline training and online evaluation.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::catalog::{entry, preset, CatalogEntry, Setup};
use super::config::{Model, Reduction, RunConfig};
use super::io::{
    basis_artifact, basis_from_artifact, eim_artifact, eim_from_artifact, load, persist, snapshot_artifact,
    snapshot_columns,
};
use super::par_map;
use super::report::{write_profiles, write_rows, Draw, Failure, HostInfo, RunReport};
use crate::bbm::run_bbm_fom;
use crate::driver::{uniform_times, DtPolicy};
use crate::eb::run_eb_fom;
use crate::eim::{eim_greedy, run_eimrom_bbm, EimEb, EimEbFlux, EimSize, EimSpace};
use crate::error::{Error, Result};
use crate::numcore::Grid1D;
use crate::rom::bbm::{build_bbm_reduced, build_phi_only, collect_bbm_snapshots, run_pdrom_bbm, run_phi_only};
use crate::rom::bbm::{PhiOnlyOps, ReducedBbmOps};
use crate::rom::eb::{build_eb_reduced, collect_eb_snapshots, eb_pod_bases, run_pdrom_eb, run_reduced_eb};
use crate::rom::eb::{EbVariant, ReducedEbOps};
use crate::rom::{pod_basis, pod_size_for_tol, rom_error, ErrorNorm, PodSize, ReducedBasis, SnapshotMeta, SnapshotSet};
use crate::timing::{Timer, TimingBreakdown};

/// POD bases as trained, holding up to `max_modes` columns.
#[derive(Clone, Debug)]
pub enum Bases {
    Bbm(ReducedBasis),
    Eb { eta: ReducedBasis, q: ReducedBasis },
}

#[derive(Clone, Debug)]
pub enum EimSpaces {
    Bbm(EimSpace),
    Eb { eta: EimSpace, q: EimSpace },
}

impl EimSpaces {
    pub fn sizes(&self) -> Vec<usize> {
        match self {
            EimSpaces::Bbm(s) => vec![s.n_eim()],
            EimSpaces::Eb { eta, q } => vec![eta.n_eim(), q.n_eim()],
        }
    }

    pub fn exhausted(&self) -> bool {
        match self {
            EimSpaces::Bbm(s) => s.exhausted,
            EimSpaces::Eb { eta, q } => eta.exhausted || q.exhausted,
        }
    }
}

/// Everything the offline stage produces.
#[derive(Clone, Debug)]
pub struct Trained {
    pub model: Model,
    pub seed: u64,
    pub draws: Vec<Draw>,
    pub columns: Vec<SnapshotMeta>,
    /// Absent when loaded for online use only.
    pub states: Option<DMatrix<f64>>,
    pub fluxes: Option<DMatrix<f64>>,
    pub bases: Bases,
    pub eim: Option<(EimSize, EimSpaces)>,
}

impl Trained {
    /// Some training runs failed but others produced snapshots.
    pub fn partial(&self) -> bool {
        self.draws.iter().any(|d| d.failure.is_some())
    }

    pub fn sigma(&self) -> Vec<Vec<f64>> {
        match &self.bases {
            Bases::Bbm(b) => vec![b.sigma.clone()],
            Bases::Eb { eta, q } => vec![eta.sigma.clone(), q.sigma.clone()],
        }
    }
}

/// `(h0, a0)` training draws; `a0` is `None` where the catalog keeps it fixed.
pub fn draw_parameters(config: &RunConfig) -> Result<Vec<(f64, Option<f64>)>> {
    let e = entry(config.model, &config.benchmark)?;
    let spec = config.offline.clone().unwrap_or_default();
    let (h0, a0, _, _) = Setup::build(config, &json!({}))?.nominal();
    let hr = spec.h0_range.unwrap_or([e.h0_factor[0] * h0, e.h0_factor[1] * h0]);
    let ar = spec.a0_range.or(e.a0_factor.map(|f| [f[0] * a0, f[1] * a0]));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok((0..spec.n_draws)
        .map(|_| {
            let h = rng.gen_range(hr[0]..=hr[1]);
            (h, ar.map(|r| rng.gen_range(r[0]..=r[1])))
        })
        .collect())
}

fn grid_of(setup: &Setup) -> &Grid1D {
    match setup {
        Setup::Bbm { problem, .. } => problem.grid(),
        Setup::Eb { problem, .. } => problem.grid(),
    }
}

fn build_eim(fluxes: &DMatrix<f64>, size: EimSize, model: Model, grid: &Grid1D) -> Result<EimSpaces> {
    Ok(match model {
        Model::Bbm => EimSpaces::Bbm(eim_greedy(fluxes, size, grid)?),
        Model::Eb => {
            let n = fluxes.nrows() / 2;
            EimSpaces::Eb {
                eta: eim_greedy(&fluxes.rows(0, n).into_owned(), size, grid)?,
                q: eim_greedy(&fluxes.rows(n, n).into_owned(), size, grid)?,
            }
        }
    })
}

/// Drops trailing modes whose singular value is numerically zero.
fn significant(b: ReducedBasis) -> Result<ReducedBasis> {
    let s1 = b.sigma.first().copied().unwrap_or(0.0);
    let k = b.sigma.iter().take(b.n_rb()).filter(|&&s| s > 1e-13 * s1).count().max(1);
    if k < b.n_rb() { b.truncated(k) } else { Ok(b) }
}

/// Runs the training simulations and builds POD bases and, when sized, EIM spaces.
pub fn offline_build(config: &RunConfig) -> Result<Trained> {
    let spec = config.offline.clone().unwrap_or_default();
    let draws: Vec<Option<(f64, Option<f64>)>> = if spec.n_draws == 0 {
        vec![None]
    } else {
        draw_parameters(config)?.into_iter().map(Some).collect()
    };
    let results = par_map(&draws, config.sweep.workers, |run_id, d| -> Result<(Draw, Option<SnapshotSet>)> {
        let extra = match d {
            None => json!({}),
            Some((h, None)) => json!({ "h0": h }),
            Some((h, Some(a))) => json!({ "h0": h, "a0": a }),
        };
        let setup = Setup::build(config, &extra)?;
        let (h0, a0, t_nominal, _) = setup.nominal();
        let t_train = spec.t_end.unwrap_or(t_nominal);
        let params = BTreeMap::from([("h0".to_string(), h0), ("a0".to_string(), a0)]);
        let res = match &setup {
            Setup::Bbm { problem, eta0 } => {
                collect_bbm_snapshots(problem, eta0, t_train, spec.n_snapshots, params, run_id)
            }
            Setup::Eb { problem, state0 } => {
                collect_eb_snapshots(problem, state0, t_train, spec.n_snapshots, params, run_id)
            }
        };
        let mut draw = Draw { run_id, h0, a0, failure: None };
        match res {
            Ok(s) => Ok((draw, Some(s))),
            Err(e) if e.is_simulation_failure() => {
                draw.failure = Some(e.to_string());
                Ok((draw, None))
            }
            Err(e) => Err(e),
        }
    });
    let mut sets = Vec::new();
    let mut records = Vec::new();
    for r in results {
        let (d, s) = r?;
        records.push(d);
        sets.extend(s);
    }
    if sets.is_empty() {
        let why = records.iter().filter_map(|d| d.failure.clone()).collect::<Vec<_>>().join("; ");
        return Err(Error::Aborted { step: 0, t: 0.0, reason: format!("every training run failed: {why}") });
    }
    let snaps = SnapshotSet::concat(sets)?;
    let nominal = Setup::build(config, &json!({}))?;
    let bases = match &nominal {
        Setup::Bbm { problem, .. } => {
            let cap = spec.max_modes.min(snaps.len()).min(snaps.dof());
            let th = |v: &[f64]| problem.theta_apply(v);
            Bases::Bbm(significant(pod_basis(&snaps.states, PodSize::Count(cap), config.mode(), Some(&th))?)?)
        }
        Setup::Eb { .. } => {
            let cap = spec.max_modes.min(snaps.len()).min(snaps.dof() / 2);
            let (e, q) = eb_pod_bases(&snaps, PodSize::Count(cap), PodSize::Count(cap))?;
            Bases::Eb { eta: significant(e)?, q: significant(q)? }
        }
    };
    let fluxes = snaps.fluxes.clone().ok_or_else(|| Error::arg("training runs recorded no fluxes"))?;
    let eim = match config.eim_size() {
        Some(size) => Some((size, build_eim(&fluxes, size, config.model, grid_of(&nominal))?)),
        None => None,
    };
    Ok(Trained {
        model: config.model,
        seed: config.seed,
        draws: records,
        columns: snaps.meta,
        states: Some(snaps.states),
        fluxes: Some(fluxes),
        bases,
        eim,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Manifest {
    model: Model,
    benchmark: String,
    seed: u64,
    draws: Vec<Draw>,
    eim_size: Option<EimSize>,
    overrides: Value,
}

/// Offline stage summary written next to the artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineReport {
    pub seed: u64,
    pub draws: Vec<Draw>,
    pub partial: bool,
    pub n_snapshots: usize,
    pub n_rb_stored: Vec<usize>,
    pub n_eim: Vec<usize>,
    pub eim_exhausted: Option<bool>,
}

#[derive(Serialize)]
struct SigmaRow {
    variable: &'static str,
    index: usize,
    sigma: f64,
}

/// Writes snapshots, bases and EIM spaces into `dir`.
pub fn persist_trained(trained: &Trained, config: &RunConfig, dir: &Path) -> Result<OfflineReport> {
    std::fs::create_dir_all(dir)?;
    let extra = json!({ "seed": trained.seed, "draws": trained.draws });
    if let Some(s) = &trained.states {
        let a = snapshot_artifact(s, "states", &trained.columns, &extra);
        persist(&dir.join("states.dwrom"), &a.matrix, &a.meta)?;
    }
    if let Some(f) = &trained.fluxes {
        let a = snapshot_artifact(f, "fluxes", &trained.columns, &extra);
        persist(&dir.join("fluxes.dwrom"), &a.matrix, &a.meta)?;
    }
    let named: Vec<(&str, &ReducedBasis)> = match &trained.bases {
        Bases::Bbm(b) => vec![("basis", b)],
        Bases::Eb { eta, q } => vec![("basis_eta", eta), ("basis_q", q)],
    };
    let mut sigma_rows = Vec::new();
    for (name, b) in &named {
        let a = basis_artifact(b, &extra);
        persist(&dir.join(format!("{name}.dwrom")), &a.matrix, &a.meta)?;
        let variable = if *name == "basis_q" { "q" } else { "eta" };
        sigma_rows.extend(b.sigma.iter().enumerate().map(|(i, &sigma)| SigmaRow { variable, index: i + 1, sigma }));
    }
    write_rows(&dir.join("sigma.csv"), &sigma_rows)?;
    if let Some((_, spaces)) = &trained.eim {
        let named: Vec<(&str, &EimSpace)> = match spaces {
            EimSpaces::Bbm(s) => vec![("eim", s)],
            EimSpaces::Eb { eta, q } => vec![("eim_eta", eta), ("eim_q", q)],
        };
        for (name, s) in named {
            let a = eim_artifact(s, &extra);
            persist(&dir.join(format!("{name}.dwrom")), &a.matrix, &a.meta)?;
        }
    }
    let manifest = Manifest {
        model: trained.model,
        benchmark: config.benchmark.clone(),
        seed: trained.seed,
        draws: trained.draws.clone(),
        eim_size: trained.eim.as_ref().map(|(s, _)| *s),
        overrides: config.overrides.clone(),
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    let report = OfflineReport {
        seed: trained.seed,
        draws: trained.draws.clone(),
        partial: trained.partial(),
        n_snapshots: trained.columns.len(),
        n_rb_stored: named.iter().map(|(_, b)| b.n_rb()).collect(),
        n_eim: trained.eim.as_ref().map(|(_, s)| s.sizes()).unwrap_or_default(),
        eim_exhausted: trained.eim.as_ref().map(|(_, s)| s.exhausted()),
    };
    std::fs::write(dir.join("offline_report.json"), serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}

/// Offline stage: train and write artifacts to the configured output directory.
pub fn offline(config: &RunConfig) -> Result<OfflineReport> {
    config.validate()?;
    let dir = config.out.as_ref().ok_or_else(|| Error::config("offline needs an output directory"))?;
    let trained = offline_build(config)?;
    persist_trained(&trained, config, dir)
}

/// Reads artifacts from `dir`. Flux snapshots are loaded only when an EIM
/// space of size `want_eim` is not stored there.
pub fn load_trained(dir: &Path, model: Model, want_eim: Option<EimSize>) -> Result<Trained> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))
        .map_err(|e| Error::config(format!("no artifacts in {}: {e}", dir.display())))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Integrity(format!("manifest: {e}")))?;
    if m.model != model {
        return Err(Error::config(format!("artifacts were trained for {:?}", m.model)));
    }
    let bases = match model {
        Model::Bbm => Bases::Bbm(basis_from_artifact(&load(&dir.join("basis.dwrom"))?)?),
        Model::Eb => Bases::Eb {
            eta: basis_from_artifact(&load(&dir.join("basis_eta.dwrom"))?)?,
            q: basis_from_artifact(&load(&dir.join("basis_q.dwrom"))?)?,
        },
    };
    let eim = match m.eim_size {
        Some(size) if want_eim.is_none() || want_eim == Some(size) => {
            let spaces = match model {
                Model::Bbm => EimSpaces::Bbm(eim_from_artifact(&load(&dir.join("eim.dwrom"))?)?),
                Model::Eb => EimSpaces::Eb {
                    eta: eim_from_artifact(&load(&dir.join("eim_eta.dwrom"))?)?,
                    q: eim_from_artifact(&load(&dir.join("eim_q.dwrom"))?)?,
                },
            };
            Some((size, spaces))
        }
        _ => None,
    };
    let need_fluxes = want_eim.is_some() && eim.is_none();
    let (fluxes, columns) = if need_fluxes {
        let a = load(&dir.join("fluxes.dwrom"))?;
        let cols = snapshot_columns(&a)?;
        (Some(a.matrix), cols)
    } else {
        (None, Vec::new())
    };
    Ok(Trained { model, seed: m.seed, draws: m.draws, columns, states: None, fluxes, bases, eim })
}

fn pick_size(b: &ReducedBasis, size: PodSize) -> Result<usize> {
    let n = match size {
        PodSize::Count(n) => n,
        PodSize::Tol(t) => pod_size_for_tol(&b.sigma, t),
    };
    if n == 0 || n > b.n_rb() {
        return Err(Error::config(format!("{n} modes requested but the trained basis holds {}", b.n_rb())));
    }
    Ok(n)
}

/// Reduced operators for one online problem.
pub enum Reduced {
    Bbm { basis: ReducedBasis, ops: ReducedBbmOps, phi: Option<PhiOnlyOps>, eim: Option<EimSpace> },
    Eb { v_eta: ReducedBasis, v_q: ReducedBasis, ops: ReducedEbOps, eim: Option<(EimSpace, EimSpace)>, variant: EbVariant },
}

impl Reduced {
    /// Truncates the trained bases to `size` and projects the operators of `setup`.
    pub fn build(
        setup: &Setup,
        trained: &Trained,
        size: PodSize,
        eim: Option<&EimSpaces>,
        variant: EbVariant,
        with_phi: bool,
    ) -> Result<Self> {
        match (setup, &trained.bases) {
            (Setup::Bbm { problem, .. }, Bases::Bbm(b)) => {
                let n = pick_size(b, size)?;
                let th = |v: &[f64]| problem.theta_apply(v);
                let basis = ReducedBasis::from_trial(b.v.columns(0, n).into_owned(), b.sigma.clone(), b.mode, Some(&th))?;
                let ops = build_bbm_reduced(problem, &basis)?;
                let phi = if with_phi { Some(build_phi_only(problem, &basis)?) } else { None };
                let eim = match eim {
                    Some(EimSpaces::Bbm(s)) => Some(s.clone()),
                    Some(_) => return Err(Error::config("EIM spaces belong to the other model")),
                    None => None,
                };
                Ok(Reduced::Bbm { basis, ops, phi, eim })
            }
            (Setup::Eb { problem, .. }, Bases::Eb { eta, q }) => {
                let v_eta = eta.truncated(pick_size(eta, size)?)?;
                let v_q = q.truncated(pick_size(q, size)?)?;
                let ops = build_eb_reduced(problem, &v_eta, &v_q)?;
                let eim = match eim {
                    Some(EimSpaces::Eb { eta, q }) => Some((eta.clone(), q.clone())),
                    Some(_) => return Err(Error::config("EIM spaces belong to the other model")),
                    None => None,
                };
                Ok(Reduced::Eb { v_eta, v_q, ops, eim, variant })
            }
            _ => Err(Error::config("trained bases belong to the other model")),
        }
    }

    pub fn n_rb(&self) -> Vec<usize> {
        match self {
            Reduced::Bbm { basis, .. } => vec![basis.n_rb()],
            Reduced::Eb { v_eta, v_q, .. } => vec![v_eta.n_rb(), v_q.n_rb()],
        }
    }
}

/// EIM spaces of the configured size, from storage or rebuilt from fluxes.
pub fn eim_spaces(trained: &Trained, size: Option<EimSize>, setup: &Setup) -> Result<Option<EimSpaces>> {
    let Some(size) = size else { return Ok(None) };
    if let Some((s, spaces)) = &trained.eim {
        if *s == size {
            return Ok(Some(spaces.clone()));
        }
    }
    let f = trained.fluxes.as_ref().ok_or_else(|| Error::config("flux snapshots are needed to build the EIM space"))?;
    build_eim(f, size, trained.model, grid_of(setup)).map(Some)
}

/// Surface samples of one simulation.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub eta: Vec<Vec<f64>>,
    pub steps: usize,
    pub t: f64,
    pub timing: Option<TimingBreakdown>,
}

impl Trajectory {
    /// Samples at exactly the instants in `times`.
    pub fn at(&self, times: &[f64]) -> Vec<Vec<f64>> {
        self.times.iter().zip(&self.eta).filter(|(t, _)| times.contains(t)).map(|(_, e)| e.clone()).collect()
    }
}

/// Runs `method`, returning what was recorded and the error that stopped it, if any.
/// With `keep == false` nothing is recorded, for timing.
pub fn simulate(
    setup: &Setup,
    reduced: Option<&Reduced>,
    method: Reduction,
    t_end: f64,
    samples: &[f64],
    policy: DtPolicy,
    keep: bool,
) -> (Trajectory, Option<Error>) {
    let mut times = Vec::new();
    let mut eta = Vec::new();
    let mut rec = |t: f64, v: &dyn Fn() -> Vec<f64>| {
        if keep {
            times.push(t);
            eta.push(v());
        }
        Ok(())
    };
    let missing = || Error::config(format!("{method:?} needs reduced operators for this model"));
    let res: Result<(usize, f64, Timer)> = match (setup, reduced, method) {
        (Setup::Bbm { problem, eta0 }, _, Reduction::Fom) => {
            run_bbm_fom(problem, eta0, t_end, samples, policy, |_, t, s| rec(t, &|| s.clone()))
                .map(|(o, tm)| (o.steps, o.t, tm))
        }
        (Setup::Eb { problem, state0 }, _, Reduction::Fom) => {
            run_eb_fom(problem, state0, t_end, samples, policy, |_, t, s| rec(t, &|| s.eta.clone()))
                .map(|(o, tm)| (o.steps, o.t, tm))
        }
        (Setup::Bbm { problem, eta0 }, Some(Reduced::Bbm { basis, ops, .. }), Reduction::Pdrom) => {
            run_pdrom_bbm(problem, ops, basis, eta0, t_end, samples, policy, |_, t, x| {
                rec(t, &|| ops.reconstruct(basis, x))
            })
            .map(|(o, tm)| (o.steps, o.t, tm))
        }
        (Setup::Bbm { problem, eta0 }, Some(Reduced::Bbm { basis, phi: Some(phi), .. }), Reduction::PhiOnly) => {
            run_phi_only(problem, phi, basis, eta0, t_end, samples, policy, |_, t, s| rec(t, &|| s.clone()))
                .map(|(o, tm)| (o.steps, o.t, tm))
        }
        (Setup::Bbm { problem, eta0 }, Some(Reduced::Bbm { basis, ops, eim: Some(space), .. }), Reduction::Eimrom) => {
            run_eimrom_bbm(problem, ops, basis, space, eta0, t_end, samples, policy, |_, t, x| {
                rec(t, &|| ops.reconstruct(basis, x))
            })
            .map(|(o, tm)| (o.steps, o.t, tm))
        }
        (Setup::Eb { problem, state0 }, Some(Reduced::Eb { v_eta, v_q, ops, variant, .. }), Reduction::Pdrom) => {
            run_pdrom_eb(problem, ops, v_eta, v_q, state0, t_end, samples, policy, *variant, |_, t, x| {
                rec(t, &|| x.reconstruct(v_eta, v_q, t).eta)
            })
            .map(|(o, tm)| (o.steps, o.t, tm))
        }
        (Setup::Eb { problem, state0 }, Some(Reduced::Eb { v_eta, v_q, ops, eim: Some((se, sq)), variant }), Reduction::Eimrom) => {
            EimEbFlux::new(problem, v_eta, v_q, se, sq).and_then(|flux| {
                let mut m = EimEb::eim(problem, ops, flux, *variant);
                let out = run_reduced_eb(&mut m, v_eta, v_q, state0, t_end, samples, policy, |_, t, x| {
                    rec(t, &|| x.reconstruct(v_eta, v_q, t).eta)
                })?;
                Ok((out.steps, out.t, m.timer.clone()))
            })
        }
        _ => Err(missing()),
    };
    let mut tr = Trajectory { times, eta, ..Default::default() };
    match res {
        Ok((steps, t, timer)) => {
            tr.steps = steps;
            tr.t = t;
            tr.timing = Some(timer.breakdown());
            (tr, None)
        }
        Err(e) => {
            tr.t = tr.times.last().copied().unwrap_or(0.0);
            (tr, Some(e))
        }
    }
}

/// Online horizon: explicit, else the benchmark's own for FOM runs and the
/// catalog test horizon for reduced runs.
pub fn horizon(config: &RunConfig, entry: &CatalogEntry, setup: &Setup) -> f64 {
    config.online.t_end.unwrap_or(match config.reduction {
        Reduction::Fom => setup.nominal().2,
        _ => entry.online_t_end,
    })
}

/// `(all sample instants, instants used for errors)`.
pub fn schedule(config: &RunConfig, t_end: f64) -> (Vec<f64>, Vec<f64>) {
    let err = uniform_times(t_end, config.online.error_samples.max(1));
    let mut all: Vec<f64> = err.iter().copied().chain(config.online.profile_times.iter().copied().filter(|&t| t > 0.0 && t <= t_end)).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    (all, err)
}

pub fn policy(config: &RunConfig) -> DtPolicy {
    config.online.dt.map(DtPolicy::Fixed).unwrap_or(DtPolicy::Adaptive)
}

/// `(final, time-averaged)` relative errors at the error instants.
pub fn errors(rom: &Trajectory, fom: &Trajectory, at: &[f64]) -> Result<(f64, f64)> {
    let (r, f) = (rom.at(at), fom.at(at));
    Ok((rom_error(&r, &f, ErrorNorm::L2Final)?, rom_error(&r, &f, ErrorNorm::L2TimeAvg)?))
}

/// Fastest of `reps` timed runs; `None` if any fails.
pub fn best_timing(setup: &Setup, reduced: Option<&Reduced>, method: Reduction, t_end: f64, policy: DtPolicy, reps: usize) -> Option<TimingBreakdown> {
    let mut best: Option<TimingBreakdown> = None;
    for _ in 0..reps {
        let (tr, err) = simulate(setup, reduced, method, t_end, &[t_end], policy, false);
        if err.is_some() {
            return None;
        }
        let t = tr.timing?;
        if best.map_or(true, |b| t.total_s < b.total_s) {
            best = Some(t);
        }
    }
    best
}

fn trained_for(config: &RunConfig) -> Result<Trained> {
    match &config.artifacts {
        Some(dir) => load_trained(dir, config.model, config.eim_size()),
        None => offline_build(config),
    }
}

/// Executes one configured run and writes its outputs when `out` is set.
/// Simulation failures end up in the report, not in the `Err` branch.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let e = entry(config.model, &config.benchmark)?;
    let extra = preset(&e, config.online.preset.as_deref())?;
    let setup = Setup::build(config, &extra)?;
    let t_end = horizon(config, &e, &setup);
    let (samples, err_at) = schedule(config, t_end);
    let pol = policy(config);
    let reps = config.online.repetitions;
    let mut report = RunReport {
        model: config.model,
        benchmark: config.benchmark.clone(),
        reduction: config.reduction,
        nh: setup.nh(),
        n_rb: Vec::new(),
        n_eim: Vec::new(),
        eim_exhausted: None,
        t_end,
        t_reached: 0.0,
        steps: 0,
        timing: None,
        fom_timing: None,
        time_ratio: None,
        error_final: None,
        error_time_avg: None,
        failure: None,
        draws: Vec::new(),
        host: HostInfo::current(reps),
        config: config.clone(),
    };
    let x = setup.x();
    let fail = |e: Error, stage: &str, report: &mut RunReport| -> Result<()> {
        if e.is_simulation_failure() {
            report.failure = Some(Failure::new(stage, &e));
            Ok(())
        } else {
            Err(e)
        }
    };

    if config.reduction == Reduction::Fom {
        let (tr, err) = simulate(&setup, None, Reduction::Fom, t_end, &samples, pol, true);
        report.steps = tr.steps;
        report.t_reached = tr.t;
        report.timing = tr.timing;
        if let Some(e) = err {
            fail(e, "online", &mut report)?;
        }
        write_outputs(config, &report, &x, &tr)?;
        return Ok(report);
    }

    let trained = match trained_for(config) {
        Ok(t) => t,
        Err(e) => {
            fail(e, "offline", &mut report)?;
            write_outputs(config, &report, &x, &Trajectory::default())?;
            return Ok(report);
        }
    };
    report.draws = trained.draws.clone();
    let size = config.pod_size().expect("validated");
    let eim = if config.reduction == Reduction::Eimrom { eim_spaces(&trained, config.eim_size(), &setup)? } else { None };
    if let Some(s) = &eim {
        report.n_eim = s.sizes();
        report.eim_exhausted = Some(s.exhausted());
    }
    let reduced = match Reduced::build(&setup, &trained, size, eim.as_ref(), config.variant, config.reduction == Reduction::PhiOnly) {
        Ok(r) => r,
        Err(e) => {
            fail(e, "online", &mut report)?;
            write_outputs(config, &report, &x, &Trajectory::default())?;
            return Ok(report);
        }
    };
    report.n_rb = reduced.n_rb();

    let (reference, err) = simulate(&setup, None, Reduction::Fom, t_end, &samples, pol, true);
    if let Some(e) = err {
        fail(e, "reference", &mut report)?;
        write_outputs(config, &report, &x, &reference)?;
        return Ok(report);
    }
    let (rom, err) = simulate(&setup, Some(&reduced), config.reduction, t_end, &samples, pol, true);
    report.steps = rom.steps;
    report.t_reached = rom.t;
    if let Some(e) = err {
        fail(e, "online", &mut report)?;
        write_outputs(config, &report, &x, &rom)?;
        return Ok(report);
    }
    let (ef, ea) = errors(&rom, &reference, &err_at)?;
    report.error_final = Some(ef);
    report.error_time_avg = Some(ea);
    let (fom_t, rom_t) = if reps == 0 {
        (reference.timing, rom.timing)
    } else {
        (
            best_timing(&setup, None, Reduction::Fom, t_end, pol, reps),
            best_timing(&setup, Some(&reduced), config.reduction, t_end, pol, reps),
        )
    };
    report.fom_timing = fom_t;
    report.timing = rom_t;
    if let (Some(f), Some(r)) = (fom_t, rom_t) {
        report.time_ratio = Some(r.total_s / f.total_s);
    }
    write_outputs(config, &report, &x, &rom)?;
    Ok(report)
}

fn write_outputs(config: &RunConfig, report: &RunReport, x: &[f64], tr: &Trajectory) -> Result<()> {
    let Some(dir) = &config.out else { return Ok(()) };
    std::fs::create_dir_all(dir)?;
    report.write_json(&dir.join("report.json"))?;
    let wanted: Vec<f64> = if config.online.profile_times.is_empty() {
        tr.times.last().copied().into_iter().collect()
    } else {
        config.online.profile_times.clone()
    };
    let profiles: Vec<(f64, Vec<f64>)> = tr
        .times
        .iter()
        .zip(&tr.eta)
        .filter(|(t, _)| wanted.contains(t))
        .map(|(t, e)| (*t, e.clone()))
        .collect();
    write_profiles(&dir.join("profiles.csv"), x, &profiles)
}
