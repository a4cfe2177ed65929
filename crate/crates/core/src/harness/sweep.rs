//! Parameter sweep maps and error/cost studies against basis size.

use serde_json::json;

use super::catalog::{entry, preset, Setup};
use super::config::{Reduction, RunConfig};
use super::par_map;
use super::pipeline::{
    best_timing, eim_spaces, horizon, load_trained, offline_build, policy, schedule, simulate, Bases, Reduced, Trained,
    Trajectory,
};
use super::report::{write_rows, StudyRow, SweepCell};
use crate::error::{Error, Result};
use crate::rom::{rom_error, ErrorNorm, PodSize};

/// A sweep cell with the reasons behind any `NaN` entries.
#[derive(Clone, Debug)]
pub struct SweepRecord {
    pub cell: SweepCell,
    pub pdrom_failure: Option<String>,
    pub eimrom_failure: Option<String>,
}

fn rel_error(rom: &Trajectory, fom: &Trajectory, at: &[f64], norm: ErrorNorm) -> Result<f64> {
    rom_error(&rom.at(at), &fom.at(at), norm)
}

/// Default grid: `a0` from half to twice nominal, `h0` over the training range.
pub fn default_grid(config: &RunConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let e = entry(config.model, &config.benchmark)?;
    let (h0, a0, _, _) = Setup::build(config, &json!({}))?.nominal();
    let a0s = if config.sweep.a0.is_empty() {
        [0.5, 0.75, 1.0, 1.5, 2.0].iter().map(|f| f * a0).collect()
    } else {
        config.sweep.a0.clone()
    };
    let h0s = if config.sweep.h0.is_empty() {
        let [lo, hi] = e.h0_factor;
        (0..5).map(|k| h0 * (lo + (hi - lo) * k as f64 / 4.0)).collect()
    } else {
        config.sweep.h0.clone()
    };
    Ok((a0s, h0s))
}

/// pdROM and EIMROM errors against a fresh FOM run at every `(a0, h0)`.
/// Failed runs are recorded as `NaN`; `mu = (h0 / L)^2` with `L` the domain length.
pub fn sweep_map(config: &RunConfig, trained: &Trained, a0s: &[f64], h0s: &[f64]) -> Result<Vec<SweepRecord>> {
    let e = entry(config.model, &config.benchmark)?;
    let size = config.pod_size().ok_or_else(|| Error::config("sweep needs tol_pod or n_rb"))?;
    let nominal = Setup::build(config, &json!({}))?;
    let eim = eim_spaces(trained, config.eim_size(), &nominal)?;
    let cells: Vec<(f64, f64)> = a0s.iter().flat_map(|&a| h0s.iter().map(move |&h| (a, h))).collect();
    let pol = policy(config);
    let norm = config.online.error_norm;
    let out = par_map(&cells, config.sweep.workers, |_, &(a0, h0)| -> Result<SweepRecord> {
        let setup = Setup::build(config, &json!({ "a0": a0, "h0": h0 }))?;
        let length = setup.nominal().3;
        let mut rec = SweepRecord {
            cell: SweepCell { a0, h0, eps: a0 / h0, mu: (h0 / length).powi(2), error_pdrom: f64::NAN, error_eimrom: f64::NAN },
            pdrom_failure: None,
            eimrom_failure: None,
        };
        let mut rc = config.clone();
        rc.reduction = Reduction::Pdrom;
        let t_end = horizon(&rc, &e, &setup);
        let (samples, at) = schedule(config, t_end);
        let (fom, err) = simulate(&setup, None, Reduction::Fom, t_end, &samples, pol, true);
        if let Some(err) = err {
            let why = format!("reference: {err}");
            rec.pdrom_failure = Some(why.clone());
            rec.eimrom_failure = Some(why);
            return Ok(rec);
        }
        let reduced = Reduced::build(&setup, trained, size, eim.as_ref(), config.variant, false)?;
        let mut methods = vec![Reduction::Pdrom];
        if eim.is_some() {
            methods.push(Reduction::Eimrom);
        } else {
            rec.eimrom_failure = Some("no EIM space configured".into());
        }
        for m in methods {
            let (rom, err) = simulate(&setup, Some(&reduced), m, t_end, &samples, pol, true);
            let (slot, why) = match m {
                Reduction::Pdrom => (&mut rec.cell.error_pdrom, &mut rec.pdrom_failure),
                _ => (&mut rec.cell.error_eimrom, &mut rec.eimrom_failure),
            };
            match err {
                Some(e) if e.is_simulation_failure() => *why = Some(e.to_string()),
                Some(e) => return Err(e),
                None => *slot = rel_error(&rom, &fom, &at, norm)?,
            }
        }
        Ok(rec)
    });
    out.into_iter().collect()
}

/// Error and wall-time ratio per basis size; `n_eim = 0` rows are pdROM.
pub fn study(config: &RunConfig, trained: &Trained, n_rbs: &[usize]) -> Result<Vec<StudyRow>> {
    let e = entry(config.model, &config.benchmark)?;
    let setup = Setup::build(config, &preset(&e, config.online.preset.as_deref())?)?;
    let mut rc = config.clone();
    rc.reduction = Reduction::Pdrom;
    let t_end = horizon(&rc, &e, &setup);
    let (samples, at) = schedule(config, t_end);
    let pol = policy(config);
    let reps = config.online.repetitions.max(1);
    let norm = config.online.error_norm;
    let (fom, err) = simulate(&setup, None, Reduction::Fom, t_end, &samples, pol, true);
    if let Some(err) = err {
        return Err(err);
    }
    let fom_time = best_timing(&setup, None, Reduction::Fom, t_end, pol, reps).map(|t| t.total_s).unwrap_or(f64::NAN);
    let eim = eim_spaces(trained, config.eim_size(), &setup)?;
    let mut rows = Vec::new();
    for &n in n_rbs {
        let reduced = Reduced::build(&setup, trained, PodSize::Count(n), eim.as_ref(), config.variant, false)?;
        let mut methods = vec![(Reduction::Pdrom, 0)];
        if let Some(s) = &eim {
            methods.push((Reduction::Eimrom, s.sizes()[0]));
        }
        for (m, n_eim) in methods {
            let (rom, err) = simulate(&setup, Some(&reduced), m, t_end, &samples, pol, true);
            let (error, time_ratio) = match err {
                Some(e) if e.is_simulation_failure() => (f64::NAN, f64::NAN),
                Some(e) => return Err(e),
                None => {
                    let t = best_timing(&setup, Some(&reduced), m, t_end, pol, reps).map(|t| t.total_s).unwrap_or(f64::NAN);
                    (rom_error(&rom.at(&at), &fom.at(&at), norm)?, t / fom_time)
                }
            };
            rows.push(StudyRow { n_rb: n, n_eim, error, time_ratio });
        }
    }
    Ok(rows)
}

fn trained_for(config: &RunConfig) -> Result<Trained> {
    match &config.artifacts {
        Some(dir) => load_trained(dir, config.model, config.eim_size()),
        None => offline_build(config),
    }
}

/// Sweep stage: writes `sweep.csv` to the output directory.
pub fn sweep(config: &RunConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    if config.artifacts.is_none() && config.offline.is_none() {
        return Err(Error::config("sweep needs an offline section or an artifacts path"));
    }
    let trained = trained_for(config)?;
    let (a0s, h0s) = default_grid(config)?;
    let recs = sweep_map(config, &trained, &a0s, &h0s)?;
    if let Some(dir) = &config.out {
        std::fs::create_dir_all(dir)?;
        write_rows(&dir.join("sweep.csv"), &recs.iter().map(|r| r.cell).collect::<Vec<_>>())?;
    }
    Ok(recs)
}

/// Comparison stage: writes `study.csv` for `n_rb = 10, 20, ...` up to the stored basis size.
pub fn compare(config: &RunConfig) -> Result<Vec<StudyRow>> {
    config.validate()?;
    if config.artifacts.is_none() && config.offline.is_none() {
        return Err(Error::config("compare needs an offline section or an artifacts path"));
    }
    let trained = trained_for(config)?;
    let stored = match &trained.bases {
        Bases::Bbm(b) => b.n_rb(),
        Bases::Eb { eta, q } => eta.n_rb().min(q.n_rb()),
    };
    let n_rbs: Vec<usize> = if config.sweep.n_rb.is_empty() {
        (1..=10).map(|k| 10 * k).filter(|&n| n <= stored).collect()
    } else {
        config.sweep.n_rb.clone()
    };
    let rows = study(config, &trained, &n_rbs)?;
    if let Some(dir) = &config.out {
        std::fs::create_dir_all(dir)?;
        write_rows(&dir.join("study.csv"), &rows)?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{Model, OfflineSpec};
    use crate::harness::run;

    fn config() -> RunConfig {
        let mut c = RunConfig::new(Model::Bbm, "monochromatic");
        c.overrides = json!({ "nh": 200 });
        c.offline = Some(OfflineSpec { n_draws: 2, n_snapshots: 30, t_end: Some(2.0), ..Default::default() });
        c.online.t_end = Some(2.0);
        c.online.error_samples = 4;
        c.online.repetitions = 1;
        c.n_rb = Some(8);
        c.n_eim = Some(20);
        c.seed = 5;
        c
    }

    #[test]
    fn two_by_two_grid_and_centre_consistency() {
        let c = config();
        let trained = offline_build(&c).unwrap();
        let recs = sweep_map(&c, &trained, &[0.04, 0.06], &[1.0, 0.9]).unwrap();
        assert_eq!(recs.len(), 4);
        assert!(recs.iter().all(|r| r.cell.error_pdrom.is_finite()));
        assert!((recs[1].cell.eps - 0.04 / 0.9).abs() < 1e-15);
        let mut single = c.clone();
        single.reduction = Reduction::Pdrom;
        let report = run(&single).unwrap();
        assert!((recs[0].cell.error_pdrom - report.error_final.unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn study_rows_per_size() {
        let c = config();
        let trained = offline_build(&c).unwrap();
        let rows = study(&c, &trained, &[4, 8]).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[0].n_rb, rows[0].n_eim, rows[1].n_eim), (4, 0, 20));
        assert!(rows[2].error <= rows[0].error);
    }
}
