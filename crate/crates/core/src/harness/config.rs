use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::bbm::{BbmBenchmark, BbmOverrides};
use crate::eb::{EbBenchmark, EbOverrides};
use crate::eim::EimSize;
use crate::error::{Error, Result};
use crate::rom::eb::EbVariant;
use crate::rom::{BasisMode, ErrorNorm, PodSize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Bbm,
    Eb,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    Fom,
    Pdrom,
    Eimrom,
    PhiOnly,
}

/// Training runs: random parameter draws, each sampled uniformly in time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineSpec {
    /// Zero means a single run at the nominal parameters (time-only).
    #[serde(default = "default_draws")]
    pub n_draws: usize,
    #[serde(default = "default_snapshots")]
    pub n_snapshots: usize,
    /// Training horizon; the benchmark's own horizon when absent.
    pub t_end: Option<f64>,
    /// Absolute draw ranges; the catalog ranges when absent.
    pub h0_range: Option<[f64; 2]>,
    pub a0_range: Option<[f64; 2]>,
    /// Columns kept in the persisted bases; online sizes truncate these.
    #[serde(default = "default_max_modes")]
    pub max_modes: usize,
}

impl Default for OfflineSpec {
    fn default() -> Self {
        Self {
            n_draws: default_draws(),
            n_snapshots: default_snapshots(),
            t_end: None,
            h0_range: None,
            a0_range: None,
            max_modes: default_max_modes(),
        }
    }
}

/// Online evaluation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineSpec {
    /// Named override set from the catalog, e.g. `out_of_training`.
    pub preset: Option<String>,
    /// Test horizon; the catalog horizon when absent.
    pub t_end: Option<f64>,
    /// Instants at which surface profiles are written.
    #[serde(default)]
    pub profile_times: Vec<f64>,
    /// Uniform instants used for the error against the reference.
    #[serde(default = "default_error_samples")]
    pub error_samples: usize,
    #[serde(default = "default_norm")]
    pub error_norm: ErrorNorm,
    /// Fixed time step; CFL-adaptive when absent.
    pub dt: Option<f64>,
    /// Timed repetitions per method; the minimum is reported.
    #[serde(default = "default_reps")]
    pub repetitions: usize,
}

impl Default for OnlineSpec {
    fn default() -> Self {
        Self {
            preset: None,
            t_end: None,
            profile_times: Vec::new(),
            error_samples: default_error_samples(),
            error_norm: default_norm(),
            dt: None,
            repetitions: default_reps(),
        }
    }
}

/// Parameter grid for sweep maps and basis sizes for comparison studies.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub a0: Vec<f64>,
    #[serde(default)]
    pub h0: Vec<f64>,
    #[serde(default)]
    pub n_rb: Vec<usize>,
    /// Worker threads; available parallelism when absent.
    pub workers: Option<usize>,
}

fn default_draws() -> usize {
    10
}
fn default_snapshots() -> usize {
    1000
}
fn default_max_modes() -> usize {
    200
}
fn default_error_samples() -> usize {
    100
}
fn default_norm() -> ErrorNorm {
    ErrorNorm::L2Final
}
fn default_reps() -> usize {
    3
}

/// One experiment, as a single JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    pub benchmark: String,
    /// Any benchmark field, e.g. `{"nh": 1000, "h0": 0.8}`.
    #[serde(default = "empty_object")]
    pub overrides: Value,
    #[serde(default)]
    pub reduction: Reduction,
    pub tol_pod: Option<f64>,
    pub n_rb: Option<usize>,
    pub tol_eim: Option<f64>,
    pub n_eim: Option<usize>,
    /// BBM test space; energy when absent.
    pub basis_mode: Option<BasisMode>,
    #[serde(default)]
    pub variant: EbVariant,
    pub offline: Option<OfflineSpec>,
    /// Directory written by a previous offline stage.
    pub artifacts: Option<PathBuf>,
    #[serde(default)]
    pub online: OnlineSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub seed: u64,
    pub out: Option<PathBuf>,
}

fn empty_object() -> Value {
    Value::Object(Map::new())
}

impl RunConfig {
    pub fn new(model: Model, benchmark: &str) -> Self {
        Self {
            model,
            benchmark: benchmark.into(),
            overrides: empty_object(),
            reduction: Reduction::Fom,
            tol_pod: None,
            n_rb: None,
            tol_eim: None,
            n_eim: None,
            basis_mode: None,
            variant: EbVariant::default(),
            offline: None,
            artifacts: None,
            online: OnlineSpec::default(),
            sweep: SweepSpec::default(),
            seed: 0,
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.bbm_overrides(&Value::Null)?;
        self.eb_overrides(&Value::Null)?;
        match self.model {
            Model::Bbm => drop(self.benchmark.parse::<BbmBenchmark>()?),
            Model::Eb => drop(self.benchmark.parse::<EbBenchmark>()?),
        }
        if self.reduction != Reduction::Fom && self.offline.is_none() && self.artifacts.is_none() {
            return Err(Error::config("a reduced run needs an offline section or an artifacts path"));
        }
        if self.reduction == Reduction::PhiOnly && self.model != Model::Bbm {
            return Err(Error::config("phi_only is defined for the BBM model only"));
        }
        if self.reduction == Reduction::Eimrom && self.tol_eim.is_none() && self.n_eim.is_none() {
            return Err(Error::config("eimrom needs tol_eim or n_eim"));
        }
        if self.reduction != Reduction::Fom && self.tol_pod.is_none() && self.n_rb.is_none() {
            return Err(Error::config("a reduced run needs tol_pod or n_rb"));
        }
        if let Some(t) = self.tol_pod {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::config(format!("tol_pod = {t} outside (0, 1)")));
            }
        }
        if let Some(t) = self.tol_eim {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::config(format!("tol_eim = {t} outside (0, 1)")));
            }
        }
        if self.n_rb == Some(0) || self.n_eim == Some(0) {
            return Err(Error::config("basis sizes must be positive"));
        }
        if let Some(o) = &self.offline {
            if o.n_snapshots == 0 || o.max_modes == 0 {
                return Err(Error::config("offline snapshot count and max_modes must be positive"));
            }
            for r in [o.h0_range, o.a0_range].into_iter().flatten() {
                if !(r[0] > 0.0 && r[0] <= r[1]) {
                    return Err(Error::config(format!("bad parameter range {r:?}")));
                }
            }
        }
        if let Some(dt) = self.online.dt {
            if !(dt > 0.0) {
                return Err(Error::config(format!("dt = {dt} must be positive")));
            }
        }
        Ok(())
    }

    /// Config overrides with `extra` (an object) laid on top.
    pub fn merged_overrides(&self, extra: &Value) -> Value {
        let mut base = self.overrides.clone();
        if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
            for (k, v) in e {
                b.insert(k.clone(), v.clone());
            }
        }
        base
    }

    pub fn bbm_overrides(&self, extra: &Value) -> Result<BbmOverrides> {
        if self.model != Model::Bbm {
            return Ok(BbmOverrides::default());
        }
        serde_json::from_value(self.merged_overrides(extra)).map_err(|e| Error::config(format!("overrides: {e}")))
    }

    pub fn eb_overrides(&self, extra: &Value) -> Result<EbOverrides> {
        if self.model != Model::Eb {
            return Ok(EbOverrides::default());
        }
        serde_json::from_value(self.merged_overrides(extra)).map_err(|e| Error::config(format!("overrides: {e}")))
    }

    /// `n_rb` wins over `tol_pod`.
    pub fn pod_size(&self) -> Option<PodSize> {
        self.n_rb.map(PodSize::Count).or(self.tol_pod.map(PodSize::Tol))
    }

    /// `n_eim` wins over `tol_eim`.
    pub fn eim_size(&self) -> Option<EimSize> {
        self.n_eim.map(EimSize::Count).or(self.tol_eim.map(EimSize::Tol))
    }

    pub fn mode(&self) -> BasisMode {
        self.basis_mode.unwrap_or(BasisMode::Energy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_and_defaults() {
        let c = RunConfig::from_json(r#"{"model": "bbm", "benchmark": "monochromatic"}"#).unwrap();
        assert_eq!(c.reduction, Reduction::Fom);
        assert_eq!(c.online.repetitions, 3);
        assert_eq!(c.pod_size(), None);
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn reduced_run_needs_training_source() {
        let err = RunConfig::from_json(r#"{"model": "bbm", "benchmark": "monochromatic", "reduction": "pdrom", "n_rb": 10}"#);
        assert!(matches!(err, Err(Error::Config(_))));
        let ok = RunConfig::from_json(
            r#"{"model": "bbm", "benchmark": "monochromatic", "reduction": "pdrom", "n_rb": 10, "artifacts": "a"}"#,
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn rejects_bad_fields() {
        for doc in [
            r#"{"model": "bbm", "benchmark": "tsunami"}"#,
            r#"{"model": "eb", "benchmark": "monochromatic"}"#,
            r#"{"model": "bbm", "benchmark": "monochromatic", "overrides": {"depth": 1}}"#,
            r#"{"model": "bbm", "benchmark": "monochromatic", "colour": 1}"#,
            r#"{"model": "eb", "benchmark": "solitary_bar", "reduction": "phi_only", "n_rb": 3, "offline": {}}"#,
            r#"{"model": "bbm", "benchmark": "monochromatic", "reduction": "eimrom", "n_rb": 3, "offline": {}}"#,
            r#"{"model": "bbm", "benchmark": "monochromatic", "tol_pod": 2.0}"#,
        ] {
            assert!(matches!(RunConfig::from_json(doc), Err(Error::Config(_))), "{doc}");
        }
    }

    #[test]
    fn overrides_merge_and_sizes() {
        let mut c = RunConfig::new(Model::Bbm, "monochromatic");
        c.overrides = serde_json::json!({"nh": 100, "h0": 1.0});
        let ov = c.bbm_overrides(&serde_json::json!({"h0": 0.63, "initial": "two_cosine"})).unwrap();
        assert_eq!((ov.nh, ov.h0, ov.initial.as_deref()), (Some(100), Some(0.63), Some("two_cosine")));
        c.tol_pod = Some(1e-3);
        assert_eq!(c.pod_size(), Some(PodSize::Tol(1e-3)));
        c.n_rb = Some(20);
        assert_eq!(c.pod_size(), Some(PodSize::Count(20)));
    }
}
