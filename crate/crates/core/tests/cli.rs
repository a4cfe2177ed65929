use std::path::Path;
use std::process::Command;

use dispersive_rom::harness::io::{load, persist};
use dispersive_rom::harness::RunReport;
use dispersive_rom::Error;
use nalgebra::DMatrix;
use serde_json::json;

fn dwrom(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dwrom")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn write_config(dir: &Path, v: serde_json::Value) -> String {
    let p = dir.join("run.json");
    std::fs::write(&p, v.to_string()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn fom_run_writes_report_and_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        json!({ "model": "bbm", "benchmark": "monochromatic", "overrides": { "nh": 200, "t_end": 1.0 },
                "online": { "profile_times": [0.5, 1.0] } }),
    );
    let out = dir.path().join("out");
    let (code, err) = dwrom(&["fom", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let report: RunReport = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.t_reached, 1.0);
    assert!(report.host.cores >= 1);
    let csv = std::fs::read_to_string(out.join("profiles.csv")).unwrap();
    assert!(csv.starts_with("t,x,value\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 200);
}

#[test]
fn config_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), json!({ "model": "bbm", "benchmark": "tsunami" }));
    assert_eq!(dwrom(&["fom", "--config", &bad]).0, 3);
    assert_eq!(dwrom(&["fom"]).0, 3);
    assert_eq!(dwrom(&["fom", "--bogus"]).0, 3);
    let fom_only = write_config(dir.path(), json!({ "model": "bbm", "benchmark": "monochromatic" }));
    assert_eq!(dwrom(&["online", "--config", &fom_only]).0, 3);
    assert_eq!(dwrom(&["fom", "--config", "/nonexistent.json"]).0, 3);
}

#[test]
fn simulation_abort_exits_2() {
    // far too coarse for the explicit stabilization term: the run blows up
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        json!({ "model": "eb", "benchmark": "solitary_bar", "overrides": { "nh": 150, "t_end": 5.0 } }),
    );
    let out = dir.path().join("out");
    let (code, err) = dwrom(&["fom", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    let report: RunReport = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.failure.unwrap().stage, "online");
}

#[test]
fn offline_then_online_from_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let arts = dir.path().join("arts");
    let cfg = write_config(
        dir.path(),
        json!({
            "model": "bbm", "benchmark": "monochromatic", "reduction": "eimrom",
            "overrides": { "nh": 200 }, "n_rb": 10, "n_eim": 30, "seed": 3,
            "offline": { "n_draws": 2, "n_snapshots": 40, "t_end": 2.0 },
            "online": { "t_end": 2.0, "error_samples": 4, "repetitions": 1 }
        }),
    );
    let (code, err) = dwrom(&["offline", "--config", &cfg, "--out", arts.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    for f in ["manifest.json", "states.dwrom", "fluxes.dwrom", "basis.dwrom", "eim.dwrom", "sigma.csv"] {
        assert!(arts.join(f).exists(), "{f}");
    }
    let basis = load(&arts.join("basis.dwrom")).unwrap();
    assert_eq!(basis.meta["seed"], 3);
    assert_eq!(basis.meta["draws"].as_array().unwrap().len(), 2);

    let online = write_config(
        dir.path(),
        json!({
            "model": "bbm", "benchmark": "monochromatic", "reduction": "pdrom",
            "overrides": { "nh": 200 }, "n_rb": 10, "artifacts": arts,
            "online": { "t_end": 2.0, "error_samples": 4, "repetitions": 1 }
        }),
    );
    let out = dir.path().join("online");
    let (code, err) = dwrom(&["online", "--config", &online, "--out", out.to_str().unwrap(), "--nrb", "8"]);
    assert_eq!(code, 0, "{err}");
    let r: RunReport = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(r.n_rb, vec![8]);
    assert!(r.error_final.unwrap() < 0.05);
    assert!(r.time_ratio.unwrap() > 0.0);

    // a different EIM size forces a rebuild from the stored fluxes
    let (code, err) = dwrom(&["online", "--config", &cfg, "--out", out.to_str().unwrap(), "--neim", "20"]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn artifact_files_round_trip_and_reject_damage() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.dwrom");
    let m = DMatrix::from_fn(50, 7, |i, j| ((i * 7 + j) as f64).sin() / 3.0);
    let meta = json!({ "seed": 9, "draws": [0.8, 1.1] });
    persist(&p, &m, &meta).unwrap();
    let a = load(&p).unwrap();
    assert!(a.matrix.iter().zip(m.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(a.meta, meta);

    let bytes = std::fs::read(&p).unwrap();
    std::fs::write(&p, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(load(&p), Err(Error::Integrity(_))));
    let mut bad = bytes.clone();
    bad[..8].copy_from_slice(b"NOTDWROM");
    std::fs::write(&p, &bad).unwrap();
    assert!(matches!(load(&p), Err(Error::Format(_))));
}
