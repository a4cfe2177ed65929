use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dispersive_rom::harness::{self, Reduction, RunConfig};
use dispersive_rom::Error;

#[derive(Parser)]
#[command(name = "dwrom", version, about = "Dispersive wave solvers and reduced-order models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Cmd {
    /// Full-order run of the configured benchmark.
    Fom,
    /// Training runs, POD bases and EIM spaces written as artifacts.
    Offline,
    /// Reduced run against a FOM reference.
    Online,
    /// Error map over an (a0, h0) grid.
    Sweep,
    /// Error and cost against basis size.
    Compare,
}

#[derive(Args)]
struct Flags {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long = "tol-pod", global = true)]
    tol_pod: Option<f64>,
    #[arg(long = "tol-eim", global = true)]
    tol_eim: Option<f64>,
    #[arg(long, global = true)]
    nrb: Option<usize>,
    #[arg(long, global = true)]
    neim: Option<usize>,
}

const ABORT: u8 = 2;
const CONFIG: u8 = 3;

fn load(cmd: &Cmd, f: &Flags) -> Result<RunConfig, Error> {
    let path = f.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut c = RunConfig::load(path)?;
    if let Some(o) = &f.out {
        c.out = Some(o.clone());
    }
    if let Some(s) = f.seed {
        c.seed = s;
    }
    if let Some(t) = f.tol_pod {
        c.tol_pod = Some(t);
        c.n_rb = None;
    }
    if let Some(t) = f.tol_eim {
        c.tol_eim = Some(t);
        c.n_eim = None;
    }
    if f.nrb.is_some() {
        c.n_rb = f.nrb;
    }
    if f.neim.is_some() {
        c.n_eim = f.neim;
    }
    match cmd {
        Cmd::Fom => c.reduction = Reduction::Fom,
        Cmd::Online if c.reduction == Reduction::Fom => {
            return Err(Error::Config("online needs a reduced method (pdrom, eimrom or phi_only)".into()))
        }
        _ => {}
    }
    c.validate()?;
    Ok(c)
}

fn execute(cmd: &Cmd, c: &RunConfig) -> Result<bool, Error> {
    match cmd {
        Cmd::Fom | Cmd::Online => {
            let r = harness::run(c)?;
            json(&r);
            if let Some(f) = &r.failure {
                eprintln!("{} failed: {}", f.stage, f.message);
                return Ok(false);
            }
        }
        Cmd::Offline => {
            let r = harness::offline(c)?;
            json(&r);
            if r.partial {
                eprintln!("warning: some training runs failed; artifacts are partial");
            }
        }
        Cmd::Sweep => {
            let recs = harness::sweep(c)?;
            for r in &recs {
                for why in r.pdrom_failure.iter().chain(&r.eimrom_failure) {
                    eprintln!("a0 = {}, h0 = {}: {why}", r.cell.a0, r.cell.h0);
                }
            }
            json(&recs.iter().map(|r| r.cell).collect::<Vec<_>>());
        }
        Cmd::Compare => json(&harness::compare(c)?),
    }
    Ok(true)
}

fn json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).unwrap_or_default());
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = load(&cli.cmd, &cli.flags).and_then(|c| execute(&cli.cmd, &c));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(ABORT),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_simulation_failure() { ABORT } else { CONFIG })
        }
    }
}
