//! Single-binary runner: each subcommand executes one scenario pipeline and
//! writes its artifacts under the output root.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 property failure,
//! 3 numerical failure, 4 undecided verdict.

use clap::{Parser, Subcommand};
use nls_lab::config::{parse_config, ScenarioConfig, ScenarioKind};
use nls_lab::scenario::{run_scenario, Outcome};
use nls_lab::Error;
use std::path::PathBuf;
use std::process::ExitCode;

const OUT_ROOT_ENV: &str = "NLS_LAB_OUT";

#[derive(Parser)]
#[command(
    name = "nls-lab",
    about = "Numerical laboratory for threshold dynamics of the 3-D energy-critical NLS with an inverse-square potential",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario configuration file (key = value lines); defaults apply when
    /// omitted
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory root (fallback: $NLS_LAB_OUT, then ./out)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads for batched scenarios
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral picture: sector spectra, gaps, trichotomy pair, kernel checks
    Spectrum(Common),
    /// Build and evolve a threshold orbit (stable or unstable branch)
    Orbit(Common),
    /// Classify one datum as stationary / converges / disperses / blows up
    Classify(Common),
    /// Seed sweep of the fixed-point construction and its quadratic estimate
    LpSweep(Common),
    /// Cutoff identities and the virial cross-check along a threshold run
    VirialCheck(Common),
    /// Plain evolution of a configured datum with full diagnostics
    Evolve(Common),
}

fn load_config(common: &Common, kind: ScenarioKind) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::usage(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => ScenarioConfig::default(),
    };
    // the subcommand decides the pipeline; a config's scenario field only
    // matters for standalone hashing
    cfg.scenario = kind;
    Ok(cfg)
}

fn out_root(common: &Common) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run(common: &Common, kind: ScenarioKind) -> ExitCode {
    if common.threads > 1 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(common.threads)
            .build_global();
    }
    let cfg = match load_config(common, kind) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run_scenario(&cfg, &out_root(common)) {
        Ok(artifacts) => {
            for f in &artifacts.files {
                println!("wrote {}", f.display());
            }
            match artifacts.outcome {
                Outcome::Success => {
                    println!("ok");
                    ExitCode::SUCCESS
                }
                Outcome::Undecided => {
                    println!("undecided");
                    ExitCode::from(4)
                }
                Outcome::PropertyFailure(msg) => {
                    eprintln!("property failure: {msg}");
                    ExitCode::from(2)
                }
                Outcome::NumericalFailure(msg) => {
                    eprintln!("numerical failure: {msg}");
                    ExitCode::from(3)
                }
            }
        }
        Err(Error::PropertyFailure(msg)) => {
            eprintln!("property failure: {msg}");
            ExitCode::from(2)
        }
        Err(Error::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Spectrum(c) => run(c, ScenarioKind::Spectrum),
        Command::Orbit(c) => run(c, ScenarioKind::Orbit),
        Command::Classify(c) => run(c, ScenarioKind::Classify),
        Command::LpSweep(c) => run(c, ScenarioKind::LpSweep),
        Command::VirialCheck(c) => run(c, ScenarioKind::VirialCheck),
        Command::Evolve(c) => run(c, ScenarioKind::Evolve),
    }
}
