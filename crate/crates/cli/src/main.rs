//! `samplecx <subcommand> --config c.json --out dir/`
//!
//! Exit codes: 0 on success, 1 for configuration or I/O errors, 2 for
//! numerical failures. Outputs written before a numerical failure inside a
//! sweep (e.g. an uncomputable phase cell) are kept and listed in the manifest.

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use samplecx::Exec;
use serde::de::DeserializeOwned;

use crate::output::OutputDir;
use crate::run::{Failure, RunResult};

#[derive(Parser)]
#[command(
    name = "samplecx",
    version,
    about = "Variation functions, optimal sampling and recovery experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Io {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; overrides the config. Outputs do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluates a variation function on a grid into variation.csv.
    Variation(Io),
    /// Optimal weight on a grid into optimal_weight.csv, plus weighted samples.
    OptimalWeight(Io),
    /// Empirical restricted-isometry failure rates into rip.csv.
    RipProb(Io),
    /// Recovery error over (M, n) into phase.csv.
    PhaseDiagram(Io),
    /// Projection, Hausdorff and local-bound checks into geometry.json.
    GeometryCheck(Io),
    /// Both sides of the quasi-optimality bound into quasiopt.json.
    QuasiOpt(Io),
}

type Experiment<P> = fn(&P, u64, Exec, &mut OutputDir) -> RunResult;

fn execute<P: DeserializeOwned + Sync>(name: &str, io: &Io, f: Experiment<P>) -> Result<(), Failure> {
    let (cfg, raw) = config::load::<P>(&io.config)?;
    let threads = io.threads.or(cfg.threads);
    if threads == Some(0) {
        return Err(Failure::Config(anyhow::anyhow!("threads must be at least 1")));
    }
    let mut out = OutputDir::create(&io.out)?;
    let warnings = with_threads(threads, || f(&cfg.experiment, cfg.seed, Exec::Parallel, &mut out))??;
    let manifest = out.finish(name, &raw, cfg.seed)?;
    print!("{manifest}");
    if warnings.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(anyhow::anyhow!(warnings.join("\n"))))
    }
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Failure::Config(e.into()))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(_threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    Ok(f())
}

fn dispatch(command: &Command) -> Result<(), Failure> {
    match command {
        Command::Variation(io) => execute("variation", io, run::variation),
        Command::OptimalWeight(io) => execute("optimal-weight", io, run::optimal_weight),
        Command::RipProb(io) => execute("rip-prob", io, run::rip_prob),
        Command::PhaseDiagram(io) => execute("phase-diagram", io, run::phase),
        Command::GeometryCheck(io) => execute("geometry-check", io, run::geometry),
        Command::QuasiOpt(io) => execute("quasi-opt", io, run::quasi_opt),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(2)
        }
    }
}
