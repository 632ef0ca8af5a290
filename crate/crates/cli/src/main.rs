//! `volterra`: experiment runner for the integral-equation and inclusion
//! machinery in `volterra-core`.
//!
//! ```text
//! volterra <kind> --config run.toml [--out DIR] [--seed N] [--threads N]
//! ```
//!
//! Kinds: `solve-eq`, `funnel`, `nesting-ladder`, `periodic-volterra`,
//! `periodic-hammerstein`, `check-conditions`, `convergence-table`.
//! Exit codes: 0 ok, 2 config error, 3 solver failure, 4 I/O error.

mod catalog;
mod config;
mod expr;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, Kind};
use run::run_experiment;

#[derive(Parser)]
#[command(name = "volterra", version, about = "Volterra integral inclusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for funnel sampling (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the single-valued integral equation.
    SolveEq(CommonArgs),
    /// Sample the solution funnel of an inclusion.
    Funnel(CommonArgs),
    /// Funnels of the inflation ladder with nesting diagnostics.
    NestingLadder(CommonArgs),
    /// Fixed point of the Poincaré-type end-time map.
    PeriodicVolterra(CommonArgs),
    /// Periodic solutions of the full-interval problem.
    PeriodicHammerstein(CommonArgs),
    /// Sampled regularity/threshold condition report only.
    CheckConditions(CommonArgs),
    /// Closed-form error table over a ladder of mesh sizes.
    ConvergenceTable(CommonArgs),
}

impl Command {
    fn split(self) -> (Kind, CommonArgs) {
        match self {
            Command::SolveEq(a) => (Kind::SolveEq, a),
            Command::Funnel(a) => (Kind::Funnel, a),
            Command::NestingLadder(a) => (Kind::NestingLadder, a),
            Command::PeriodicVolterra(a) => (Kind::PeriodicVolterra, a),
            Command::PeriodicHammerstein(a) => (Kind::PeriodicHammerstein, a),
            Command::CheckConditions(a) => (Kind::CheckConditions, a),
            Command::ConvergenceTable(a) => (Kind::ConvergenceTable, a),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();

    if let Some(n) = args.threads {
        // a second pool build in one process is fine to ignore
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read config {}: {e}", args.config.display());
            return ExitCode::from(4);
        }
    };
    let config = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    match run_experiment(kind, config, args.seed) {
        Ok(output) => {
            if let Err(e) = std::fs::create_dir_all(&args.out) {
                eprintln!("error: cannot create {}: {e}", args.out.display());
                return ExitCode::from(4);
            }
            for (name, contents) in &output.files {
                let path = args.out.join(name);
                if let Err(e) = std::fs::write(&path, contents) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(4);
                }
            }
            for line in &output.summary {
                println!("{line}");
            }
            println!(
                "wrote {} files to {}",
                output.files.len(),
                args.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
