//! `accreta`: command-line driver for the growth solvers.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 solver error,
//! 3 coupling stopped at its iteration budget.

mod commands;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use setup::Invalid;

#[derive(Debug, Parser)]
#[command(name = "accreta", version, about = "Accretive growth solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a configuration against every desk-checkable assumption.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve the time-of-attachment field for a frozen activation.
    Hj {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Dense activation field (CSV with sidecar); zero when absent.
        #[arg(long)]
        activation: Option<PathBuf>,
        /// Write this many backtracked optimal curves to `curves.csv`.
        #[arg(long, default_value_t = 0)]
        curves: usize,
    },
    /// Solve the activation problem on the sublevels of a given field.
    Elliptic {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        v: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Space-time convolution of a directory of activation slices.
    Convolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the coupled fixed-point iteration.
    Couple {
        /// Run configuration, or a `manifest.json` from an earlier run.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write every iterate under `iterations/j_####/`.
        #[arg(long)]
        keep_iterations: bool,
    },
    /// Recompute the regularity report of a finished run directory.
    Diagnose {
        #[arg(long)]
        run: PathBuf,
        /// Defaults to `<run>/diagnostics.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Validate { config } => commands::validate(&config),
        Command::Hj { config, out, activation, curves } => commands::hj(&config, &out, activation.as_deref(), curves),
        Command::Elliptic { config, v, out } => commands::elliptic(&config, &v, &out),
        Command::Convolve { config, u, out } => commands::convolve(&config, &u, &out),
        Command::Couple { config, out, keep_iterations } => commands::couple(&config, &out, keep_iterations),
        Command::Diagnose { run, out } => commands::diagnose(&run, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("accreta: {e:#}");
            ExitCode::from(if e.downcast_ref::<Invalid>().is_some() { 1 } else { 2 })
        }
    }
}
