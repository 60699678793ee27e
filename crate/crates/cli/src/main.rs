//! `kzsim` — drive the quench simulator from flat TOML run configs.
//!
//! Every subcommand reads one config, validates it fully, writes its
//! outputs atomically under the output directory, and finishes with a
//! `manifest.json` recording the config hash, seed, and wall time. Reruns
//! of the same config and seed reproduce every output byte for byte.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::CommandKind;

#[derive(Parser)]
#[command(name = "kzsim", version, about = "Quench circuit simulation and scaling analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (flat TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed; overrides `master_seed` from the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for trajectory and scan parallelism.
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the quench circuit for every configured drive time.
    Build,
    /// Simulate each (T, p) point and write observable tables.
    Run,
    /// Produce one collapse-input table per error rate across all T.
    Sweep,
    /// Rescale a points table and fit the universal curve.
    Collapse,
    /// Map collapse quality over a grid of exponent hypotheses.
    Scan,
    /// Fit correlation-ratio decay lengths across error rates or depths.
    Xi,
}

impl Command {
    fn kind(&self) -> CommandKind {
        match self {
            Command::Build => CommandKind::Build,
            Command::Run => CommandKind::Run,
            Command::Sweep => CommandKind::Sweep,
            Command::Collapse => CommandKind::Collapse,
            Command::Scan => CommandKind::Scan,
            Command::Xi => CommandKind::Xi,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(k) = cli.threads {
        if k == 0 {
            eprintln!("configuration rejected:\n  - --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("configuration rejected:\n  - cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }

    let Some(config_path) = cli.config else {
        eprintln!("configuration rejected:\n  - --config PATH is required");
        return ExitCode::from(2);
    };

    match commands::dispatch(cli.command.kind(), &config_path, cli.out, cli.seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("{}", e.report());
            ExitCode::from(e.exit_code())
        }
    }
}
