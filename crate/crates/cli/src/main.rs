//! `eit`: forward solves, synthetic data, reconstructions and Jacobian checks.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eit_core::{Error, Variant};

mod commands;
mod config;

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "eit", version, about = "EIT with extended electrodes and spatially varying contacts")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Contact parametrization: cem, pl or ph.
    #[arg(long, global = true)]
    variant: Option<Variant>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate electrode voltages.
    Forward,
    /// Generate noisy synthetic data on a refined mesh.
    Synth,
    /// Gauss-Newton reconstruction.
    Reconstruct,
    /// Compare the analytic Jacobian with central differences.
    CheckJacobian,
    /// Tabulate summary.json files from reconstruction output directories.
    Report {
        /// Run directories (default: --out).
        dirs: Vec<PathBuf>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() || matches!(e, Error::FingerprintMismatch) {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("EIT_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or(format!("EIT_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(cli: Cli) -> eit_core::Result<()> {
    let ov = Overrides {
        variant: cli.variant,
        seed: cli.seed,
        out: cli.out.clone(),
    };
    let cfg = RunConfig::load(cli.config.as_deref(), ov)?;
    match cli.cmd {
        Cmd::Forward => commands::forward(&cfg),
        Cmd::Synth => commands::synth(&cfg),
        Cmd::Reconstruct => commands::reconstruct(&cfg),
        Cmd::CheckJacobian => commands::check_jacobian(&cfg),
        Cmd::Report { dirs } => {
            let dirs = if dirs.is_empty() { vec![cfg.out.clone()] } else { dirs };
            print!("{}", commands::report(&dirs)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
