//! Command-line front end for the compressive deconvolution pipeline.
//!
//! Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure.

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use compdec::Error;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "compdec", about = "Compressive deconvolution toolkit", version)]
struct Cli {
    /// Path to a `key = value` run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config file's `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed (overrides the config file's `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate mask.cdm, trf.cdm, psf.cdm and rf.cdm.
    Phantom,
    /// Sample rf.cdm into y.cdm and record the operator for replay.
    Compress,
    /// Solve for xhat.cdm from y.cdm; writes trace.csv and bmode.pgm.
    Reconstruct,
    /// Score xhat.cdm against trf.cdm, appending to metrics.csv.
    Evaluate,
    /// Run the full (cs_ratio x p) grid and aggregate sweep.csv.
    Sweep,
    /// Dump the scalar shrinkage curves to prox_curve.csv.
    ProxCurve,
}

fn load_config(cli: &Cli) -> compdec::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_text(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> compdec::Result<()> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Phantom => pipeline::cmd_phantom(&cfg)?,
        Command::Compress => pipeline::cmd_compress(&cfg)?,
        Command::Reconstruct => {
            let result = pipeline::cmd_reconstruct(&cfg, true)?;
            eprintln!(
                "reconstruct: {} iterations, converged = {}",
                result.iterations, result.converged
            );
        }
        Command::Evaluate => {
            let report = pipeline::cmd_evaluate(&cfg)?;
            println!("{}", report.csv_row());
        }
        Command::Sweep => {
            let path = pipeline::cmd_sweep(&cfg)?;
            eprintln!("sweep: wrote {}", path.display());
        }
        Command::ProxCurve => {
            let path = pipeline::cmd_prox_curve(&cfg)?;
            eprintln!("prox-curve: wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Numerical { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
