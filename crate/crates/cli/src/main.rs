//! `trilevel`: config-driven front end for the three-level/oscillator solver.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::commands::Invocation;
use crate::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "trilevel", version, about = "Three-level ladder coupled to an oscillator: spectra, resonances, splittings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for point-wise parallel work.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Adiabatic energies E_j(y) along the oscillator coordinate.
    Levels(Common),
    /// WKB dressed energies (optionally against the exact solver).
    Wkb(Common),
    /// Resonance contours E_k − E_j = Δn in the (g1, g2) quadrant.
    Contours(Common),
    /// Inverse resonance magnitude from exact dressed energies on a grid.
    ResonanceMap(Common),
    /// Perturbative vs exact anticrossing splittings along lines g2 = r·g1.
    Splittings(Common),
    /// Invariant suite; exits nonzero on failure.
    Validate(Common),
}

fn run(cli: Cli) -> Result<bool> {
    let (name, common) = match &cli.command {
        Command::Levels(c) => ("levels", c),
        Command::Wkb(c) => ("wkb", c),
        Command::Contours(c) => ("contours", c),
        Command::ResonanceMap(c) => ("resonance-map", c),
        Command::Splittings(c) => ("splittings", c),
        Command::Validate(c) => ("validate", c),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring thread pool")?;
    }
    let config = ExperimentConfig::load(&common.config)?;
    let out = common
        .out
        .clone()
        .or_else(|| config.output.directory.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let inv = Invocation { command: name, config_path: &common.config, config: &config, out: &out };
    let (written, ok) = match cli.command {
        Command::Levels(_) => (commands::levels(&inv)?, true),
        Command::Wkb(_) => (commands::wkb(&inv)?, true),
        Command::Contours(_) => (commands::contours(&inv)?, true),
        Command::ResonanceMap(_) => (commands::resonance_map(&inv)?, true),
        Command::Splittings(_) => (commands::splittings(&inv)?, true),
        Command::Validate(_) => commands::validate(&inv)?,
    };
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(ok)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
