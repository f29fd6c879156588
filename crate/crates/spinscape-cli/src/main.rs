/// `println!` that tolerates a closed stdout.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

mod commands;
mod config;
mod output;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use config::{ExperimentConfig, Mode};
use std::path::PathBuf;
use std::process::ExitCode;

/// Exact and Monte Carlo experiments on modified-energy spin dynamics.
#[derive(Parser)]
#[command(name = "spinscape", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact spectral analysis at one temperature, with inequality flags.
    Analyze(Common),
    /// Exact relaxation times over a temperature grid.
    Sweep(Common),
    /// One trajectory, plus empirical laws if runs and horizons are set.
    Sample(Common),
    /// Mean hitting times of the ground set.
    Tunnel(Common),
    /// Exceedance probabilities under a power-law schedule.
    Anneal(Common),
    /// Disorder-ensemble statistics of the random energy model.
    RemStudy(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (.toml or .json).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let (mode, common) = match cli.command {
        Command::Analyze(c) => (Mode::Analyze, c),
        Command::Sweep(c) => (Mode::Sweep, c),
        Command::Sample(c) => (Mode::Sample, c),
        Command::Tunnel(c) => (Mode::Tunnel, c),
        Command::Anneal(c) => (Mode::Anneal, c),
        Command::RemStudy(c) => (Mode::RemStudy, c),
    };
    let cfg = ExperimentConfig::load(&common.config)?.resolve(mode, common.seed, common.out)?;
    for p in commands::run(&cfg)? {
        say!("wrote {}", p.display());
    }
    Ok(())
}
