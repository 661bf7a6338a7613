use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cascade_sim::config::key_reference;
use cascade_sim::{run, Command, Overrides};

#[derive(Parser)]
#[command(name = "cascade-sim", version, about = "Steady-state entanglement of two atoms in cascaded cavities")]
#[command(after_help = key_reference())]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Experiment config, `key = value` per line.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `run.out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Parallel sweep points; overrides `run.workers`.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed of the sampled fidelity cross-check; overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Fidelity and friends versus time from |00>, one curve per tier.
    Evolve,
    /// Steady fidelity over the a/b by epsilon grid.
    SweepEps,
    /// Steady fidelity versus cooperativity at fixed Raman rates.
    SweepCoop,
    /// Closed-form and numerical steady states side by side.
    Steady,
    /// Metrics of the density matrix named by `metrics.input`.
    Metrics,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Evolve => Command::Evolve,
        Cmd::SweepEps => Command::SweepEps,
        Cmd::SweepCoop => Command::SweepCoop,
        Cmd::Steady => Command::Steady,
        Cmd::Metrics => Command::Metrics,
    };
    let Some(config) = cli.config else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(2);
    };
    let overrides = Overrides {
        out: cli.out,
        workers: cli.workers,
        seed: cli.seed,
    };
    match run(command, &config, &overrides) {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
