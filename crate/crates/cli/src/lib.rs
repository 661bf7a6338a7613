//! Command-line experiments for the cascaded-cavity simulator.
//!
//! Each command reads a `key = value` config (see [`config`]), runs one
//! experiment and writes a CSV, an SVG and a JSON manifest into the output
//! directory. CSV numbers use shortest round-trip formatting and sweep points
//! are written in grid order, so a rerun with the same config and seed
//! reproduces the CSV byte for byte.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod svg;

use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, Tier};
pub use error::CliError;
pub use experiments::{Command, Run, RunOutput};

/// Command-line overrides of the corresponding `run.*` keys.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

/// Loads `config_path`, applies the overrides and runs `command`.
pub fn run(command: Command, config_path: &Path, overrides: &Overrides) -> Result<RunOutput, CliError> {
    let text = std::fs::read(config_path).map_err(|e| CliError::ConfigRead {
        path: config_path.to_path_buf(),
        source: e,
    })?;
    let config = ExperimentConfig::load(config_path)?;
    if overrides.workers == Some(0) {
        return Err(CliError::Invalid {
            key: "run.workers".into(),
            msg: "must be at least 1".into(),
        });
    }
    let run = Run {
        config_sha256: output::sha256_hex(&text),
        seed: overrides.seed.unwrap_or(config.seed),
        workers: overrides.workers.unwrap_or(config.workers),
        out_dir: overrides.out.clone().unwrap_or_else(|| config.out_dir.clone()),
        config,
    };
    run.execute(command)
}
