//! CSV text, hashes and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Shortest round-trip decimal; a missing value is an empty field.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:?}")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        write!(s, "{b:02x}").expect("writing to a String cannot fail");
        s
    })
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    /// Appends the `# manifest:` line and returns the finished text.
    pub fn finish(mut self, manifest_file: &str, config_sha256: &str) -> String {
        writeln!(self.text, "# manifest: {manifest_file} config_sha256={config_sha256}")
            .expect("writing to a String cannot fail");
        self.text
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Converged,
    /// A value was produced but a convergence check did not pass.
    Unconverged,
    Failed,
}

/// Outcome of one sweep point or one evolve curve.
#[derive(Clone, Debug, Serialize)]
pub struct PointRecord {
    pub label: String,
    pub status: PointStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub artifact_version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub workers: usize,
    pub started_unix_s: u64,
    pub wall_clock_s: f64,
    pub outputs: Vec<String>,
    /// Largest `exact - sampled` fidelity gap when the sampled cross-check ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_max_gap: Option<f64>,
    pub points: Vec<PointRecord>,
}

impl RunManifest {
    pub fn failed(&self) -> usize {
        self.points.iter().filter(|p| p.status == PointStatus::Failed).count()
    }

    pub fn set_wall_clock(&mut self, elapsed: Duration) {
        self.wall_clock_s = elapsed.as_secs_f64();
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}
