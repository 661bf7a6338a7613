//! `key = value` experiment configuration.
//!
//! One pair per line, `#` starts a comment, keys are dotted. Lists are comma
//! separated; `start:step:stop` expands to an inclusive range and
//! `log:start:stop:count` to log-spaced points. Rates carry the suffix
//! `_2pi_MHz` and are entered as `X` for a rate of `2pi X MHz`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cascade_core::cavity::StarkMode;

use crate::error::CliError;

/// Every key the parser accepts, with its default and meaning. Printed by
/// `--help`.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("model.tier", "reduced", "reduced | effective | full; evolve takes a comma list"),
    ("drive.a_over_b", "2", "drive ratio a/b for evolve and steady"),
    ("drive.epsilon", "1", "coupling efficiency for evolve and steady"),
    ("drive.b", "1", "amplitude b in us^-1/2 when no physical block is given"),
    ("physical.g_2pi_MHz", "-", "atom-cavity coupling g_r = g_s"),
    ("physical.kappa1_2pi_MHz", "-", "field decay of cavity 1"),
    ("physical.kappa2_2pi_MHz", "-", "field decay of cavity 2"),
    ("physical.gamma_2pi_MHz", "-", "excited-state linewidth, shared by r, s, t"),
    ("physical.delta_2pi_MHz", "-", "detuning of all three transitions"),
    ("physical.omega_s_2pi_MHz", "-", "Rabi frequency Omega_s; Omega_r = (a/b) Omega_s"),
    ("physical.omega_1_2pi_MHz", "0", "ground-state splitting"),
    ("physical.omega_lr_2pi_MHz", "0", "laser r frequency offset"),
    ("physical.omega_ls_2pi_MHz", "0", "laser s frequency offset"),
    ("physical.omega_lt_2pi_MHz", "0", "laser t frequency offset"),
    ("physical.stark", "compensated", "compensated | raman_resonant"),
    ("sweep.a_over_b", "1.1:0.1:4.0", "a/b grid for the sweeps"),
    ("sweep.epsilon", "0.7:0.01:1.0", "epsilon grid for the sweeps"),
    ("sweep.y", "log:1:300:30", "cooperativity grid for sweep-coop"),
    ("time.t_max_us", "20", "end of the evolve time grid"),
    ("time.n_points", "201", "evolve output points, including t = 0"),
    ("solver.rel_tol", "1e-8", "explicit integrator relative tolerance"),
    ("solver.abs_tol", "1e-10", "explicit integrator absolute tolerance"),
    ("solver.implicit_step_us", "0.1", "step of the implicit integrator (full tier)"),
    ("solver.fock_cutoff", "2", "photon cutoff per cavity"),
    ("solver.max_fock_cutoff", "4", "steady states raise the cutoff up to this"),
    ("metrics.input", "-", "density-matrix file for the metrics command"),
    ("metrics.oracle_samples", "0", "sampled cross-check of every fidelity (0 = off)"),
    ("run.seed", "0", "seed of the sampled fidelity cross-check"),
    ("run.workers", "1", "parallel sweep points"),
    ("run.out", "out", "output directory"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Tier {
    Reduced,
    Effective,
    Full,
}

impl Tier {
    pub fn name(self) -> &'static str {
        match self {
            Tier::Reduced => "reduced",
            Tier::Effective => "effective",
            Tier::Full => "full",
        }
    }
}

/// Rates in `2pi MHz` units exactly as written in the file.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalConfig {
    pub g: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub gamma: f64,
    pub delta: f64,
    pub omega_s: f64,
    pub omega_1: f64,
    pub omega_lr: f64,
    pub omega_ls: f64,
    pub omega_lt: f64,
    pub stark: StarkMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub tiers: Vec<Tier>,
    pub a_over_b: f64,
    pub epsilon: f64,
    pub b: f64,
    pub physical: Option<PhysicalConfig>,
    pub sweep_a_over_b: Vec<f64>,
    pub sweep_epsilon: Vec<f64>,
    pub sweep_y: Vec<f64>,
    pub t_max_us: f64,
    pub n_points: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub implicit_step_us: f64,
    pub fock_cutoff: usize,
    pub max_fock_cutoff: usize,
    pub metrics_input: Option<PathBuf>,
    pub oracle_samples: usize,
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
}

struct Entry {
    line: usize,
    value: String,
}

struct Raw {
    entries: BTreeMap<String, Entry>,
}

fn invalid(key: &str, msg: impl Into<String>) -> CliError {
    CliError::Invalid {
        key: key.to_string(),
        msg: msg.into(),
    }
}

impl Raw {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(CliError::Syntax {
                    line: line_no,
                    msg: format!("expected `key = value`, found `{content}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(CliError::Syntax {
                    line: line_no,
                    msg: "key and value must both be non-empty".into(),
                });
            }
            if !KEYS.iter().any(|(k, _, _)| *k == key) {
                return Err(CliError::Syntax {
                    line: line_no,
                    msg: format!("unknown key `{key}`"),
                });
            }
            let entry = Entry {
                line: line_no,
                value: value.to_string(),
            };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(CliError::Syntax {
                    line: line_no,
                    msg: format!("`{key}` already set on line {}", prev.line),
                });
            }
        }
        Ok(Self { entries })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn number_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_number(key, v),
        }
    }

    fn required(&self, key: &str) -> Result<f64, CliError> {
        let v = self.get(key).ok_or_else(|| invalid(key, "missing"))?;
        parse_number(key, v)
    }

    fn count_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| invalid(key, format!("expected a non-negative integer, found `{v}`"))),
        }
    }

    fn list_or(&self, key: &str, default: &str) -> Result<Vec<f64>, CliError> {
        parse_list(key, self.get(key).unwrap_or(default))
    }
}

fn parse_number(key: &str, v: &str) -> Result<f64, CliError> {
    let x: f64 = v.parse().map_err(|_| invalid(key, format!("expected a number, found `{v}`")))?;
    if !x.is_finite() {
        return Err(invalid(key, "must be finite"));
    }
    Ok(x)
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    let values = match parts.as_slice() {
        ["log", start, stop, count] => {
            let (a, b) = (parse_number(key, start)?, parse_number(key, stop)?);
            let n: usize = count.parse().map_err(|_| invalid(key, "log-spaced count must be an integer"))?;
            if !(a > 0.0 && b > 0.0) || n == 0 {
                return Err(invalid(key, "log spacing needs positive bounds and a positive count"));
            }
            if n == 1 {
                vec![a]
            } else {
                let (la, lb) = (a.ln(), b.ln());
                let mut l: Vec<f64> = (0..n).map(|k| (la + (lb - la) * k as f64 / (n - 1) as f64).exp()).collect();
                (l[0], l[n - 1]) = (a, b);
                l
            }
        }
        [start, step, stop] => {
            let (a, h, b) = (parse_number(key, start)?, parse_number(key, step)?, parse_number(key, stop)?);
            if !(h > 0.0) || b < a {
                return Err(invalid(key, "a range needs a positive step and stop >= start"));
            }
            // Points are a + k h; the tolerance absorbs rounding of the step.
            let n = ((b - a) / h + 1e-9).floor() as usize;
            (0..=n)
                .map(|k| {
                    let x = a + k as f64 * h;
                    // Keep the written endpoint exact so it cannot overshoot a bound.
                    if (x - b).abs() <= 1e-9 * h {
                        b
                    } else {
                        x
                    }
                })
                .collect()
        }
        [_] => v.split(',').map(|s| parse_number(key, s.trim())).collect::<Result<_, _>>()?,
        _ => return Err(invalid(key, format!("cannot read `{v}` as a list"))),
    };
    if values.is_empty() {
        return Err(invalid(key, "list is empty"));
    }
    Ok(values)
}

fn parse_tiers(v: &str) -> Result<Vec<Tier>, CliError> {
    let mut tiers = Vec::new();
    for name in v.split(',').map(str::trim) {
        let tier = match name {
            "reduced" => Tier::Reduced,
            "effective" => Tier::Effective,
            "full" => Tier::Full,
            other => return Err(invalid("model.tier", format!("unknown tier `{other}`"))),
        };
        if tiers.contains(&tier) {
            return Err(invalid("model.tier", format!("tier `{name}` listed twice")));
        }
        tiers.push(tier);
    }
    Ok(tiers)
}

fn check_epsilon(key: &str, e: f64) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&e) {
        return Err(invalid(key, "epsilon out of [0,1]"));
    }
    Ok(())
}

fn positive(key: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 {
        Ok(x)
    } else {
        Err(invalid(key, "must be positive"))
    }
}

fn parse_physical(raw: &Raw) -> Result<Option<PhysicalConfig>, CliError> {
    if !raw.entries.keys().any(|k| k.starts_with("physical.")) {
        return Ok(None);
    }
    let stark = match raw.get("physical.stark").unwrap_or("compensated") {
        "compensated" => StarkMode::Compensated,
        "raman_resonant" => StarkMode::RamanResonant,
        other => return Err(invalid("physical.stark", format!("unknown mode `{other}`"))),
    };
    let nonneg = |key: &str| -> Result<f64, CliError> {
        let x = raw.required(key)?;
        if x < 0.0 {
            return Err(invalid(key, "must be non-negative"));
        }
        Ok(x)
    };
    Ok(Some(PhysicalConfig {
        g: positive("physical.g_2pi_MHz", raw.required("physical.g_2pi_MHz")?)?,
        kappa1: positive("physical.kappa1_2pi_MHz", raw.required("physical.kappa1_2pi_MHz")?)?,
        kappa2: positive("physical.kappa2_2pi_MHz", raw.required("physical.kappa2_2pi_MHz")?)?,
        gamma: nonneg("physical.gamma_2pi_MHz")?,
        delta: {
            let d = raw.required("physical.delta_2pi_MHz")?;
            if d == 0.0 {
                return Err(invalid("physical.delta_2pi_MHz", "must be nonzero"));
            }
            d
        },
        omega_s: nonneg("physical.omega_s_2pi_MHz")?,
        omega_1: raw.number_or("physical.omega_1_2pi_MHz", 0.0)?,
        omega_lr: raw.number_or("physical.omega_lr_2pi_MHz", 0.0)?,
        omega_ls: raw.number_or("physical.omega_ls_2pi_MHz", 0.0)?,
        omega_lt: raw.number_or("physical.omega_lt_2pi_MHz", 0.0)?,
        stark,
    }))
}

impl ExperimentConfig {
    /// Parses and validates everything that does not depend on the command.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let raw = Raw::parse(text)?;
        let tiers = parse_tiers(raw.get("model.tier").unwrap_or("reduced"))?;
        let a_over_b = positive("drive.a_over_b", raw.number_or("drive.a_over_b", 2.0)?)?;
        let epsilon = raw.number_or("drive.epsilon", 1.0)?;
        check_epsilon("drive.epsilon", epsilon)?;
        let b = positive("drive.b", raw.number_or("drive.b", 1.0)?)?;
        let physical = parse_physical(&raw)?;
        if physical.is_none() && tiers.iter().any(|t| *t != Tier::Reduced) {
            // Name the first cavity parameter so the message points somewhere useful.
            return Err(invalid(
                "physical.kappa1_2pi_MHz",
                "cavity tiers need the physical.* parameters (kappa1 missing)",
            ));
        }
        let sweep_a_over_b = raw.list_or("sweep.a_over_b", "1.1:0.1:4.0")?;
        if sweep_a_over_b.iter().any(|x| *x <= 0.0) {
            return Err(invalid("sweep.a_over_b", "ratios must be positive"));
        }
        let sweep_epsilon = raw.list_or("sweep.epsilon", "0.7:0.01:1.0")?;
        for e in &sweep_epsilon {
            check_epsilon("sweep.epsilon", *e)?;
        }
        let sweep_y = raw.list_or("sweep.y", "log:1:300:30")?;
        if sweep_y.iter().any(|y| *y <= 0.0) {
            return Err(invalid("sweep.y", "cooperativities must be positive"));
        }
        let n_points = raw.count_or("time.n_points", 201)?;
        if n_points < 2 {
            return Err(invalid("time.n_points", "need at least 2 points"));
        }
        let fock_cutoff = raw.count_or("solver.fock_cutoff", 2)?;
        if fock_cutoff < 1 {
            return Err(invalid("solver.fock_cutoff", "must be at least 1"));
        }
        let max_fock_cutoff = raw.count_or("solver.max_fock_cutoff", 4)?.max(fock_cutoff);
        let workers = raw.count_or("run.workers", 1)?;
        if workers == 0 {
            return Err(invalid("run.workers", "must be at least 1"));
        }
        Ok(Self {
            tiers,
            a_over_b,
            epsilon,
            b,
            physical,
            sweep_a_over_b,
            sweep_epsilon,
            sweep_y,
            t_max_us: positive("time.t_max_us", raw.number_or("time.t_max_us", 20.0)?)?,
            n_points,
            rel_tol: positive("solver.rel_tol", raw.number_or("solver.rel_tol", 1e-8)?)?,
            abs_tol: positive("solver.abs_tol", raw.number_or("solver.abs_tol", 1e-10)?)?,
            implicit_step_us: positive("solver.implicit_step_us", raw.number_or("solver.implicit_step_us", 0.1)?)?,
            fock_cutoff,
            max_fock_cutoff,
            metrics_input: raw.get("metrics.input").map(|p| base_dir.join(p)),
            oracle_samples: raw.count_or("metrics.oracle_samples", 0)?,
            seed: raw
                .get("run.seed")
                .map(|v| v.parse().map_err(|_| invalid("run.seed", "expected an unsigned integer")))
                .transpose()?
                .unwrap_or(0),
            workers,
            out_dir: base_dir.join(raw.get("run.out").unwrap_or("out")),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigRead {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn time_grid(&self) -> Vec<f64> {
        let n = self.n_points - 1;
        (0..=n).map(|k| self.t_max_us * k as f64 / n as f64).collect()
    }
}

/// Text for `--help`.
pub fn key_reference() -> String {
    let mut s = String::from("Config keys (default, meaning):\n");
    for (k, d, m) in KEYS {
        s.push_str(&format!("  {k:<28} {d:<14} {m}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::parse(text, Path::new("."))
    }

    #[test]
    fn minimal_reduced_config() {
        let c = parse("drive.a_over_b = 2\ndrive.epsilon = 1\n").unwrap();
        assert_eq!(c.tiers, vec![Tier::Reduced]);
        assert_eq!((c.a_over_b, c.epsilon), (2.0, 1.0));
        assert!(c.physical.is_none());
    }

    #[test]
    fn epsilon_out_of_range() {
        let err = parse("drive.epsilon = 1.5").unwrap_err();
        assert!(err.to_string().contains("epsilon out of [0,1]"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn missing_kappa_is_named() {
        let text = "model.tier = full\nphysical.g_2pi_MHz = 110\nphysical.gamma_2pi_MHz = 5.2\n\
                    physical.delta_2pi_MHz = 8000\nphysical.omega_s_2pi_MHz = 100\n";
        let err = parse(text).unwrap_err();
        assert!(err.to_string().contains("kappa1"), "{err}");
        let err = parse("model.tier = effective").unwrap_err();
        assert!(err.to_string().contains("kappa1"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse("# header\n\ndrive.epsilon 0.5\n").unwrap_err();
        assert!(matches!(err, CliError::Syntax { line: 3, .. }), "{err}");
        let err = parse("drive.b = 1\ndrive.bogus = 2\n").unwrap_err();
        assert!(matches!(err, CliError::Syntax { line: 2, .. }));
        let err = parse("drive.b = 1\ndrive.b = 2\n").unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn list_forms() {
        assert_eq!(parse_list("k", "1, 2.5,3").unwrap(), vec![1.0, 2.5, 3.0]);
        let r = parse_list("k", "0.7:0.01:1.0").unwrap();
        assert_eq!(r.len(), 31);
        assert_eq!(r[30], 1.0);
        let l = parse_list("k", "log:1:300:30").unwrap();
        assert_eq!(l.len(), 30);
        assert_eq!((l[0], l[29]), (1.0, 300.0));
        assert!(parse_list("k", "1:0:2").is_err());
        assert!(parse_list("k", "1,x").is_err());
    }

    #[test]
    fn comments_and_paths() {
        let c = ExperimentConfig::parse("run.out = res # trailing\nmetrics.input = rho.dm\n", Path::new("/cfg")).unwrap();
        assert_eq!(c.out_dir, PathBuf::from("/cfg/res"));
        assert_eq!(c.metrics_input, Some(PathBuf::from("/cfg/rho.dm")));
    }

    #[test]
    fn time_grid_is_inclusive() {
        let c = parse("time.t_max_us = 2\ntime.n_points = 5").unwrap();
        assert_eq!(c.time_grid(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }
}
