//! The five commands: time series, the two sweeps, steady-state comparison
//! and metrics of a stored state.

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use cascade_core::cavity::{
    atomic_marginal, build_liouvillian, escalating_steady_state, mhz, output_flux_operator, stark_balance,
    top_fock_population, ModelSpace, PhysicalParams,
};
use cascade_core::dynamics::{integrate_implicit, integrate_with, steady_state_nullspace, ImplicitOptions, IntegrateOptions};
use cascade_core::metrics::{fef_fidelity, fef_oracle, output_flux, MetricReport, METRIC_COLUMNS};
use cascade_core::operator::io::{format_density_matrix, read_density_matrix};
use cascade_core::operator::{ComplexMatrix, C64};
use cascade_core::reduced::{analytic_steady_state, flux_operator, liouvillian_action, liouvillian_matrix, MatchedDrive, ReducedParams};

use crate::config::{ExperimentConfig, PhysicalConfig, Tier};
use crate::error::CliError;
use crate::output::{fmt_f64, write_file, Csv, PointRecord, PointStatus, RunManifest};
use crate::svg::{Heatmap, LinePlot, Scale, Series};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Evolve,
    SweepEps,
    SweepCoop,
    Steady,
    Metrics,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::SweepEps => "sweep-eps",
            Command::SweepCoop => "sweep-coop",
            Command::Steady => "steady",
            Command::Metrics => "metrics",
        }
    }

    fn stem(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::SweepEps => "sweep_eps",
            Command::SweepCoop => "sweep_coop",
            Command::Steady => "steady",
            Command::Metrics => "metrics",
        }
    }
}

/// A validated config plus the command-line overrides.
pub struct Run {
    pub config: ExperimentConfig,
    pub config_sha256: String,
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
}

/// What a finished command leaves behind.
#[derive(Debug)]
pub struct RunOutput {
    /// Text for standard output.
    pub stdout: String,
    pub files: Vec<PathBuf>,
    pub manifest: Option<RunManifest>,
}

/// Physical parameters at one drive ratio, balanced as configured. Rates in
/// the config are in units of `2pi MHz`.
pub fn physical_params(pc: &PhysicalConfig, a_over_b: f64, epsilon: f64) -> cascade_core::Result<PhysicalParams> {
    let mut p = PhysicalParams::symmetric(
        mhz(pc.g),
        mhz(pc.kappa1),
        mhz(pc.gamma),
        mhz(pc.delta),
        mhz(a_over_b * pc.omega_s),
        mhz(pc.omega_s),
        epsilon,
    );
    p.kappa2 = mhz(pc.kappa2);
    p.omega_1 = mhz(pc.omega_1);
    p.omega_lr = mhz(pc.omega_lr);
    p.omega_ls = mhz(pc.omega_ls);
    p.omega_lt = mhz(pc.omega_lt);
    stark_balance(&p, pc.stark)
}

/// Reduced-model parameters: the Raman rates of the physical block when one is
/// given, otherwise `a = (a/b) b` with `kappa = 1`.
pub fn reduced_params(cfg: &ExperimentConfig, a_over_b: f64, epsilon: f64) -> cascade_core::Result<ReducedParams> {
    match &cfg.physical {
        Some(pc) => {
            let p = physical_params(pc, a_over_b, epsilon)?;
            cascade_core::cavity::derive_params(&p)?.reduced(&p)
        }
        None => MatchedDrive::real(a_over_b * cfg.b, cfg.b, epsilon)?.to_params(1.0, 1.0),
    }
}

/// The matched drive behind `p`, if both atoms see the same `(a, b)`.
fn matched(p: &ReducedParams) -> Option<MatchedDrive> {
    let (k1, k2) = (p.kappa1.sqrt(), p.kappa2.sqrt());
    let (a, b) = (p.beta_r1 / k1, p.beta_s1 / k1);
    let scale = a.norm().max(b.norm());
    let same = (p.beta_r2 / k2 - a).norm() <= 1e-12 * scale && (p.beta_s2 / k2 - b).norm() <= 1e-12 * scale;
    if same {
        MatchedDrive::new(a, b, p.epsilon).ok()
    } else {
        None
    }
}

fn reduced_steady(p: &ReducedParams) -> cascade_core::Result<ComplexMatrix> {
    match matched(p) {
        Some(m) => analytic_steady_state(&m),
        None => steady_state_nullspace(&liouvillian_matrix(p)),
    }
}

fn initial_reduced() -> ComplexMatrix {
    // |0_1 0_2> is the last basis state.
    ComplexMatrix::unit(4, 3, 3)
}

/// Steady-state atomic state of one tier at one parameter point.
struct SteadyPoint {
    marginal: ComplexMatrix,
    status: PointStatus,
    detail: Option<String>,
}

fn steady_point(cfg: &ExperimentConfig, tier: Tier, a_over_b: f64, epsilon: f64, p: Option<PhysicalParams>) -> cascade_core::Result<SteadyPoint> {
    let levels = match tier {
        Tier::Reduced => {
            let rp = match p {
                Some(p) => cascade_core::cavity::derive_params(&p)?.reduced(&p)?,
                None => reduced_params(cfg, a_over_b, epsilon)?,
            };
            return Ok(SteadyPoint {
                marginal: reduced_steady(&rp)?,
                status: PointStatus::Converged,
                detail: None,
            });
        }
        Tier::Effective => 2,
        Tier::Full => 5,
    };
    let p = match p {
        Some(p) => p,
        None => physical_params(cfg.physical.as_ref().expect("validated"), a_over_b, epsilon)?,
    };
    let e = escalating_steady_state(&p, levels, cfg.fock_cutoff, cfg.max_fock_cutoff)?;
    let detail = format!(
        "fock_cutoff {}, top population {:e}, residual {:e}",
        e.accepted.space.fock_cutoff, e.accepted.top_population, e.accepted.residual
    );
    Ok(SteadyPoint {
        marginal: e.accepted.marginal,
        status: if e.converged { PointStatus::Converged } else { PointStatus::Unconverged },
        detail: Some(detail),
    })
}

impl Run {
    fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))
    }

    fn single_tier(&self) -> Result<Tier, CliError> {
        match self.config.tiers.as_slice() {
            [t] => Ok(*t),
            _ => Err(CliError::Invalid {
                key: "model.tier".into(),
                msg: "sweeps take exactly one tier".into(),
            }),
        }
    }

    /// Exact minus sampled fidelity, when the cross-check is enabled.
    fn oracle_gap(&self, rho: &ComplexMatrix, exact: f64) -> cascade_core::Result<Option<f64>> {
        if self.config.oracle_samples == 0 {
            return Ok(None);
        }
        Ok(Some(exact - fef_oracle(rho, self.config.oracle_samples, self.seed)?))
    }

    fn manifest(&self, command: Command, started: SystemTime) -> RunManifest {
        RunManifest {
            command: command.name().into(),
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: self.config_sha256.clone(),
            seed: self.seed,
            workers: self.workers,
            started_unix_s: started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            wall_clock_s: 0.0,
            outputs: Vec::new(),
            oracle_max_gap: None,
            points: Vec::new(),
        }
    }

    /// Writes the CSV, SVG and manifest of a table-producing command.
    fn finish(&self, command: Command, mut manifest: RunManifest, csv: Csv, svg: String, clock: Instant) -> Result<RunOutput, CliError> {
        let stem = command.stem();
        let (csv_name, svg_name, manifest_name) = (format!("{stem}.csv"), format!("{stem}.svg"), format!("{stem}.manifest.json"));
        let mut files = vec![
            write_file(&self.out_dir, &csv_name, &csv.finish(&manifest_name, &self.config_sha256))?,
            write_file(&self.out_dir, &svg_name, &svg)?,
        ];
        manifest.outputs = vec![csv_name, svg_name];
        manifest.set_wall_clock(clock.elapsed());
        files.push(write_file(&self.out_dir, &manifest_name, &(serde_json::to_string_pretty(&manifest)? + "\n"))?);
        let failed = manifest.failed();
        let total = manifest.points.len();
        let stdout = files.iter().map(|f| format!("wrote {}\n", f.display())).collect();
        if failed > 0 {
            return Err(CliError::PointsFailed { failed, total });
        }
        Ok(RunOutput {
            stdout,
            files,
            manifest: Some(manifest),
        })
    }

    pub fn execute(&self, command: Command) -> Result<RunOutput, CliError> {
        match command {
            Command::Evolve => self.evolve(),
            Command::SweepEps => self.sweep_eps(),
            Command::SweepCoop => self.sweep_coop(),
            Command::Steady => self.steady(),
            Command::Metrics => self.metrics(),
        }
    }

    fn evolve_tier(&self, tier: Tier) -> cascade_core::Result<(Vec<MetricReport>, Option<f64>, Option<f64>)> {
        let cfg = &self.config;
        let times = cfg.time_grid();
        let explicit = IntegrateOptions {
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol,
            ..IntegrateOptions::default()
        };
        let mut rows = Vec::with_capacity(times.len());
        let mut gap: Option<f64> = None;
        let mut top: Option<f64> = None;
        let mut record = |marginal: &ComplexMatrix, flux: f64| -> cascade_core::Result<()> {
            let report = MetricReport::of(marginal)?.with_flux(flux);
            if let Some(g) = self.oracle_gap(marginal, report.fidelity)? {
                gap = Some(gap.map_or(g, |x: f64| x.max(g)));
            }
            rows.push(report);
            Ok(())
        };
        if tier == Tier::Reduced {
            let rp = reduced_params(cfg, cfg.a_over_b, cfg.epsilon)?;
            let flux_op = flux_operator(&rp);
            integrate_with(&liouvillian_action(&rp), &initial_reduced(), &times, explicit, |_, rho| {
                record(rho, output_flux(rho, &flux_op)?)
            })?;
        } else {
            let p = physical_params(cfg.physical.as_ref().expect("validated"), cfg.a_over_b, cfg.epsilon)?;
            let space = ModelSpace::new(if tier == Tier::Full { 5 } else { 2 }, cfg.fock_cutoff)?;
            let action = build_liouvillian(&p, &space)?;
            let flux_op = output_flux_operator(&p, &space);
            let mut observe = |_: f64, rho: &ComplexMatrix| {
                let t = top_fock_population(rho, &space)?;
                top = Some(top.map_or(t, |x: f64| x.max(t)));
                record(&atomic_marginal(rho, &space)?, output_flux(rho, &flux_op)?)
            };
            if tier == Tier::Full {
                let opts = ImplicitOptions {
                    max_step: cfg.implicit_step_us,
                    ..ImplicitOptions::default()
                };
                integrate_implicit(&action, &space.ground_vacuum(), &times, opts, &mut observe)?;
            } else {
                integrate_with(&action, &space.ground_vacuum(), &times, explicit, &mut observe)?;
            }
        }
        Ok((rows, gap, top))
    }

    fn evolve(&self) -> Result<RunOutput, CliError> {
        let clock = Instant::now();
        let mut manifest = self.manifest(Command::Evolve, SystemTime::now());
        let tiers = &self.config.tiers;
        let results: Vec<_> = self.pool()?.install(|| tiers.par_iter().map(|&t| self.evolve_tier(t)).collect());
        let times = self.config.time_grid();
        let mut header = vec!["time_us", "tier"];
        header.extend(METRIC_COLUMNS);
        let mut csv = Csv::new(&header);
        let mut series = Vec::new();
        for (&tier, result) in tiers.iter().zip(results) {
            let (rows, gap, top) = result.map_err(|source| CliError::Point {
                context: format!("evolve, tier {}", tier.name()),
                source,
            })?;
            for (t, r) in times.iter().zip(&rows) {
                let mut fields = vec![fmt_f64(*t), tier.name().to_string()];
                fields.extend(r.values().iter().map(|v| fmt_f64(*v)));
                csv.row(&fields);
            }
            if let Some(g) = gap {
                manifest.oracle_max_gap = Some(manifest.oracle_max_gap.map_or(g, |x| x.max(g)));
            }
            manifest.points.push(PointRecord {
                label: format!("tier={}", tier.name()),
                status: PointStatus::Converged,
                detail: top.map(|t| format!("largest top-Fock population {t:e}")),
            });
            series.push(Series {
                name: tier.name().into(),
                points: times.iter().zip(&rows).map(|(t, r)| (*t, r.fidelity)).collect(),
                dashed: tier != Tier::Reduced,
            });
        }
        let title = format!("a/b = {}, epsilon = {}", self.config.a_over_b, self.config.epsilon);
        let svg = LinePlot {
            title: &title,
            x_label: "time (us)",
            y_label: "fidelity",
            x_scale: Scale::Linear,
            series,
        }
        .render();
        self.finish(Command::Evolve, manifest, csv, svg, clock)
    }

    /// Runs `points` in parallel, returning the fidelity (NaN on failure) per
    /// point in input order and filling the manifest.
    fn run_points<P: Sync>(
        &self,
        points: &[P],
        label: impl Fn(&P) -> String + Sync,
        solve: impl Fn(&P) -> cascade_core::Result<SteadyPoint> + Sync,
        manifest: &mut RunManifest,
    ) -> Result<Vec<f64>, CliError> {
        let results: Vec<_> = self.pool()?.install(|| {
            points
                .par_iter()
                .map(|pt| {
                    let sp = solve(pt)?;
                    let f = fef_fidelity(&sp.marginal)?;
                    let gap = self.oracle_gap(&sp.marginal, f)?;
                    Ok::<_, cascade_core::Error>((sp, f, gap))
                })
                .collect()
        });
        let mut fidelities = Vec::with_capacity(points.len());
        for (pt, result) in points.iter().zip(results) {
            match result {
                Ok((sp, f, gap)) => {
                    if let Some(g) = gap {
                        manifest.oracle_max_gap = Some(manifest.oracle_max_gap.map_or(g, |x| x.max(g)));
                    }
                    manifest.points.push(PointRecord {
                        label: label(pt),
                        status: sp.status,
                        detail: sp.detail,
                    });
                    fidelities.push(f);
                }
                Err(e) => {
                    manifest.points.push(PointRecord {
                        label: label(pt),
                        status: PointStatus::Failed,
                        detail: Some(e.to_string()),
                    });
                    fidelities.push(f64::NAN);
                }
            }
        }
        Ok(fidelities)
    }

    fn sweep_eps(&self) -> Result<RunOutput, CliError> {
        let clock = Instant::now();
        let tier = self.single_tier()?;
        let cfg = &self.config;
        let mut manifest = self.manifest(Command::SweepEps, SystemTime::now());
        let points: Vec<(f64, f64)> = cfg
            .sweep_a_over_b
            .iter()
            .flat_map(|&r| cfg.sweep_epsilon.iter().map(move |&e| (r, e)))
            .collect();
        let fidelities = self.run_points(
            &points,
            |&(r, e)| format!("a_over_b={r:?} epsilon={e:?}"),
            |&(r, e)| steady_point(cfg, tier, r, e, None),
            &mut manifest,
        )?;
        let mut csv = Csv::new(&["a_over_b", "epsilon", "fidelity"]);
        for (&(r, e), f) in points.iter().zip(&fidelities) {
            csv.row(&[fmt_f64(r), fmt_f64(e), fmt_f64(*f)]);
        }
        let title = format!("steady fidelity, {} tier", tier.name());
        let svg = if cfg.sweep_a_over_b.len() > 1 && cfg.sweep_epsilon.len() > 1 {
            Heatmap {
                title: &title,
                x_label: "a/b",
                y_label: "epsilon",
                xs: &cfg.sweep_a_over_b,
                ys: &cfg.sweep_epsilon,
                values: &fidelities,
            }
            .render()
        } else {
            let series = cfg
                .sweep_epsilon
                .iter()
                .enumerate()
                .map(|(j, e)| Series {
                    name: format!("epsilon = {e}"),
                    points: (0..cfg.sweep_a_over_b.len())
                        .map(|i| (cfg.sweep_a_over_b[i], fidelities[i * cfg.sweep_epsilon.len() + j]))
                        .collect(),
                    dashed: false,
                })
                .collect();
            LinePlot {
                title: &title,
                x_label: "a/b",
                y_label: "fidelity",
                x_scale: Scale::Linear,
                series,
            }
            .render()
        };
        self.finish(Command::SweepEps, manifest, csv, svg, clock)
    }

    fn sweep_coop(&self) -> Result<RunOutput, CliError> {
        let clock = Instant::now();
        let tier = self.single_tier()?;
        let cfg = &self.config;
        let pc = cfg.physical.as_ref().ok_or_else(|| CliError::Invalid {
            key: "physical.kappa1_2pi_MHz".into(),
            msg: "sweep-coop needs the physical.* parameters (kappa1 missing)".into(),
        })?;
        if !(pc.gamma > 0.0) {
            return Err(CliError::Invalid {
                key: "physical.gamma_2pi_MHz".into(),
                msg: "sweep-coop needs a positive linewidth to define Y".into(),
            });
        }
        let mut manifest = self.manifest(Command::SweepCoop, SystemTime::now());
        let (r, e) = (cfg.a_over_b, cfg.epsilon);
        // Y = g^2 / (kappa_1 gamma); Omega follows g so the Raman rates stay put.
        let couplings: Vec<(f64, f64)> = cfg.sweep_y.iter().map(|&y| (y, (y * pc.kappa1 * pc.gamma).sqrt())).collect();
        let fidelities = self.run_points(
            &couplings,
            |&(y, g)| format!("Y={y:?} g_2pi_MHz={g:?}"),
            |&(_, g)| {
                let p = physical_params(pc, r, e)?.with_coupling(mhz(g))?;
                steady_point(cfg, tier, r, e, Some(stark_balance(&p, pc.stark)?))
            },
            &mut manifest,
        )?;
        let mut csv = Csv::new(&["a_over_b", "epsilon", "Y", "g_2pi_MHz", "fidelity"]);
        for (&(y, g), f) in couplings.iter().zip(&fidelities) {
            csv.row(&[fmt_f64(r), fmt_f64(e), fmt_f64(y), fmt_f64(g), fmt_f64(*f)]);
        }
        let title = format!("a/b = {r}, epsilon = {e}, {} tier", tier.name());
        let svg = LinePlot {
            title: &title,
            x_label: "cooperativity Y",
            y_label: "fidelity",
            x_scale: Scale::Log,
            series: vec![Series {
                name: tier.name().into(),
                points: couplings.iter().zip(&fidelities).map(|(&(y, _), &f)| (y, f)).collect(),
                dashed: false,
            }],
        }
        .render();
        self.finish(Command::SweepCoop, manifest, csv, svg, clock)
    }

    fn steady(&self) -> Result<RunOutput, CliError> {
        let cfg = &self.config;
        let rp = reduced_params(cfg, cfg.a_over_b, cfg.epsilon)?;
        let m = matched(&rp).ok_or_else(|| CliError::Invalid {
            key: "physical.kappa2_2pi_MHz".into(),
            msg: "the closed form needs both atoms driven alike (kappa1 = kappa2)".into(),
        })?;
        let analytic = analytic_steady_state(&m)?;
        let mut out = format!(
            "a = {}, b = {} (us^-1/2), epsilon = {}\nanalytic\n{}",
            fmt_c64(m.a),
            fmt_c64(m.b),
            m.epsilon,
            format_density_matrix(&analytic)?
        );
        for &tier in &cfg.tiers {
            let numeric = match tier {
                Tier::Reduced => steady_state_nullspace(&liouvillian_matrix(&rp))?,
                _ => steady_point(cfg, tier, cfg.a_over_b, cfg.epsilon, None)?.marginal,
            };
            let diff = (&numeric - &analytic).frobenius_norm();
            out.push_str(&format!(
                "numeric ({})\n{}frobenius_difference = {}\n",
                tier.name(),
                format_density_matrix(&numeric)?,
                fmt_f64(diff)
            ));
        }
        Ok(RunOutput {
            stdout: out,
            files: Vec::new(),
            manifest: None,
        })
    }

    fn metrics(&self) -> Result<RunOutput, CliError> {
        let path = self.config.metrics_input.as_ref().ok_or_else(|| CliError::Invalid {
            key: "metrics.input".into(),
            msg: "missing".into(),
        })?;
        let rho = read_density_matrix(path)?;
        let report = MetricReport::of(&rho)?;
        let mut header = METRIC_COLUMNS.to_vec();
        let mut fields = report.values().map(fmt_f64).to_vec();
        if let Some(g) = self.oracle_gap(&rho, report.fidelity)? {
            header.push("oracle_gap");
            fields.push(fmt_f64(g));
        }
        let mut csv = Csv::new(&header);
        csv.row(&fields);
        Ok(RunOutput {
            stdout: csv.finish("-", &self.config_sha256),
            files: Vec::new(),
            manifest: None,
        })
    }
}

fn fmt_c64(z: C64) -> String {
    if z.im == 0.0 {
        fmt_f64(z.re)
    } else {
        format!("{}{:+?}i", fmt_f64(z.re), z.im)
    }
}
