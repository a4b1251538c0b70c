use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::{Scenario, ScenarioConfig};
use super::svg::{Plot, Series};
use crate::curvfun::{
    check_classK_bound, check_ineq_371, check_strict_concavity, min_eigenvalue, CurvatureVector,
    FunctionSpec, CONCAVITY_TOL,
};
use crate::diagnostics::{
    decay_series, fit_decay_default, trajectory_diagnostics, DiagnosticsRecord, DECAY_QUANTITIES,
};
use crate::error::{Error, Result};
use crate::flow::{
    dual_run, run_partial, spherical_theta, spherical_tstar, Direction, FlowSpec, Trajectory,
};
use crate::hypersurface::fmt17;
use crate::rng::AuditRng;

/// Process exit status of a subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok = 0,
    ToleranceUnmet = 1,
    ConfigError = 2,
    RuntimeError = 3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub status: Status,
    pub message: String,
}

impl Outcome {
    fn new(status: Status, message: impl Into<String>) -> Self {
        Outcome {
            status,
            message: message.into(),
        }
    }

    fn config(e: Error) -> Self {
        Outcome::new(Status::ConfigError, e.to_string())
    }

    fn runtime(e: Error) -> Self {
        Outcome::new(Status::RuntimeError, e.to_string())
    }
}

/// Decay fit of one observable, as recorded in `meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitEntry {
    pub quantity: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Everything a `run` produces before it is written to disk.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub trajectory: Option<Trajectory>,
    pub records: Vec<DiagnosticsRecord>,
    pub fits: Vec<FitEntry>,
    pub error: Option<Error>,
}

pub fn decay_fits(records: &[DiagnosticsRecord]) -> Vec<FitEntry> {
    DECAY_QUANTITIES
        .iter()
        .map(|q| {
            let fit = decay_series(records, q).and_then(|s| fit_decay_default(&s));
            match fit {
                Ok(f) => FitEntry {
                    quantity: q.to_string(),
                    rate: Some(f.rate),
                    residual: Some(f.residual),
                    window: Some(f.window),
                    error: None,
                },
                Err(e) => FitEntry {
                    quantity: q.to_string(),
                    rate: None,
                    residual: None,
                    window: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Runs the flow and evaluates diagnostics on every snapshot. A flow error
/// keeps the trajectory up to the failure.
pub fn execute(scenario: &Scenario) -> RunReport {
    let (trajectory, mut error) = run_partial(&scenario.flow, scenario.initial.clone());
    let mut records = Vec::new();
    if let Some(traj) = &trajectory {
        match trajectory_diagnostics(traj, &scenario.flow.curvature, &scenario.config.sigmas) {
            Ok(r) => records = r,
            Err(e) => {
                error.get_or_insert(e);
            }
        }
    }
    let fits = decay_fits(&records);
    RunReport {
        trajectory,
        records,
        fits,
        error,
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Output directory of a scenario under `root`.
pub fn scenario_dir(root: &Path, config: &ScenarioConfig) -> PathBuf {
    root.join(config.output_dir.as_deref().unwrap_or(&config.name))
}

pub const SERIES_HEADER: &str =
    "t,theta_ref,u_min,u_max,pinch_ratio,F_tilde_min,F_tilde_max,f_sigma,tracefree";

pub fn series_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::from(SERIES_HEADER);
    out.push('\n');
    for r in records {
        let f_sigma = r.f_sigma.first().map_or(f64::NAN, |(_, v)| *v);
        let fields = [
            r.t,
            r.theta,
            r.u_min,
            r.u_max,
            r.pinch_ratio,
            r.ftilde_min,
            r.ftilde_max,
            f_sigma,
            r.tracefree,
        ];
        let line: Vec<String> = fields.iter().map(|x| fmt17(*x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct RunMeta<'a> {
    name: &'a str,
    config: &'a ScenarioConfig,
    flow: &'a FlowSpec,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    steps: usize,
    final_time: f64,
    tstar_bracket: Option<(f64, f64)>,
    tstar_est: Option<f64>,
    monotone: Option<bool>,
    snapshots: usize,
    /// `(sigma, max over snapshots of f_sigma)` for every configured sigma.
    f_sigma_max: Vec<(f64, f64)>,
    decay_fits: &'a [FitEntry],
}

fn u_overlay(traj: &Trajectory) -> Plot {
    let count = traj.snapshots.len();
    let picks: Vec<usize> = if count <= 6 {
        (0..count).collect()
    } else {
        let mut p: Vec<usize> = (0..6).map(|i| i * (count - 1) / 5).collect();
        p.dedup();
        p
    };
    Plot {
        title: "u(theta) at selected times".into(),
        x_label: "theta".into(),
        y_label: "u".into(),
        log_y: false,
        series: picks
            .into_iter()
            .map(|i| {
                let s = &traj.snapshots[i];
                Series {
                    label: format!("t = {:.4}", s.t),
                    points: s
                        .graph
                        .grid()
                        .thetas()
                        .into_iter()
                        .zip(s.graph.values().iter().copied())
                        .collect(),
                }
            })
            .collect(),
    }
}

fn decay_plot(records: &[DiagnosticsRecord]) -> Plot {
    let series = ["tracefree_rescaled", "ftilde_range", "u_rescaled_dev"]
        .iter()
        .map(|q| Series {
            label: q.to_string(),
            points: decay_series(records, q).unwrap_or_default(),
        })
        .collect();
    Plot {
        title: "decay of rescaled observables".into(),
        x_label: "tau".into(),
        y_label: "value".into(),
        log_y: true,
        series,
    }
}

/// Writes `series.csv`, `meta.json`, snapshot files and plots.
pub fn write_run(dir: &Path, scenario: &Scenario, report: &RunReport) -> Result<()> {
    create_dir(dir)?;
    let traj = report.trajectory.as_ref();
    let meta = RunMeta {
        name: &scenario.config.name,
        config: &scenario.config,
        flow: &scenario.flow,
        status: if report.error.is_some() {
            "error"
        } else {
            "ok"
        },
        error: report.error.as_ref().map(|e| e.to_string()),
        steps: traj.map_or(0, |t| t.dts.len()),
        final_time: traj.map_or(0.0, |t| t.final_time()),
        tstar_bracket: traj.map(|t| t.tstar_bracket),
        tstar_est: traj.map(|t| t.tstar_est),
        monotone: traj.map(|t| t.monotone),
        snapshots: traj.map_or(0, |t| t.snapshots.len()),
        f_sigma_max: scenario
            .config
            .sigmas
            .iter()
            .map(|&s| {
                let sup = report
                    .records
                    .iter()
                    .filter_map(|r| r.f_sigma_for(s))
                    .fold(f64::NEG_INFINITY, f64::max);
                (s, sup)
            })
            .collect(),
        decay_fits: &report.fits,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
    write(&dir.join("meta.json"), &(json + "\n"))?;
    write(&dir.join("series.csv"), &series_csv(&report.records))?;
    if let Some(traj) = traj {
        let snaps = dir.join("snapshots");
        create_dir(&snaps)?;
        for (i, s) in traj.snapshots.iter().enumerate() {
            write(&snaps.join(format!("{i:05}.txt")), &s.graph.to_text())?;
        }
        write(&dir.join("u_overlay.svg"), &u_overlay(traj).render())?;
    }
    write(
        &dir.join("decay.svg"),
        &decay_plot(&report.records).render(),
    )?;
    Ok(())
}

fn load(path: &Path) -> std::result::Result<Scenario, Outcome> {
    ScenarioConfig::load(path)
        .and_then(|c| c.build())
        .map_err(|e| Outcome::config(Error::Config(format!("{}: {e}", path.display()))))
}

pub fn cmd_run(path: &Path, out_root: &Path) -> Outcome {
    let scenario = match load(path) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let report = execute(&scenario);
    let dir = scenario_dir(out_root, &scenario.config);
    if let Err(e) = write_run(&dir, &scenario, &report) {
        return Outcome::runtime(e);
    }
    match (&report.error, &report.trajectory) {
        (Some(e), _) => Outcome::runtime(Error::Numeric(format!(
            "{}: {e}; partial output in {}",
            scenario.config.name,
            dir.display()
        ))),
        (None, Some(t)) => Outcome::new(
            Status::Ok,
            format!(
                "{}: {} steps, Tstar_est = {}, output in {}",
                scenario.config.name,
                t.dts.len(),
                fmt17(t.tstar_est),
                dir.display()
            ),
        ),
        (None, None) => unreachable!("a run without error has a trajectory"),
    }
}

pub const DEFAULT_DUAL_TOLERANCE: f64 = 5e-3;

pub fn cmd_dual_check(path: &Path, out_root: &Path) -> Outcome {
    let scenario = match load(path) {
        Ok(s) => s,
        Err(o) => return o,
    };
    if scenario.flow.direction != Direction::Contracting {
        return Outcome::config(Error::Config(format!(
            "{}: dual-check needs a contracting scenario",
            path.display()
        )));
    }
    let tol = scenario.config.tolerance.unwrap_or(DEFAULT_DUAL_TOLERANCE);
    let dir = scenario_dir(out_root, &scenario.config);
    let result = create_dir(&dir).and_then(|_| dual_run(&scenario.flow, scenario.initial.clone()));
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            let _ = write(&dir.join("error.txt"), &format!("{e}\n"));
            return Outcome::runtime(e);
        }
    };
    let mut csv = String::from("t,d\n");
    for (t, d) in report.times.iter().zip(&report.distances) {
        let _ = writeln!(csv, "{},{}", fmt17(*t), fmt17(*d));
    }
    let summary = format!("max_d {}\ntolerance {}\n", fmt17(report.max_d), fmt17(tol));
    if let Err(e) =
        write(&dir.join("dual.csv"), &csv).and_then(|_| write(&dir.join("summary.txt"), &summary))
    {
        return Outcome::runtime(e);
    }
    let status = if report.max_d <= tol {
        Status::Ok
    } else {
        Status::ToleranceUnmet
    };
    Outcome::new(
        status,
        format!(
            "{}: max_d = {} (tolerance {})",
            scenario.config.name,
            fmt17(report.max_d),
            fmt17(tol)
        ),
    )
}

pub const DEFAULT_BENCHMARK_TOLERANCE: f64 = 1e-6;

/// Closed-form radius of a spherical run at time `t`.
fn sphere_exact(direction: Direction, tstar: f64, t: f64) -> Result<f64> {
    let theta = spherical_theta(t, tstar)?;
    Ok(match direction {
        Direction::Contracting => theta,
        Direction::Expanding => FRAC_PI_2 - theta,
    })
}

#[derive(Serialize)]
struct BenchmarkMeta<'a> {
    name: &'a str,
    max_error: f64,
    tolerance: f64,
    tstar_exact: f64,
    tstar_est: f64,
    steps: usize,
    runtime_seconds: f64,
}

pub fn cmd_benchmark(path: &Path, out_root: &Path) -> Outcome {
    let scenario = match load(path) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let Some(r0) = scenario.config.sphere_radius() else {
        return Outcome::config(Error::Config(format!(
            "{}: benchmark needs a spherical initial shape",
            path.display()
        )));
    };
    let direction = scenario.flow.direction;
    let tstar = match direction {
        Direction::Contracting => spherical_tstar(r0),
        Direction::Expanding => spherical_tstar(FRAC_PI_2 - r0),
    };
    let tol = scenario
        .config
        .tolerance
        .unwrap_or(DEFAULT_BENCHMARK_TOLERANCE);
    let dir = scenario_dir(out_root, &scenario.config);
    let start = Instant::now();
    let (traj, err) = run_partial(&scenario.flow, scenario.initial.clone());
    let runtime = start.elapsed().as_secs_f64();
    if let Some(e) = err {
        return Outcome::runtime(e);
    }
    let traj = traj.expect("a run without error has a trajectory");
    let mut csv = String::from("t,exact,max_error\n");
    let mut max_error = 0.0f64;
    for s in &traj.snapshots {
        let exact = match sphere_exact(direction, tstar, s.t) {
            Ok(x) => x,
            Err(e) => return Outcome::runtime(e),
        };
        let err = s
            .graph
            .values()
            .iter()
            .fold(0.0f64, |m, u| m.max((u - exact).abs()));
        max_error = max_error.max(err);
        let _ = writeln!(csv, "{},{},{}", fmt17(s.t), fmt17(exact), fmt17(err));
    }
    let meta = BenchmarkMeta {
        name: &scenario.config.name,
        max_error,
        tolerance: tol,
        tstar_exact: tstar,
        tstar_est: traj.tstar_est,
        steps: traj.dts.len(),
        runtime_seconds: runtime,
    };
    let json = serde_json::to_string_pretty(&meta).expect("plain data serializes");
    if let Err(e) = create_dir(&dir)
        .and_then(|_| write(&dir.join("benchmark.csv"), &csv))
        .and_then(|_| write(&dir.join("benchmark.json"), &(json + "\n")))
    {
        return Outcome::runtime(e);
    }
    let status = if max_error <= tol {
        Status::Ok
    } else {
        Status::ToleranceUnmet
    };
    Outcome::new(
        status,
        format!(
            "{}: max error {} (tolerance {}), Tstar_est {} vs {}, {runtime:.2} s",
            scenario.config.name,
            fmt17(max_error),
            fmt17(tol),
            fmt17(traj.tstar_est),
            fmt17(tstar)
        ),
    )
}

/// Lower bounds of the audited residuals.
pub const INEQ_TOL: f64 = 1e-10;
pub const CLASS_K_TOL: f64 = 1e-10;

/// One audited (sample, function) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditRow {
    pub sample: usize,
    pub spec: FunctionSpec,
    pub kappa: Vec<f64>,
    pub null_multiplicity: usize,
    pub strict: bool,
    /// Largest eigenvalue outside the null band, relative to the spectral
    /// radius.
    pub max_nonnull: f64,
    pub ineq_371: Option<f64>,
    pub class_k_min: Option<f64>,
    pub violation: bool,
}

/// The functions audited in dimension `n`: `sigma_k` for `k >= 2`, every
/// inverse, and `H/n`, which is linear and expected to be non-strict.
pub fn audit_specs(n: usize) -> Vec<FunctionSpec> {
    let mut specs: Vec<FunctionSpec> = (2..=n).map(FunctionSpec::SigmaK).collect();
    specs.push(FunctionSpec::MeanNormalized.inverse());
    specs.extend((2..=n).map(|k| FunctionSpec::SigmaK(k).inverse()));
    specs.push(FunctionSpec::MeanNormalized);
    specs
}

pub fn concavity_audit(n: usize, samples: usize, seed: u64) -> Result<Vec<AuditRow>> {
    if !(2..=8).contains(&n) {
        return Err(Error::Argument(format!(
            "audit dimension must be in 2..=8, got {n}"
        )));
    }
    let specs = audit_specs(n);
    let mut rng = AuditRng::seeded(seed);
    let mut rows = Vec::with_capacity(samples * specs.len());
    for sample in 0..samples {
        let kappa = rng.log_uniform(n, 0.1, 10.0);
        let xi = rng.normal_vec(n);
        let kv = CurvatureVector::new(kappa.clone())?;
        for spec in &specs {
            let verdict = check_strict_concavity(spec, &kv, CONCAVITY_TOL)?;
            let radius = verdict
                .eigenvalues
                .iter()
                .fold(0.0f64, |m, e| m.max(e.abs()));
            let band = CONCAVITY_TOL * radius;
            let max_nonnull = verdict
                .eigenvalues
                .iter()
                .filter(|e| e.abs() > band)
                .fold(f64::NEG_INFINITY, |m, e| m.max(*e / radius));
            let ineq_371 = match spec {
                FunctionSpec::SigmaK(k) => Some(check_ineq_371(&kv, k - 1, &xi)?),
                _ => None,
            };
            let class_k_min = if spec.is_inverse() {
                Some(min_eigenvalue(&check_classK_bound(spec, &kv)?)?)
            } else {
                None
            };
            let shape_ok = match spec {
                FunctionSpec::MeanNormalized => verdict.null_multiplicity == n,
                _ => verdict.is_strictly_concave_at_point,
            };
            let violation = !shape_ok
                || ineq_371.is_some_and(|r| r < -INEQ_TOL)
                || class_k_min.is_some_and(|m| m < -CLASS_K_TOL);
            rows.push(AuditRow {
                sample,
                spec: spec.clone(),
                kappa: kappa.clone(),
                null_multiplicity: verdict.null_multiplicity,
                strict: verdict.is_strictly_concave_at_point,
                max_nonnull,
                ineq_371,
                class_k_min,
                violation,
            });
        }
    }
    Ok(rows)
}

pub fn audit_csv(rows: &[AuditRow]) -> String {
    let mut out = String::from(
        "sample,spec,kappa,null_multiplicity,strict,max_nonnull_eigenvalue,ineq_371,class_k_min_eigenvalue,violation\n",
    );
    let opt = |x: Option<f64>| x.map_or(String::new(), fmt17);
    for r in rows {
        let kappa: Vec<String> = r.kappa.iter().map(|k| fmt17(*k)).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.sample,
            r.spec,
            kappa.join(";"),
            r.null_multiplicity,
            r.strict,
            fmt17(r.max_nonnull),
            opt(r.ineq_371),
            opt(r.class_k_min),
            r.violation
        );
    }
    out
}

pub fn cmd_concavity_audit(n: usize, samples: usize, seed: u64, out_root: &Path) -> Outcome {
    let rows = match concavity_audit(n, samples, seed) {
        Ok(r) => r,
        Err(e @ Error::Argument(_)) => return Outcome::config(e),
        Err(e) => return Outcome::runtime(e),
    };
    let dir = out_root.join(format!("concavity_audit_n{n}_seed{seed}"));
    if let Err(e) = create_dir(&dir).and_then(|_| write(&dir.join("audit.csv"), &audit_csv(&rows)))
    {
        return Outcome::runtime(e);
    }
    let violations = rows.iter().filter(|r| r.violation).count();
    let status = if violations == 0 {
        Status::Ok
    } else {
        Status::ToleranceUnmet
    };
    Outcome::new(
        status,
        format!(
            "concavity audit n = {n}: {} checks, {violations} violations, output in {}",
            rows.len(),
            dir.display()
        ),
    )
}
