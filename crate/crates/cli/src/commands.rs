//! The three subcommands. Each returns its report or a [`CliError`] that
//! maps to the process exit status.

use std::fs;
use std::path::Path;
use std::thread;
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use quench_core::analysis::{check_envelopes, default_fit_floor, fit_points, fit_quench_rate};
use quench_core::integrate::march_fixed;
use quench_core::{
    detect_quench, lower_bound_t, validate, ConvergenceReport, Grid, ICValidationReport,
    QuenchSide, StateVector, Termination,
};
use thiserror::Error;

use crate::artifacts::{
    self, ArtifactPaths, LogLogRow, RunManifest, RunSummary, CONVERGENCE_FILE, MANIFEST_FILE,
};
use crate::config::{Config, ConfigError, ConvergenceSettings};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("initial condition fails the quenching hypotheses")]
    Hypothesis,
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Hypothesis => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn runtime(context: &str) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

/// Checks the initial condition against the quenching hypotheses.
pub fn validate_ic(cfg: &Config) -> ICValidationReport {
    validate(&cfg.ic, &cfg.problem, cfg.analysis.compat_tol)
}

pub fn validate_ic_status(report: &ICValidationReport) -> Result<(), CliError> {
    if report.hypotheses_ok {
        Ok(())
    } else {
        Err(CliError::Hypothesis)
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Runs one experiment and writes trajectory, summary, log-log data and,
/// last, the manifest into `cfg.output_dir`.
pub fn run(cfg: &Config) -> Result<RunSummary, CliError> {
    let exp = cfg.experiment()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(runtime("cannot create output directory"))?;
    let paths = ArtifactPaths::in_dir(dir);
    let started_at = unix_now();
    let validation = validate(&cfg.ic, &cfg.problem, cfg.analysis.compat_tol);

    let (rec, rep) = match quench_core::run(&exp) {
        Ok(out) => out,
        Err(e) => {
            let summary = RunSummary {
                termination: None,
                error: Some(e.to_string()),
                step_count: 0,
                rejections: 0,
                steps_below_tau_min: 0,
                quench: None,
                bounds: None,
                rate_fit: None,
                rate_fit_error: None,
                envelope: None,
                validation,
            };
            artifacts::write_json(&paths.summary, &summary)
                .map_err(runtime("cannot write summary"))?;
            return Err(CliError::Runtime(format!("solver aborted: {e}")));
        }
    };
    info!(
        "{:?} after {} steps at t = {}, side {:?}",
        rec.termination, rec.step_count, rep.t_est, rep.side
    );

    let wall = rep.side.wall().or(validation.predicted_quench_side.wall());
    let bounds = wall.map(|w| lower_bound_t(w, &cfg.problem, &cfg.ic));
    let floor = cfg
        .analysis
        .fit_floor
        .unwrap_or_else(|| default_fit_floor(&rec));
    let decades = cfg.analysis.window_decades;
    let (rate_fit, rate_fit_error, envelope, loglog) = if rep.side == QuenchSide::None {
        (None, None, None, Vec::new())
    } else {
        match fit_quench_rate(&rec, &rep, decades, floor) {
            Ok(fit) => {
                let envelope =
                    bounds.and_then(|b| check_envelopes(&rec, &rep, &b, decades, floor).ok());
                let rows = fit_points(&rec, &rep, decades, floor)
                    .unwrap_or_default()
                    .into_iter()
                    .map(|(dt, y)| LogLogRow {
                        log_t_minus_t: dt.ln(),
                        log_y: y.ln(),
                    })
                    .collect();
                (Some(fit), None, envelope, rows)
            }
            Err(e) => {
                warn!("no rate fit: {e}");
                (None, Some(e.to_string()), None, Vec::new())
            }
        }
    };

    let summary = RunSummary {
        termination: Some(rec.termination),
        error: None,
        step_count: rec.step_count,
        rejections: rec.rejections,
        steps_below_tau_min: rec.steps_below_tau_min,
        quench: Some(rep),
        bounds,
        rate_fit,
        rate_fit_error,
        envelope,
        validation,
    };
    artifacts::write_trajectory(&paths.trajectory, &rec.samples)
        .map_err(runtime("cannot write trajectory"))?;
    artifacts::write_json(&paths.summary, &summary).map_err(runtime("cannot write summary"))?;
    artifacts::write_loglog(&paths.loglog, &loglog)
        .map_err(runtime("cannot write log-log data"))?;

    if rec.termination == Termination::StepFloorStall {
        return Err(CliError::Runtime(format!(
            "solver stalled at t = {} after {} steps",
            rec.final_state.t, rec.step_count
        )));
    }
    let manifest = RunManifest {
        config: cfg.clone(),
        artifacts: paths,
        started_at,
        finished_at: unix_now(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
    };
    artifacts::write_json_atomic(&dir.join(MANIFEST_FILE), &manifest)
        .map_err(runtime("cannot write manifest"))?;
    Ok(summary)
}

/// Fixed-step state at the comparison time. The walls move monotonically
/// towards their singular values, so a final state short of the threshold
/// means the whole march stayed short of it.
fn state_at(
    cfg: &Config,
    set: &ConvergenceSettings,
    grid: &Grid,
    tau: f64,
    steps: usize,
) -> Result<StateVector, CliError> {
    let v0 = StateVector::from_ic(&cfg.ic, grid);
    let beyond = |why: String| {
        CliError::Runtime(format!(
            "comparison time {} is not before the quench (tau = {tau}): {why}",
            set.compare_time
        ))
    };
    let v = march_fixed(&v0, tau, steps, &cfg.problem, grid).map_err(|e| beyond(e.to_string()))?;
    match detect_quench(&v, set.epsilon_quench) {
        QuenchSide::None => Ok(v),
        side => Err(beyond(format!("{side:?} wall reached the threshold"))),
    }
}

/// Temporal order study: fixed-step runs with tau, tau / 2 and
/// tau / divisor to the comparison time, run concurrently.
pub fn convergence(cfg: &Config) -> Result<ConvergenceReport, CliError> {
    let set = cfg.convergence()?;
    let grid = Grid::new(cfg.problem.a, set.n).map_err(|e| CliError::Runtime(e.to_string()))?;
    let base_steps = (set.compare_time / set.tau).round() as usize;
    let divisor = set.divisor as usize;
    let plans = [
        (set.tau, base_steps),
        (set.tau / 2.0, 2 * base_steps),
        (set.tau / set.divisor as f64, divisor * base_steps),
    ];
    let states: Vec<Result<StateVector, CliError>> = thread::scope(|s| {
        let handles: Vec<_> = plans
            .iter()
            .map(|&(tau, steps)| {
                let grid = &grid;
                let set = &set;
                s.spawn(move || state_at(cfg, set, grid, tau, steps))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("order study thread panicked"))
            .collect()
    });
    let mut states = states.into_iter().collect::<Result<Vec<_>, _>>()?;
    let reference = states.pop().expect("three runs");
    let half = states.pop().expect("three runs");
    let coarse = states.pop().expect("three runs");
    let report = quench_core::estimate_order(&coarse, &half, &reference)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    info!(
        "median order {} over {} nodes (tau = {}, h = {}, t = {})",
        report.median_order,
        report.nodes_used.len(),
        set.tau,
        grid.h(),
        set.compare_time
    );

    fs::create_dir_all(&cfg.output_dir).map_err(runtime("cannot create output directory"))?;
    artifacts::write_json(&cfg.output_dir.join(CONVERGENCE_FILE), &report)
        .map_err(runtime("cannot write report"))?;
    Ok(report)
}

/// Applies a command-line `--output-dir` over the config's own.
pub fn with_output_dir(mut cfg: Config, dir: Option<&Path>) -> Config {
    if let Some(dir) = dir {
        cfg.output_dir = dir.to_path_buf();
    }
    cfg
}
