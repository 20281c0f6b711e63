//! Command-line orchestration.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 solver
//! abort, 4 failed `--check`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;

use crate::config::{parse_config_with_overrides, Case, RunConfig};
use crate::diagnostics::{check_dissipation_budget, check_liapunov_monotone, check_mass_law};
use crate::error::{Error, Result};
use crate::experiments::{
    chemorepulsion_crosscheck, epsilon_sweep, run_limit, steady_state_study, SteadyLimit,
};
use crate::grid::Field;
use crate::mild::picard_iterate;
use crate::output::{write_diag, write_snapshot, write_summary, write_sweep};
use crate::stepper::{run, RunOptions, RunOutput};
use crate::tolerances::{
    BISTABLE_SUP_BOUND, CHEMOREPULSION_CAP, LIAPUNOV_SLACK, PICARD_CAP, POSITIVITY_TOL,
    STEADY_STATE_TOL, SWEEP_ERR0,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ABORT: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "clustering",
    version,
    about = "Run individual-clustering model experiments"
)]
pub struct Args {
    /// Run configuration (flat key = value file).
    #[arg(long)]
    pub config: PathBuf,

    /// Directory for output files; overrides `output_dir` in the config.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,

    /// Diagnostics format; overrides `format` in the config.
    #[arg(long, value_parser = ["csv", "json"])]
    pub format: Option<String>,

    /// Suppress progress messages.
    #[arg(long)]
    pub quiet: bool,

    /// Override a config key, applied after the file is parsed.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Evaluate the case's acceptance check and exit 4 if it fails.
    #[arg(long)]
    pub check: bool,

    /// Worker threads for the epsilon sweep (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Result of a case: whether its check held, plus a one-line summary.
struct Outcome {
    passed: bool,
    summary: String,
}

pub fn main_with(args: &Args) -> i32 {
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return EXIT_CONFIG;
        }
    };
    let mut cfg = match parse_config_with_overrides(&text, &args.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(f) = &args.format {
        cfg.format = f.parse().expect("clap restricts the format values");
    }
    let dir = args
        .output_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("output"));

    match execute(&cfg, &dir, args.workers) {
        Ok(outcome) => {
            if !args.quiet {
                eprintln!("{}: {}", cfg.case.name(), outcome.summary);
            }
            if args.check && !outcome.passed {
                eprintln!("check failed: {}", outcome.summary);
                return EXIT_CHECK;
            }
            if args.check && !args.quiet {
                eprintln!("check passed");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_solver_abort() {
        return EXIT_ABORT;
    }
    match e {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn execute(cfg: &RunConfig, dir: &Path, workers: Option<usize>) -> Result<Outcome> {
    let u0 = cfg.initial_field()?;
    fs::create_dir_all(dir)?;
    match cfg.case {
        Case::Monostable | Case::Bistable | Case::Limit => trajectory_case(cfg, &u0, dir),
        Case::ChemorepulsionCheck => chemorepulsion_case(cfg, &u0, dir),
        Case::EpsilonSweep => sweep_case(cfg, &u0, dir, workers),
        Case::SteadyState => steady_case(cfg, &u0, dir),
        Case::PicardCheck => picard_case(cfg, &u0, dir),
    }
}

fn run_options(cfg: &RunConfig) -> RunOptions {
    let mut opts = RunOptions::new(cfg.t_final, cfg.sample_every);
    opts.snapshot_times = cfg.snapshot_times.clone();
    opts.snapshot_every = cfg.snapshot_every;
    opts
}

fn write_run(cfg: &RunConfig, out: &RunOutput, dir: &Path) -> Result<()> {
    write_diag(dir, &out.records, cfg.format)?;
    if out.snapshots.is_empty() {
        write_snapshot(dir, &out.final_state, &cfg.params)?;
    }
    for s in &out.snapshots {
        write_snapshot(dir, s, &cfg.params)?;
    }
    Ok(())
}

fn trajectory_case(cfg: &RunConfig, u0: &Field, dir: &Path) -> Result<Outcome> {
    let opts = run_options(cfg);
    let out = if cfg.case == Case::Limit {
        run_limit(u0, &cfg.params, &cfg.stepper, &opts)?
    } else {
        run(u0, &cfg.params, &cfg.stepper, &opts)?
    };
    write_run(cfg, &out, dir)?;

    let mut failures = Vec::new();
    if let Err(v) = check_mass_law(&out.records, &cfg.params) {
        failures.push(format!(
            "mass {} exceeds {} at sample {}",
            v.mass, v.bound, v.index
        ));
    }
    match cfg.case {
        Case::Monostable => {
            if let Err(v) = check_liapunov_monotone(&out.records, LIAPUNOV_SLACK) {
                failures.push(format!(
                    "Liapunov functional increased at sample {}",
                    v.index
                ));
            }
            if let Err(excess) = check_dissipation_budget(&out.records, &out.records[0]) {
                failures.push(format!("dissipation exceeds its budget by {excess}"));
            }
        }
        Case::Bistable => {
            let max = out.records.iter().map(|r| r.max_u).fold(f64::MIN, f64::max);
            let min = out.records.iter().map(|r| r.min_u).fold(f64::MAX, f64::min);
            if max > BISTABLE_SUP_BOUND || min < -POSITIVITY_TOL {
                failures.push(format!(
                    "range [{min}, {max}] outside [0, {BISTABLE_SUP_BOUND}]"
                ));
            }
        }
        _ => {}
    }
    let summary = format!(
        "{} steps to t = {}, {} records, {} snapshots",
        out.steps,
        out.final_state.t,
        out.records.len(),
        out.snapshots.len().max(1)
    );
    Ok(outcome(failures, summary))
}

fn outcome(failures: Vec<String>, summary: String) -> Outcome {
    if failures.is_empty() {
        Outcome {
            passed: true,
            summary,
        }
    } else {
        Outcome {
            passed: false,
            summary: format!("{summary}; {}", failures.join("; ")),
        }
    }
}

#[derive(Serialize)]
struct CrosscheckSummary {
    deviation: f64,
    cap: f64,
    pass: bool,
}

fn chemorepulsion_case(cfg: &RunConfig, u0: &Field, dir: &Path) -> Result<Outcome> {
    if cfg.params.r != 0.0 {
        return Err(Error::config(None, "chemorepulsion-check requires r = 0"));
    }
    let deviation = chemorepulsion_crosscheck(
        u0,
        cfg.params.delta,
        cfg.params.epsilon,
        &cfg.stepper,
        cfg.t_final,
    )?;
    let pass = deviation <= CHEMOREPULSION_CAP;
    write_summary(
        dir,
        &CrosscheckSummary {
            deviation,
            cap: CHEMOREPULSION_CAP,
            pass,
        },
    )?;
    Ok(Outcome {
        passed: pass,
        summary: format!("max deviation {deviation:e} (cap {CHEMOREPULSION_CAP:e})"),
    })
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    epsilon_list: &'a [f64],
    errors: &'a [f64],
    runtimes: &'a [f64],
    limit_runtime: f64,
    err0: f64,
    strictly_decreasing: bool,
    below_err0: bool,
    pass: bool,
}

fn sweep_case(cfg: &RunConfig, u0: &Field, dir: &Path, workers: Option<usize>) -> Result<Outcome> {
    let res = epsilon_sweep(
        u0,
        &cfg.params,
        &cfg.stepper,
        cfg.t_final,
        &cfg.epsilon_list,
        workers,
    )?;
    let strictly_decreasing = res.is_strictly_decreasing();
    let smallest = *res.errors.last().expect("nonempty epsilon list");
    let below_err0 = smallest <= SWEEP_ERR0;
    let pass = strictly_decreasing && below_err0;
    write_sweep(
        dir,
        &res,
        &SweepSummary {
            epsilon_list: &res.epsilon_list,
            errors: &res.errors,
            runtimes: &res.runtimes,
            limit_runtime: res.limit_runtime,
            err0: SWEEP_ERR0,
            strictly_decreasing,
            below_err0,
            pass,
        },
    )?;
    Ok(Outcome {
        passed: pass,
        summary: format!(
            "errors {:?}, strictly decreasing: {strictly_decreasing}, smallest {smallest:e} (err0 {SWEEP_ERR0:e})",
            res.errors
        ),
    })
}

#[derive(Serialize)]
struct SteadySummary<'a> {
    limit: SteadyLimit,
    final_distance: f64,
    steady_at: Option<f64>,
    converged: bool,
    tolerance: Option<f64>,
    pass: bool,
    curve: &'a [(f64, f64)],
}

fn steady_case(cfg: &RunConfig, u0: &Field, dir: &Path) -> Result<Outcome> {
    let rep = steady_state_study(u0, &cfg.params, &cfg.stepper, cfg.t_final)?;
    write_diag(dir, &rep.run.records, cfg.format)?;
    write_snapshot(dir, &rep.run.final_state, &cfg.params)?;
    let (pass, tolerance) = if cfg.params.r == 0.0 {
        (
            rep.final_distance <= STEADY_STATE_TOL,
            Some(STEADY_STATE_TOL),
        )
    } else {
        (rep.limit != SteadyLimit::Undecided, None)
    };
    write_summary(
        dir,
        &SteadySummary {
            limit: rep.limit,
            final_distance: rep.final_distance,
            steady_at: rep.steady_at,
            converged: rep.converged(),
            tolerance,
            pass,
            curve: &rep.curve,
        },
    )?;
    Ok(Outcome {
        passed: pass,
        summary: format!(
            "limit {:?}, final distance {:e}, detector {}",
            rep.limit,
            rep.final_distance,
            rep.steady_at
                .map_or("did not fire".to_string(), |t| format!("fired at t = {t}"))
        ),
    })
}

#[derive(Serialize)]
struct PicardSummary<'a> {
    iterations: usize,
    residuals: &'a [f64],
    contraction_ratio: Option<f64>,
    converged: bool,
    stepper_difference: f64,
    cap: f64,
    pass: bool,
}

fn picard_case(cfg: &RunConfig, u0: &Field, dir: &Path) -> Result<Outcome> {
    let s = cfg.picard;
    let fixed = picard_iterate(u0, &cfg.params, cfg.t_final, s.samples, s.tol, s.max_iter)?;
    let stepped = run(
        u0,
        &cfg.params,
        &cfg.stepper,
        &RunOptions::new(cfg.t_final, usize::MAX),
    )?;
    let diff = fixed.trajectory.last().l2_distance(&stepped.final_state.u);
    let contracting = fixed.contraction_ratio.is_none_or(|q| q < 1.0);
    let pass = fixed.converged && contracting && diff <= PICARD_CAP;
    write_summary(
        dir,
        &PicardSummary {
            iterations: fixed.iterations,
            residuals: &fixed.residuals,
            contraction_ratio: fixed.contraction_ratio,
            converged: fixed.converged,
            stepper_difference: diff,
            cap: PICARD_CAP,
            pass,
        },
    )?;
    Ok(Outcome {
        passed: pass,
        summary: format!(
            "{} iterations, ratio {:?}, difference to stepper {diff:e} (cap {PICARD_CAP:e})",
            fixed.iterations, fixed.contraction_ratio
        ),
    })
}
