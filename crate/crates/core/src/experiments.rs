//! Studies built on the stepper: the singular-limit solver, the epsilon sweep,
//! the chemorepulsion cross-check and the long-time behaviour.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::fmt_f64;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::model::{ModelParams, SimState};
use crate::stepper::{run_scheme, step_with, RunOptions, RunOutput, Scheme, StepperConfig};
use crate::tolerances::{CLASSIFY_TOL, STEADY_DETECTOR_TOL};

/// One step of `u_t = (delta u + u^2 / 2)_xx + r u (1 - u)`.
pub fn step_limit(state: &SimState, p: &ModelParams, cfg: &StepperConfig) -> Result<SimState> {
    step_with(state, p, cfg, Scheme::Limit)
}

pub fn run_limit(
    u0: &Field,
    p: &ModelParams,
    cfg: &StepperConfig,
    opts: &RunOptions,
) -> Result<RunOutput> {
    run_scheme(u0, p, cfg, opts, Scheme::Limit)
}

/// Runs `u_t = delta u_xx + (u psi_x)_x`, `-eps psi_xx + psi = u`, `psi_x(+-1) = 0`.
pub fn run_chemorepulsion(
    u0: &Field,
    p: &ModelParams,
    cfg: &StepperConfig,
    opts: &RunOptions,
) -> Result<RunOutput> {
    if p.r != 0.0 {
        return Err(Error::invalid("the chemorepulsion form needs r = 0"));
    }
    run_scheme(u0, p, cfg, opts, Scheme::Chemorepulsion)
}

/// Number of time intervals between sweep snapshots.
const SWEEP_INTERVALS: usize = 200;

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub epsilon_list: Vec<f64>,
    /// `int_0^T ||u_eps - u||^2 dt` for each epsilon.
    pub errors: Vec<f64>,
    pub runtimes: Vec<f64>,
    /// Wall time of the limit run.
    pub limit_runtime: f64,
}

impl SweepResult {
    pub fn is_strictly_decreasing(&self) -> bool {
        self.errors.windows(2).all(|w| w[1] < w[0])
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.errors.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,error,runtime_seconds\n");
        for ((e, err), rt) in self
            .epsilon_list
            .iter()
            .zip(&self.errors)
            .zip(&self.runtimes)
        {
            s.push_str(&format!(
                "{},{},{}\n",
                fmt_f64(*e),
                fmt_f64(*err),
                fmt_f64(*rt)
            ));
        }
        s
    }
}

fn sweep_options(t_final: f64, dt: f64) -> RunOptions {
    let steps = ((t_final / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut opts = RunOptions::new(t_final, usize::MAX);
    opts.snapshot_every = Some((steps / SWEEP_INTERVALS).max(1));
    opts
}

/// Trapezoidal `int ||a(t) - b(t)||^2 dt` over matching snapshot lists.
fn squared_distance_integral(a: &[SimState], b: &[SimState]) -> Result<f64> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.t != y.t) {
        return Err(Error::invalid("snapshot schedules differ"));
    }
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x.u.l2_distance(&y.u).powi(2))
        .collect();
    Ok(a.windows(2)
        .zip(d.windows(2))
        .map(|(s, v)| 0.5 * (s[1].t - s[0].t) * (v[0] + v[1]))
        .sum())
}

/// Coupled runs for each epsilon against one limit run, on identical grid, dt
/// and snapshot times. `workers = None` uses the global rayon pool.
pub fn epsilon_sweep(
    u0: &Field,
    p_base: &ModelParams,
    cfg: &StepperConfig,
    t_final: f64,
    epsilon_list: &[f64],
    workers: Option<usize>,
) -> Result<SweepResult> {
    if !p_base.law.is_monostable() {
        return Err(Error::invalid("the epsilon sweep needs the monostable law"));
    }
    if epsilon_list.is_empty() {
        return Err(Error::invalid("epsilon list is empty"));
    }
    if epsilon_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::invalid("epsilon values must be positive"));
    }
    if epsilon_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("epsilon list must be strictly decreasing"));
    }
    let opts = sweep_options(t_final, cfg.dt);

    // Job 0 is the limit run; job i > 0 is epsilon_list[i - 1].
    let job = |i: usize| -> Result<(RunOutput, f64)> {
        let start = Instant::now();
        let out = if i == 0 {
            run_limit(u0, p_base, cfg, &opts)?
        } else {
            let eps = epsilon_list[i - 1];
            let p = p_base.with_epsilon(eps);
            run_scheme(u0, &p, cfg, &opts, Scheme::Coupled).map_err(|e| Error::Sweep {
                epsilon: eps,
                source: Box::new(e),
            })?
        };
        Ok((out, start.elapsed().as_secs_f64()))
    };
    let jobs = 0..=epsilon_list.len();
    let results: Vec<Result<(RunOutput, f64)>> = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?
            .install(|| jobs.into_par_iter().map(job).collect()),
        None => jobs.into_par_iter().map(job).collect(),
    };
    let mut results = results.into_iter();
    let (limit, limit_runtime) = results.next().expect("limit job")?;

    let mut errors = Vec::with_capacity(epsilon_list.len());
    let mut runtimes = Vec::with_capacity(epsilon_list.len());
    for r in results {
        let (out, rt) = r?;
        errors.push(squared_distance_integral(&out.snapshots, &limit.snapshots)?);
        runtimes.push(rt);
    }
    Ok(SweepResult {
        epsilon_list: epsilon_list.to_vec(),
        errors,
        runtimes,
        limit_runtime,
    })
}

/// Snapshot times shared by every resolution of the cross-check.
const CROSSCHECK_SNAPSHOTS: usize = 20;

/// Max over snapshots of `||u_rep - u_model||_2` for monostable, `r = 0`.
pub fn chemorepulsion_crosscheck(
    u0: &Field,
    delta: f64,
    epsilon: f64,
    cfg: &StepperConfig,
    t_final: f64,
) -> Result<f64> {
    let p = ModelParams::monostable(delta, epsilon, 0.0)?;
    let mut opts = RunOptions::new(t_final, usize::MAX);
    opts.snapshot_times = (0..=CROSSCHECK_SNAPSHOTS)
        .map(|j| t_final * j as f64 / CROSSCHECK_SNAPSHOTS as f64)
        .collect();
    let (model, rep) = rayon::join(
        || run_scheme(u0, &p, cfg, &opts, Scheme::Coupled),
        || run_chemorepulsion(u0, &p, cfg, &opts),
    );
    let (model, rep) = (model?, rep?);
    if model.snapshots.len() != rep.snapshots.len() {
        return Err(Error::invalid("snapshot schedules differ"));
    }
    Ok(model
        .snapshots
        .iter()
        .zip(&rep.snapshots)
        .map(|(a, b)| a.u.l2_distance(&b.u))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum SteadyLimit {
    /// `r = 0`: the mean of the initial data.
    Mean(f64),
    Zero,
    One,
    Undecided,
}

impl SteadyLimit {
    pub fn value(&self) -> Option<f64> {
        match self {
            SteadyLimit::Mean(m) => Some(*m),
            SteadyLimit::Zero => Some(0.0),
            SteadyLimit::One => Some(1.0),
            SteadyLimit::Undecided => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyStateReport {
    pub limit: SteadyLimit,
    /// `(t, ||u(t) - limit||_2)`; against the nearest of `{0, 1}` when undecided.
    pub curve: Vec<(f64, f64)>,
    pub final_distance: f64,
    /// Time at which the detector fired, if it did.
    pub steady_at: Option<f64>,
    pub run: RunOutput,
}

impl SteadyStateReport {
    pub fn converged(&self) -> bool {
        self.steady_at.is_some()
    }

    /// Whether the curve never increases by more than `slack` from `t_from` on.
    pub fn is_monotone_after(&self, t_from: f64, slack: f64) -> bool {
        self.curve
            .windows(2)
            .filter(|w| w[0].0 >= t_from)
            .all(|w| w[1].1 <= w[0].1 + slack)
    }
}

/// Spacing of curve samples in time units.
const CURVE_SPACING: f64 = 0.1;

/// Runs until `||u(t) - u(t - 1)||_2` falls below the detector tolerance or
/// `t_max`, then identifies the limit.
pub fn steady_state_study(
    u0: &Field,
    p: &ModelParams,
    cfg: &StepperConfig,
    t_max: f64,
) -> Result<SteadyStateReport> {
    if !p.law.is_monostable() {
        return Err(Error::invalid(
            "the steady-state study needs the monostable law",
        ));
    }
    let mut opts = RunOptions::new(t_max, ((1.0 / cfg.dt).round() as usize).max(1))
        .with_steady_tol(STEADY_DETECTOR_TOL);
    opts.snapshot_every = Some(((CURVE_SPACING / cfg.dt).round() as usize).max(1));
    let run = run_scheme(u0, p, cfg, &opts, Scheme::Coupled)?;

    let last = &run.final_state.u;
    let grid = last.grid().clone();
    let distance_to = |u: &Field, c: f64| u.l2_distance(&Field::constant(grid.clone(), c));
    let (limit, target) = if p.r == 0.0 {
        let m = u0.mean();
        (SteadyLimit::Mean(m), m)
    } else {
        let (d0, d1) = (distance_to(last, 0.0), distance_to(last, 1.0));
        let (nearest, c, d) = if d0 <= d1 {
            (SteadyLimit::Zero, 0.0, d0)
        } else {
            (SteadyLimit::One, 1.0, d1)
        };
        (
            if d < CLASSIFY_TOL {
                nearest
            } else {
                SteadyLimit::Undecided
            },
            c,
        )
    };
    let curve: Vec<(f64, f64)> = run
        .snapshots
        .iter()
        .map(|s| (s.t, distance_to(&s.u, target)))
        .collect();
    Ok(SteadyStateReport {
        limit,
        final_distance: distance_to(last, target),
        curve,
        steady_at: run.steady_at,
        run,
    })
}
