//! IMEX time stepping for the coupled density/velocity system.
//!
//! The density lives on the nodes with trapezoidal control volumes. Each step
//!
//! 1. recomputes the velocity from the current density,
//! 2. forms advective face fluxes `u_face * phi_face` (zero on both boundary faces),
//! 3. adds the reaction `r u E(u)` explicitly,
//! 4. treats diffusion theta-implicitly with reflected ghost nodes,
//!
//! and finishes with one tridiagonal solve. The flux form telescopes, so for
//! `r = 0` the trapezoidal mass is conserved to round-off.

use std::sync::Arc;

use crate::diagnostics::{compute_record, DiagRecord};
use crate::elliptic::{NeumannSolver, VelocitySolver};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::model::{check_positivity, ModelParams, SimState};
use crate::tridiag::Tridiagonal;

/// How the upwind face value of `u` is reconstructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FaceReconstruction {
    /// First-order donor cell.
    #[default]
    Upwind,
    /// Second-order MUSCL with a minmod limiter; positivity needs `cfl_safety <= 0.5`.
    Minmod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    /// Implicitness of diffusion: 0.5 is Crank-Nicolson, 1 is backward Euler.
    pub theta: f64,
    pub cfl_safety: f64,
    pub reconstruction: FaceReconstruction,
    /// Heun-type second stage for the explicit terms. Combined with
    /// `theta = 0.5` the step becomes second order in time.
    pub predictor_corrector: bool,
}

impl StepperConfig {
    pub fn new(dt: f64) -> Self {
        StepperConfig {
            dt,
            theta: 1.0,
            cfl_safety: 0.9,
            reconstruction: FaceReconstruction::Upwind,
            predictor_corrector: false,
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::invalid(format!(
                "theta must lie in [0.5, 1], got {}",
                self.theta
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::invalid(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        Ok(())
    }
}

/// Which transport law an [`Integrator`] advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Scheme {
    /// The clustering model: velocity from the Dirichlet elliptic solve.
    Coupled,
    /// Chemorepulsion form: `phi = -psi'` with `-eps psi'' + psi = u`, `psi'(+-1) = 0`.
    Chemorepulsion,
    /// Singular limit: no advection, diffusion with lagged mobility `delta + u`.
    Limit,
}

/// Owns the scratch buffers for repeated steps on one grid.
pub(crate) struct Integrator {
    grid: Arc<Grid>,
    params: ModelParams,
    cfg: StepperConfig,
    scheme: Scheme,
    velocity: VelocitySolver,
    neumann: NeumannSolver,
    phi: Vec<f64>,
    psi: Vec<f64>,
    face_velocity: Vec<f64>,
    conductance: Vec<f64>,
    explicit0: Vec<f64>,
    explicit1: Vec<f64>,
    diffusion_explicit: Vec<f64>,
    stage: Vec<f64>,
    mat: Tridiagonal,
}

impl Integrator {
    pub(crate) fn new(
        grid: Arc<Grid>,
        params: &ModelParams,
        cfg: &StepperConfig,
        scheme: Scheme,
    ) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        if scheme != Scheme::Coupled && !params.law.is_monostable() {
            return Err(Error::invalid(
                "the limit and chemorepulsion solvers require the monostable law",
            ));
        }
        let n = grid.n();
        Ok(Integrator {
            grid,
            params: params.clone(),
            cfg: cfg.clone(),
            scheme,
            velocity: VelocitySolver::new(n),
            neumann: NeumannSolver::new(n),
            phi: vec![0.0; n],
            psi: vec![0.0; n],
            face_velocity: vec![0.0; n - 1],
            conductance: vec![0.0; n - 1],
            explicit0: vec![0.0; n],
            explicit1: vec![0.0; n],
            diffusion_explicit: vec![0.0; n],
            stage: vec![0.0; n],
            mat: Tridiagonal::zeros(n),
        })
    }

    /// Advances `u` from time `t` by `dt` in place.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn advance(&mut self, t: f64, dt: f64, u: &mut [f64]) -> Result<()> {
        let n = self.grid.n();
        let theta = self.cfg.theta;

        self.assemble_conductance(u);
        // K u^n, reused by both stages.
        apply_stiffness(&self.conductance, u, &mut self.diffusion_explicit);
        self.explicit_rate(t, dt, u, Stage::First)?;

        for i in 0..n {
            self.stage[i] = self.grid.weight(i) * u[i]
                - (1.0 - theta) * dt * self.diffusion_explicit[i]
                + dt * self.explicit0[i];
        }
        self.assemble_matrix(dt);
        self.mat.solve_in_place(&mut self.stage);

        if self.cfg.predictor_corrector {
            let predicted = std::mem::take(&mut self.stage);
            self.explicit_rate(t + dt, dt, &predicted, Stage::Second)?;
            self.stage = predicted;
            for i in 0..n {
                self.stage[i] = self.grid.weight(i) * u[i]
                    - (1.0 - theta) * dt * self.diffusion_explicit[i]
                    + 0.5 * dt * (self.explicit0[i] + self.explicit1[i]);
            }
            self.mat.solve_in_place(&mut self.stage);
        }

        if let Some(i) = self.stage.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("density at node {i}, t = {}", t + dt),
            });
        }
        check_positivity(t + dt, &self.stage)?;
        u.copy_from_slice(&self.stage);
        Ok(())
    }

    fn assemble_conductance(&mut self, u: &[f64]) {
        let h = self.grid.h();
        let delta = self.params.delta;
        match self.scheme {
            Scheme::Limit => {
                for (c, w) in self.conductance.iter_mut().zip(u.windows(2)) {
                    *c = (delta + 0.5 * (w[0] + w[1])) / h;
                }
            }
            _ => self.conductance.iter_mut().for_each(|c| *c = delta / h),
        }
    }

    fn assemble_matrix(&mut self, dt: f64) {
        let n = self.grid.n();
        let theta = self.cfg.theta;
        for i in 0..n {
            let lo = if i > 0 { self.conductance[i - 1] } else { 0.0 };
            let hi = if i + 1 < n { self.conductance[i] } else { 0.0 };
            self.mat.lower[i] = -theta * dt * lo;
            self.mat.upper[i] = -theta * dt * hi;
            self.mat.diag[i] = self.grid.weight(i) + theta * dt * (lo + hi);
        }
    }

    /// Volume-integrated advection plus reaction, written into the stage buffer.
    fn explicit_rate(&mut self, t: f64, dt: f64, u: &[f64], stage: Stage) -> Result<()> {
        let n = self.grid.n();
        let h = self.grid.h();
        let out = match stage {
            Stage::First => &mut self.explicit0,
            Stage::Second => &mut self.explicit1,
        };
        out.iter_mut().for_each(|v| *v = 0.0);

        let max_velocity = match self.scheme {
            Scheme::Limit => 0.0,
            Scheme::Coupled => {
                self.velocity
                    .solve(&self.grid, u, &self.params, &mut self.phi);
                for (fv, w) in self.face_velocity.iter_mut().zip(self.phi.windows(2)) {
                    *fv = 0.5 * (w[0] + w[1]);
                }
                self.phi.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
            }
            Scheme::Chemorepulsion => {
                self.neumann
                    .solve(self.params.epsilon, &self.grid, u, &mut self.psi);
                for (fv, w) in self.face_velocity.iter_mut().zip(self.psi.windows(2)) {
                    *fv = -(w[1] - w[0]) / h;
                }
                self.face_velocity
                    .iter()
                    .fold(0.0, |m: f64, v| m.max(v.abs()))
            }
        };

        if self.scheme != Scheme::Limit {
            if !max_velocity.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("velocity at t = {t}"),
                });
            }
            let bound = self.cfg.cfl_safety * h / max_velocity;
            if dt > bound {
                return Err(Error::Cfl {
                    t,
                    dt,
                    bound,
                    max_velocity,
                });
            }
            // Interior faces only; both boundary faces carry zero flux.
            for f in 0..n - 1 {
                let v = self.face_velocity[f];
                let uf = face_value(u, f, v, self.cfg.reconstruction);
                let flux = uf * v;
                out[f] -= flux;
                out[f + 1] += flux;
            }
        }

        let r = self.params.r;
        if r != 0.0 {
            let law = &self.params.law;
            for i in 0..n {
                out[i] += self.grid.weight(i) * r * law.e_tilde(u[i]);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Stage {
    First,
    Second,
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Upwind value of `u` on the face between nodes `f` and `f + 1`.
#[inline]
fn face_value(u: &[f64], f: usize, v: f64, recon: FaceReconstruction) -> f64 {
    let n = u.len();
    match recon {
        FaceReconstruction::Upwind => {
            if v >= 0.0 {
                u[f]
            } else {
                u[f + 1]
            }
        }
        FaceReconstruction::Minmod => {
            if v >= 0.0 {
                if f == 0 {
                    u[0]
                } else {
                    u[f] + 0.5 * minmod(u[f] - u[f - 1], u[f + 1] - u[f])
                }
            } else if f + 2 >= n {
                u[n - 1]
            } else {
                u[f + 1] - 0.5 * minmod(u[f + 1] - u[f], u[f + 2] - u[f + 1])
            }
        }
    }
}

/// `out = K u` for the symmetric stiffness with face conductances `c`.
fn apply_stiffness(c: &[f64], u: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (f, &cf) in c.iter().enumerate() {
        let q = cf * (u[f] - u[f + 1]);
        out[f] += q;
        out[f + 1] -= q;
    }
}

/// One IMEX step of the coupled system.
pub fn step(state: &SimState, p: &ModelParams, cfg: &StepperConfig) -> Result<SimState> {
    step_with(state, p, cfg, Scheme::Coupled)
}

pub(crate) fn step_with(
    state: &SimState,
    p: &ModelParams,
    cfg: &StepperConfig,
    scheme: Scheme,
) -> Result<SimState> {
    let grid = state.u.grid().clone();
    let mut integ = Integrator::new(grid.clone(), p, cfg, scheme)?;
    let mut u = state.u.values().to_vec();
    integ.advance(state.t, cfg.dt, &mut u)?;
    Ok(SimState {
        t: state.t + cfg.dt,
        u: Field::from_parts(grid, u),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub t_final: f64,
    /// Diagnostics are recorded every this many steps (and at the final time).
    pub sample_every: usize,
    /// Snapshot times; each is taken at the first step reaching it.
    pub snapshot_times: Vec<f64>,
    /// Additional snapshots every this many steps, plus the final state.
    pub snapshot_every: Option<usize>,
    /// Stop once `||u(t+1) - u(t)||_2` drops to this level.
    pub steady_tol: Option<f64>,
}

impl RunOptions {
    pub fn new(t_final: f64, sample_every: usize) -> Self {
        RunOptions {
            t_final,
            sample_every,
            snapshot_times: Vec::new(),
            snapshot_every: None,
            steady_tol: None,
        }
    }

    pub fn with_steady_tol(mut self, tol: f64) -> Self {
        self.steady_tol = Some(tol);
        self
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub snapshots: Vec<SimState>,
    pub records: Vec<DiagRecord>,
    /// Cumulative `sum dt * ||(u^{k+1} - u^k)/dt||_2^2`, aligned with `records`.
    pub dudt_energy: Vec<f64>,
    /// Time at which the steady-state detector fired.
    pub steady_at: Option<f64>,
    pub steps: usize,
    pub final_state: SimState,
}

/// Integrates the coupled system from `u0` up to `opts.t_final`.
pub fn run(
    u0: &Field,
    p: &ModelParams,
    cfg: &StepperConfig,
    opts: &RunOptions,
) -> Result<RunOutput> {
    run_scheme(u0, p, cfg, opts, Scheme::Coupled)
}

pub(crate) fn run_scheme(
    u0: &Field,
    p: &ModelParams,
    cfg: &StepperConfig,
    opts: &RunOptions,
    scheme: Scheme,
) -> Result<RunOutput> {
    if !(opts.t_final.is_finite() && opts.t_final > 0.0) {
        return Err(Error::invalid(format!(
            "t_final must be positive, got {}",
            opts.t_final
        )));
    }
    if opts.sample_every == 0 {
        return Err(Error::invalid("sample_every must be at least 1"));
    }
    if u0.min() < 0.0 {
        return Err(Error::invalid(format!(
            "initial density must be nonnegative, min = {}",
            u0.min()
        )));
    }
    let grid = u0.grid().clone();
    let mut integ = Integrator::new(grid.clone(), p, cfg, scheme)?;
    let dt = cfg.dt;
    let n_steps = ((opts.t_final / dt) - 1e-9).ceil().max(1.0) as usize;

    let mut u = u0.values().to_vec();
    let mut prev = u.clone();
    let mut t = 0.0;

    let mut out = RunOutput {
        snapshots: Vec::new(),
        records: Vec::new(),
        dudt_energy: Vec::new(),
        steady_at: None,
        steps: 0,
        final_state: SimState {
            t: 0.0,
            u: u0.clone(),
        },
    };
    let mut energy = 0.0;
    let mut snap_targets: Vec<f64> = opts.snapshot_times.clone();
    snap_targets.sort_by(|a, b| a.total_cmp(b));
    let mut next_snap = 0;

    let record = |out: &mut RunOutput, t: f64, u: &[f64], energy: f64| -> Result<()> {
        let state = SimState {
            t,
            u: Field::from_parts(grid.clone(), u.to_vec()),
        };
        out.records.push(compute_record(&state, p)?);
        out.dudt_energy.push(energy);
        Ok(())
    };
    let take_snapshots =
        |out: &mut RunOutput, next_snap: &mut usize, t: f64, u: &[f64], force: bool| {
            let mut due = force;
            while *next_snap < snap_targets.len() && snap_targets[*next_snap] <= t + 0.5 * dt {
                *next_snap += 1;
                due = true;
            }
            if due && out.snapshots.last().is_none_or(|s| s.t != t) {
                out.snapshots.push(SimState {
                    t,
                    u: Field::from_parts(grid.clone(), u.to_vec()),
                });
            }
        };

    record(&mut out, t, &u, energy)?;
    take_snapshots(
        &mut out,
        &mut next_snap,
        t,
        &u,
        opts.snapshot_every.is_some(),
    );

    let mut steady_anchor = u.clone();
    let mut next_check = 1.0;

    for k in 1..=n_steps {
        let t_next = if k == n_steps {
            opts.t_final
        } else {
            k as f64 * dt
        };
        let h_step = t_next - t;
        prev.copy_from_slice(&u);
        integ.advance(t, h_step, &mut u)?;
        t = t_next;
        out.steps = k;

        let du2: f64 = grid.l2sq(&u.iter().zip(&prev).map(|(a, b)| a - b).collect::<Vec<_>>());
        energy += du2 / h_step;

        let mut stop = false;
        if let Some(tol) = opts.steady_tol {
            if t >= next_check - 1e-9 * dt {
                let d: Vec<f64> = u.iter().zip(&steady_anchor).map(|(a, b)| a - b).collect();
                if grid.l2sq(&d).sqrt() <= tol {
                    out.steady_at = Some(t);
                    stop = true;
                }
                steady_anchor.copy_from_slice(&u);
                next_check += 1.0;
            }
        }
        let last = stop || k == n_steps;

        if k % opts.sample_every == 0 || last {
            record(&mut out, t, &u, energy)?;
        }
        let periodic = opts
            .snapshot_every
            .is_some_and(|every| k % every == 0 || last);
        take_snapshots(&mut out, &mut next_snap, t, &u, periodic);
        if stop {
            break;
        }
    }

    out.final_state = SimState {
        t,
        u: Field::from_parts(grid.clone(), u),
    };
    Ok(out)
}
