//! Tolerances and regression-frozen caps.
//!
//! Caps marked "frozen" bound quantities that are only known to be finite;
//! each is the measurement from the reference build plus 50% headroom, with
//! the measured value noted alongside.

/// Round-off undershoot admitted below zero before a state is rejected.
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Mass drift allowed over a run without reaction.
pub const MASS_TOL_CONSERVATIVE: f64 = 1e-10;

/// Overshoot allowed above `max(1, <u0>)` with reaction.
pub const MASS_SLACK_REACTIVE: f64 = 1e-6;

/// Slack on consecutive Liapunov samples.
pub const LIAPUNOV_SLACK: f64 = 1e-8;

/// Slack on the dissipation budget.
pub const BUDGET_SLACK: f64 = 1e-6;

/// Steady-state detector threshold on `||u(t+1) - u(t)||_2`.
pub const STEADY_DETECTOR_TOL: f64 = 1e-10;

/// Final `||u - <u0>||_2` required of a reaction-free steady-state run.
pub const STEADY_STATE_TOL: f64 = 1e-6;

/// Largest distance at which a reactive limit is classified as 0 or 1.
pub const CLASSIFY_TOL: f64 = 0.1;

/// Slack on the eventual monotonicity of `||u(t) - <u0>||_2`; the curve
/// flattens at the round-off mass drift (about 1e-11 at n = 401).
pub const CURVE_MONOTONE_SLACK: f64 = 1e-10;

/// Mass drift allowed at every sample of the long reaction-free runs.
pub const MASS_TOL_LONG_RUN: f64 = 1e-9;

/// Bound on `max u` for the bistable run with reaction.
pub const BISTABLE_SUP_BOUND: f64 = 10.0;

/// Frozen: `sup_t ||u(t)||_2` along the bistable run (measured 1.41421).
pub const BISTABLE_L2_CAP: f64 = 2.1213;

/// Frozen: `int_0^20 (||u_x||^2 + ||phi||_{H^1}^2) dt` along the bistable run
/// (measured 1.78717).
pub const BISTABLE_ENERGY_CAP: f64 = 2.6808;

/// Frozen: `sum dt ||(u^{k+1} - u^k) / dt||^2` over `t <= 50`, monostable
/// (measured 0.45478 for r = 0, 0.49942 for r = 1).
pub const DUDT_ENERGY_CAP: f64 = 0.74913;

/// Largest share of the time-derivative energy allowed in `t in [40, 50]`.
pub const DUDT_TAIL_FRACTION: f64 = 0.01;

/// Frozen `err0`: sweep error at the smallest epsilon (measured 2.36210e-5).
pub const SWEEP_ERR0: f64 = 3.5432e-5;

/// Frozen: chemorepulsion deviation at n = 401, dt = 1e-4 (measured 5.86382e-6).
pub const CHEMOREPULSION_CAP: f64 = 8.7957e-6;

/// Required reduction of the chemorepulsion deviation under refinement.
pub const CHEMOREPULSION_REFINEMENT: f64 = 3.0;

/// Frozen: Picard limit against the stepper at T = 0.005, worst over the
/// initial-condition battery (measured 2.11825e-4).
pub const PICARD_CAP: f64 = 3.1774e-4;

/// Tolerance against the closed-form logistic solution.
pub const LOGISTIC_TOL: f64 = 1e-3;

/// Max-norm error of the manufactured elliptic solution at n = 401.
pub const ELLIPTIC_MAX_ERR: f64 = 5e-4;

/// Relative band around 4 for the elliptic refinement ratio.
pub const ELLIPTIC_RATIO_BAND: f64 = 0.2;

/// Largest allowed max/min spread of the regularity ratios.
pub const REGULARITY_SPREAD: f64 = 100.0;

/// Frozen: one map iterate from `u0` held constant against the stepper at
/// T = 0.01 for `u0 = 1 + 0.3 cos(pi x)`, n = 401 (measured 5.83055e-4).
pub const LAMBDA_FIRST_ITERATE_CAP: f64 = 8.7458e-4;
