//! Monitored functionals: mass, norms, the Liapunov functional and its dissipation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::elliptic::compute_velocity;
use crate::error::Result;
use crate::model::{check_positivity, xlogx, ModelParams, SimState};
use crate::tolerances::{BUDGET_SLACK, MASS_SLACK_REACTIVE, MASS_TOL_CONSERVATIVE};

pub const CSV_HEADER: &str =
    "t,mass,l1,l2sq,liapunov,dissipation,grad_sqrt_sq,phi_l2sq,phi_h1sq,min_u,max_u,grad_u_l2sq";

/// One time sample of every monitored quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagRecord {
    pub t: f64,
    /// `<u> = (1/2) int u`.
    pub mass: f64,
    pub l1: f64,
    pub l2sq: f64,
    /// `L(u) = int (u log u - u + 1)`.
    pub liapunov: f64,
    /// `D(u, phi) = 4 delta ||(sqrt u)'||^2 + eps ||phi'||^2 + ||phi||^2 - r int u log u (1 - u)`.
    pub dissipation: f64,
    pub grad_sqrt_sq: f64,
    pub phi_l2sq: f64,
    /// `eps ||phi'||^2 + ||phi||^2`.
    pub phi_h1sq: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub grad_u_l2sq: f64,
}

impl DiagRecord {
    pub fn values(&self) -> [f64; 12] {
        [
            self.t,
            self.mass,
            self.l1,
            self.l2sq,
            self.liapunov,
            self.dissipation,
            self.grad_sqrt_sq,
            self.phi_l2sq,
            self.phi_h1sq,
            self.min_u,
            self.max_u,
            self.grad_u_l2sq,
        ]
    }

    /// One CSV row in header order, 17 significant digits per value.
    pub fn to_csv_row(&self) -> String {
        let mut s = String::new();
        for (i, v) in self.values().iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            write!(s, "{}", fmt_f64(*v)).unwrap();
        }
        s
    }

    /// `||phi'||^2` recovered from the stored norms.
    pub fn phi_grad_l2sq(&self, epsilon: f64) -> f64 {
        (self.phi_h1sq - self.phi_l2sq) / epsilon
    }
}

/// Decimal with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_csv(series: &[DiagRecord]) -> String {
    let mut s = String::with_capacity(256 * (series.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for rec in series {
        s.push_str(&rec.to_csv_row());
        s.push('\n');
    }
    s
}

pub fn compute_record(state: &SimState, p: &ModelParams) -> Result<DiagRecord> {
    let u = state.u.values();
    check_positivity(state.t, u)?;
    let grid = state.u.grid();
    let phi = compute_velocity(&state.u, p)?;

    let abs: Vec<f64> = u.iter().map(|v| v.abs()).collect();
    let sqrt_u: Vec<f64> = u.iter().map(|v| v.max(0.0).sqrt()).collect();
    let entropy: Vec<f64> = u.iter().map(|&v| xlogx(v) - v + 1.0).collect();
    let reaction: Vec<f64> = u.iter().map(|&v| xlogx(v) * (1.0 - v)).collect();

    let grad_sqrt_sq = grid.grad_l2sq(&sqrt_u);
    let phi_l2sq = phi.l2sq();
    let phi_h1sq = p.epsilon * grid.grad_l2sq(phi.values()) + phi_l2sq;
    let dissipation = 4.0 * p.delta * grad_sqrt_sq + phi_h1sq - p.r * grid.integrate(&reaction);

    Ok(DiagRecord {
        t: state.t,
        mass: grid.mean(u),
        l1: grid.integrate(&abs),
        l2sq: grid.l2sq(u),
        liapunov: grid.integrate(&entropy),
        dissipation,
        grad_sqrt_sq,
        phi_l2sq,
        phi_h1sq,
        min_u: state.u.min(),
        max_u: state.u.max(),
        grad_u_l2sq: grid.grad_l2sq(u),
    })
}

/// Trapezoidal time integral of `f(record)` over the series.
pub fn time_integral(series: &[DiagRecord], f: impl Fn(&DiagRecord) -> f64) -> f64 {
    series
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (f(&w[0]) + f(&w[1])))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiapunovViolation {
    /// Index of the first record exceeding its predecessor.
    pub index: usize,
    pub previous: f64,
    pub current: f64,
}

pub fn check_liapunov_monotone(
    series: &[DiagRecord],
    slack: f64,
) -> std::result::Result<(), LiapunovViolation> {
    for (k, w) in series.windows(2).enumerate() {
        if w[1].liapunov > w[0].liapunov + slack {
            return Err(LiapunovViolation {
                index: k + 1,
                previous: w[0].liapunov,
                current: w[1].liapunov,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationBudget {
    pub integral: f64,
    pub budget: f64,
}

impl DissipationBudget {
    pub fn margin(&self) -> f64 {
        self.budget - self.integral
    }
}

/// `1 + ||u0||^2 + 2/e + 2 <u0>`.
pub fn dissipation_budget(u0: &DiagRecord) -> f64 {
    1.0 + u0.l2sq + 2.0 / std::f64::consts::E + 2.0 * u0.mass
}

/// Checks `int_0^t D ds <= 1 + ||u0||^2 + 2/e + 2 <u0>`; the error carries the excess.
pub fn check_dissipation_budget(
    series: &[DiagRecord],
    u0: &DiagRecord,
) -> std::result::Result<DissipationBudget, f64> {
    let report = DissipationBudget {
        integral: time_integral(series, |r| r.dissipation),
        budget: dissipation_budget(u0),
    };
    if report.integral <= report.budget + BUDGET_SLACK {
        Ok(report)
    } else {
        Err(report.integral - report.budget)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassViolation {
    pub index: usize,
    pub mass: f64,
    pub bound: f64,
}

/// `r = 0`: mass stays at its initial value within `MASS_TOL_CONSERVATIVE`.
/// `r > 0`: mass never exceeds `max(1, <u0>)` beyond `MASS_SLACK_REACTIVE`.
///
/// Returns the largest observed deviation (r = 0) or the smallest margin (r > 0).
pub fn check_mass_law(
    series: &[DiagRecord],
    p: &ModelParams,
) -> std::result::Result<f64, MassViolation> {
    check_mass_law_with(series, p, MASS_TOL_CONSERVATIVE)
}

pub fn check_mass_law_with(
    series: &[DiagRecord],
    p: &ModelParams,
    conservative_tol: f64,
) -> std::result::Result<f64, MassViolation> {
    let Some(first) = series.first() else {
        return Ok(0.0);
    };
    let m0 = first.mass;
    if p.r == 0.0 {
        let mut worst: f64 = 0.0;
        for (index, rec) in series.iter().enumerate() {
            let dev = (rec.mass - m0).abs();
            if dev > conservative_tol {
                return Err(MassViolation {
                    index,
                    mass: rec.mass,
                    bound: m0,
                });
            }
            worst = worst.max(dev);
        }
        Ok(worst)
    } else {
        let bound = m0.max(1.0);
        let mut margin = f64::INFINITY;
        for (index, rec) in series.iter().enumerate() {
            if rec.mass > bound + MASS_SLACK_REACTIVE {
                return Err(MassViolation {
                    index,
                    mass: rec.mass,
                    bound,
                });
            }
            margin = margin.min(bound - rec.mass);
        }
        Ok(margin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Field, Grid};
    use crate::stepper::{run, RunOptions, StepperConfig};

    fn state(c: f64) -> SimState {
        SimState::new(0.0, Field::constant(Grid::new(101).unwrap(), c)).unwrap()
    }

    #[test]
    fn record_of_one() {
        let p = ModelParams::monostable(0.1, 0.01, 1.0).unwrap();
        let rec = compute_record(&state(1.0), &p).unwrap();
        assert!(rec.liapunov.abs() < 1e-14);
        assert!(rec.dissipation.abs() < 1e-14);
        assert!((rec.mass - 1.0).abs() < 1e-14);
    }

    #[test]
    fn record_of_two() {
        let p = ModelParams::monostable(0.1, 0.01, 0.0).unwrap();
        let rec = compute_record(&state(2.0), &p).unwrap();
        // 2 * (2 ln 2 - 2 + 1)
        let expected = 2.0 * (2.0 * 2f64.ln() - 1.0);
        assert!((expected - 0.772_588_72).abs() < 1e-8);
        assert!((rec.liapunov - expected).abs() < 1e-13);
        assert!((rec.mass - rec.l1 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn record_of_zero() {
        let p = ModelParams::monostable(0.1, 0.01, 0.0).unwrap();
        let rec = compute_record(&state(0.0), &p).unwrap();
        assert!((rec.liapunov - 2.0).abs() < 1e-14);
        assert_eq!(rec.mass, 0.0);
    }

    #[test]
    fn rejects_negative_state() {
        let g = Grid::new(5).unwrap();
        let u = Field::new(g, vec![0.1, -1e-6, 0.1, 0.1, 0.1]).unwrap();
        let s = SimState { t: 0.0, u };
        let p = ModelParams::monostable(0.1, 0.01, 0.0).unwrap();
        assert!(compute_record(&s, &p).is_err());
    }

    #[test]
    fn csv_row_has_header_arity() {
        let p = ModelParams::monostable(0.1, 0.01, 0.0).unwrap();
        let rec = compute_record(&state(0.5), &p).unwrap();
        let row = rec.to_csv_row();
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
        let back: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(back.as_slice(), rec.values().as_slice());
    }

    fn constant_series(len: usize, liapunov: f64) -> Vec<DiagRecord> {
        let p = ModelParams::monostable(0.1, 0.01, 0.0).unwrap();
        let base = compute_record(&state(1.0), &p).unwrap();
        (0..len)
            .map(|k| DiagRecord {
                t: k as f64,
                liapunov,
                ..base
            })
            .collect()
    }

    #[test]
    fn liapunov_check() {
        assert!(check_liapunov_monotone(&constant_series(5, 0.3), 0.0).is_ok());
        let p = ModelParams::monostable(0.1, 0.01, 0.0).unwrap();
        let u0 = Field::cosine(Grid::new(101).unwrap(), 1.0, 0.3, 1).unwrap();
        let out = run(
            &u0,
            &p,
            &StepperConfig::new(1e-3),
            &RunOptions::new(0.2, 10),
        )
        .unwrap();
        assert!(check_liapunov_monotone(&out.records, 1e-8).is_ok());
        let mut reversed = out.records.clone();
        reversed.reverse();
        let v = check_liapunov_monotone(&reversed, 1e-8).unwrap_err();
        assert_eq!(v.index, 1);
    }

    #[test]
    fn budget_of_constant_one() {
        let p = ModelParams::monostable(0.1, 0.01, 0.0).unwrap();
        let u0 = compute_record(&state(1.0), &p).unwrap();
        let series = vec![u0, DiagRecord { t: 10.0, ..u0 }];
        let report = check_dissipation_budget(&series, &u0).unwrap();
        assert!((report.budget - (5.0 + 2.0 / std::f64::consts::E)).abs() < 1e-12);
        assert!((report.budget - 5.7358).abs() < 1e-4);
        assert!(report.integral.abs() < 1e-12);

        let z = compute_record(&state(0.0), &p).unwrap();
        let report = check_dissipation_budget(&[z, DiagRecord { t: 1.0, ..z }], &z).unwrap();
        assert_eq!(report.integral, 0.0);
    }

    #[test]
    fn budget_excess_reported() {
        let p = ModelParams::monostable(0.1, 0.01, 0.0).unwrap();
        let u0 = compute_record(&state(1.0), &p).unwrap();
        let big = DiagRecord {
            dissipation: 10.0,
            ..u0
        };
        let series = vec![big, DiagRecord { t: 1.0, ..big }];
        let excess = check_dissipation_budget(&series, &u0).unwrap_err();
        assert!((excess - (10.0 - dissipation_budget(&u0))).abs() < 1e-12);
    }

    fn logistic(u0: f64, t: f64) -> f64 {
        u0 * t.exp() / (1.0 + u0 * (t.exp() - 1.0))
    }

    #[test]
    fn mass_law_examples() {
        let g = Grid::new(51).unwrap();
        let p0 = ModelParams::monostable(0.1, 0.01, 0.0).unwrap();
        let out = run(
            &Field::constant(g.clone(), 0.7),
            &p0,
            &StepperConfig::new(1e-2),
            &RunOptions::new(1.0, 5),
        )
        .unwrap();
        assert!(check_mass_law(&out.records, &p0).unwrap() < 1e-14);

        let p1 = ModelParams::monostable(0.1, 0.01, 1.0).unwrap();
        for c in [2.0, 0.5] {
            let out = run(
                &Field::constant(g.clone(), c),
                &p1,
                &StepperConfig::new(1e-3),
                &RunOptions::new(5.0, 100),
            )
            .unwrap();
            assert!(check_mass_law(&out.records, &p1).is_ok());
            for w in out.records.windows(2) {
                if c > 1.0 {
                    assert!(w[1].mass <= w[0].mass);
                } else {
                    assert!(w[1].mass >= w[0].mass);
                }
            }
            for rec in &out.records {
                assert!((rec.mass - logistic(c, rec.t)).abs() < 2e-3);
            }
        }
    }

    #[test]
    fn mass_violation_detected() {
        let p = ModelParams::monostable(0.1, 0.01, 1.0).unwrap();
        let base = compute_record(&state(0.5), &p).unwrap();
        let series = vec![
            base,
            DiagRecord {
                mass: 1.1,
                t: 1.0,
                ..base
            },
        ];
        let v = check_mass_law(&series, &p).unwrap_err();
        assert_eq!(v.index, 1);
    }
}
