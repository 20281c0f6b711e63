//! Mild (Duhamel) formulation and its fixed-point iteration.
//!
//! The Neumann heat semigroup on (-1, 1) is diagonal in the cosine modes
//! `cos(k pi (x + 1) / 2)`, whose nodal samples are `cos(pi j k / N)` with
//! `N = n - 1`. Transforms are the DCT-I / DST-I applied as dense O(n^2) sums.
//!
//! For a time-sampled trajectory `u`, the map is
//!
//! ```text
//! (Lambda u)(t) = S(t) u0 + int_0^t S(t - s) [ -(u phi_u)_x + r u E(u) ](s) ds
//! ```
//!
//! with `S(t) = exp(t delta d_xx)` and the integral done by the trapezoidal rule
//! on the sample times.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::elliptic::compute_velocity;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::model::ModelParams;

/// Cosine table `cos(pi m / N)` for `m in 0..2N`, indexed by `(j k) mod 2N`.
#[derive(Debug, Clone)]
struct TrigTable {
    big_n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl TrigTable {
    fn new(n: usize) -> Self {
        let big_n = n - 1;
        let period = 2 * big_n;
        let angle = |m: usize| PI * m as f64 / big_n as f64;
        TrigTable {
            big_n,
            cos: (0..period).map(|m| angle(m).cos()).collect(),
            sin: (0..period).map(|m| angle(m).sin()).collect(),
        }
    }

    #[inline]
    fn idx(&self, j: usize, k: usize) -> usize {
        (j * k) % (2 * self.big_n)
    }

    /// Coefficients `c` with `v_j = sum_k c_k cos(pi j k / N)`.
    fn dct(&self, v: &[f64]) -> Vec<f64> {
        let big_n = self.big_n;
        let scale = 2.0 / big_n as f64;
        (0..=big_n)
            .map(|k| {
                let mut s = 0.5 * (v[0] + v[big_n] * self.cos[self.idx(big_n, k)]);
                for (j, &vj) in v.iter().enumerate().take(big_n).skip(1) {
                    s += vj * self.cos[self.idx(j, k)];
                }
                let a = scale * s;
                if k == 0 || k == big_n {
                    0.5 * a
                } else {
                    a
                }
            })
            .collect()
    }

    fn idct(&self, c: &[f64]) -> Vec<f64> {
        (0..=self.big_n)
            .map(|j| {
                c.iter()
                    .enumerate()
                    .map(|(k, ck)| ck * self.cos[self.idx(j, k)])
                    .sum()
            })
            .collect()
    }

    /// Sine coefficients `b_k`, `k = 1..N-1`, of interior values; index 0 and N are zero.
    fn dst(&self, g: &[f64]) -> Vec<f64> {
        let big_n = self.big_n;
        let scale = 2.0 / big_n as f64;
        let mut b = vec![0.0; big_n + 1];
        for (k, bk) in b.iter_mut().enumerate().take(big_n).skip(1) {
            let mut s = 0.0;
            for (j, &gj) in g.iter().enumerate().take(big_n).skip(1) {
                s += gj * self.sin[self.idx(j, k)];
            }
            *bk = scale * s;
        }
        b
    }

    /// Nodal values of `sum_k b_k sin(pi j k / N)`.
    fn idst(&self, b: &[f64]) -> Vec<f64> {
        (0..=self.big_n)
            .map(|j| {
                b.iter()
                    .enumerate()
                    .map(|(k, bk)| bk * self.sin[self.idx(j, k)])
                    .sum()
            })
            .collect()
    }
}

#[inline]
fn wavenumber(k: usize) -> f64 {
    0.5 * PI * k as f64
}

/// Neumann cosine coefficients of a nodal field.
#[derive(Debug, Clone)]
pub struct CosineSpectrum {
    grid: Arc<Grid>,
    coefficients: Vec<f64>,
}

impl CosineSpectrum {
    pub fn from_field(v: &Field) -> Self {
        let table = TrigTable::new(v.len());
        CosineSpectrum {
            grid: v.grid().clone(),
            coefficients: table.dct(v.values()),
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn to_field(&self) -> Result<Field> {
        let table = TrigTable::new(self.grid.n());
        Field::new(self.grid.clone(), table.idct(&self.coefficients))
    }

    /// Multiplies mode `k` by `exp(-delta (k pi / 2)^2 tau)`.
    pub fn damp(&mut self, delta: f64, tau: f64) {
        for (k, c) in self.coefficients.iter_mut().enumerate() {
            let kk = wavenumber(k);
            *c *= (-delta * kk * kk * tau).exp();
        }
    }

    /// Nodal values of the exact derivative of the cosine series.
    pub fn derivative(&self) -> Vec<f64> {
        let table = TrigTable::new(self.grid.n());
        let b: Vec<f64> = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(k, c)| -c * wavenumber(k))
            .collect();
        table.idst(&b)
    }
}

/// Exact Neumann heat flow `w_t = delta w_xx` for time `tau`, applied to the
/// cosine interpolant of `v`.
pub fn heat_semigroup_apply(v: &Field, tau: f64, delta: f64) -> Result<Field> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("tau must be >= 0, got {tau}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let mut spectrum = CosineSpectrum::from_field(v);
    spectrum.damp(delta, tau);
    spectrum.to_field()
}

/// Fields sampled on the uniform time mesh `t_m = m T / (M - 1)`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
}

impl Trajectory {
    pub fn uniform_mesh(t_final: f64, samples: usize) -> Result<Vec<f64>> {
        if samples < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 time samples, got {samples}"
            )));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::invalid(format!("T must be positive, got {t_final}")));
        }
        let dt = t_final / (samples - 1) as f64;
        Ok((0..samples)
            .map(|m| {
                if m == samples - 1 {
                    t_final
                } else {
                    m as f64 * dt
                }
            })
            .collect())
    }

    /// `u0` held constant on the mesh.
    pub fn constant(u0: &Field, t_final: f64, samples: usize) -> Result<Self> {
        let times = Self::uniform_mesh(t_final, samples)?;
        Ok(Trajectory {
            states: vec![u0.clone(); times.len()],
            times,
        })
    }

    pub fn last(&self) -> &Field {
        self.states
            .last()
            .expect("trajectory has at least two samples")
    }
}

/// `sup_m ||a(t_m) - b(t_m)||_{W^{1,2}}` with spectral derivatives.
pub fn w12_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    let Some(first) = a.states.first() else {
        return 0.0;
    };
    let grid = first.grid().clone();
    let table = TrigTable::new(grid.n());
    a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| {
            let d: Vec<f64> = x
                .values()
                .iter()
                .zip(y.values())
                .map(|(p, q)| p - q)
                .collect();
            let c = table.dct(&d);
            let db: Vec<f64> = c
                .iter()
                .enumerate()
                .map(|(k, ck)| -ck * wavenumber(k))
                .collect();
            let dd = table.idst(&db);
            (grid.l2sq(&d) + grid.l2sq(&dd)).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Cosine coefficients of `-(u phi_u)_x + r u E(u)`.
fn forcing_spectrum(table: &TrigTable, u: &Field, p: &ModelParams) -> Result<Vec<f64>> {
    let phi = compute_velocity(u, p)?;
    let flux: Vec<f64> = u
        .values()
        .iter()
        .zip(phi.values())
        .map(|(a, b)| a * b)
        .collect();
    let b = table.dst(&flux);
    // d/dx sum b_k sin(k pi (x+1)/2) = sum b_k (k pi / 2) cos(...)
    let mut f: Vec<f64> = b
        .iter()
        .enumerate()
        .map(|(k, bk)| -bk * wavenumber(k))
        .collect();
    if p.r != 0.0 {
        let reaction: Vec<f64> = u.values().iter().map(|&v| p.r * p.law.e_tilde(v)).collect();
        for (fk, rk) in f.iter_mut().zip(table.dct(&reaction)) {
            *fk += rk;
        }
    }
    Ok(f)
}

/// Evaluates the Duhamel map on every sample time of `u_traj`.
pub fn lambda_map(u_traj: &Trajectory, u0: &Field, p: &ModelParams) -> Result<Trajectory> {
    p.validate()?;
    let m_samples = u_traj.times.len();
    if m_samples < 2 || u_traj.states.len() != m_samples {
        return Err(Error::invalid(
            "trajectory needs at least 2 matching samples",
        ));
    }
    if u_traj.states[0].max_distance(u0) > 1e-12 {
        return Err(Error::invalid("trajectory must start at u0"));
    }
    let grid = u0.grid().clone();
    let table = TrigTable::new(grid.n());

    let forcing: Vec<Vec<f64>> = u_traj
        .states
        .par_iter()
        .map(|u| forcing_spectrum(&table, u, p))
        .collect::<Result<_>>()?;
    let init = table.dct(u0.values());
    let rates: Vec<f64> = (0..init.len())
        .map(|k| p.delta * wavenumber(k) * wavenumber(k))
        .collect();
    let times = &u_traj.times;

    let states = (0..m_samples)
        .into_par_iter()
        .map(|m| {
            let t = times[m];
            let mut c: Vec<f64> = init
                .iter()
                .zip(&rates)
                .map(|(a, lam)| a * (-lam * t).exp())
                .collect();
            for j in 0..=m {
                if m == 0 {
                    break;
                }
                let w = if j == 0 {
                    0.5 * (times[1] - times[0])
                } else if j == m {
                    0.5 * (times[m] - times[m - 1])
                } else {
                    0.5 * (times[j + 1] - times[j - 1])
                };
                let lag = t - times[j];
                for ((ck, fk), lam) in c.iter_mut().zip(&forcing[j]).zip(&rates) {
                    *ck += w * (-lam * lag).exp() * fk;
                }
            }
            Field::new(grid.clone(), table.idct(&c))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times: times.clone(),
        states,
    })
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub trajectory: Trajectory,
    pub iterations: usize,
    /// `W^{1,2}` distance between the last two iterates.
    pub residual: f64,
    /// Last residual over the previous one; absent after a single iteration.
    pub contraction_ratio: Option<f64>,
    pub converged: bool,
    pub residuals: Vec<f64>,
}

/// Fixed-point iteration `u <- Lambda u` from `u0` held constant in time.
///
/// Stops once successive iterates are within `tol` in `sup_t W^{1,2}`. A
/// residual that fails to shrink is reported as [`Error::NonContraction`].
pub fn picard_iterate(
    u0: &Field,
    p: &ModelParams,
    t_final: f64,
    samples: usize,
    tol: f64,
    max_iter: usize,
) -> Result<PicardOutcome> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid(format!("tol must be positive, got {tol}")));
    }
    let mut current = Trajectory::constant(u0, t_final, samples)?;
    let mut residuals: Vec<f64> = Vec::new();
    let mut ratio = None;
    for iteration in 1..=max_iter.max(1) {
        let next = match lambda_map(&current, u0, p) {
            Ok(next) => next,
            Err(Error::NonFinite { .. }) => {
                return Err(Error::NonContraction {
                    ratio: f64::INFINITY,
                    iteration,
                })
            }
            Err(e) => return Err(e),
        };
        let residual = w12_distance(&next, &current);
        if let Some(&previous) = residuals.last() {
            let q = residual / previous;
            ratio = Some(q);
            if residual > tol && (q.is_nan() || q >= 1.0) {
                return Err(Error::NonContraction {
                    ratio: q,
                    iteration,
                });
            }
        }
        residuals.push(residual);
        current = next;
        if residual <= tol {
            return Ok(PicardOutcome {
                trajectory: current,
                iterations: iteration,
                residual,
                contraction_ratio: ratio,
                converged: true,
                residuals,
            });
        }
    }
    Ok(PicardOutcome {
        trajectory: current,
        iterations: residuals.len(),
        residual: *residuals.last().unwrap_or(&f64::NAN),
        contraction_ratio: ratio,
        converged: false,
        residuals,
    })
}
