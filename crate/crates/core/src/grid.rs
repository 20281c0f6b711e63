//! Uniform mesh of (-1, 1) and nodal fields on it.
//!
//! Nodes carry trapezoidal control volumes: width `h` in the interior and
//! `h/2` at the two ends. Every integral in the crate goes through
//! [`Grid::integrate`], so discrete mass is the trapezoidal sum of the nodal
//! values.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    h: f64,
    x: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize) -> Result<Arc<Grid>> {
        if n < 3 {
            return Err(Error::invalid(format!(
                "grid needs at least 3 nodes, got {n}"
            )));
        }
        let h = 2.0 / (n - 1) as f64;
        let x = (0..n)
            .map(|i| if i == n - 1 { 1.0 } else { -1.0 + i as f64 * h })
            .collect();
        Ok(Arc::new(Grid { n, h, x }))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Control-volume width of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n - 1 {
            0.5 * self.h
        } else {
            self.h
        }
    }

    /// Trapezoidal integral over (-1, 1).
    pub fn integrate(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.n);
        let interior: f64 = v[1..self.n - 1].iter().sum();
        self.h * (interior + 0.5 * (v[0] + v[self.n - 1]))
    }

    pub fn mean(&self, v: &[f64]) -> f64 {
        0.5 * self.integrate(v)
    }

    pub fn l2sq(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.n);
        let interior: f64 = v[1..self.n - 1].iter().map(|a| a * a).sum();
        self.h * (interior + 0.5 * (v[0] * v[0] + v[self.n - 1] * v[self.n - 1]))
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.n);
        debug_assert_eq!(b.len(), self.n);
        let interior: f64 = a[1..self.n - 1]
            .iter()
            .zip(&b[1..self.n - 1])
            .map(|(p, q)| p * q)
            .sum();
        self.h * (interior + 0.5 * (a[0] * b[0] + a[self.n - 1] * b[self.n - 1]))
    }

    /// `||v'||^2` with the derivative taken as a centred difference at each
    /// cell face and integrated by the midpoint rule.
    pub fn grad_l2sq(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.n);
        let s: f64 = v.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
        s / self.h
    }

    /// `int a * b'` with `a` averaged to faces and `b'` differenced across them.
    pub fn face_inner_grad(&self, a: &[f64], b: &[f64]) -> f64 {
        a.windows(2)
            .zip(b.windows(2))
            .map(|(wa, wb)| 0.5 * (wa[0] + wa[1]) * (wb[1] - wb[0]))
            .sum()
    }

    /// Nodal first derivative: centred in the interior, second-order one-sided at the ends.
    pub fn derivative(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(v.len(), n);
        let mut d = vec![0.0; n];
        self.derivative_into(v, &mut d);
        d
    }

    pub(crate) fn derivative_into(&self, v: &[f64], d: &mut [f64]) {
        let n = self.n;
        let inv2h = 0.5 / self.h;
        for i in 1..n - 1 {
            d[i] = (v[i + 1] - v[i - 1]) * inv2h;
        }
        if n >= 3 {
            d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv2h;
            d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) * inv2h;
        }
    }

    /// Nodal second derivative: centred in the interior, one-sided at the ends.
    pub fn second_derivative(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let h2 = self.h * self.h;
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            d[i] = (v[i - 1] - 2.0 * v[i] + v[i + 1]) / h2;
        }
        if n >= 4 {
            d[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2;
            d[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2;
        } else {
            d[0] = d[1];
            d[n - 1] = d[n - 2];
        }
        d
    }
}

/// Real values sampled on the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.n() {
            return Err(Error::LengthMismatch {
                expected: grid.n(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "field values".into(),
            });
        }
        Ok(Field { grid, values })
    }

    /// Skips the finiteness scan; callers guarantee the invariants.
    pub(crate) fn from_parts(grid: Arc<Grid>, values: Vec<f64>) -> Field {
        debug_assert_eq!(values.len(), grid.n());
        Field { grid, values }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Field {
        let n = grid.n();
        Field::from_parts(grid, vec![c; n])
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Field> {
        let values = grid.x().iter().map(|&x| f(x)).collect();
        Field::new(grid, values)
    }

    /// `mean + amp * cos(mode * pi * x)`.
    pub fn cosine(grid: Arc<Grid>, mean: f64, amp: f64, mode: u32) -> Result<Field> {
        let k = mode as f64 * PI;
        Field::from_fn(grid, |x| mean + amp * (k * x).cos())
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_parts(
            self.grid.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.grid.mean(&self.values)
    }

    pub fn l2sq(&self) -> f64 {
        self.grid.l2sq(&self.values)
    }

    pub fn l2(&self) -> f64 {
        self.l2sq().sqrt()
    }

    /// L2 distance to another field on the same grid.
    pub fn l2_distance(&self, other: &Field) -> f64 {
        let d: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        self.grid.l2sq(&d).sqrt()
    }

    pub fn max_distance(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl std::ops::Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}
