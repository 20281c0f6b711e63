//! Screened elliptic velocity equation `-eps * phi'' + phi = f` on (-1, 1).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::model::{ModelParams, ReproductionLaw};
use crate::tridiag::Tridiagonal;

/// `-eps * phi'' + phi = f` with `phi(-1) = phi(1) = 0`.
#[derive(Debug, Clone)]
pub struct EllipticProblem {
    pub epsilon: f64,
    pub f: Field,
}

impl EllipticProblem {
    pub fn new(epsilon: f64, f: Field) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(EllipticProblem { epsilon, f })
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(())
}

/// Second-order central differences on the interior nodes, Dirichlet ends,
/// direct tridiagonal elimination.
pub fn solve_elliptic(prob: &EllipticProblem) -> Result<Field> {
    check_epsilon(prob.epsilon)?;
    let grid = prob.f.grid().clone();
    let mut solver = DirichletSolver::new(grid.n());
    let mut phi = vec![0.0; grid.n()];
    solver.solve(prob.epsilon, grid.h(), prob.f.values(), &mut phi);
    Field::new(grid, phi)
}

/// Reusable workspace for the Dirichlet solve.
#[derive(Debug, Clone)]
pub(crate) struct DirichletSolver {
    mat: Tridiagonal,
    rhs: Vec<f64>,
}

impl DirichletSolver {
    pub(crate) fn new(n: usize) -> Self {
        DirichletSolver {
            mat: Tridiagonal::zeros(n - 2),
            rhs: vec![0.0; n - 2],
        }
    }

    pub(crate) fn solve(&mut self, epsilon: f64, h: f64, f: &[f64], phi: &mut [f64]) {
        let n = f.len();
        let m = n - 2;
        let off = -epsilon / (h * h);
        let d = 1.0 - 2.0 * off;
        for k in 0..m {
            self.mat.lower[k] = off;
            self.mat.diag[k] = d;
            self.mat.upper[k] = off;
        }
        self.rhs.copy_from_slice(&f[1..n - 1]);
        self.mat.solve_in_place(&mut self.rhs);
        phi[0] = 0.0;
        phi[n - 1] = 0.0;
        phi[1..n - 1].copy_from_slice(&self.rhs);
    }
}

/// Forcing `d/dx E(u)` of the velocity equation.
pub(crate) fn velocity_forcing(
    grid: &Grid,
    law: &ReproductionLaw,
    u: &[f64],
    f: &mut [f64],
    scratch: &mut [f64],
) {
    match law {
        ReproductionLaw::Monostable => {
            grid.derivative_into(u, f);
            f.iter_mut().for_each(|v| *v = -*v);
        }
        _ => {
            for (s, &v) in scratch.iter_mut().zip(u) {
                *s = law.e(v);
            }
            grid.derivative_into(scratch, f);
        }
    }
}

/// Workspace computing `phi_u` for the coupled steppers.
#[derive(Debug, Clone)]
pub(crate) struct VelocitySolver {
    dirichlet: DirichletSolver,
    f: Vec<f64>,
    scratch: Vec<f64>,
}

impl VelocitySolver {
    pub(crate) fn new(n: usize) -> Self {
        VelocitySolver {
            dirichlet: DirichletSolver::new(n),
            f: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }

    pub(crate) fn solve(&mut self, grid: &Grid, u: &[f64], p: &ModelParams, phi: &mut [f64]) {
        velocity_forcing(grid, &p.law, u, &mut self.f, &mut self.scratch);
        self.dirichlet.solve(p.epsilon, grid.h(), &self.f, phi);
    }
}

/// Dispersal velocity `phi_u` solving `-eps phi'' + phi = d/dx E(u)`, `phi(+-1) = 0`.
pub fn compute_velocity(u: &Field, p: &ModelParams) -> Result<Field> {
    check_epsilon(p.epsilon)?;
    let grid = u.grid().clone();
    let mut solver = VelocitySolver::new(grid.n());
    let mut phi = vec![0.0; grid.n()];
    solver.solve(&grid, u.values(), p, &mut phi);
    Field::new(grid, phi)
}

/// `-eps psi'' + psi = g` with `psi'(+-1) = 0` via ghost-node reflection.
///
/// Assembled in control-volume form so the matrix is symmetric.
pub fn solve_elliptic_neumann(epsilon: f64, g: &Field) -> Result<Field> {
    check_epsilon(epsilon)?;
    let grid = g.grid().clone();
    let mut solver = NeumannSolver::new(grid.n());
    let mut psi = vec![0.0; grid.n()];
    solver.solve(epsilon, &grid, g.values(), &mut psi);
    Field::new(grid, psi)
}

#[derive(Debug, Clone)]
pub(crate) struct NeumannSolver {
    mat: Tridiagonal,
}

impl NeumannSolver {
    pub(crate) fn new(n: usize) -> Self {
        NeumannSolver {
            mat: Tridiagonal::zeros(n),
        }
    }

    pub(crate) fn solve(&mut self, epsilon: f64, grid: &Grid, g: &[f64], psi: &mut [f64]) {
        let n = grid.n();
        let c = epsilon / grid.h();
        for i in 0..n {
            let w = grid.weight(i);
            let lo = if i > 0 { c } else { 0.0 };
            let hi = if i + 1 < n { c } else { 0.0 };
            self.mat.lower[i] = -lo;
            self.mat.upper[i] = -hi;
            self.mat.diag[i] = w + lo + hi;
            psi[i] = w * g[i];
        }
        self.mat.solve_in_place(psi);
    }
}

/// Discrete `W^{2,2}` norm: sum of the L2 norms of `v`, `v'` and `v''`.
pub fn w22_norm(grid: &Grid, v: &[f64]) -> f64 {
    let d1 = grid.derivative(v);
    let d2 = grid.second_derivative(v);
    grid.l2sq(v).sqrt() + grid.l2sq(&d1).sqrt() + grid.l2sq(&d2).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityRow {
    pub epsilon: f64,
    pub ratio: f64,
}

/// Tabulates `eps * ||phi||_{W^{2,2}} / ||f||_2` for each `eps`.
pub fn probe_regularity_constant(epsilons: &[f64], f: &Field) -> Result<Vec<RegularityRow>> {
    let grid: Arc<Grid> = f.grid().clone();
    let f_norm = f.l2();
    epsilons
        .iter()
        .map(|&epsilon| {
            let phi = solve_elliptic(&EllipticProblem::new(epsilon, f.clone())?)?;
            let ratio = if f_norm == 0.0 {
                0.0
            } else {
                w22_norm(&grid, phi.values()) * epsilon / f_norm
            };
            Ok(RegularityRow { epsilon, ratio })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn manufactured_error(n: usize, eps: f64) -> f64 {
        let g = Grid::new(n).unwrap();
        let f = Field::from_fn(g.clone(), |x| (eps * PI * PI + 1.0) * (PI * x).sin()).unwrap();
        let phi = solve_elliptic(&EllipticProblem::new(eps, f).unwrap()).unwrap();
        let exact = Field::from_fn(g, |x| (PI * x).sin()).unwrap();
        phi.max_distance(&exact)
    }

    #[test]
    fn zero_data_zero_solution() {
        let g = Grid::new(21).unwrap();
        let phi =
            solve_elliptic(&EllipticProblem::new(0.3, Field::constant(g, 0.0)).unwrap()).unwrap();
        assert!(phi.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn manufactured_sine() {
        let err = manufactured_error(401, 0.05);
        assert!(err <= 5e-4, "err = {err}");
    }

    #[test]
    fn manufactured_second_order() {
        for eps in [1.0, 0.05, 0.01] {
            let e1 = manufactured_error(101, eps);
            let e2 = manufactured_error(201, eps);
            let ratio = e1 / e2;
            assert!((ratio - 4.0).abs() <= 0.8, "eps {eps}: ratio {ratio}");
        }
    }

    #[test]
    fn constant_forcing_closed_form() {
        // phi = 1 - cosh(x / sqrt(eps)) / cosh(1 / sqrt(eps))
        for eps in [1.0, 0.1, 0.01] {
            let g = Grid::new(801).unwrap();
            let phi = solve_elliptic(
                &EllipticProblem::new(eps, Field::constant(g.clone(), 1.0)).unwrap(),
            )
            .unwrap();
            let exact_mid = 1.0 - 1.0 / (1.0 / eps.sqrt()).cosh();
            assert!(
                (phi[400] - exact_mid).abs() < 1e-5,
                "eps {eps}: {} vs {exact_mid}",
                phi[400]
            );
            assert_eq!(phi[0], 0.0);
            assert_eq!(phi[800], 0.0);
        }
    }

    #[test]
    fn rejects_bad_problems() {
        let g = Grid::new(5).unwrap();
        assert!(EllipticProblem::new(0.0, Field::constant(g.clone(), 1.0)).is_err());
        assert!(EllipticProblem::new(-1.0, Field::constant(g.clone(), 1.0)).is_err());
        let bad = EllipticProblem {
            epsilon: -0.5,
            f: Field::constant(g, 1.0),
        };
        assert!(solve_elliptic(&bad).is_err());
    }

    #[test]
    fn velocity_of_constants_vanishes() {
        let g = Grid::new(41).unwrap();
        for p in [
            ModelParams::monostable(0.1, 0.01, 1.0).unwrap(),
            ModelParams::bistable(0.1, 0.01, 1.0, 0.3).unwrap(),
        ] {
            for c in [0.0, 0.65, 2.0] {
                let phi = compute_velocity(&Field::constant(g.clone(), c), &p).unwrap();
                assert!(phi.values().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn monostable_velocity_of_cosine() {
        let eps = 0.1;
        let p = ModelParams::monostable(0.1, eps, 0.0).unwrap();
        let mut errs = Vec::new();
        for n in [201, 401] {
            let g = Grid::new(n).unwrap();
            let u = Field::cosine(g.clone(), 0.0, 1.0, 1).unwrap();
            let phi = compute_velocity(&u, &p).unwrap();
            let amp = PI / (eps * PI * PI + 1.0);
            let exact = Field::from_fn(g, |x| amp * (PI * x).sin()).unwrap();
            errs.push(phi.max_distance(&exact));
        }
        assert!(errs[1] < 2e-4, "{errs:?}");
        let ratio = errs[0] / errs[1];
        assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
    }

    #[test]
    fn bistable_velocity_at_vertex_vanishes() {
        let g = Grid::new(41).unwrap();
        let p = ModelParams::bistable(0.1, 0.01, 1.0, 0.3).unwrap();
        let phi = compute_velocity(&Field::constant(g, 0.65), &p).unwrap();
        assert!(phi.max_abs() == 0.0);
    }

    #[test]
    fn neumann_solve_of_constant() {
        let g = Grid::new(33).unwrap();
        let psi = solve_elliptic_neumann(0.05, &Field::constant(g, 2.5)).unwrap();
        assert!(psi.values().iter().all(|v| (v - 2.5).abs() < 1e-13));
    }

    #[test]
    fn neumann_manufactured_cosine() {
        // -eps psi'' + psi = (eps pi^2 + 1) cos(pi x) has psi = cos(pi x), psi'(+-1) = 0.
        let eps = 0.05;
        let mut errs = Vec::new();
        for n in [201, 401] {
            let g = Grid::new(n).unwrap();
            let rhs = Field::cosine(g.clone(), 0.0, eps * PI * PI + 1.0, 1).unwrap();
            let psi = solve_elliptic_neumann(eps, &rhs).unwrap();
            errs.push(psi.max_distance(&Field::cosine(g, 0.0, 1.0, 1).unwrap()));
        }
        assert!(errs[1] < 1e-4);
        assert!((errs[0] / errs[1] - 4.0).abs() < 0.8, "{errs:?}");
    }

    #[test]
    fn regularity_probe_examples() {
        let g = Grid::new(401).unwrap();
        let zero =
            probe_regularity_constant(&[1.0, 0.1], &Field::constant(g.clone(), 0.0)).unwrap();
        assert!(zero.iter().all(|r| r.ratio == 0.0));

        let f = Field::from_fn(g, |x| (PI * x).sin()).unwrap();
        let single = probe_regularity_constant(&[1.0], &f).unwrap();
        assert!(single[0].ratio > 0.0);

        let rows = probe_regularity_constant(&[1.0, 0.1, 0.01, 1e-3], &f).unwrap();
        let max = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
        let min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        assert!(max / min <= 100.0, "{rows:?}");
    }

    fn smooth_field(g: Arc<Grid>, coeffs: &[f64]) -> Field {
        Field::from_fn(g, |x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * ((k as f64 + 1.0) * 0.5 * PI * (x + 1.0)).cos())
                .sum()
        })
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn discrete_maximum_principle(
            coeffs in prop::collection::vec(-1.0f64..1.0, 1..6),
            eps in 1e-3f64..1.0,
        ) {
            let g = Grid::new(101).unwrap();
            let raw = smooth_field(g.clone(), &coeffs);
            let f = raw.map(|v| v.abs());
            let phi = solve_elliptic(&EllipticProblem::new(eps, f).unwrap()).unwrap();
            prop_assert!(phi.min() >= -1e-12);
        }

        #[test]
        fn energy_identity(
            coeffs in prop::collection::vec(-1.0f64..1.0, 1..6),
            eps in 1e-3f64..1.0,
        ) {
            let g = Grid::new(101).unwrap();
            let f = smooth_field(g.clone(), &coeffs);
            let phi = solve_elliptic(&EllipticProblem::new(eps, f.clone()).unwrap()).unwrap();
            let lhs = eps * g.grad_l2sq(phi.values()) + g.l2sq(phi.values());
            let rhs = g.inner(f.values(), phi.values());
            prop_assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1e-300));
        }
    }
}
