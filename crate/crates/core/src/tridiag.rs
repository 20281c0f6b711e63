//! Thomas elimination for tridiagonal systems.

/// Tridiagonal matrix stored by diagonals.
///
/// Row `i` reads `lower[i] * x[i-1] + diag[i] * x[i] + upper[i] * x[i+1]`;
/// `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    scratch: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Tridiagonal {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Solves in place: `rhs` holds the solution on return.
    ///
    /// No pivoting; the callers only assemble strictly diagonally dominant systems.
    pub fn solve_in_place(&mut self, rhs: &mut [f64]) {
        let n = self.diag.len();
        assert_eq!(rhs.len(), n, "rhs length does not match the matrix");
        if n == 0 {
            return;
        }
        let c = &mut self.scratch;
        let mut denom = self.diag[0];
        c[0] = self.upper[0] / denom;
        rhs[0] /= denom;
        for i in 1..n {
            denom = self.diag[i] - self.lower[i] * c[i - 1];
            c[i] = self.upper[i] / denom;
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= c[i] * rhs[i + 1];
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn solves_dominant_systems(
            rows in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..40)
        ) {
            let n = rows.len();
            let mut m = Tridiagonal::zeros(n);
            for (i, (l, u, b)) in rows.iter().enumerate() {
                m.lower[i] = *l;
                m.upper[i] = *u;
                m.diag[i] = 2.5 + b;
            }
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
            let mut rhs = m.mul_vec(&x);
            m.solve_in_place(&mut rhs);
            for (a, b) in rhs.iter().zip(&x) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
