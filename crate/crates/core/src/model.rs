//! Reproduction laws, model parameters and the simulation state.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::tolerances::POSITIVITY_TOL;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Net per-capita reproduction rate `E(u)`.
#[derive(Clone)]
pub enum ReproductionLaw {
    /// `E(u) = (1 - u)(u - a)` with `0 < a < 1`.
    Bistable { a: f64 },
    /// `E(u) = 1 - u`.
    Monostable,
    /// User-supplied `E`, `E'` and `E''`.
    Custom {
        e: ScalarFn,
        de: ScalarFn,
        d2e: ScalarFn,
    },
}

impl fmt::Debug for ReproductionLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReproductionLaw::Bistable { a } => f.debug_struct("Bistable").field("a", a).finish(),
            ReproductionLaw::Monostable => f.write_str("Monostable"),
            ReproductionLaw::Custom { .. } => f.write_str("Custom"),
        }
    }
}

impl ReproductionLaw {
    pub fn custom(
        e: impl Fn(f64) -> f64 + Send + Sync + 'static,
        de: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2e: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ReproductionLaw::Custom {
            e: Arc::new(e),
            de: Arc::new(de),
            d2e: Arc::new(d2e),
        }
    }

    #[inline]
    pub fn e(&self, u: f64) -> f64 {
        match self {
            ReproductionLaw::Bistable { a } => (1.0 - u) * (u - a),
            ReproductionLaw::Monostable => 1.0 - u,
            ReproductionLaw::Custom { e, .. } => e(u),
        }
    }

    #[inline]
    pub fn de(&self, u: f64) -> f64 {
        match self {
            ReproductionLaw::Bistable { a } => -2.0 * u + (a + 1.0),
            ReproductionLaw::Monostable => -1.0,
            ReproductionLaw::Custom { de, .. } => de(u),
        }
    }

    #[inline]
    pub fn d2e(&self, u: f64) -> f64 {
        match self {
            ReproductionLaw::Bistable { .. } => -2.0,
            ReproductionLaw::Monostable => 0.0,
            ReproductionLaw::Custom { d2e, .. } => d2e(u),
        }
    }

    /// `E~(z) = z E(z)`, the reaction term up to the factor `r`.
    #[inline]
    pub fn e_tilde(&self, z: f64) -> f64 {
        z * self.e(z)
    }

    pub fn is_monostable(&self) -> bool {
        matches!(self, ReproductionLaw::Monostable)
    }

    pub fn validate(&self) -> Result<()> {
        if let ReproductionLaw::Bistable { a } = self {
            if !(a.is_finite() && *a > 0.0 && *a < 1.0) {
                return Err(Error::invalid(format!("a must lie in (0,1), got {a}")));
            }
        }
        Ok(())
    }
}

/// Pointwise `E(u)`.
pub fn evaluate_e(law: &ReproductionLaw, u: &Field) -> Field {
    u.map(|v| law.e(v))
}

/// Pointwise `E'(u)`.
pub fn evaluate_e_prime(law: &ReproductionLaw, u: &Field) -> Field {
    u.map(|v| law.de(v))
}

#[derive(Debug, Clone)]
pub struct ModelParams {
    pub delta: f64,
    pub epsilon: f64,
    pub r: f64,
    pub law: ReproductionLaw,
}

impl ModelParams {
    pub fn new(delta: f64, epsilon: f64, r: f64, law: ReproductionLaw) -> Result<Self> {
        let p = ModelParams {
            delta,
            epsilon,
            r,
            law,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn monostable(delta: f64, epsilon: f64, r: f64) -> Result<Self> {
        Self::new(delta, epsilon, r, ReproductionLaw::Monostable)
    }

    pub fn bistable(delta: f64, epsilon: f64, r: f64, a: f64) -> Result<Self> {
        Self::new(delta, epsilon, r, ReproductionLaw::Bistable { a })
    }

    pub fn validate(&self) -> Result<()> {
        validate_params(self)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        ModelParams {
            epsilon,
            ..self.clone()
        }
    }
}

pub fn validate_params(p: &ModelParams) -> Result<()> {
    if !(p.delta.is_finite() && p.delta > 0.0) {
        return Err(Error::invalid(format!(
            "delta must be positive, got {}",
            p.delta
        )));
    }
    if !(p.epsilon.is_finite() && p.epsilon > 0.0) {
        return Err(Error::invalid(format!(
            "epsilon must be positive, got {}",
            p.epsilon
        )));
    }
    if !(p.r.is_finite() && p.r >= 0.0) {
        return Err(Error::invalid(format!(
            "r must be nonnegative, got {}",
            p.r
        )));
    }
    p.law.validate()
}

/// Time plus density; the velocity is always recomputed from `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: Field,
}

impl SimState {
    pub fn new(t: f64, u: Field) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::invalid(format!(
                "time must be finite and >= 0, got {t}"
            )));
        }
        check_positivity(t, u.values())?;
        Ok(SimState { t, u })
    }
}

pub(crate) fn check_positivity(t: f64, u: &[f64]) -> Result<()> {
    let (node, min) = u
        .iter()
        .copied()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |acc, (i, v)| if v < acc.1 { (i, v) } else { acc },
        );
    if min < -POSITIVITY_TOL {
        return Err(Error::Positivity { t, min, node });
    }
    Ok(())
}

/// `u log u`, extended by its limit 0 on `u <= 1e-300` (round-off negatives included).
#[inline]
pub fn xlogx(u: f64) -> f64 {
    if u <= 1e-300 {
        0.0
    } else {
        u * u.ln()
    }
}
