use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model or solver parameter violates its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error(
        "CFL violation at t = {t}: dt = {dt} exceeds cfl_safety*h/max|phi| = {bound} \
         (max|phi| = {max_velocity}); lower dt"
    )]
    Cfl {
        t: f64,
        dt: f64,
        bound: f64,
        max_velocity: f64,
    },

    #[error("positivity violated at t = {t}: min(u) = {min} (node {node})")]
    Positivity { t: f64, min: f64, node: usize },

    /// The fixed-point iteration stopped contracting.
    #[error("Picard iteration is not contracting: ratio {ratio} at iteration {iteration}")]
    NonContraction { ratio: f64, iteration: usize },

    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        message: String,
    },

    #[error("run for epsilon = {epsilon} failed: {source}")]
    Sweep {
        epsilon: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: msg.into(),
        }
    }

    /// True for failures raised by the numerical solvers rather than by input validation.
    pub fn is_solver_abort(&self) -> bool {
        match self {
            Error::Cfl { .. }
            | Error::Positivity { .. }
            | Error::NonFinite { .. }
            | Error::NonContraction { .. } => true,
            Error::Sweep { source, .. } => source.is_solver_abort(),
            _ => false,
        }
    }
}
