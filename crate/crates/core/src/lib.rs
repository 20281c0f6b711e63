//! Simulation of the one-dimensional individual-clustering model
//!
//! ```text
//! u_t = delta u_xx - (u phi)_x + r u E(u),   -eps phi_xx + phi = (E(u))_x   on (-1, 1),
//! u_x(+-1) = phi(+-1) = 0,
//! ```
//!
//! together with its mild formulation, the singular limit `eps -> 0`, and the
//! functionals used to monitor long-time behaviour.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod mild;
pub mod model;
pub mod output;
pub mod stepper;
pub mod tolerances;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use model::{ModelParams, ReproductionLaw, SimState};
pub use stepper::{run, step, RunOptions, RunOutput, StepperConfig};
