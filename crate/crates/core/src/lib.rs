//! Tempered fractional diffusion on bounded intervals.
//!
//! Three independent routes to the solution of the tempered fractional
//! Cauchy problem on `(0, M)` (and boxes): an eigenfunction series whose
//! temporal factors are the relaxation functions `ǧ_λ(t, η_n)`, a
//! subordination integral against the inverse-subordinator density, and a
//! Monte Carlo estimator that time-changes a killed diffusion.

pub mod error;
pub mod frac_ops;
pub mod laplace;
pub mod mc_solver;
pub mod pde_series;
pub mod quad;
pub mod rng;
pub mod special_fn;
pub mod subordinator;
pub mod validate;

pub use error::{Error, Result};
pub use special_fn::{RelaxationQuery, TemperedParams};
