//! Exponential-basis one-step ODE solvers.
//!
//! The crate builds a family of Runge-Kutta-like integration schemes from
//! polynomials in exp(-t) that are orthogonal on the semi-axis. It provides:
//!
//! - [`basis`]: the orthogonal functions, their zeros, and the associated
//!   quadrature rule for exponentials;
//! - [`schemes`]: explicit and implicit (collocation) scheme coefficients
//!   derived from the basis, with dense-output rows;
//! - [`integrate`]: fixed and adaptive steppers, plus Newton-based stepping
//!   for the collocation scheme and for generic Butcher tableaux;
//! - [`stability`]: stability functions, A-stability verdicts, region
//!   rasters, and monotonicity thresholds;
//! - [`genmethods`]: the weighted generalization of the basis via an exact
//!   Rodrigues-type expansion, and the derived A-stable and L-stable
//!   two-stage methods as Butcher tableaux;
//! - [`problems`]: a test-problem catalog with closed-form references and a
//!   high-accuracy embedded Runge-Kutta reference solver.

pub mod basis;
mod ddbuild;
mod error;
pub mod genmethods;
pub mod integrate;
pub mod problems;
pub mod schemes;
pub mod stability;

pub use error::{Error, Result};
