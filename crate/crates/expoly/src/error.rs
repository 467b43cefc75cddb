use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Degree outside the supported range of a constructor.
    #[error("degree {n} out of range (supported: 1..={max})")]
    InvalidDegree { n: usize, max: usize },

    /// Index past the degree of a basis family or scheme.
    #[error("{what} index {index} out of range for degree {degree}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        degree: usize,
    },

    /// Basis tables failed their internal orthogonality residual check.
    #[error("basis tables ill-conditioned at degree {n}: residual {residual:.3e}")]
    IllConditioned { n: usize, residual: f64 },

    /// Invalid argument or configuration value.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A stage evaluation produced a non-finite value.
    #[error("non-finite state at stage {stage} (t = {t})")]
    NonFiniteState { stage: usize, t: f64 },

    /// Newton iteration failed to converge.
    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:.3e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    /// Adaptive step control drove the step size to its floor.
    #[error("step size underflow at t = {t} (h = {h:.3e}, error estimate {est:.3e})")]
    StepSizeUnderflow { t: f64, h: f64, est: f64 },

    /// Catalog lookup failed.
    #[error("unknown problem {0:?}")]
    UnknownProblem(String),

    /// The solution escaped to infinity inside the integration interval.
    #[error("finite-time blow-up detected near t = {t}")]
    FiniteTimeBlowup { t: f64 },

    /// Root extraction produced no zero in the admissible interval.
    #[error("no valid zero in (0, 1) for alpha = {alpha}, beta = {beta}")]
    NoValidZero { alpha: u32, beta: u32 },

    /// Violated internal invariant; indicates a bug, not bad input.
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
