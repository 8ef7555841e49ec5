use thiserror::Error;

/// Errors raised by the solver, the expectation backends and the harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BsdeError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The implicit step is not a contraction: `theta * delta * K >= 1`.
    #[error("step size too large at index {index}: theta*delta*K = {contraction:.6} >= 1")]
    StepSize { index: usize, contraction: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("non-finite value encountered: {0}")]
    NumericalDomain(String),

    #[error("cubature tree needs {required} nodes for n = {n}, budget is {budget}")]
    Resource { n: usize, required: usize, budget: usize },

    #[error("unsupported problem: {0}")]
    UnsupportedProblem(String),
}

impl BsdeError {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            BsdeError::NoConvergence { .. } | BsdeError::NumericalDomain(_) | BsdeError::Resource { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, BsdeError>;
