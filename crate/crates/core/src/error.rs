use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("matrix is singular to working precision (condition estimate {cond:.3e})")]
    Singular { cond: f64 },

    #[error("W is not invertible at node {node} (condition estimate {cond:.3e})")]
    WSingular { node: usize, cond: f64 },

    #[error("implicit stage at node {node} did not converge within {iterations} Newton iterations")]
    NewtonFailed { node: usize, iterations: usize },

    #[error("no stabilizing solution of the algebraic Riccati equation: {0}")]
    NoStabilizingSolution(&'static str),

    #[error("{family} expects {expected} quadrature nodes, got {got}")]
    NodeCount {
        family: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("quadrature weights sum to {0}, which is not positive")]
    NonPositiveWeights(f64),

    #[error("integrator {family} is not available for {context}")]
    Unsupported {
        family: &'static str,
        context: &'static str,
    },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),

    #[error("auxiliary coordinate drifted to {value} at step {step}")]
    AuxiliaryDrift { step: usize, value: f64 },
}

impl Error {
    /// True for failures that signal blow-up of an iterate rather than misuse.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::Singular { .. }
                | Error::WSingular { .. }
                | Error::NewtonFailed { .. }
                | Error::NoStabilizingSolution(_)
                | Error::AuxiliaryDrift { .. }
        )
    }
}
