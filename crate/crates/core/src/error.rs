use alloc::string::String;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("point is not feasible for {domain} (violation {violation:.3e})")]
    Infeasible { domain: &'static str, violation: f64 },

    #[error("{what}: bisection did not converge after {iterations} iterations (residual {residual:.3e})")]
    BisectionFailed {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("max-min bracket not closed: lower {lower:.12e}, upper {upper:.12e}")]
    MaxMinNotConverged { lower: f64, upper: f64 },

    #[error("level set is empty (multipliers diverged to {multiplier_norm:.3e})")]
    EmptyLevelSet { multiplier_norm: f64 },

    #[error("level projection stalled: KKT residual {residual:.3e} after {iterations} iterations")]
    ProjectionStalled { residual: f64, iterations: usize },

    #[error("negative multiplier {value} at position {index}")]
    NegativeMultiplier { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("empty protocol")]
    EmptyProtocol,
}

pub type Result<T> = core::result::Result<T, Error>;
