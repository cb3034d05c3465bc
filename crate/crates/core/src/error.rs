use thiserror::Error;

use crate::grid::Space;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input, bad configuration, or a violated precondition.
    Validation,
    /// A solver or estimator did not deliver the requested accuracy.
    Numerical,
    /// The grid cannot resolve the requested computation.
    Budget,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: ({n_a}, {l_a}) vs ({n_b}, {l_b})")]
    GridMismatch {
        n_a: usize,
        l_a: f64,
        n_b: usize,
        l_b: f64,
    },

    #[error("expected a field on the {expected:?} plane, found {found:?}")]
    SpaceMismatch { expected: Space, found: Space },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error("{fraction:.3e} of the L2 mass lies outside the inner half of the box (limit {limit:.1e})")]
    BoundaryMass { fraction: f64, limit: f64 },

    #[error("requested |k| up to {requested} but the lattice only reaches {available}")]
    Aliasing { requested: f64, available: f64 },

    #[error("oscillation budget exceeded: t = {t} but the grid resolves only |t| <= {t_max:.4}")]
    Budget { t: f64, t_max: f64 },

    #[error("solver stalled at relative residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("{failed} of {total} scattering points failed to converge")]
    ScatteringFailure { failed: usize, total: usize },

    #[error("solution blew up at t = {t}")]
    BlowUp { t: f64 },

    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("importance weights look heavy tailed (tail index {tail_index:.3}); variance may diverge")]
    DivergentVariance { tail_index: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidGrid(_)
            | Error::GridMismatch { .. }
            | Error::SpaceMismatch { .. }
            | Error::InvalidConfig(_)
            | Error::Precondition(_)
            | Error::Format(_)
            | Error::BoundaryMass { .. }
            | Error::Io(_) => ErrorClass::Validation,
            Error::Aliasing { .. } | Error::Budget { .. } => ErrorClass::Budget,
            Error::NoConvergence { .. }
            | Error::ScatteringFailure { .. }
            | Error::BlowUp { .. }
            | Error::IllConditioned(_)
            | Error::DivergentVariance { .. } => ErrorClass::Numerical,
        }
    }
}
