use thiserror::Error;

use crate::evolve::EvolveReport;
use crate::solver::SolitaryWave;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("field shape mismatch: expected {expected:?}, got {actual:?}")]
    SizeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unsupported derivative order {0} (supported: 1..=4)")]
    UnsupportedOrder(u32),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("parameter regime violation: {0}")]
    Regime(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "quadrature did not reach relative tolerance {tol:e} \
         (error estimate {estimate:e} after {evaluations} evaluations)"
    )]
    Quadrature {
        tol: f64,
        estimate: f64,
        evaluations: usize,
    },

    #[error("fit window holds {points} samples, at least {required} required")]
    WindowTooSmall { points: usize, required: usize },

    #[error("boundary contamination {contamination:e} exceeds {limit:e}; decay fit unreliable")]
    UnreliableFit { contamination: f64, limit: f64 },

    #[error("rescaled wave not resolvable on this grid: {0}")]
    Unresolvable(String),

    #[error(
        "Petviashvili iteration stopped after {iterations} iterations \
         without converging (residual {residual:e})"
    )]
    NotConverged {
        iterations: usize,
        residual: f64,
        wave: Box<SolitaryWave>,
    },

    #[error("solve at c = {c} failed: {source}")]
    Sweep {
        c: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("blow-up detected at t = {t}: max|u| = {max_abs:e}")]
    BlowUp {
        t: f64,
        max_abs: f64,
        report: Box<EvolveReport>,
    },

    #[error("bad field-file magic {0:?}")]
    BadMagic(String),

    #[error("malformed field-file header: {0}")]
    Header(String),

    #[error("field-file payload size mismatch: expected {expected} bytes, found {actual}")]
    PayloadSize { expected: u64, actual: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
