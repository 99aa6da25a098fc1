//! Solitary waves of the two-dimensional generalized Benjamin-Ono-Zakharov-Kuznetsov
//! equation `u_t + u^p u_x + alpha H u_xx + eps u_xyy = 0` on periodic boxes.
//!
//! Fields live on a [`Grid2D`] centred at the origin index `(nx/2, ny/2)`. The
//! modules cover the Fourier toolkit ([`spectral`]), conserved and variational
//! functionals ([`functionals`]), the linear Green kernel ([`kernel`]), the
//! stationary solver ([`solver`]), time evolution ([`evolve`]) and a binary
//! field format ([`fieldfile`]).

pub mod error;
pub mod evolve;
pub mod fieldfile;
mod fit;
pub mod functionals;
pub mod kernel;
pub mod quadrature;
mod resample;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use evolve::{evolve, evolve_observed, EvolveOptions, EvolveReport};
pub use functionals::{FunctionalReport, Mapping, Params, PohojaevResiduals};
pub use kernel::KernelSpec;
pub use solver::{classify, petviashvili_solve, Classification, SolitaryWave, SolveOptions, Verdict};
pub use spectral::{Axis, Field, Grid2D, Spectrum};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
