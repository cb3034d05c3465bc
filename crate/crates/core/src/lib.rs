//! Numerical inverse scattering for the defocussing Davey-Stewartson II
//! equation, together with an independent split-step reference solver and the
//! multilinear and asymptotic-expansion diagnostics used to check it.

pub mod error;
pub mod evolution;
pub mod expansions;
pub mod field;
pub mod grid;
pub mod dbar;
pub mod io;
pub mod krylov;
pub mod multilinear;
pub mod ops;
pub mod reference;
pub mod scattering;
pub mod spectral;
pub mod verify;

pub use error::{Error, ErrorClass, Result};
pub use field::Field;
pub use grid::{GridSpec, Plane, Space};
pub use num_complex::Complex64;

/// Library version embedded in every artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
