//! Numerical laboratory for the nodal length of monochromatic random waves.
//!
//! The special-function layer (`kernels`, `sphere`) is generic over
//! [`scalar::Real`]; the quadrature, ledger and simulation engines run in
//! `f64`, with exact coefficients carried as [`scalar::Rational`].

pub mod chaos;
pub mod diagram;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod ledger;
pub mod nodal;
pub mod quad;
pub mod radial;
pub mod rng;
pub mod stats;
pub mod wavefield;
pub mod sphere;
pub mod scalar;

pub use error::{Result, RwmError};
pub use scalar::{Rational, Real};

pub type KernelValue64 = kernels::KernelValue<f64>;
pub type KernelValue32 = kernels::KernelValue<f32>;
