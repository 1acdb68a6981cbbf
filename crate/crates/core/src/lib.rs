//! Time-dependent coefficients of non-Markovian master equations for a damped
//! cavity mode, a driven cavity and a decaying two-state atom.
//!
//! The coefficients are computed two ways: from Volterra-type integral
//! equations for auxiliary coefficient functions ([`coefffuncs`] and
//! [`assemble`]), and from the Green's-function integro-differential
//! equations ([`green`]). [`dynamics`] propagates the resulting time-local
//! master equations and [`unravel`] averages the stochastic Liouville
//! equation as an independent Monte Carlo check.
//!
//! Units are ħ = k_B = 1. The engine is generic over the real scalar
//! ([`Real`], implemented for `f32` and `f64`); the aliases at the crate root
//! fix it to `f64`.

pub mod assemble;
pub mod coefffuncs;
pub mod dynamics;
pub mod error;
pub mod green;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod quadrature;
pub mod scalar;
pub mod unravel;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use kernels::{alpha1, alpha2, sample_kernels, ResponseKernel, SpectralModel, Temperature};
pub use scalar::{Cx, Real};

/// Complex `f64`.
pub type C64 = Cx<f64>;
pub type Grid = grid::TimeGrid<f64>;
pub type Spectral = kernels::SpectralModel<f64>;
pub type Kernel = kernels::ResponseKernel<f64>;
