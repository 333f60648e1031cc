//! Numerical core for zeros of P(φ)₂ random polynomials.
//!
//! The crate is `no_std` (it needs `alloc`) and keeps all IO elsewhere. It
//! covers:
//!
//! * [`geometry`]: weights on O(1) → CP¹, quadrature rules, the chordal
//!   metric and the Green's function `G_h`.
//! * [`ensemble`]: polynomial sections, weighted norms, kinetic energy and
//!   the action `S(s)`.
//! * [`sampler`]: exact Gaussian draws and an adaptive random-walk Metropolis
//!   sampler for `e^{-S(s)} ds`.
//! * [`zeros`]: Aberth–Ehrlich root finding, reconstruction and empirical
//!   measures of zeros.
//! * [`measures`]: Green energies and potentials, exact W₁, the rate
//!   functional and the equilibrium-measure solver.
//! * [`jpc`]: the joint probability current of zeros and the Γ_N integrals.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod jpc;
pub mod measures;
pub mod sampler;
pub mod special;
pub mod transport;
pub mod zeros;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
