//! Open-system simulation of dissipatively prepared entanglement between two
//! trapped ions.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only numerics:
//!
//! * [`qop`]: labeled tensor-product spaces, operators, density matrices and
//!   sparse superoperators (column-major vectorization throughout).
//! * [`model`]: physical parameters and the Hamiltonian / dissipator builders.
//! * [`dynamics`]: fixed-step RK4 and exact-unitary split-step propagation of
//!   Lindblad master equations, including piecewise phase-switching schedules.
//! * [`steady`]: Liouvillian assembly and direct sparse steady-state solves.
//! * [`reduction`]: single-ion optical Bloch equations and adiabatic
//!   elimination of the short-lived level.
//! * [`observables`]: Bell-state populations and the CHSH correlation.
//!
//! Units: angular frequencies in rad/ms, times in ms.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod dynamics;
mod error;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod qop;
pub mod reduction;
pub mod steady;

pub use error::{Error, Result};
pub use faer::c64;

/// Converts a linear frequency in kHz (the value of `ω/2π`) to rad/ms.
#[inline]
pub fn khz(value_over_2pi: f64) -> f64 {
    core::f64::consts::TAU * value_over_2pi
}

/// Inverse of [`khz`]: rad/ms to `ω/2π` in kHz.
#[inline]
pub fn to_khz(angular: f64) -> f64 {
    angular / core::f64::consts::TAU
}
