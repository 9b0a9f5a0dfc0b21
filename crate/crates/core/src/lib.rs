//! Numerical laboratory for the two-dimensional cubic-quintic nonlinear
//! Schrödinger equation `i∂ₜφ + Δφ + |φ|²φ − |φ|⁴φ = 0`.

pub mod branch;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod ground_state;
pub mod minimizer;
mod ode;
pub mod propagator;
pub mod verify;

pub use error::{DomainKind, Error, Result};
