//! Spectral simulation and verification toolkit for the small-mass
//! (Smoluchowski–Kramers) limit of a damped stochastic wave equation driven by
//! a constant magnetic field.
//!
//! The state is a planar field `u: (0, L) → R²` expanded in the Dirichlet sine
//! basis. In that basis every linear operator of the model is diagonal, so the
//! crate works mode by mode:
//!
//! * [`spectral`] holds eigenvalues, coefficient vectors, Sobolev norms and the
//!   collocation transform;
//! * [`modes`] has the exact per-mode groups `S_μ^ε(t)`, `T_ε(t)`, `T_0(t)`;
//! * [`invariants`] turns the energy identities and semigroup bounds into
//!   signed defect functionals;
//! * [`sim`] runs coupled exponential-Euler simulations of the four systems;
//! * [`experiments`] drives Monte-Carlo sweeps and the counterexample.

pub mod error;
pub mod experiments;
pub mod invariants;
pub mod modes;
pub mod quadrature;
pub mod sim;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
