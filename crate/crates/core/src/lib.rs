//! Adaptive splitting spectral-Galerkin solver for the one-dimensional
//! stochastic cubic Schrödinger equation
//!
//! ```text
//! du = iΔu dt + iλ|u|²u dt − i√ε u ∘ dW,   u(t, 0) = u(t, 1) = 0,
//! ```
//!
//! driven by a Q-Wiener process that is diagonal on the Dirichlet sine basis.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod ldp;
pub mod noise;
pub mod observables;
pub mod output;
pub mod scheme;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};

#[cfg(test)]
mod test_support;
