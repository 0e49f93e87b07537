//! Spectral Galerkin solver and verification toolkit for nonlinear
//! evolution equations du/dt + A(t)u = f(t) with monotone-plus-compact
//! operator families.
//!
//! The crate is organized around six pieces:
//! - [`spaces`]: nested sine / divergence-free Fourier trial spaces with
//!   self-adjoint truncation projections and all norms;
//! - [`operators`]: degenerate diffusion, superposition and convection
//!   parts composed into time-dependent families with declared constants;
//! - [`solver`]: energy-stable implicit Euler integration of the Galerkin
//!   system, with per-step pairing records;
//! - [`verify`]: runtime checkers for coercivity, growth, monotonicity,
//!   sign conditions, exponent admissibility, and trajectory audits;
//! - [`convlab`]: multi-level Cauchy and weak-limit diagnostics;
//! - [`config`]: the JSON run-configuration surface shared with the CLI.

pub mod config;
pub mod convlab;
pub mod error;
pub mod operators;
pub mod profiles;
pub mod quadrature;
pub mod report;
pub mod solver;
pub mod spaces;
pub mod verify;

pub use error::{Error, Result};
