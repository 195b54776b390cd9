//! Desk-scale numerical laboratory for semiclassical Schrödinger operators
//! `-h²Δ + V - E` with rough (merely bounded) potentials.
//!
//! The crate provides the pieces needed to measure, on discretized model
//! domains (periodic torus, polar disk/annulus), how the local regularity of
//! the potential controls global concentration of solutions:
//!
//! * [`grid`] / [`field`] / [`calculus`]: discrete geometry, quadrature and
//!   second-order stencils;
//! * [`potentials`]: a parametric potential catalog, the mollification
//!   engine `Ṽ_θ`, the modulus of continuity `ω_V(θ)` and the growth
//!   functional `β(h) = ω_V(h^{2/3}κ)^{1/2} / h^{4/3}`;
//! * [`weights`]: Carleman weight families, their principal symbols,
//!   Poisson brackets and subelliptic lower-bound certificates;
//! * [`operators`]: the Schrödinger operator, its weight-conjugated form,
//!   commutator quadratic forms and a shift-invert eigensolver;
//! * [`estimates`]: end-to-end ratio experiments and exponent fitting;
//! * [`verify`]: a fast self-check suite over all module invariants.

// Validation sites use `!(x > 0.0)` on purpose: the negation rejects NaN,
// which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod error;
pub mod estimates;
pub mod field;
pub mod grid;
pub mod logsum;
pub mod operators;
pub mod potentials;
pub mod verify;
pub mod weights;

pub use error::LabError;
pub use field::ScalarField;
pub use grid::{Grid, GridSpec};

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, LabError>;
