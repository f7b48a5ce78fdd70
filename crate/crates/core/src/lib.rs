//! Numerical machinery for inverse boundary-value problems of the
//! time-dependent Schrödinger equation with electromagnetic and matrix
//! (Yang–Mills) potentials in domains with moving convex obstacles.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] – spacetime domains, obstacle motion and broken-ray tracing.
//! * [`fields`] – potentials, field strengths, line integrals and fluxes, and
//!   the shielded-field scenarios.
//! * [`gauge`] – gauge transformations, holonomy, equivalence testing and
//!   gauge reconstruction by path integration.
//! * [`transport`] – abelian broken-ray transforms, matrix transport along
//!   lines, the non-abelian Radon transform and the leading geometric-optics
//!   amplitude.
//! * [`schrodinger`] – Crank–Nicolson solver for the magnetic Schrödinger
//!   IBVP, gauge-invariant boundary data and Dirichlet-to-Neumann traces.
//!
//! Data-parallel loops (ray families, loop families, stencil sweeps) go
//! through [`parallel::Exec`]; with the `parallel` feature disabled every
//! loop runs on the calling thread.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fields;
pub mod gauge;
pub mod geometry;
pub mod parallel;
pub mod quadrature;
pub mod schrodinger;
pub mod transport;

pub use error::{Error, Result};

/// Spatial points and vectors in the plane.
pub type Vec2 = nalgebra::Vector2<f64>;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix for the non-abelian (m × m) case.
pub type CMat = nalgebra::DMatrix<C64>;

/// Shorthand constructor for [`Vec2`].
#[inline]
pub fn vec2(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}
