//! Numerical laboratory for the spinor proof of the positive mass theorem in
//! the time-symmetric case (zero second fundamental form).
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] : chart metrics with analytic derivatives, curvature, ADM
//!   mass and an isoperimetric estimate.
//! * [`spin`] : orthonormal frames, curved Dirac matrices, the spin
//!   connection and the pointwise identities that certify it.
//! * [`grid`] : ball grids, spinor fields, the discrete Dirac operator and
//!   spinor Laplacian, and a Krylov solver for the Dirichlet problem.
//! * [`witten`] : the Witten spinor, the mass identity and the a-priori
//!   bounds on `|Ψ|²`.
//! * [`estimates`] : the pointwise curvature estimate, both sides of the
//!   integral curvature estimate, and mass sweeps.

pub mod error;
pub mod estimates;
pub mod extrapolate;
pub mod geometry;
pub mod grid;
pub mod spin;
pub mod witten;

pub use error::{Error, Result};

/// A point of the coordinate chart `ℝ³`.
pub type Point = nalgebra::Vector3<f64>;
