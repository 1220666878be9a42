//! Convex gradient fields built by integrating Gram products of Jacobian-vector
//! products along the segment from the origin.
//!
//! A hidden network `G: R^n -> R^m` is turned into
//!
//! ```text
//! F(x) = ∫₀¹ [DG(sx)]ᵀ DG(sx) x ds
//! ```
//!
//! whose Jacobian is `[DG]ᵀDG` whenever `G` satisfies the integrability
//! condition checked in [`verify::pde_residual`]. One-layer maps `σ(Ax+b)`
//! always do, so `F` is then the gradient of a convex potential.
//!
//! Modules, bottom up:
//! - [`numeric`]: vectors, matrices, RNG, symmetric eigenvalues
//! - [`autodiff`]: reverse-mode tape over a fixed primitive set
//! - [`models`]: hidden maps and the ICNN baseline
//! - [`integrator`]: quadrature and the convexification integral
//! - [`verify`]: numerical checks of the construction's guarantees
//! - [`harness`]: target field, training, grid reports, experiment

pub mod autodiff;
pub mod error;
pub mod harness;
pub mod integrator;
pub mod models;
pub mod numeric;
pub mod verify;

pub use error::{Error, Result};
