//! Quadrature on `[0, 1]` and the convexification line integral
//!
//! ```text
//! F(x) = ∫₀¹ [DG(sx)]ᵀ DG(sx) x ds
//! ```
//!
//! Training uses a stratified random rule so the optimizer cannot exploit a
//! fixed node set; evaluation uses Gauss–Legendre.

mod convexify;
mod quadrature;

pub use convexify::{
    closed_form_convexifier, convexify_eval, icgn_forward, reconstruct_potential, ConvexGradientModel, Mode,
};
pub use quadrature::{gauss_legendre, sample_nodes, QuadNode, QuadratureRule};
