//! Reverse-mode differentiation over a closed set of vector primitives.
//!
//! Networks that are trained through their own Jacobians (the convexified
//! integrand, the ICNN gradient map) need `σ′` in the forward pass and `σ″`
//! in the backward pass. Activations therefore carry analytic first and
//! second derivatives, and the tape records `σ` or `σ′` as separate
//! primitives. No third derivative is ever needed.

mod activation;
mod params;
mod tape;

pub use activation::Activation;
pub use params::{ParamEntry, Params};
pub use tape::{Adjoints, NodeId, Shape, Tape};
