//! Hidden networks `G` (one-layer `σ(Ax+b)` and deep MLPs) with JVP/VJP
//! access, and the input-convex baseline whose gradient map is learned.

mod hidden;
mod icnn;
mod init;
mod io;

pub use hidden::{DeepMap, HiddenMap, Layer, OneLayerMap};
pub use icnn::{Icnn, Icnn1, Icnn2, OutputWeights};
pub use init::{init_bias, init_nonnegative, init_weight};
pub use io::{deserialize_model, serialize_model, Model};

use crate::autodiff::Params;
use crate::error::Result;

/// Anything with a flat, named parameter layout.
pub trait Parameterized {
    fn params(&self) -> Params;

    /// Replaces parameter values; the layout must match [`params`](Self::params).
    fn set_params(&mut self, params: &Params) -> Result<()>;

    fn param_count(&self) -> usize {
        self.params().count()
    }
}
