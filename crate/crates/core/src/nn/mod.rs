//! Minimal neural-network layer: a strided convolutional trunk, linear and
//! projection heads, and the Adam optimizer, all with hand-written backward
//! passes over flat parameter vectors.

pub mod adam;
pub mod backbone;
pub mod conv;
pub mod linear;
pub mod params;

pub use adam::{Adam, AdamConfig};
pub use backbone::{Backbone, Embedded};
pub use conv::{spatial_mean, Architecture, ConvNet, ConvSpec, ForwardCache, ARCHITECTURES};
pub use linear::{l2_normalize_backward, l2_normalize_rows, Linear, Projection, ProjectionCache};
pub use params::{ParamSet, ParamSpec};
