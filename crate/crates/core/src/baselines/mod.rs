//! Reference feature extractors that involve no self-supervised training.

mod hog;

pub use hog::{cell_histograms, hog_features, hog_matrix, HogConfig};

use crate::error::Result;
use crate::nn::{Architecture, ConvNet};
use crate::scalar::Scalar;

/// Freshly initialized trunk of a registered architecture.
pub fn random_backbone<T: Scalar>(architecture_id: &str, seed: u64) -> Result<ConvNet<T>> {
    Ok(ConvNet::random(Architecture::lookup(architecture_id)?, seed))
}
