//! Self-supervised representation learning from longitudinal egocentric
//! video, with the evaluation and analysis tooling around it.
//!
//! Numeric code is generic over [`Scalar`] (`f32` for training throughput,
//! `f64` for gradient and oracle checks); the aliases at the bottom of this
//! file name the common instantiations.

pub mod analysis;
pub mod baselines;
pub mod container;
pub mod error;
pub mod imaging;
pub mod ingest;
pub mod nn;
pub mod probe;
pub mod rng;
pub mod scalar;
pub mod ssl;
pub mod synth;
pub mod tensor;
pub mod transforms;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{Matrix, Planar};

/// Default training precision.
pub type Real = f32;
pub type Image = Planar<Real>;
pub type Trunk = nn::ConvNet<Real>;
pub type Embeddings = probe::EmbeddingSet<Real>;
pub type TrainingData = ssl::TrainingSet<Real>;
pub type TrainCheckpoint = ssl::Checkpoint<Real>;
pub type ResponseTable = analysis::FeatureResponseTable<Real>;
