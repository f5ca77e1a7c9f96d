//! Linear readout of frozen features: embedding sets, train/test splits,
//! probe fitting and the per-run results document.

mod embeddings;
mod linear;
mod split;

use serde::{Deserialize, Serialize};

pub use embeddings::{label_vocabulary, EmbeddingSet, EMBEDDINGS_KIND, EMBEDDINGS_MAJOR};
pub use linear::{
    binary_task, fit_probe, majority_baseline, top1_accuracy, HingeConfig, LinearClassifier, LogisticConfig, ProbeConfig, ProbeFamily,
};
pub use split::{split, subsample_indices, Holdout, Split, SplitKind, SplitSpec};

use crate::error::Result;
use crate::scalar::Scalar;

/// One probe evaluation, as written to `results.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub model: String,
    pub dataset: String,
    pub split: SplitKind,
    pub family: ProbeFamily,
    pub top1: f64,
    /// Frequency of the most common test label.
    pub majority: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub n_classes: usize,
    pub seed: u64,
}

/// Splits `set`, fits a probe on the training part and scores the rest.
pub fn evaluate<T: Scalar>(set: &EmbeddingSet<T>, dataset: &str, spec: &SplitSpec, config: &ProbeConfig) -> Result<(ProbeResult, LinearClassifier)> {
    let parts = split(set, spec)?;
    let (train, test) = (set.subset(&parts.train), set.subset(&parts.test));
    let classifier = fit_probe(&train, config)?;
    let result = ProbeResult {
        model: set.source.clone(),
        dataset: dataset.to_owned(),
        split: spec.kind,
        family: config.family_for(&set.source),
        top1: top1_accuracy(&classifier, &test)?,
        majority: majority_baseline(&test.labels)?,
        n_train: train.len(),
        n_test: test.len(),
        n_classes: set.n_classes(),
        seed: spec.seed,
    };
    Ok((result, classifier))
}
