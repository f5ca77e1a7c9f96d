use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig};
use crate::rng::stream;
use crate::scalar::Scalar;
use crate::ssl::argmax;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeFamily {
    MultinomialLogistic,
    LinearHinge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogisticConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    /// Train on standardized features (the fitted map is folded back to raw
    /// feature space either way).
    pub standardize: bool,
}

impl Default for LogisticConfig {
    /// Desk-scale preset: small corpora give too few steps at the reference
    /// settings for the readout to converge.
    fn default() -> Self {
        Self { lr: 0.01, epochs: 100, batch_size: 256, weight_decay: 1e-4, standardize: true }
    }
}

impl LogisticConfig {
    /// Settings used for full-scale datasets.
    pub fn reference() -> Self {
        Self { lr: 5e-4, epochs: 20, batch_size: 1024, weight_decay: 0.0, standardize: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HingeConfig {
    pub alpha: f64,
    pub max_iter: usize,
    /// Stop when the epoch loss fails to improve by `tol` for five epochs.
    pub tol: Option<f64>,
}

impl Default for HingeConfig {
    fn default() -> Self {
        Self { alpha: 1e-4, max_iter: 250, tol: Some(1e-3) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// Chosen from the feature source when unset: hinge for HOG, logistic otherwise.
    pub family: Option<ProbeFamily>,
    pub logistic: LogisticConfig,
    pub hinge: HingeConfig,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { family: None, logistic: LogisticConfig::default(), hinge: HingeConfig::default(), seed: 0 }
    }
}

impl ProbeConfig {
    pub fn family_for(&self, source: &str) -> ProbeFamily {
        self.family.unwrap_or(if source.starts_with("hog") { ProbeFamily::LinearHinge } else { ProbeFamily::MultinomialLogistic })
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.logistic;
        if !(l.lr > 0.0) || l.epochs == 0 || l.batch_size == 0 || !(l.weight_decay >= 0.0) {
            return Err(Error::Parameter("logistic probe needs positive lr, epochs, batch size and weight decay >= 0".into()));
        }
        if !(self.hinge.alpha > 0.0) || self.hinge.max_iter == 0 {
            return Err(Error::Parameter("hinge probe needs positive alpha and iteration count".into()));
        }
        Ok(())
    }
}

/// `scores = W x + b` with `W` stored `C × D`; prediction is the argmax,
/// ties to the lowest class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub weights: Matrix<f64>,
    pub bias: Vec<f64>,
}

impl LinearClassifier {
    pub fn n_classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn scores_row<T: Scalar>(&self, x: &[T]) -> Vec<f64> {
        self.weights
            .iter_rows()
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(x).map(|(a, v)| a * v.as_f64()).sum::<f64>())
            .collect()
    }

    pub fn predict<T: Scalar>(&self, x: &Matrix<T>) -> Vec<u32> {
        x.iter_rows().map(|r| argmax(&self.scores_row(r)) as u32).collect()
    }
}

fn to_f64<T: Scalar>(set: &EmbeddingSet<T>) -> Vec<Vec<f64>> {
    set.embeddings.iter_rows().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect()
}

pub fn fit_probe<T: Scalar>(train: &EmbeddingSet<T>, config: &ProbeConfig) -> Result<LinearClassifier> {
    config.validate()?;
    let mut present: Vec<u32> = train.labels.clone();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::Fit(format!("probe needs at least 2 classes in the training split, found {}", present.len())));
    }
    let x = to_f64(train);
    match config.family_for(&train.source) {
        ProbeFamily::MultinomialLogistic => Ok(fit_logistic(&x, &train.labels, train.n_classes(), train.dim(), config)),
        ProbeFamily::LinearHinge => Ok(fit_hinge(&x, &train.labels, train.n_classes(), train.dim(), config)),
    }
}

fn fit_logistic(x: &[Vec<f64>], y: &[u32], c: usize, d: usize, config: &ProbeConfig) -> LinearClassifier {
    let cfg = &config.logistic;
    let n = x.len();
    let (mean, std) = if cfg.standardize {
        let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
        let std: Vec<f64> = (0..d)
            .map(|j| {
                let s = (x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n as f64).sqrt();
                if s > 1e-12 { s } else { 1.0 }
            })
            .collect();
        (mean, std)
    } else {
        (vec![0.0; d], vec![1.0; d])
    };
    let z: Vec<Vec<f64>> = x.iter().map(|r| r.iter().zip(&mean).zip(&std).map(|((v, m), s)| (v - m) / s).collect()).collect();

    // Parameters: W (C×D) followed by b (C).
    let mut params = vec![0.0; c * d + c];
    let mut adam = Adam::new(AdamConfig { lr: cfg.lr, ..AdamConfig::default() }, params.len());
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; params.len()];
    for epoch in 0..cfg.epochs {
        if n > cfg.batch_size {
            order.shuffle(&mut stream(config.seed, "probe-shuffle", &[epoch as u64]));
        }
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let inv = 1.0 / batch.len() as f64;
            for &i in batch {
                let zi = &z[i];
                let mut s: Vec<f64> =
                    (0..c).map(|k| params[c * d + k] + params[k * d..(k + 1) * d].iter().zip(zi).map(|(w, v)| w * v).sum::<f64>()).collect();
                let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let total: f64 = s.iter_mut().map(|v| {
                    *v = (*v - max).exp();
                    *v
                }).sum();
                for k in 0..c {
                    let g = (s[k] / total - if k == y[i] as usize { 1.0 } else { 0.0 }) * inv;
                    for (gw, v) in grad[k * d..(k + 1) * d].iter_mut().zip(zi) {
                        *gw += g * v;
                    }
                    grad[c * d + k] += g;
                }
            }
            if cfg.weight_decay > 0.0 {
                for (g, w) in grad[..c * d].iter_mut().zip(&params[..c * d]) {
                    *g += cfg.weight_decay * w;
                }
            }
            adam.step(&mut params, &grad, cfg.lr);
        }
    }
    // Fold the standardization into raw-space weights.
    let mut weights = Matrix::zeros(c, d);
    let mut bias = params[c * d..].to_vec();
    for k in 0..c {
        for j in 0..d {
            let w = params[k * d + j] / std[j];
            weights.set(k, j, w);
            bias[k] -= w * mean[j];
        }
    }
    LinearClassifier { weights, bias }
}

/// One-vs-rest hinge loss, L2-regularized, plain SGD with the
/// `1 / (alpha (t0 + t))` step schedule.
fn fit_hinge(x: &[Vec<f64>], y: &[u32], c: usize, d: usize, config: &ProbeConfig) -> LinearClassifier {
    let HingeConfig { alpha, max_iter, tol } = config.hinge;
    let n = x.len();
    let typw = (1.0 / alpha.sqrt()).sqrt();
    let t0 = 1.0 / (typw * alpha);
    let mut weights = Matrix::zeros(c, d);
    let mut bias = vec![0.0; c];
    for k in 0..c {
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut t = 1.0;
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = stream(config.seed, "hinge", &[k as u64]);
        let (mut best, mut stale) = (f64::INFINITY, 0);
        for _ in 0..max_iter {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for &i in &order {
                let target = if y[i] as usize == k { 1.0 } else { -1.0 };
                let p = b + w.iter().zip(&x[i]).map(|(a, v)| a * v).sum::<f64>();
                let eta = 1.0 / (alpha * (t0 + t - 1.0));
                let scale = 1.0 - eta * alpha;
                w.iter_mut().for_each(|v| *v *= scale);
                let margin = target * p;
                if margin < 1.0 {
                    epoch_loss += 1.0 - margin;
                    for (a, v) in w.iter_mut().zip(&x[i]) {
                        *a += eta * target * v;
                    }
                    b += eta * target;
                }
                t += 1.0;
            }
            if let Some(tol) = tol {
                if epoch_loss > best - tol * n as f64 {
                    stale += 1;
                } else {
                    stale = 0;
                }
                best = best.min(epoch_loss);
                if stale >= 5 {
                    break;
                }
            }
        }
        weights.row_mut(k).copy_from_slice(&w);
        bias[k] = b;
    }
    LinearClassifier { weights, bias }
}

pub fn top1_accuracy<T: Scalar>(classifier: &LinearClassifier, test: &EmbeddingSet<T>) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyInput("accuracy needs a non-empty test set".into()));
    }
    let pred = classifier.predict(&test.embeddings);
    Ok(pred.iter().zip(&test.labels).filter(|(p, l)| p == l).count() as f64 / test.len() as f64)
}

/// Frequency of the most common label.
pub fn majority_baseline(labels: &[u32]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("majority baseline of no labels".into()));
    }
    let mut counts = std::collections::HashMap::new();
    for l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    Ok(*counts.values().max().unwrap_or(&0) as f64 / labels.len() as f64)
}

/// Frames of exactly two classes, relabeled `class_a → 0`, `class_b → 1`.
pub fn binary_task<T: Scalar>(set: &EmbeddingSet<T>, class_a: &str, class_b: &str) -> Result<EmbeddingSet<T>> {
    if class_a == class_b {
        return Err(Error::Parameter(format!("binary task needs two different classes, got `{class_a}` twice")));
    }
    let a = set.class_id(class_a).ok_or_else(|| Error::MissingClass(class_a.to_owned()))?;
    let b = set.class_id(class_b).ok_or_else(|| Error::MissingClass(class_b.to_owned()))?;
    let keep: Vec<usize> = (0..set.len()).filter(|&i| set.labels[i] == a || set.labels[i] == b).collect();
    let mut sub = set.subset(&keep);
    sub.labels = sub.labels.iter().map(|&l| u32::from(l == b)).collect();
    sub.label_names = vec![class_a.to_owned(), class_b.to_owned()];
    Ok(sub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy(points: &[([f64; 2], u32)]) -> EmbeddingSet<f64> {
        let m = Matrix::from_vec(points.len(), 2, points.iter().flat_map(|(p, _)| *p).collect()).unwrap();
        EmbeddingSet::new(m, points.iter().map(|p| p.1).collect(), vec!["a".into(), "b".into()], None, (0..points.len() as u64).collect(), "toy")
            .unwrap()
    }

    fn separable() -> EmbeddingSet<f64> {
        let mut rng = stream(3, "toy", &[]);
        let pts: Vec<([f64; 2], u32)> = (0..60)
            .map(|i| {
                let c = (i % 2) as u32;
                let off = if c == 0 { -1.5 } else { 1.5 };
                ([off + rng.random_range(-1.0..1.0), rng.random_range(-3.0..3.0)], c)
            })
            .collect();
        toy(&pts)
    }

    #[test]
    fn separable_toy_reaches_full_train_accuracy() {
        let set = separable();
        for family in [ProbeFamily::MultinomialLogistic, ProbeFamily::LinearHinge] {
            let cfg = ProbeConfig { family: Some(family), ..ProbeConfig::default() };
            let clf = fit_probe(&set, &cfg).unwrap();
            assert_eq!(top1_accuracy(&clf, &set).unwrap(), 1.0, "{family:?}");
        }
    }

    #[test]
    fn single_class_cannot_be_fit() {
        let set = toy(&[([0.0, 1.0], 0), ([1.0, 0.0], 0)]);
        assert!(matches!(fit_probe(&set, &ProbeConfig::default()), Err(Error::Fit(_))));
    }

    #[test]
    fn majority_and_binary_tasks() {
        assert!((majority_baseline(&[0, 0, 1]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(majority_baseline(&[4]).unwrap(), 1.0);
        let m = Matrix::<f64>::zeros(5, 1);
        let set = EmbeddingSet::new(m, vec![0, 1, 2, 1, 0], vec!["car".into(), "road".into(), "cat".into()], None, (0..5).collect(), "t").unwrap();
        let sub = binary_task(&set, "road", "car").unwrap();
        assert_eq!(sub.labels, vec![1, 0, 0, 1]);
        assert_eq!(sub.frame_ids, vec![0, 1, 3, 4]);
        assert!(matches!(binary_task(&set, "car", "car"), Err(Error::Parameter(_))));
        assert!(matches!(binary_task(&set, "car", "door"), Err(Error::MissingClass(ref c)) if c == "door"));
    }

    #[test]
    fn always_class_zero_on_balanced_data() {
        let clf = LinearClassifier { weights: Matrix::zeros(4, 2), bias: vec![0.0; 4] };
        let set = EmbeddingSet::new(Matrix::<f64>::zeros(8, 2), vec![0, 1, 2, 3, 0, 1, 2, 3], (0..4).map(|c| c.to_string()).collect(), None, (0..8).collect(), "t").unwrap();
        assert_eq!(top1_accuracy(&clf, &set).unwrap(), 0.25);
    }
}
