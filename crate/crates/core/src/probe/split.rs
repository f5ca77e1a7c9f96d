use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Iid,
    SubsampleIid,
    ExemplarHoldout,
}

impl SplitKind {
    pub fn name(self) -> &'static str {
        match self {
            SplitKind::Iid => "iid",
            SplitKind::SubsampleIid => "subsample_iid",
            SplitKind::ExemplarHoldout => "exemplar_holdout",
        }
    }
}

impl std::str::FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(SplitKind::Iid),
            "subsample" | "subsample_iid" => Ok(SplitKind::SubsampleIid),
            "exemplar" | "exemplar_holdout" => Ok(SplitKind::ExemplarHoldout),
            other => Err(Error::Config(format!("unknown split `{other}` (expected iid, subsample or exemplar)"))),
        }
    }
}

/// Held-out exemplars per class: an absolute count or a fraction of the
/// class's exemplars (rounded, at least one).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Holdout {
    Count(usize),
    Fraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub train_fraction: f64,
    pub subsample_factor: usize,
    pub holdout: Holdout,
    /// Partition each class separately in the iid stage.
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            kind: SplitKind::Iid,
            train_fraction: 0.5,
            subsample_factor: 10,
            holdout: Holdout::Fraction(0.1),
            stratified: true,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Parameter(format!("train fraction must lie in (0, 1), got {}", self.train_fraction)));
        }
        if self.subsample_factor == 0 {
            return Err(Error::Parameter("subsample factor must be at least 1".into()));
        }
        match self.holdout {
            Holdout::Count(0) => Err(Error::Parameter("holdout count must be at least 1".into())),
            Holdout::Fraction(f) if !(f > 0.0 && f < 1.0) => {
                Err(Error::Parameter(format!("holdout fraction must lie in (0, 1), got {f}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Row indices in frame order, every `factor`-th kept (the first row of each
/// stride window).
pub fn subsample_indices(frame_ids: &[u64], factor: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..frame_ids.len()).collect();
    order.sort_by_key(|&i| (frame_ids[i], i));
    order.into_iter().step_by(factor.max(1)).collect()
}

fn iid(pool: &[usize], labels: &[u32], spec: &SplitSpec) -> Split {
    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for &i in pool {
        groups.entry(if spec.stratified { labels[i] } else { 0 }).or_default().push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (key, mut members) in groups {
        members.shuffle(&mut stream(spec.seed, "split", &[u64::from(key)]));
        let k = (members.len() as f64 * spec.train_fraction).round() as usize;
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Split { train, test }
}

pub fn split<T: Scalar>(set: &EmbeddingSet<T>, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    match spec.kind {
        SplitKind::Iid => Ok(iid(&(0..set.len()).collect::<Vec<_>>(), &set.labels, spec)),
        SplitKind::SubsampleIid => Ok(iid(&subsample_indices(&set.frame_ids, spec.subsample_factor), &set.labels, spec)),
        SplitKind::ExemplarHoldout => exemplar_holdout(set, spec),
    }
}

fn exemplar_holdout<T: Scalar>(set: &EmbeddingSet<T>, spec: &SplitSpec) -> Result<Split> {
    let exemplars = set
        .exemplar_ids
        .as_ref()
        .ok_or_else(|| Error::Split { class: String::new(), reason: "exemplar split requires exemplar ids".into() })?;
    // Exemplars of each class in order of first appearance.
    let mut per_class: BTreeMap<u32, Vec<&str>> = BTreeMap::new();
    for (label, ex) in set.labels.iter().zip(exemplars) {
        let list = per_class.entry(*label).or_default();
        if !list.contains(&ex.as_str()) {
            list.push(ex);
        }
    }
    let mut held: HashSet<&str> = HashSet::new();
    for (class, mut list) in per_class {
        let name = &set.label_names[class as usize];
        let k = match spec.holdout {
            Holdout::Count(k) => k,
            Holdout::Fraction(f) => ((list.len() as f64 * f).round() as usize).max(1),
        };
        if list.len() <= k {
            return Err(Error::Split {
                class: name.clone(),
                reason: format!("{} exemplars cannot supply {k} held-out plus at least one training exemplar", list.len()),
            });
        }
        list.shuffle(&mut stream(spec.seed, "exemplar-holdout", &[u64::from(class)]));
        held.extend(&list[..k]);
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..set.len()).partition(|&i| held.contains(exemplars[i].as_str()));
    Ok(Split { train, test })
}
