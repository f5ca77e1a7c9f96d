use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::Container;
use crate::error::{Error, Result};
use crate::ingest::ManifestEntry;
use crate::scalar::Scalar;
use crate::tensor::Matrix;

pub const EMBEDDINGS_KIND: [u8; 4] = *b"EMBS";
pub const EMBEDDINGS_MAJOR: u16 = 1;

/// Frozen-trunk (or baseline) features of a labeled frame collection.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet<T> {
    pub embeddings: Matrix<T>,
    /// Index into `label_names` per row.
    pub labels: Vec<u32>,
    pub label_names: Vec<String>,
    pub exemplar_ids: Option<Vec<String>>,
    pub frame_ids: Vec<u64>,
    pub source: String,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    n: usize,
    d: usize,
    source: String,
    label_names: Vec<String>,
    labels: Vec<u32>,
    frame_ids: Vec<u64>,
    exemplar_ids: Option<Vec<String>>,
}

/// Label vocabulary in order of first appearance, and each entry's index.
pub fn label_vocabulary<'a>(labels: impl IntoIterator<Item = &'a str>) -> (Vec<String>, Vec<u32>) {
    let mut names: Vec<String> = Vec::new();
    let ids = labels
        .into_iter()
        .map(|l| match names.iter().position(|n| n == l) {
            Some(i) => i as u32,
            None => {
                names.push(l.to_owned());
                (names.len() - 1) as u32
            }
        })
        .collect();
    (names, ids)
}

impl<T: Scalar> EmbeddingSet<T> {
    pub fn new(
        embeddings: Matrix<T>,
        labels: Vec<u32>,
        label_names: Vec<String>,
        exemplar_ids: Option<Vec<String>>,
        frame_ids: Vec<u64>,
        source: impl Into<String>,
    ) -> Result<Self> {
        let set = Self { embeddings, labels, label_names, exemplar_ids, frame_ids, source: source.into() };
        set.validate()?;
        Ok(set)
    }

    /// Rows `embeddings[i]` belong to `entries[i]`, which must all be labeled.
    pub fn from_entries(embeddings: Matrix<T>, entries: &[ManifestEntry], source: impl Into<String>) -> Result<Self> {
        let mut labels = Vec::with_capacity(entries.len());
        for e in entries {
            labels.push(
                e.label
                    .as_deref()
                    .ok_or_else(|| Error::Contract(format!("frame {} has no category label", e.frame_id)))?,
            );
        }
        let (label_names, ids) = label_vocabulary(labels);
        let exemplar_ids = if entries.iter().all(|e| e.exemplar_id.is_some()) && !entries.is_empty() {
            Some(entries.iter().map(|e| e.exemplar_id.clone().unwrap_or_default()).collect())
        } else {
            None
        };
        Self::new(embeddings, ids, label_names, exemplar_ids, entries.iter().map(|e| e.frame_id).collect(), source)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.embeddings.rows();
        if self.labels.len() != n || self.frame_ids.len() != n || self.exemplar_ids.as_ref().is_some_and(|e| e.len() != n) {
            return Err(Error::Shape(format!("embedding set fields disagree on the row count {n}")));
        }
        if !self.embeddings.is_finite() {
            return Err(Error::Contract("embeddings contain NaN or infinite values".into()));
        }
        if let Some(bad) = self.labels.iter().find(|&&l| l as usize >= self.label_names.len()) {
            return Err(Error::Contract(format!("label id {bad} outside the vocabulary")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn class_id(&self, name: &str) -> Option<u32> {
        self.label_names.iter().position(|n| n == name).map(|i| i as u32)
    }

    /// Rows at `indices`, keeping the full label vocabulary.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            embeddings: self.embeddings.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            label_names: self.label_names.clone(),
            exemplar_ids: self.exemplar_ids.as_ref().map(|e| indices.iter().map(|&i| e[i].clone()).collect()),
            frame_ids: indices.iter().map(|&i| self.frame_ids[i]).collect(),
            source: self.source.clone(),
        }
    }

    pub fn to_container(&self) -> Result<Container> {
        let meta = Metadata {
            n: self.len(),
            d: self.dim(),
            source: self.source.clone(),
            label_names: self.label_names.clone(),
            labels: self.labels.clone(),
            frame_ids: self.frame_ids.clone(),
            exemplar_ids: self.exemplar_ids.clone(),
        };
        let mut c = Container::new(EMBEDDINGS_KIND, EMBEDDINGS_MAJOR, 0, serde_json::to_value(meta)?);
        c.add_blob("embeddings", &[self.len(), self.dim()], self.embeddings.as_slice())?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container()?.write_atomic(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c = Container::read(path, EMBEDDINGS_KIND, EMBEDDINGS_MAJOR)?;
        let meta: Metadata = serde_json::from_value(c.metadata.clone())?;
        let (shape, values) = c.blob::<T>("embeddings")?;
        if shape != [meta.n, meta.d] {
            return Err(Error::Format(format!("embedding blob shape {shape:?} disagrees with N={} D={}", meta.n, meta.d)));
        }
        Self::new(Matrix::from_vec(meta.n, meta.d, values)?, meta.labels, meta.label_names, meta.exemplar_ids, meta.frame_ids, meta.source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_validation() {
        let m = Matrix::<f32>::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let (names, ids) = label_vocabulary(["b", "a", "b"]);
        assert_eq!(names, vec!["b", "a"]);
        assert_eq!(ids, vec![0, 1, 0]);
        let set = EmbeddingSet::new(m, ids, names, Some(vec!["x".into(), "y".into(), "x".into()]), vec![4, 5, 6], "test").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.embs");
        set.save(&path).unwrap();
        assert_eq!(EmbeddingSet::<f32>::load(&path).unwrap(), set);

        let bad = Matrix::<f32>::from_vec(1, 1, vec![f32::NAN]).unwrap();
        assert!(matches!(EmbeddingSet::new(bad, vec![0], vec!["a".into()], None, vec![0], "t"), Err(Error::Contract(_))));
    }

    #[test]
    fn empty_set_is_valid() {
        let set = EmbeddingSet::<f64>::new(Matrix::zeros(0, 4), vec![], vec![], None, vec![], "empty").unwrap();
        assert!(set.is_empty());
    }
}
