use image::RgbImage;

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::ingest::{assign_temporal_classes, Dataset, Manifest, TemporalLabeling};
use crate::scalar::Scalar;
use crate::tensor::Planar;

/// Frames prepared for one training run, in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet<T> {
    /// Un-normalized images in `[0, 1]`.
    pub images: Vec<Planar<T>>,
    pub frame_ids: Vec<u64>,
    /// Sequence (recording) index of each frame; positives never cross it.
    pub sequence: Vec<u32>,
    /// Temporal class per frame when a labeling was applied.
    pub classes: Option<Vec<u32>>,
    pub n_classes: usize,
    pub fps: f64,
}

/// Keeps every `k`-th frame of each recording, where `k = manifest fps / fps`
/// must be a whole number. Returns the reduced manifest and the kept ordinals.
pub fn subsample_manifest(manifest: &Manifest, fps: Option<f64>) -> Result<(Manifest, Vec<usize>)> {
    let Some(target) = fps else {
        return Ok((manifest.clone(), (0..manifest.len()).collect()));
    };
    let ratio = manifest.fps / target;
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-6 {
        return Err(Error::Config(format!(
            "training fps {target} must divide the dataset rate {} by a whole number",
            manifest.fps
        )));
    }
    let k = k as usize;
    let mut kept = Vec::new();
    let mut position = 0usize;
    for (i, e) in manifest.entries.iter().enumerate() {
        if i > 0 && manifest.entries[i - 1].recording_id != e.recording_id {
            position = 0;
        }
        if position % k == 0 {
            kept.push(i);
        }
        position += 1;
    }
    let mut reduced = Manifest::new(target, manifest.preprocessing);
    reduced.entries = kept.iter().map(|&i| manifest.entries[i].clone()).collect();
    Ok((reduced, kept))
}

impl<T: Scalar> TrainingSet<T> {
    /// `images[i]` belongs to `manifest.entries[i]`.
    pub fn build(manifest: &Manifest, images: &[RgbImage], config: &TrainConfig) -> Result<Self> {
        if images.len() != manifest.len() {
            return Err(Error::Shape(format!("{} images for {} manifest entries", images.len(), manifest.len())));
        }
        let (reduced, kept) = subsample_manifest(manifest, config.fps)?;
        if reduced.is_empty() {
            return Err(Error::EmptyInput("no frames to train on".into()));
        }
        let labeling: Option<TemporalLabeling> = if config.objective.is_contrastive() {
            None
        } else {
            Some(assign_temporal_classes(&reduced, config.segment_length_s, config.labeling)?)
        };
        let mut out = Self {
            images: Vec::new(),
            frame_ids: Vec::new(),
            sequence: Vec::new(),
            classes: labeling.as_ref().map(|_| Vec::new()),
            n_classes: labeling.as_ref().map_or(0, |l| l.n_classes),
            fps: reduced.fps,
        };
        let mut seq = 0u32;
        for (pos, &ordinal) in kept.iter().enumerate() {
            if pos > 0 && reduced.entries[pos - 1].recording_id != reduced.entries[pos].recording_id {
                seq += 1;
            }
            let class = labeling.as_ref().map(|l| l.class_of[pos]);
            if let Some(None) = class {
                continue;
            }
            out.images.push(Planar::from_rgb(&images[ordinal]));
            out.frame_ids.push(reduced.entries[pos].frame_id);
            out.sequence.push(seq);
            if let (Some(classes), Some(Some(c))) = (out.classes.as_mut(), class) {
                classes.push(c);
            }
        }
        if out.images.is_empty() {
            return Err(Error::EmptyInput("every frame was dropped by the labeling".into()));
        }
        Ok(out)
    }

    pub fn from_dataset(dataset: &Dataset, config: &TrainConfig) -> Result<Self> {
        Self::build(&dataset.manifest, &dataset.load_images()?, config)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ManifestEntry, PreprocessConfig};
    use crate::ssl::Objective;

    fn manifest(recs: &[(&str, usize)], fps: f64) -> Manifest {
        let mut m = Manifest::new(fps, PreprocessConfig { minor_edge: 4, crop: 4, shift_up: 0 });
        for (rec, n) in recs {
            for k in 0..*n {
                let id = m.entries.len() as u64;
                m.entries.push(ManifestEntry {
                    frame_id: id,
                    recording_id: rec.to_string(),
                    timestamp_s: k as f64 / fps,
                    label: None,
                    exemplar_id: None,
                    shard_path: String::new(),
                    shard_offset: 0,
                });
            }
        }
        m
    }

    #[test]
    fn subsampling_restarts_per_recording() {
        let m = manifest(&[("a", 5), ("b", 4)], 4.0);
        let (r, kept) = subsample_manifest(&m, Some(2.0)).unwrap();
        assert_eq!(kept, vec![0, 2, 4, 5, 7]);
        assert_eq!(r.fps, 2.0);
        assert!(matches!(subsample_manifest(&m, Some(3.0)), Err(Error::Config(_))));
    }

    #[test]
    fn classes_follow_segments() {
        let m = manifest(&[("a", 6), ("b", 4)], 1.0);
        let images = vec![RgbImage::new(4, 4); 10];
        let cfg = TrainConfig { segment_length_s: 4.0, ..TrainConfig::default() };
        let set = TrainingSet::<f32>::build(&m, &images, &cfg).unwrap();
        assert_eq!(set.classes.unwrap(), vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2]);
        assert_eq!(set.sequence, vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(set.n_classes, 3);
        let cfg = TrainConfig { objective: Objective::StaticContrastive, ..cfg };
        assert!(TrainingSet::<f32>::build(&m, &images, &cfg).unwrap().classes.is_none());
    }
}
