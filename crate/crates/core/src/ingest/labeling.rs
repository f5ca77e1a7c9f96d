//! Temporal classes: the chronological frame sequence cut into consecutive
//! episodes of equal duration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::Manifest;
use crate::container::write_atomic;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelingOptions {
    /// Start a fresh episode at the first frame of every recording.
    pub reset_episodes_per_recording: bool,
    /// Leave frames of an incomplete trailing episode unlabeled.
    pub drop_partial_episode: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalLabeling {
    pub segment_length_s: f64,
    pub fps: f64,
    pub frames_per_class: usize,
    pub n_classes: usize,
    /// Frame ids in manifest order.
    pub frame_ids: Vec<u64>,
    /// Class of each frame (by ordinal position); `None` when dropped.
    pub class_of: Vec<Option<u32>>,
}

/// `round(segment_length_s * fps)`, rejecting segments shorter than one frame.
pub fn frames_per_class(segment_length_s: f64, fps: f64) -> Result<usize> {
    let product = segment_length_s * fps;
    if !(product.is_finite() && product >= 1.0 - 1e-9) {
        return Err(Error::Parameter(format!(
            "segment length {segment_length_s} s at {fps} fps spans less than one frame"
        )));
    }
    Ok(product.round() as usize)
}

/// Ordinal position `i` within a run goes to episode `i / frames_per_class`.
pub fn assign_temporal_classes(
    manifest: &Manifest,
    segment_length_s: f64,
    options: LabelingOptions,
) -> Result<TemporalLabeling> {
    if manifest.is_empty() {
        return Err(Error::EmptyInput("manifest has no frames".into()));
    }
    let per_class = frames_per_class(segment_length_s, manifest.fps)?;
    let n = manifest.len();
    let runs: Vec<(usize, usize)> = if options.reset_episodes_per_recording {
        let starts = manifest.recording_starts();
        starts
            .iter()
            .enumerate()
            .map(|(k, &s)| (s, starts.get(k + 1).copied().unwrap_or(n)))
            .collect()
    } else {
        vec![(0, n)]
    };

    let mut class_of = vec![None; n];
    let mut next_class = 0u32;
    for (start, end) in runs {
        let len = end - start;
        let full = len / per_class;
        let episodes = if options.drop_partial_episode { full } else { len.div_ceil(per_class) };
        for (i, slot) in class_of[start..end].iter_mut().enumerate() {
            let local = i / per_class;
            if local < episodes {
                *slot = Some(next_class + local as u32);
            }
        }
        next_class += episodes as u32;
    }
    Ok(TemporalLabeling {
        segment_length_s,
        fps: manifest.fps,
        frames_per_class: per_class,
        n_classes: next_class as usize,
        frame_ids: manifest.entries.iter().map(|e| e.frame_id).collect(),
        class_of,
    })
}

impl TemporalLabeling {
    pub fn class_of_frame(&self, frame_id: u64) -> Option<u32> {
        let pos = self.frame_ids.binary_search(&frame_id).ok()?;
        self.class_of[pos]
    }

    /// Ordinal positions that carry a class, with that class.
    pub fn labeled(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.class_of.iter().enumerate().filter_map(|(i, c)| c.map(|c| (i, c)))
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_classes];
        for (_, c) in self.labeled() {
            sizes[c as usize] += 1;
        }
        sizes
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_vec(self)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::manifest::ManifestEntry;
    use crate::ingest::preprocess::PreprocessConfig;

    fn manifest(recs: &[(&str, usize)], fps: f64) -> Manifest {
        let mut m = Manifest::new(fps, PreprocessConfig::default());
        let mut id = 0;
        for (rec, n) in recs {
            for k in 0..*n {
                m.entries.push(ManifestEntry {
                    frame_id: id,
                    recording_id: rec.to_string(),
                    timestamp_s: k as f64 / fps,
                    label: None,
                    exemplar_id: None,
                    shard_path: String::new(),
                    shard_offset: 0,
                });
                id += 1;
            }
        }
        m
    }

    fn classes(l: &TemporalLabeling) -> Vec<u32> {
        l.class_of.iter().map(|c| c.unwrap()).collect()
    }

    #[test]
    fn ten_frames_two_episodes() {
        let l = assign_temporal_classes(&manifest(&[("a", 10)], 1.0), 5.0, Default::default()).unwrap();
        assert_eq!(classes(&l), vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert_eq!(l.n_classes, 2);
    }

    #[test]
    fn remainder_episode_is_kept_or_dropped() {
        let m = manifest(&[("a", 11)], 1.0);
        let kept = assign_temporal_classes(&m, 5.0, Default::default()).unwrap();
        assert_eq!(kept.n_classes, 3);
        assert_eq!(kept.class_sizes(), vec![5, 5, 1]);
        let opts = LabelingOptions { drop_partial_episode: true, ..Default::default() };
        let dropped = assign_temporal_classes(&m, 5.0, opts).unwrap();
        assert_eq!(dropped.n_classes, 2);
        assert_eq!(dropped.class_of[10], None);
    }

    #[test]
    fn paper_scale_episode_size() {
        assert_eq!(frames_per_class(288.0, 5.0).unwrap(), 1440);
        // 25 and 30 fps sources agree after rounding.
        assert_eq!(frames_per_class(0.5, 5.0).unwrap(), 3);
    }

    #[test]
    fn episodes_cross_recordings_unless_reset() {
        let m = manifest(&[("a", 3), ("b", 3)], 1.0);
        let joined = assign_temporal_classes(&m, 2.0, Default::default()).unwrap();
        assert_eq!(classes(&joined), vec![0, 0, 1, 1, 2, 2]);
        let opts = LabelingOptions { reset_episodes_per_recording: true, ..Default::default() };
        let reset = assign_temporal_classes(&m, 2.0, opts).unwrap();
        assert_eq!(classes(&reset), vec![0, 0, 1, 2, 2, 3]);
        assert_eq!(reset.n_classes, 4);
    }

    #[test]
    fn errors() {
        let empty = Manifest::new(1.0, PreprocessConfig::default());
        assert!(matches!(assign_temporal_classes(&empty, 5.0, Default::default()), Err(Error::EmptyInput(_))));
        let m = manifest(&[("a", 4)], 1.0);
        assert!(matches!(assign_temporal_classes(&m, 0.5, Default::default()), Err(Error::Parameter(_))));
    }

    #[test]
    fn lookup_by_frame_id() {
        let l = assign_temporal_classes(&manifest(&[("a", 6)], 2.0), 1.0, Default::default()).unwrap();
        assert_eq!(l.class_of_frame(5), Some(2));
        assert_eq!(l.class_of_frame(99), None);
    }
}
