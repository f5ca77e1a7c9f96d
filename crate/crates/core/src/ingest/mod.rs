//! Dataset ingestion: sampling recordings, preprocessing frames, writing
//! manifests and shards, temporal labeling and label curation.

pub mod curate;
pub mod labeling;
pub mod manifest;
pub mod preprocess;
pub mod recording;
pub mod shards;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use image::RgbImage;
use rayon::prelude::*;

pub use curate::{curate_labels, normalize_label, parse_annotations, AnnotationCell, CurationRules, LabeledManifest, SynonymTable};
pub use labeling::{assign_temporal_classes, frames_per_class, LabelingOptions, TemporalLabeling};
pub use manifest::{Manifest, ManifestEntry};
pub use preprocess::{preprocess_frame, PreprocessConfig};
pub use recording::{decode_and_sample, FrameSource, RawRecording};
pub use shards::{ShardReader, ShardWriter, DEFAULT_SHARD_SIZE};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const LABELING_FILE: &str = "temporal_labels.json";

/// A preprocessed frame with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_id: u64,
    pub recording_id: String,
    pub timestamp_s: f64,
    pub image: RgbImage,
    pub label: Option<String>,
    pub exemplar_id: Option<String>,
}

/// Decodes and preprocesses every recording, one worker per recording, and
/// merges them in the order given (not completion order). Frame ids are
/// assigned sequentially from zero.
pub fn ingest_recordings(
    recordings: &[RawRecording],
    target_fps: f64,
    preprocessing: &PreprocessConfig,
    workers: usize,
) -> Result<Vec<FrameRecord>> {
    preprocessing.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let per_recording: Vec<Result<Vec<(f64, RgbImage)>>> = pool.install(|| {
        recordings
            .par_iter()
            .map(|rec| {
                let schedule = recording::sample_schedule(rec, target_fps)?;
                let mut source: Box<dyn FrameSource> = if rec.uri.is_dir() {
                    Box::new(recording::ImageSequence::open(rec)?)
                } else {
                    let mut wanted: Vec<usize> = schedule.iter().map(|s| s.1).collect();
                    wanted.dedup();
                    Box::new(recording::FfmpegSource::decode(rec, &wanted)?)
                };
                decode_and_sample(rec, target_fps, source.as_mut())?
                    .into_iter()
                    .map(|f| Ok((f.timestamp_s, preprocess_frame(&f.image, preprocessing)?)))
                    .collect()
            })
            .collect()
    });
    let mut out = Vec::new();
    for (rec, frames) in recordings.iter().zip(per_recording) {
        for (timestamp_s, image) in frames? {
            out.push(FrameRecord {
                frame_id: out.len() as u64,
                recording_id: rec.id.clone(),
                timestamp_s,
                image,
                label: None,
                exemplar_id: None,
            });
        }
    }
    Ok(out)
}

/// Writes shards plus `manifest.jsonl` under `root` and returns the manifest.
pub fn write_dataset(
    root: &Path,
    fps: f64,
    preprocessing: PreprocessConfig,
    frames: &[FrameRecord],
    shard_size: usize,
) -> Result<Manifest> {
    let mut writer = ShardWriter::new(root, shard_size)?;
    let mut manifest = Manifest::new(fps, preprocessing);
    for f in frames {
        if f.image.dimensions() != (preprocessing.crop, preprocessing.crop) {
            return Err(Error::Shape(format!(
                "frame {} is {:?}, expected {}x{}",
                f.frame_id,
                f.image.dimensions(),
                preprocessing.crop,
                preprocessing.crop
            )));
        }
        let slot = writer.push(&f.image)?;
        manifest.entries.push(ManifestEntry {
            frame_id: f.frame_id,
            recording_id: f.recording_id.clone(),
            timestamp_s: f.timestamp_s,
            label: f.label.clone(),
            exemplar_id: f.exemplar_id.clone(),
            shard_path: slot.shard_path,
            shard_offset: slot.shard_offset,
        });
    }
    manifest.validate()?;
    writer.finish()?;
    manifest.write(&root.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// A dataset directory: manifest plus shards.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        Ok(Self { root: root.to_path_buf(), manifest: Manifest::read(&root.join(MANIFEST_FILE))? })
    }

    /// Loads every frame image, in manifest order.
    pub fn load_images(&self) -> Result<Vec<RgbImage>> {
        let mut readers: HashMap<&str, ShardReader> = HashMap::new();
        let mut out = Vec::with_capacity(self.manifest.len());
        for e in &self.manifest.entries {
            if !readers.contains_key(e.shard_path.as_str()) {
                readers.insert(&e.shard_path, ShardReader::open(&self.root.join(&e.shard_path))?);
            }
            out.push(readers[e.shard_path.as_str()].read(e.shard_offset)?);
        }
        Ok(out)
    }

    pub fn load_records(&self) -> Result<Vec<FrameRecord>> {
        Ok(self
            .manifest
            .entries
            .iter()
            .zip(self.load_images()?)
            .map(|(e, image)| FrameRecord {
                frame_id: e.frame_id,
                recording_id: e.recording_id.clone(),
                timestamp_s: e.timestamp_s,
                image,
                label: e.label.clone(),
                exemplar_id: e.exemplar_id.clone(),
            })
            .collect())
    }

    pub fn labeling(&self) -> Result<Option<TemporalLabeling>> {
        let path = self.root.join(LABELING_FILE);
        if path.exists() {
            TemporalLabeling::read(&path).map(Some)
        } else {
            Ok(None)
        }
    }
}
