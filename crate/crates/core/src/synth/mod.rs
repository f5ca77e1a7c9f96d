//! Deterministic procedural corpora standing in for real recordings: an
//! episodic world for self-supervised training and a labeled shape world
//! for probing.

pub mod episodic;
pub mod render;
pub mod shapes;

use std::path::Path;

pub use episodic::{generate_episodic, EpisodeSignature, EpisodicFixture, EpisodicWorldConfig};
pub use render::Geometry;
pub use shapes::{generate_shapes, ShapeFixture, ShapeWorldConfig};

use crate::error::Result;
use crate::ingest::{write_dataset, Manifest, DEFAULT_SHARD_SIZE, LABELING_FILE};

impl EpisodicFixture {
    /// Writes shards, manifest and the ground-truth labeling under `root`.
    pub fn write(&self, root: &Path) -> Result<Manifest> {
        let m = write_dataset(root, self.config.fps, self.manifest.preprocessing, &self.frames, DEFAULT_SHARD_SIZE)?;
        self.labeling.write(&root.join(LABELING_FILE))?;
        Ok(m)
    }
}

impl ShapeFixture {
    pub fn write(&self, root: &Path) -> Result<Manifest> {
        write_dataset(root, self.manifest.fps, self.manifest.preprocessing, &self.frames, DEFAULT_SHARD_SIZE)
    }
}
