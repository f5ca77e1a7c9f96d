//! Labeled object images: classes are geometries, exemplars are jittered
//! instances of a class, views are transformed renderings of an exemplar.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::render::{hsv, render_values, to_image, Background, Geometry, ShapePose};
use crate::error::{Error, Result};
use crate::ingest::{FrameRecord, Manifest, ManifestEntry, PreprocessConfig};
use crate::rng::stream;

pub const SHAPES_RECORDING: &str = "shapes";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapeWorldConfig {
    pub n_classes: usize,
    pub exemplars_per_class: usize,
    pub views_per_exemplar: usize,
    pub image_size: usize,
    /// Half-width of the per-exemplar hue jitter around the class prototype.
    pub hue_jitter: f64,
    pub seed: u64,
}

impl Default for ShapeWorldConfig {
    fn default() -> Self {
        Self { n_classes: 12, exemplars_per_class: 30, views_per_exemplar: 4, image_size: 32, hue_jitter: 0.2, seed: 0 }
    }
}

impl ShapeWorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 || self.n_classes > Geometry::ALL.len() {
            return Err(Error::Parameter(format!("n_classes must lie in [2, {}], got {}", Geometry::ALL.len(), self.n_classes)));
        }
        if self.exemplars_per_class == 0 || self.views_per_exemplar == 0 || self.image_size < 8 {
            return Err(Error::Parameter("exemplars, views and image size (>= 8) must be positive".into()));
        }
        if !(0.0..=0.5).contains(&self.hue_jitter) {
            return Err(Error::Parameter(format!("hue jitter must lie in [0, 0.5], got {}", self.hue_jitter)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ShapeFixture {
    pub config: ShapeWorldConfig,
    pub class_names: Vec<String>,
    pub frames: Vec<FrameRecord>,
    pub manifest: Manifest,
}

/// Class `c` is `Geometry::ALL[c]` with prototype hue `c / n_classes`.
pub fn generate_shapes(config: &ShapeWorldConfig) -> Result<ShapeFixture> {
    config.validate()?;
    let size = config.image_size;
    let preprocessing = PreprocessConfig { minor_edge: size as u32, crop: size as u32, shift_up: 0 };
    let mut manifest = Manifest::new(1.0, preprocessing);
    let mut frames = Vec::new();
    let class_names: Vec<String> = Geometry::ALL[..config.n_classes].iter().map(|g| g.name().to_owned()).collect();
    for (c, geometry) in Geometry::ALL[..config.n_classes].iter().enumerate() {
        let prototype_hue = c as f64 / config.n_classes as f64;
        for x in 0..config.exemplars_per_class {
            let mut rng = stream(config.seed, "exemplar", &[c as u64, x as u64]);
            let hue = prototype_hue + rng.random_range(-config.hue_jitter..=config.hue_jitter);
            let color = hsv(hue, rng.random_range(0.45..0.9), rng.random_range(0.55..0.95));
            let aspect = rng.random_range(0.8..1.2);
            let thickness = rng.random_range(0.28..0.42);
            let exemplar_id = format!("{}-{x:02}", geometry.name());
            for v in 0..config.views_per_exemplar {
                let mut vr = stream(config.seed, "view", &[c as u64, x as u64, v as u64]);
                let pose = ShapePose {
                    center: (vr.random_range(-0.25..0.25), vr.random_range(-0.25..0.25)),
                    scale: vr.random_range(0.45..0.65),
                    rotation: vr.random_range(0.0..2.0 * PI),
                    aspect,
                    thickness,
                };
                let bg_hue = hue + vr.random_range(0.3..0.7);
                let background = Background {
                    base: hsv(bg_hue, vr.random_range(0.1..0.5), vr.random_range(0.2..0.5)),
                    stripe_amplitude: vr.random_range(0.0..0.1),
                    stripe_frequency: vr.random_range(2.0..6.0),
                    stripe_angle: vr.random_range(0.0..PI),
                    stripe_phase: vr.random_range(0.0..2.0 * PI),
                };
                let id = frames.len() as u64;
                let label = Some(geometry.name().to_owned());
                frames.push(FrameRecord {
                    frame_id: id,
                    recording_id: SHAPES_RECORDING.into(),
                    timestamp_s: id as f64,
                    image: to_image(size, &render_values(size, *geometry, &pose, color, &background)),
                    label: label.clone(),
                    exemplar_id: Some(exemplar_id.clone()),
                });
                manifest.entries.push(ManifestEntry {
                    frame_id: id,
                    recording_id: SHAPES_RECORDING.into(),
                    timestamp_s: id as f64,
                    label,
                    exemplar_id: Some(exemplar_id.clone()),
                    shard_path: String::new(),
                    shard_offset: 0,
                });
            }
        }
    }
    manifest.validate()?;
    Ok(ShapeFixture { config: config.clone(), class_names, frames, manifest })
}
