//! Longitudinal "video" made of episodes: each episode follows one object
//! against one background while its pose drifts smoothly.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::render::{hsv, render_values, to_image, Background, Geometry, ShapePose};
use crate::error::{Error, Result};
use crate::ingest::{assign_temporal_classes, FrameRecord, LabelingOptions, Manifest, ManifestEntry, PreprocessConfig, TemporalLabeling};
use crate::rng::stream;

pub const EPISODIC_RECORDING: &str = "episodic";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodicWorldConfig {
    pub n_episodes: usize,
    pub frames_per_episode: usize,
    pub image_size: usize,
    /// Per-frame pose change (translation in half-image units; rotation in
    /// multiples of π).
    pub drift_rate: f64,
    /// Background drift (hue, stripe orientation and phase) relative to
    /// `drift_rate`; the object is what persists through an episode.
    pub background_drift: f64,
    pub noise_sigma: f64,
    pub fps: f64,
    pub seed: u64,
}

impl Default for EpisodicWorldConfig {
    fn default() -> Self {
        Self { n_episodes: 20, frames_per_episode: 200, image_size: 32, drift_rate: 0.02, background_drift: 3.0, noise_sigma: 0.02, fps: 1.0, seed: 0 }
    }
}

impl EpisodicWorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_episodes == 0 || self.frames_per_episode == 0 || self.image_size < 8 {
            return Err(Error::Parameter("episodes, frames per episode and image size (>= 8) must be positive".into()));
        }
        if !(self.drift_rate >= 0.0 && self.background_drift >= 0.0 && self.noise_sigma >= 0.0 && self.fps > 0.0) {
            return Err(Error::Parameter("drift rates and noise must be >= 0 and fps > 0".into()));
        }
        if self.drift_rate >= 0.5 {
            return Err(Error::Parameter(format!("drift rate {} is too large to keep episodes apart", self.drift_rate)));
        }
        Ok(())
    }

    pub fn segment_length_s(&self) -> f64 {
        self.frames_per_episode as f64 / self.fps
    }
}

/// Appearance that stays fixed throughout an episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSignature {
    pub geometry: Geometry,
    pub color: [f64; 3],
    pub background: Background,
    pub base_scale: f64,
    pub aspect: f64,
    pub thickness: f64,
    /// Rotation direction and speed multiplier.
    pub spin: f64,
    /// Starting object and background colours; hues drift during the episode.
    pub object_hsv: [f64; 3],
    pub background_hsv: [f64; 3],
}

impl EpisodeSignature {
    fn appearance(&self, pose: &Pose) -> ([f64; 3], Background) {
        let [h, s, v] = self.object_hsv;
        let [bh, bs, bv] = self.background_hsv;
        let background = Background {
            base: hsv(bh + pose.background.0, bs, bv),
            stripe_angle: self.background.stripe_angle + pose.background.1,
            stripe_phase: self.background.stripe_phase + pose.background.2,
            ..self.background
        };
        (hsv(h + pose.hue_shift, s, v), background)
    }

    fn latent(&self, color: [f64; 3], b: &Background) -> Vec<f64> {
        let g = Geometry::ALL.iter().position(|x| *x == self.geometry).unwrap_or(0) as f64;
        let base = b.base;
        vec![
            (2.0 * PI * g / 12.0).cos(),
            (2.0 * PI * g / 12.0).sin(),
            color[0],
            color[1],
            color[2],
            base[0],
            base[1],
            base[2],
            (2.0 * b.stripe_angle).cos() * b.stripe_amplitude * 4.0,
            (2.0 * b.stripe_angle).sin() * b.stripe_amplitude * 4.0,
            b.stripe_frequency / 8.0,
            self.base_scale,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pose {
    center: (f64, f64),
    heading: f64,
    rotation: f64,
    scale: f64,
    hue_shift: f64,
    /// Background hue, stripe angle and stripe phase offsets.
    background: (f64, f64, f64),
}

#[derive(Debug, Clone)]
pub struct EpisodicFixture {
    pub config: EpisodicWorldConfig,
    pub signatures: Vec<EpisodeSignature>,
    pub frames: Vec<FrameRecord>,
    /// In-memory manifest (shard fields empty until written).
    pub manifest: Manifest,
    pub labeling: TemporalLabeling,
    /// Mean latent distance between frames of the same / different episodes.
    pub intra_distance: f64,
    pub inter_distance: f64,
}

/// Episodes of the same geometry cycle share nothing but that geometry's
/// position in the cycle; the palette is common to the cycle and only
/// jittered per episode, so colour alone does not identify an episode.
fn signature(seed: u64, episode: usize, geometry: Geometry) -> EpisodeSignature {
    let cycle = (episode / Geometry::ALL.len()) as u64;
    let mut palette = stream(seed, "episode-palette", &[cycle]);
    let bg_hue: f64 = palette.random();
    let obj_hue = bg_hue + palette.random_range(0.25..0.75);
    let mut rng = stream(seed, "episode", &[episode as u64]);
    let object_hsv = [obj_hue + rng.random_range(-0.05..0.05), rng.random_range(0.5..0.9), rng.random_range(0.6..0.95)];
    let background_hsv = [bg_hue + rng.random_range(-0.05..0.05), rng.random_range(0.2..0.5), rng.random_range(0.25..0.55)];
    EpisodeSignature {
        geometry,
        color: hsv(object_hsv[0], object_hsv[1], object_hsv[2]),
        background: Background {
            base: hsv(background_hsv[0], background_hsv[1], background_hsv[2]),
            stripe_amplitude: rng.random_range(0.04..0.1),
            stripe_frequency: rng.random_range(2.0..6.0),
            stripe_angle: rng.random_range(0.0..PI),
            stripe_phase: rng.random_range(0.0..2.0 * PI),
        },
        base_scale: rng.random_range(0.5..0.65),
        aspect: rng.random_range(0.85..1.15),
        thickness: rng.random_range(0.3..0.4),
        spin: if rng.random_bool(0.5) { 1.0 } else { -1.0 } * rng.random_range(0.5..1.0),
        object_hsv,
        background_hsv,
    }
}

fn step_pose(p: Pose, drift: f64, background_drift: f64, spin: f64, rng: &mut impl Rng) -> Pose {
    let heading = p.heading + rng.random_range(-0.5..0.5);
    let mut center = (p.center.0 + drift * heading.cos(), p.center.1 + drift * heading.sin());
    let limit = 0.3;
    let mut heading = heading;
    if center.0.abs() > limit {
        center.0 = center.0.signum() * (2.0 * limit - center.0.abs());
        heading = PI - heading;
    }
    if center.1.abs() > limit {
        center.1 = center.1.signum() * (2.0 * limit - center.1.abs());
        heading = -heading;
    }
    let scale = (p.scale * (1.0 + drift * rng.random_range(-1.0..1.0))).clamp(0.85, 1.15);
    let bd = drift * background_drift;
    let background = (
        p.background.0 + bd * rng.random_range(-1.0..1.0),
        p.background.1 + bd * PI * rng.random_range(-1.0..1.0),
        p.background.2 + bd * 2.0 * PI * rng.random_range(-1.0..1.0),
    );
    Pose {
        center,
        heading,
        rotation: p.rotation + drift * spin * PI,
        scale,
        hue_shift: p.hue_shift + drift * rng.random_range(-1.0..1.0),
        background,
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Deterministic in `config`. Episodes cycle through the geometries in a
/// seeded order, so runs with more than 12 episodes repeat geometries with
/// different colours, backgrounds and sizes.
pub fn generate_episodic(config: &EpisodicWorldConfig) -> Result<EpisodicFixture> {
    config.validate()?;
    let mut order = Geometry::ALL.to_vec();
    order.shuffle(&mut stream(config.seed, "episode-geometry", &[]));
    let signatures: Vec<EpisodeSignature> =
        (0..config.n_episodes).map(|e| signature(config.seed, e, order[e % order.len()])).collect();

    let size = config.image_size;
    let n = config.n_episodes * config.frames_per_episode;
    let mut frames = Vec::with_capacity(n);
    let mut latents = Vec::with_capacity(n);
    let preprocessing = PreprocessConfig { minor_edge: size as u32, crop: size as u32, shift_up: 0 };
    let mut manifest = Manifest::new(config.fps, preprocessing);
    for (e, sig) in signatures.iter().enumerate() {
        let mut rng = stream(config.seed, "episode-drift", &[e as u64]);
        let mut pose = Pose {
            center: (rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)),
            heading: rng.random_range(0.0..2.0 * PI),
            rotation: rng.random_range(0.0..2.0 * PI),
            scale: 1.0,
            hue_shift: 0.0,
            background: (0.0, 0.0, 0.0),
        };
        for _ in 0..config.frames_per_episode {
            let id = frames.len() as u64;
            let shape = ShapePose {
                center: pose.center,
                scale: sig.base_scale * pose.scale,
                rotation: pose.rotation,
                aspect: sig.aspect,
                thickness: sig.thickness,
            };
            let (color, background) = sig.appearance(&pose);
            let mut values = render_values(size, sig.geometry, &shape, color, &background);
            if config.noise_sigma > 0.0 {
                let normal = Normal::new(0.0, config.noise_sigma).expect("finite sigma");
                let mut noise = stream(config.seed, "episode-noise", &[id]);
                for px in &mut values {
                    for c in px.iter_mut() {
                        *c += normal.sample(&mut noise);
                    }
                }
            }
            let mut latent = sig.latent(color, &background);
            latent.extend([pose.center.0, pose.center.1, pose.rotation.cos() * 0.1, pose.rotation.sin() * 0.1, shape.scale]);
            latents.push(latent);
            let timestamp_s = id as f64 / config.fps;
            frames.push(FrameRecord {
                frame_id: id,
                recording_id: EPISODIC_RECORDING.into(),
                timestamp_s,
                image: to_image(size, &values),
                label: Some(sig.geometry.name().into()),
                exemplar_id: Some(format!("episode-{e:03}")),
            });
            manifest.entries.push(ManifestEntry {
                frame_id: id,
                recording_id: EPISODIC_RECORDING.into(),
                timestamp_s,
                label: Some(sig.geometry.name().into()),
                exemplar_id: Some(format!("episode-{e:03}")),
                shard_path: String::new(),
                shard_offset: 0,
            });
            pose = step_pose(pose, config.drift_rate, config.background_drift, sig.spin, &mut rng);
        }
    }
    manifest.validate()?;
    let labeling = assign_temporal_classes(&manifest, config.segment_length_s(), LabelingOptions::default())?;

    // Separability certificate over a deterministic sample of frame pairs.
    let (mut intra, mut inter) = ((0.0, 0usize), (0.0, 0usize));
    let mut rng = stream(config.seed, "certificate", &[]);
    for _ in 0..4000.min(n * n) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a == b {
            continue;
        }
        let d = distance(&latents[a], &latents[b]);
        if a / config.frames_per_episode == b / config.frames_per_episode {
            intra = (intra.0 + d, intra.1 + 1);
        } else {
            inter = (inter.0 + d, inter.1 + 1);
        }
    }
    // First-to-last pairs so every episode contributes to the intra mean.
    for e in 0..config.n_episodes {
        let base = e * config.frames_per_episode;
        if config.frames_per_episode > 1 {
            intra = (intra.0 + distance(&latents[base], &latents[base + config.frames_per_episode - 1]), intra.1 + 1);
        }
    }
    let intra_distance = if intra.1 > 0 { intra.0 / intra.1 as f64 } else { 0.0 };
    let inter_distance = if inter.1 > 0 { inter.0 / inter.1 as f64 } else { f64::INFINITY };
    if config.n_episodes > 1 && intra_distance >= inter_distance {
        return Err(Error::Contract(format!(
            "episodes are not separable: intra-episode distance {intra_distance:.4} >= inter-episode {inter_distance:.4}"
        )));
    }
    Ok(EpisodicFixture { config: config.clone(), signatures, frames, manifest, labeling, intra_distance, inter_distance })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(drift: f64, noise: f64) -> EpisodicWorldConfig {
        EpisodicWorldConfig { n_episodes: 3, frames_per_episode: 10, image_size: 16, drift_rate: drift, background_drift: 3.0, noise_sigma: noise, fps: 2.0, seed: 5 }
    }

    #[test]
    fn static_episodes_repeat_one_frame() {
        let fx = generate_episodic(&small(0.0, 0.0)).unwrap();
        for e in 0..3 {
            let first = &fx.frames[e * 10].image;
            assert!(fx.frames[e * 10..(e + 1) * 10].iter().all(|f| &f.image == first));
        }
        assert_ne!(fx.frames[0].image, fx.frames[10].image);
    }

    #[test]
    fn deterministic_and_labelled_by_episode() {
        let a = generate_episodic(&small(0.05, 0.02)).unwrap();
        let b = generate_episodic(&small(0.05, 0.02)).unwrap();
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.labeling.n_classes, 3);
        let classes: Vec<u32> = a.labeling.class_of.iter().map(|c| c.unwrap()).collect();
        assert_eq!(classes, (0..30).map(|i| i / 10).collect::<Vec<u32>>());
        assert!(a.intra_distance < a.inter_distance);
        a.manifest.validate().unwrap();
    }

    #[test]
    fn single_episode_is_one_class() {
        let fx = generate_episodic(&EpisodicWorldConfig { n_episodes: 1, ..small(0.05, 0.0) }).unwrap();
        assert_eq!(fx.labeling.n_classes, 1);
    }
}
