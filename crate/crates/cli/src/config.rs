//! Run configuration: TOML documents with `include`, strict keys, and
//! command-line overrides applied as dotted `key=value` assignments.

use std::path::{Path, PathBuf};

use headcam_core::analysis::CamConfig;
use headcam_core::baselines::HogConfig;
use headcam_core::ingest::{CurationRules, LabelingOptions, PreprocessConfig, RawRecording};
use headcam_core::nn::AdamConfig;
use headcam_core::probe::{ProbeConfig, SplitSpec};
use headcam_core::ssl::{ContrastiveConfig, Objective, TrainConfig};
use headcam_core::synth::{EpisodicWorldConfig, ShapeWorldConfig};
use headcam_core::transforms::{AugmentConfig, ContrastiveAugmentConfig, NormalizationConstants};
use headcam_core::{Error, Result};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";
const MAX_INCLUDE_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Sampling rate for ingestion.
    pub fps: f64,
    pub preprocessing: PreprocessConfig,
    pub shard_size: usize,
    pub recordings: Vec<RawRecording>,
    /// Annotation cells (CSV) and synonym table; with them, ingestion also
    /// writes a curated labeled subset under `labeled/`.
    pub annotations: Option<PathBuf>,
    pub synonyms: Option<PathBuf>,
    pub curation: CurationRules,
    pub episodic: EpisodicWorldConfig,
    pub shapes: ShapeWorldConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            fps: 5.0,
            preprocessing: PreprocessConfig::default(),
            shard_size: headcam_core::ingest::DEFAULT_SHARD_SIZE,
            recordings: Vec::new(),
            annotations: None,
            synonyms: None,
            curation: CurationRules::default(),
            episodic: EpisodicWorldConfig::default(),
            shapes: ShapeWorldConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentSection {
    pub color: AugmentConfig,
    /// Crops, flips and blur for the contrastive objectives.
    pub geometric: ContrastiveAugmentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub objective: Objective,
    pub architecture: String,
    pub fps: Option<f64>,
    pub segment_length_s: f64,
    pub labeling: LabelingOptions,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub normalization: NormalizationConstants,
    pub contrastive: ContrastiveConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            objective: t.objective,
            architecture: t.architecture,
            fps: t.fps,
            segment_length_s: t.segment_length_s,
            labeling: t.labeling,
            lr: AdamConfig::default().lr,
            batch_size: t.batch_size,
            epochs: t.epochs,
            normalization: t.normalization,
            contrastive: t.contrastive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    /// The trunk of a trained checkpoint.
    Trunk,
    /// A freshly initialized trunk of `train.architecture`.
    Random,
    Hog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub features: FeatureSource,
    pub split: SplitSpec,
    pub classifier: ProbeConfig,
    pub hog: HogConfig,
    /// Restrict to a two-class task `[a, b]`.
    pub binary: Option<[String; 2]>,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            features: FeatureSource::Trunk,
            split: SplitSpec::default(),
            classifier: ProbeConfig::default(),
            hog: HogConfig::default(),
            binary: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub fps: Vec<f64>,
    pub segment_length_s: Vec<f64>,
    pub augment: Vec<bool>,
    /// Training epochs per cell; `train.epochs` when unset.
    pub epochs: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { fps: vec![1.0], segment_length_s: vec![200.0, 25.0], augment: vec![true, false], epochs: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub csi: bool,
    /// Choose each feature's preferred class on one half of the images and
    /// measure on the other.
    pub csi_split_half: bool,
    pub pca: bool,
    pub cam: CamConfig,
    /// Attention maps for the first `cam_images` frames, for every class.
    pub cam_images: usize,
    pub top_sample: usize,
    pub top_k: usize,
    pub sweep: SweepConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            csi: true,
            csi_split_half: false,
            pca: true,
            cam: CamConfig::default(),
            cam_images: 4,
            top_sample: 1024,
            top_k: 10,
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub data: DataConfig,
    pub augment: AugmentSection,
    pub train: TrainSection,
    pub probe: ProbeSection,
    pub analysis: AnalysisConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: None,
            workers: None,
            data: DataConfig::default(),
            augment: AugmentSection::default(),
            train: TrainSection::default(),
            probe: ProbeSection::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            objective: t.objective,
            architecture: t.architecture.clone(),
            fps: t.fps,
            segment_length_s: t.segment_length_s,
            labeling: t.labeling,
            lr: t.lr,
            batch_size: t.batch_size,
            epochs: t.epochs,
            seed: self.seed,
            augment: self.augment.color,
            contrastive_augment: self.augment.geometric,
            normalization: t.normalization,
            contrastive: t.contrastive.clone(),
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec { seed: self.seed, ..self.probe.split }
    }

    pub fn probe_config(&self) -> ProbeConfig {
        ProbeConfig { seed: self.seed, ..self.probe.classifier }
    }

    pub fn output_dir(&self) -> Result<&Path> {
        self.output_dir.as_deref().ok_or_else(|| Error::Config("no output directory (set output_dir or pass --output-dir)".into()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("cannot serialize configuration: {e}")))
    }

    /// Writes the resolved configuration into the output directory.
    pub fn write_resolved(&self) -> Result<PathBuf> {
        let dir = self.output_dir()?;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(RESOLVED_CONFIG_FILE);
        headcam_core::container::write_atomic(&path, self.to_toml()?.as_bytes())?;
        Ok(path)
    }
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Reads `path`, resolving `include = [...]` (paths relative to the
/// including file) before the including file's own keys.
pub fn load_document(path: &Path) -> Result<Table> {
    load_with_depth(path, 0)
}

fn load_with_depth(path: &Path, depth: usize) -> Result<Table> {
    if depth > MAX_INCLUDE_DEPTH {
        return Err(Error::Config(format!("include nesting deeper than {MAX_INCLUDE_DEPTH} at {}", path.display())));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut doc: Table = text.parse().map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let includes = match doc.remove("include") {
        None => Vec::new(),
        Some(Value::String(s)) => vec![s],
        Some(Value::Array(items)) => items
            .into_iter()
            .map(|v| match v {
                Value::String(s) => Ok(s),
                other => Err(Error::Config(format!("{}: include entries must be strings, got {other}", path.display()))),
            })
            .collect::<Result<_>>()?,
        Some(other) => return Err(Error::Config(format!("{}: include must be a string or array, got {other}", path.display()))),
    };
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut merged = Table::new();
    for inc in includes {
        merge(&mut merged, load_with_depth(&dir.join(inc), depth + 1)?);
    }
    merge(&mut merged, doc);
    Ok(merged)
}

fn parse_scalar(raw: &str) -> Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_owned())),
        Err(_) => Value::String(raw.to_owned()),
    }
}

/// Applies `section.key=value`; the value is read as a TOML literal when
/// it parses as one and as a bare string otherwise.
pub fn set_override(doc: &mut Table, assignment: &str) -> Result<()> {
    let (key, value) = parse_assignment(assignment)?;
    set_value(doc, &key, value)
}

pub fn parse_assignment(assignment: &str) -> Result<(String, Value)> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    Ok((key.trim().to_owned(), parse_scalar(raw.trim())))
}

pub fn set_value(doc: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed key `{key}`")));
    }
    let mut table = doc;
    for p in &parts[..parts.len() - 1] {
        let entry = table.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        table = entry.as_table_mut().ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a section")))?;
    }
    table.insert(parts[parts.len() - 1].to_owned(), value);
    Ok(())
}

/// Defaults, then the file (if any), then the overrides.
pub fn resolve(file: Option<&Path>, overrides: &[(String, Value)]) -> Result<RunConfig> {
    let mut doc = match file {
        Some(p) => load_document(p)?,
        None => Table::new(),
    };
    for (k, v) in overrides {
        set_value(&mut doc, k, v.clone())?;
    }
    let cfg: RunConfig = Value::Table(doc).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_parse_literals() {
        let mut doc = Table::new();
        set_override(&mut doc, "train.lr=0.001").unwrap();
        set_override(&mut doc, "train.objective=static_contrastive").unwrap();
        set_override(&mut doc, "analysis.sweep.augment=[true]").unwrap();
        let cfg: RunConfig = Value::Table(doc).try_into().unwrap();
        assert_eq!(cfg.train.lr, 0.001);
        assert_eq!(cfg.train.objective, Objective::StaticContrastive);
        assert_eq!(cfg.analysis.sweep.augment, vec![true]);
    }
}
