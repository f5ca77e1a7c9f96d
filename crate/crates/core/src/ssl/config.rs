use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::LabelingOptions;
use crate::transforms::{AugmentConfig, ContrastiveAugmentConfig, NormalizationConstants};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    TemporalClassification,
    StaticContrastive,
    TemporalContrastive,
}

impl Objective {
    pub const ALL: [Objective; 3] =
        [Objective::TemporalClassification, Objective::StaticContrastive, Objective::TemporalContrastive];

    pub fn is_contrastive(self) -> bool {
        self != Objective::TemporalClassification
    }

    pub fn name(self) -> &'static str {
        match self {
            Objective::TemporalClassification => "temporal_classification",
            Objective::StaticContrastive => "static_contrastive",
            Objective::TemporalContrastive => "temporal_contrastive",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temporal_classification" | "tc" => Ok(Objective::TemporalClassification),
            "static_contrastive" | "moco" => Ok(Objective::StaticContrastive),
            "temporal_contrastive" | "moco-temporal" => Ok(Objective::TemporalContrastive),
            other => Err(Error::Config(format!(
                "unknown objective `{other}` (expected temporal_classification, static_contrastive or temporal_contrastive)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContrastiveConfig {
    pub queue_size: usize,
    pub momentum: f64,
    pub temperature: f64,
    pub projection_dim: usize,
    /// Hidden width of the projection head; the embedding width when unset.
    pub projection_hidden: Option<usize>,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self { queue_size: 65536, momentum: 0.999, temperature: 0.2, projection_dim: 128, projection_hidden: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub objective: Objective,
    pub architecture: String,
    /// Training frame rate; must divide the dataset's rate. Dataset rate when unset.
    pub fps: Option<f64>,
    pub segment_length_s: f64,
    pub labeling: LabelingOptions,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub augment: AugmentConfig,
    pub contrastive_augment: ContrastiveAugmentConfig,
    pub normalization: NormalizationConstants,
    pub contrastive: ContrastiveConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: Objective::TemporalClassification,
            architecture: "small-cnn".into(),
            fps: None,
            segment_length_s: 288.0,
            labeling: LabelingOptions::default(),
            lr: 5e-4,
            batch_size: 64,
            epochs: 20,
            seed: 0,
            augment: AugmentConfig::default(),
            contrastive_augment: ContrastiveAugmentConfig::default(),
            normalization: NormalizationConstants::default(),
            contrastive: ContrastiveConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Parameter(format!("learning rate must be finite and >= 0, got {}", self.lr)));
        }
        if self.batch_size == 0 || (self.objective.is_contrastive() && self.batch_size < 2) {
            return Err(Error::Parameter(format!("batch size {} too small for {}", self.batch_size, self.objective)));
        }
        if self.epochs == 0 {
            return Err(Error::Parameter("epochs must be at least 1".into()));
        }
        if !(self.segment_length_s > 0.0 && self.segment_length_s.is_finite()) {
            return Err(Error::Parameter(format!("segment length must be positive, got {}", self.segment_length_s)));
        }
        if let Some(fps) = self.fps {
            if !(fps > 0.0 && fps.is_finite()) {
                return Err(Error::Parameter(format!("fps must be positive, got {fps}")));
            }
        }
        let c = &self.contrastive;
        if !(0.0..=1.0).contains(&c.momentum) {
            return Err(Error::Parameter(format!("momentum must lie in [0, 1], got {}", c.momentum)));
        }
        if !(c.temperature > 0.0) || c.queue_size == 0 || c.projection_dim == 0 || c.projection_hidden == Some(0) {
            return Err(Error::Parameter("contrastive temperature, queue size and projection widths must be positive".into()));
        }
        self.augment.validate()?;
        self.normalization.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_names_round_trip() {
        for o in Objective::ALL {
            assert_eq!(o.name().parse::<Objective>().unwrap(), o);
            let json = serde_json::to_string(&o).unwrap();
            assert_eq!(json, format!("\"{}\"", o.name()));
        }
        assert!(matches!("slow".parse::<Objective>(), Err(Error::Config(_))));
    }

    #[test]
    fn validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let zero_lr = TrainConfig { lr: 0.0, ..TrainConfig::default() };
        assert!(zero_lr.validate().is_ok());
        let tiny = TrainConfig { objective: Objective::StaticContrastive, batch_size: 1, ..TrainConfig::default() };
        assert!(matches!(tiny.validate(), Err(Error::Parameter(_))));
    }
}
