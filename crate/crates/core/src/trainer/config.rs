use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::augment::AugmentPipeline;
use crate::ctc::{Vocabulary, WeightedCtcConfig};
use crate::error::{io_at, Error, Result};
use crate::model::{ModelConfig, Preset};

/// Model architecture in a training config: a named preset or a full block list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSection {
    Preset {
        preset: Preset,
        #[serde(default = "Vocabulary::alphanumeric")]
        vocabulary: Vocabulary,
    },
    Full(ModelConfig),
}

impl ModelSection {
    pub fn resolve(&self) -> ModelConfig {
        match self {
            ModelSection::Preset { preset, vocabulary } => ModelConfig::preset(*preset, vocabulary.clone()),
            ModelSection::Full(cfg) => cfg.clone(),
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection::Preset {
            preset: Preset::Easter3x3,
            vocabulary: Vocabulary::alphanumeric(),
        }
    }
}

/// Weighted CTC blank weighting: `"off"` or a weight `alpha` in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum WeightedCtc {
    #[default]
    Off,
    Alpha(f64),
}

impl WeightedCtc {
    pub fn config(&self) -> Result<Option<WeightedCtcConfig>> {
        match *self {
            WeightedCtc::Off => Ok(None),
            WeightedCtc::Alpha(a) => WeightedCtcConfig::new(a).map(Some),
        }
    }
}

impl fmt::Display for WeightedCtc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightedCtc::Off => f.write_str("off"),
            WeightedCtc::Alpha(a) => write!(f, "{a}"),
        }
    }
}

impl Serialize for WeightedCtc {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            WeightedCtc::Off => s.serialize_str("off"),
            WeightedCtc::Alpha(a) => s.serialize_f64(*a),
        }
    }
}

impl<'de> Deserialize<'de> for WeightedCtc {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) if s == "off" => Ok(WeightedCtc::Off),
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "weighted_ctc must be \"off\" or a number, got {s:?}"
            ))),
            Raw::Number(a) => Ok(WeightedCtc::Alpha(a)),
        }
    }
}

/// Augmentation in a training config: `"none"`, `"standard"` or an explicit op list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AugmentSection {
    Named(AugmentPreset),
    Pipeline(AugmentPipeline),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentPreset {
    None,
    Standard,
}

impl Default for AugmentSection {
    fn default() -> Self {
        AugmentSection::Named(AugmentPreset::None)
    }
}

impl AugmentSection {
    pub fn resolve(&self) -> AugmentPipeline {
        match self {
            AugmentSection::Named(AugmentPreset::None) => AugmentPipeline::default(),
            AugmentSection::Named(AugmentPreset::Standard) => AugmentPipeline::standard(),
            AugmentSection::Pipeline(p) => p.clone(),
        }
    }
}

/// Adam with optional L2 decay, global-norm clipping and a linear schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Steps of linear ramp from 0 to `lr`.
    pub warmup_steps: u64,
    /// Fraction of `lr` reached by the last step, decaying linearly after warmup.
    pub final_lr_fraction: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            clip_norm: Some(5.0),
            warmup_steps: 0,
            final_lr_fraction: 1.0,
        }
    }
}

impl OptimizerConfig {
    /// Step size for 0-based `step` out of `total`.
    pub fn lr_at(&self, step: u64, total: u64) -> f64 {
        if step < self.warmup_steps {
            return self.lr * (step + 1) as f64 / self.warmup_steps as f64;
        }
        let span = total.saturating_sub(self.warmup_steps).max(1) as f64;
        let progress = ((step - self.warmup_steps) as f64 / span).min(1.0);
        self.lr * (1.0 - progress * (1.0 - self.final_lr_fraction))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("optimizer: {m}")));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("moment decays must lie in [0, 1)");
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("eps must be positive and weight_decay non-negative");
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return bad("clip_norm must be positive");
        }
        if !(0.0..=1.0).contains(&self.final_lr_fraction) {
            return bad("final_lr_fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub train_manifest: PathBuf,
    pub val_manifest: Option<PathBuf>,
    /// Checkpoints, metrics CSV and state file go here.
    pub output_dir: PathBuf,
    pub seed: u64,
    pub batch_size: usize,
    pub max_steps: u64,
    pub max_epochs: Option<u64>,
    /// Steps between metrics rows, validation and state saves.
    pub eval_interval: u64,
    /// Leading training samples decoded at every evaluation, to track memorization.
    pub train_eval_samples: usize,
    /// Stop once the monitored CER (validation, else training subset) falls below this.
    pub early_stop_cer: Option<f64>,
    /// `false` writes 0 in the metrics CSV `wall_time` column so runs compare byte for byte.
    pub record_wall_time: bool,
    pub weighted_ctc: WeightedCtc,
    pub model: ModelSection,
    pub optimizer: OptimizerConfig,
    pub augment: AugmentSection,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            train_manifest: PathBuf::new(),
            val_manifest: None,
            output_dir: PathBuf::from("run"),
            seed: 0,
            batch_size: 16,
            max_steps: 2000,
            max_epochs: None,
            eval_interval: 100,
            train_eval_samples: 0,
            early_stop_cer: None,
            record_wall_time: true,
            weighted_ctc: WeightedCtc::Off,
            model: ModelSection::default(),
            optimizer: OptimizerConfig::default(),
            augment: AugmentSection::default(),
        }
    }
}

impl TrainingConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&fs::read_to_string(path).map_err(io_at(path))?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.train_manifest);
        if let Some(v) = cfg.val_manifest.as_mut() {
            fix(v);
        }
        fix(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("training config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_manifest.as_os_str().is_empty() {
            return Err(Error::Config("train_manifest is required".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.max_steps == 0 || self.max_epochs == Some(0) {
            return Err(Error::Config("max_steps and max_epochs must be at least 1".into()));
        }
        if self.eval_interval == 0 {
            return Err(Error::Config("eval_interval must be at least 1".into()));
        }
        self.weighted_ctc.config()?;
        self.optimizer.validate()?;
        self.augment.resolve().validate()?;
        self.model.resolve().validate()
    }
}
