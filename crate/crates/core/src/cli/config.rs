//! Run configuration: a JSON file merged with command-line overrides.
//!
//! Schema (every section optional, unknown keys rejected):
//!
//! ```json
//! {
//!   "seed": 0,
//!   "model":    { "levels": 4, "base_width": 32, "latent_dim": 512, ... },
//!   "loss":     { "kl_weight": 80.0, "kl_formula": "paper", "weights": { ... } },
//!   "train":    { "batch_size": 12, "cycles_max": 20, "lr_max": 0.0002, ... },
//!   "features": { "dynamic": [...], "use_ctth_alt": false, ... },
//!   "split":    { "validation_days": 3, "test_days": 3, "window_stride": 12 },
//!   "synth":    { "size": 32, "days": 20, "frames_per_day": 96, "missing_rate": 0.05 },
//!   "regions": 3,
//!   "data": ["out/R1", "out/R2"],
//!   "out": "runs/a"
//! }
//! ```
//!
//! `model.in_channels` follows from `features` unless set explicitly, in
//! which case the two must agree. `train.seed` is always replaced by `seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureSpec, RegionDataset, SynthConfig};
use crate::error::{config_err, Error, Result};
use crate::losses::LossConfig;
use crate::model::{read_json, write_json, ModelConfig};
use crate::training::TrainRunConfig;

pub const RESOLVED_CONFIG: &str = "resolved_config.json";

/// How the days of every region are divided. The last `test_days` days
/// are the test split, the `validation_days` before them validation, and
/// the rest training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub validation_days: usize,
    pub test_days: usize,
    /// Frames between consecutive window starts.
    pub window_stride: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            validation_days: 3,
            test_days: 3,
            window_stride: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
    All,
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_stride == 0 {
            return Err(config_err!("split.window_stride must be at least 1"));
        }
        Ok(())
    }

    /// Day indices of `split` for a region with `days` days.
    pub fn days(&self, split: Split, days: usize) -> Result<std::ops::Range<usize>> {
        let held = self.validation_days + self.test_days;
        if split != Split::All && days <= held {
            return Err(config_err!(
                "region has {days} days; the split needs more than {} validation + {} test days",
                self.validation_days,
                self.test_days
            ));
        }
        let train_end = days.saturating_sub(held);
        let val_end = days.saturating_sub(self.test_days);
        Ok(match split {
            Split::Train => 0..train_end,
            Split::Validation => train_end..val_end,
            Split::Test => val_end..days,
            Split::All => 0..days,
        })
    }

    pub fn select(&self, ds: &RegionDataset, split: Split) -> Result<RegionDataset> {
        Ok(ds.select_days(self.days(split, ds.days.len())?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub train: TrainRunConfig,
    pub features: FeatureSpec,
    pub split: SplitConfig,
    pub synth: SynthConfig,
    /// Regions written by `synth`.
    pub regions: usize,
    pub data: Vec<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: ModelConfig::default(),
            loss: LossConfig::default(),
            train: TrainRunConfig::default(),
            features: FeatureSpec::default(),
            split: SplitConfig::default(),
            synth: SynthConfig::default(),
            regions: 3,
            data: Vec::new(),
            out: None,
        }
    }
}

/// A configuration file parsed, with a note of whether it pinned
/// `model.in_channels`.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    explicit_in_channels: bool,
}

impl LoadedConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self {
                config: RunConfig::default(),
                explicit_in_channels: false,
            });
        };
        let raw: serde_json::Value = read_json(path)?;
        let explicit_in_channels = raw.pointer("/model/in_channels").is_some();
        let config = serde_json::from_value(raw).map_err(|e| config_err!("{}: {e}", path.display()))?;
        Ok(Self {
            config,
            explicit_in_channels,
        })
    }

    /// Applies derived fields and validates everything.
    pub fn resolve(self) -> Result<RunConfig> {
        let mut c = self.config;
        c.features.validate()?;
        if self.explicit_in_channels {
            c.features.check_model_channels(c.model.in_channels)?;
        } else {
            c.model.in_channels = c.features.input_channels();
        }
        c.train.seed = c.seed;
        c.model.validate()?;
        c.loss.validate()?;
        c.train.validate()?;
        c.split.validate()?;
        c.synth.validate()?;
        Ok(c)
    }
}

impl RunConfig {
    pub fn write_snapshot(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join(RESOLVED_CONFIG), self)
    }
}
