//! Run configuration: one self-describing JSON document drives every
//! command. Unknown keys are rejected and every seed is explicit; nothing
//! falls back to wall-clock entropy.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use uncprop_core::dataset::{DatasetSpec, MaskPair};
use uncprop_core::error::{Error, Result};
use uncprop_core::models::{Activation, HeadKind, MlpSpec};
use uncprop_core::pipeline::Task;
use uncprop_core::training::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub size: usize,
    /// Evaluation phantoms.
    pub count: usize,
    /// Training phantoms, split evenly between the two stages.
    /// Defaults to `count`.
    #[serde(default)]
    pub train_count: Option<usize>,
    pub noise_std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpstreamModelConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    #[serde(default = "default_true")]
    pub residual_mean: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DownstreamModelConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_mc_samples")]
    pub samples: usize,
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

fn default_mc_samples() -> usize {
    256
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub dataset: DatasetConfig,
    pub masks: Vec<MaskPair>,
    pub upstream_model: UpstreamModelConfig,
    pub downstream_model: DownstreamModelConfig,
    pub train: TrainConfig,
    pub mc: McSection,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let bytes = std::fs::read(path)?;
        let config: RunConfig = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset_spec().validate()?;
        self.train.validate()?;
        if self.mc.samples < 2 {
            return Err(Error::Config(format!(
                "mc.samples must be >= 2, got {}",
                self.mc.samples
            )));
        }
        self.upstream_spec().validate()?;
        self.downstream_spec().validate()?;
        Ok(())
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            size: self.dataset.size,
            eval_count: self.dataset.count,
            train_count: self.dataset.train_count.unwrap_or(self.dataset.count),
            noise_std: self.dataset.noise_std,
            seed: self.dataset.seed,
            masks: self.masks.clone(),
        }
    }

    pub fn upstream_spec(&self) -> MlpSpec {
        let side = self.dataset.size;
        MlpSpec {
            input: side * side,
            hidden: self.upstream_model.hidden.clone(),
            activation: self.upstream_model.activation,
            head: HeadKind::ImageGaussian {
                height: side,
                width: side,
                residual_mean: self.upstream_model.residual_mean,
            },
        }
    }

    pub fn downstream_spec(&self) -> MlpSpec {
        let side = self.dataset.size;
        MlpSpec {
            input: side * side,
            hidden: self.downstream_model.hidden.clone(),
            activation: self.downstream_model.activation,
            head: match self.task {
                Task::Regression => HeadKind::ScalarGaussian,
                Task::Classification => HeadKind::Softmax { classes: 2 },
            },
        }
    }
}
