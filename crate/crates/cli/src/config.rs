//! Pipeline configuration: paths, featurization, splitting and the network
//! setups, deserialized from a single JSON file. Unknown keys are rejected.
//! Defaults reproduce the reference setup: feature stack 1000 down to 100,
//! task layers 1000/1000/100, learning rates 0.1/0.01/0.03, epochs
//! 100/5/96/52/96, beta1 0.5, beta2 0.999, lambda 0.01, task weights
//! 3:1:9:1, positive:negative 100:1.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pkpredict_core::data::Task;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Pharmacokinetic dataset CSV.
    pub dataset: PathBuf,
    /// Bioactivity CSV (smiles, target_id, active) for pretraining.
    pub bioactivity: PathBuf,
    /// Where model checkpoints are written.
    pub checkpoint_dir: PathBuf,
    /// Where reports, splits and predictions are written.
    pub report_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dataset: "data/pk.csv".into(),
            bioactivity: "data/bioactivity.csv".into(),
            checkpoint_dir: "out".into(),
            report_dir: "out".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizationConfig {
    /// Divisors for BA, PPBR, VDss, HL.
    pub divisors: [f64; 4],
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            divisors: [100.0, 100.0, 2000.0, 168.0],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerprintConfig {
    pub radius: usize,
    pub nbits: usize,
    /// When set, fingerprints are read from this dataset column (a 0/1
    /// string per row) instead of being computed from SMILES.
    #[serde(default)]
    pub precomputed_column: Option<String>,
}

impl Default for FingerprintConfig {
    fn default() -> Self {
        Self {
            radius: 2,
            nbits: 1024,
            precomputed_column: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub w1: f64,
    pub w2: f64,
    pub seed: u64,
    /// Histogram groups for the subset-error report.
    pub se_groups: usize,
    pub method: pkpredict_core::split::SplitMethod,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            w1: 0.7,
            w2: 0.3,
            seed: 0,
            se_groups: 10,
            method: pkpredict_core::split::SplitMethod::MdFisWd,
        }
    }
}

fn feature_stack() -> Vec<usize> {
    (0..10).map(|k| 1000 - k * 100).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainConfig {
    pub feature_layers: Vec<usize>,
    pub task_layer: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub pos_weight: f64,
    pub neg_weight: f64,
    /// Fraction of molecules held out for the recall report.
    pub holdout_fraction: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            feature_layers: feature_stack(),
            task_layer: 1000,
            lr: 0.01,
            beta1: 0.5,
            beta2: 0.999,
            lambda: 0.01,
            eps: 1e-8,
            epochs: 5,
            batch_size: 32,
            seed: 1,
            pos_weight: 100.0,
            neg_weight: 1.0,
            holdout_fraction: 0.2,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultitaskConfig {
    pub hidden_layers: Vec<usize>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub task_weights: [f64; 4],
}

impl Default for MultitaskConfig {
    fn default() -> Self {
        Self {
            hidden_layers: feature_stack(),
            lr: 0.1,
            beta1: 0.5,
            beta2: 0.999,
            lambda: 0.01,
            eps: 1e-8,
            epochs: 100,
            batch_size: 32,
            seed: 2,
            task_weights: [3.0, 1.0, 9.0, 1.0],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferNetworkConfig {
    /// Checkpoint name suffix, e.g. `ba` gives `transfer_ba.pkmodel.json`.
    pub name: String,
    pub tasks: Vec<Task>,
    pub task_layer: usize,
    pub epochs: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub networks: Vec<TransferNetworkConfig>,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            lr: 0.03,
            beta1: 0.5,
            beta2: 0.999,
            lambda: 0.01,
            eps: 1e-8,
            batch_size: 32,
            seed: 3,
            networks: vec![
                TransferNetworkConfig {
                    name: "ba".into(),
                    tasks: vec![Task::Ba],
                    task_layer: 1000,
                    epochs: 96,
                },
                TransferNetworkConfig {
                    name: "ppbr".into(),
                    tasks: vec![Task::Ppbr],
                    task_layer: 1000,
                    epochs: 52,
                },
                TransferNetworkConfig {
                    name: "vdss_hl".into(),
                    tasks: vec![Task::Vdss, Task::Hl],
                    task_layer: 100,
                    epochs: 96,
                },
            ],
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub normalization: NormalizationConfig,
    pub fingerprint: FingerprintConfig,
    pub split: SplitConfig,
    pub pretrain: PretrainConfig,
    pub multitask: MultitaskConfig,
    pub transfer: TransferConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("ConfigError: cannot read {}", path.display()))?;
        let config: PipelineConfig = serde_json::from_str(&text)
            .with_context(|| format!("ConfigError: cannot parse {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.fingerprint;
        if f.nbits < 64 || !f.nbits.is_power_of_two() {
            bail!("ConfigError: fingerprint.nbits must be a power of two >= 64");
        }
        if f.radius > 16 {
            bail!("ConfigError: fingerprint.radius must be at most 16");
        }
        if self.normalization.divisors.iter().any(|&d| d <= 0.0) {
            bail!("ConfigError: normalization divisors must be positive");
        }
        let s = &self.split;
        if s.w1 < 0.0 || s.w2 < 0.0 || (s.w1 + s.w2 - 1.0).abs() > 1e-9 {
            bail!("ConfigError: split weights must be non-negative and sum to 1");
        }
        if s.se_groups < 2 {
            bail!("ConfigError: split.se_groups must be at least 2");
        }
        for (name, lr, eps, batch) in [
            (
                "pretrain",
                self.pretrain.lr,
                self.pretrain.eps,
                self.pretrain.batch_size,
            ),
            (
                "multitask",
                self.multitask.lr,
                self.multitask.eps,
                self.multitask.batch_size,
            ),
            (
                "transfer",
                self.transfer.lr,
                self.transfer.eps,
                self.transfer.batch_size,
            ),
        ] {
            if lr <= 0.0 || eps <= 0.0 {
                bail!("ConfigError: {name} learning rate and eps must be positive");
            }
            if batch == 0 {
                bail!("ConfigError: {name} batch_size must be at least 1");
            }
        }
        if !(0.0..0.9).contains(&self.pretrain.holdout_fraction) {
            bail!("ConfigError: pretrain.holdout_fraction must lie in [0, 0.9)");
        }
        if self.multitask.task_weights.iter().any(|&w| w < 0.0)
            || self.multitask.task_weights.iter().all(|&w| w == 0.0)
        {
            bail!("ConfigError: multitask.task_weights must be non-negative, not all zero");
        }
        if self.transfer.networks.is_empty() {
            bail!("ConfigError: transfer.networks must not be empty");
        }
        let mut names = std::collections::HashSet::new();
        for net in &self.transfer.networks {
            if !names.insert(&net.name) {
                bail!(
                    "ConfigError: duplicate transfer network name `{}`",
                    net.name
                );
            }
            if net.tasks.is_empty() {
                bail!(
                    "ConfigError: transfer network `{}` covers no task",
                    net.name
                );
            }
            if net.task_layer == 0 {
                bail!(
                    "ConfigError: transfer network `{}` task layer must be >= 1",
                    net.name
                );
            }
        }
        Ok(())
    }

    /// Layer sizes of the pretraining network for `targets` output units.
    pub fn pretrain_sizes(&self, targets: usize) -> Vec<usize> {
        let mut sizes = vec![self.fingerprint.nbits];
        sizes.extend(&self.pretrain.feature_layers);
        sizes.push(self.pretrain.task_layer);
        sizes.push(targets);
        sizes
    }

    /// Layer sizes of the multitask network.
    pub fn multitask_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.fingerprint.nbits];
        sizes.extend(&self.multitask.hidden_layers);
        sizes.push(4);
        sizes
    }
}
