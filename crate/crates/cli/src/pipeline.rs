//! Shared pipeline plumbing: dataset/fingerprint assembly, split CSV wire
//! format, and the per-run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pkpredict_core::data::{
    load_pk_dataset_with, load_text_column, normalize_targets, CsvSchema, Dataset, LoadOptions,
    NormalizationSpec, Task, TASK_COUNT,
};
use pkpredict_core::fingerprint::{ecfp_from_smiles, Fingerprint};
use pkpredict_core::nn::TrainData;
use pkpredict_core::split::{SplitAssignment, SplitMethod};

use crate::config::PipelineConfig;

/// Resolved pipeline context for one CLI invocation.
pub struct Ctx {
    pub config: PipelineConfig,
    /// Canonical JSON of the active configuration, hashed into manifests.
    pub config_json: String,
    pub threads: usize,
}

impl Ctx {
    pub fn new(config: PipelineConfig, threads: usize) -> Result<Self> {
        let config_json = serde_json::to_string_pretty(&config)?;
        Ok(Self {
            config,
            config_json,
            threads: threads.max(1),
        })
    }

    pub fn checkpoint_dir(&self) -> &Path {
        &self.config.paths.checkpoint_dir
    }

    pub fn report_dir(&self) -> &Path {
        &self.config.paths.report_dir
    }

    pub fn checkpoint_path(&self, name: &str) -> PathBuf {
        self.checkpoint_dir().join(format!("{name}.pkmodel.json"))
    }

    pub fn report_path(&self, name: &str) -> PathBuf {
        self.report_dir().join(name)
    }

    pub fn ensure_dirs(&self) -> Result<()> {
        std::fs::create_dir_all(self.checkpoint_dir())?;
        std::fs::create_dir_all(self.report_dir())?;
        Ok(())
    }

    /// Loads the raw dataset.
    pub fn load_dataset_with(&self, options: LoadOptions) -> Result<Dataset<f64>> {
        let path = &self.config.paths.dataset;
        if !path.exists() {
            bail!("MissingArtifact: dataset file {}", path.display());
        }
        let ds = load_pk_dataset_with(path, &CsvSchema::default(), options)
            .with_context(|| format!("loading {}", path.display()))?;
        Ok(ds)
    }

    pub fn normalization(&self) -> Result<NormalizationSpec<f64>> {
        let d = self.config.normalization.divisors;
        NormalizationSpec::new(d).map_err(|e| anyhow!("ConfigError: {e}"))
    }

    /// Loads and normalizes the dataset.
    pub fn normalized_dataset(&self) -> Result<Dataset<f64>> {
        self.normalized_dataset_with(LoadOptions::default())
    }

    pub fn normalized_dataset_with(&self, options: LoadOptions) -> Result<Dataset<f64>> {
        let ds = self.load_dataset_with(options)?;
        Ok(normalize_targets(ds, self.normalization()?)?)
    }

    /// One fingerprint per record: computed from SMILES, or parsed from the
    /// configured precomputed 0/1-string column.
    pub fn fingerprints(&self, ds: &Dataset<f64>) -> Result<Vec<Fingerprint>> {
        let fp = &self.config.fingerprint;
        if let Some(column) = &fp.precomputed_column {
            let raw = load_text_column(&self.config.paths.dataset, column)?;
            if raw.len() != ds.len() {
                bail!(
                    "precomputed fingerprint column has {} rows, dataset {}",
                    raw.len(),
                    ds.len()
                );
            }
            return raw
                .iter()
                .enumerate()
                .map(|(i, text)| {
                    let parsed = Fingerprint::from_bitstring(text)
                        .with_context(|| format!("row {i}: bad `{column}` cell"))?;
                    if parsed.nbits() != fp.nbits {
                        bail!(
                            "row {i}: fingerprint width {} != configured {}",
                            parsed.nbits(),
                            fp.nbits
                        );
                    }
                    Ok(parsed)
                })
                .collect();
        }
        ds.records
            .iter()
            .map(|r| {
                ecfp_from_smiles(&r.smiles, fp.radius, fp.nbits)
                    .with_context(|| format!("fingerprinting `{}` ({})", r.id, r.smiles))
            })
            .collect()
    }
}

/// Stacks fingerprints into an (n, nbits) 0/1 design matrix.
pub fn design_matrix(fps: &[Fingerprint]) -> Array2<f64> {
    let nbits = fps.first().map_or(0, Fingerprint::nbits);
    let mut x = Array2::zeros((fps.len(), nbits));
    for (i, fp) in fps.iter().enumerate() {
        let mut row = x.row_mut(i);
        fp.write_scalars(row.as_slice_mut().expect("standard layout"));
    }
    x
}

/// Label matrix (zeros where missing) and presence mask.
pub fn label_matrices(ds: &Dataset<f64>) -> (Array2<f64>, Array2<bool>) {
    let n = ds.len();
    let mut labels = Array2::zeros((n, TASK_COUNT));
    let mut mask = Array2::from_elem((n, TASK_COUNT), false);
    for (i, rec) in ds.records.iter().enumerate() {
        for task in Task::ALL {
            if let Some(v) = rec.label(task) {
                labels[(i, task.index())] = v;
                mask[(i, task.index())] = true;
            }
        }
    }
    (labels, mask)
}

/// Row-selects a supervised batch, keeping only `task_columns` label columns.
pub fn subset_data(
    x: &Array2<f64>,
    labels: &Array2<f64>,
    mask: &Array2<bool>,
    rows: &[usize],
    task_columns: &[usize],
) -> Result<TrainData<f64>> {
    let xs = x.select(ndarray::Axis(0), rows);
    let all_labels = labels.select(ndarray::Axis(0), rows);
    let all_mask = mask.select(ndarray::Axis(0), rows);
    let ls = all_labels.select(ndarray::Axis(1), task_columns);
    let ms = all_mask.select(ndarray::Axis(1), task_columns);
    Ok(TrainData::new(xs, ls, ms)?)
}

/// Writes the two-column split CSV (id, subset).
pub fn save_split_csv(path: &Path, ds: &Dataset<f64>, split: &SplitAssignment) -> Result<()> {
    let mut out = String::from("id,subset\n");
    for (i, rec) in ds.records.iter().enumerate() {
        let subset = split
            .subset_of(i)
            .ok_or_else(|| anyhow!("record {i} missing from split"))?;
        out.push_str(&format!("{},{}\n", rec.id, subset.name()));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a split CSV back, resolving ids against the dataset order.
pub fn load_split_csv(path: &Path, ds: &Dataset<f64>) -> Result<SplitAssignment> {
    if !path.exists() {
        bail!(
            "MissingArtifact: split file {} (run `split` first)",
            path.display()
        );
    }
    let text = std::fs::read_to_string(path)?;
    let mut by_id: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, rec) in ds.records.iter().enumerate() {
        by_id.insert(rec.id.as_str(), i);
    }
    let mut train = Vec::new();
    let mut validation = Vec::new();
    let mut test = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line.trim() != "id,subset" {
                bail!(
                    "split file {} has unexpected header `{line}`",
                    path.display()
                );
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (id, subset) = line
            .split_once(',')
            .ok_or_else(|| anyhow!("split line {lineno}: `{line}`"))?;
        let index = *by_id
            .get(id.trim())
            .ok_or_else(|| anyhow!("split id `{id}` not in dataset"))?;
        match subset.trim() {
            "train" => train.push(index),
            "val" => validation.push(index),
            "test" => test.push(index),
            other => bail!("split line {lineno}: unknown subset `{other}`"),
        }
    }
    let split = SplitAssignment {
        train,
        validation,
        test,
        seed: 0,
        method: SplitMethod::MdFisWd,
    };
    if !split.is_partition_of(ds.len()) {
        bail!(
            "split file {} does not partition the dataset",
            path.display()
        );
    }
    Ok(split)
}

/// Written after every successful run: configuration hash, seeds in play,
/// input digests and produced artifacts. Re-running a subcommand with an
/// identical manifest reproduces byte-identical checkpoints.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_sha256: String,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("digesting {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

impl RunManifest {
    pub fn new(ctx: &Ctx, command: &str) -> Self {
        Self {
            command: command.to_string(),
            config_sha256: sha256_hex(ctx.config_json.as_bytes()),
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) -> &mut Self {
        self.seeds.insert(name.to_string(), value);
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.display().to_string());
        self
    }

    pub fn write(&self, ctx: &Ctx) -> Result<()> {
        let path = ctx.report_path("run_manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
