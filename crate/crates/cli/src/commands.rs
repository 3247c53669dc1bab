//! Subcommand implementations for the pipeline executable.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use pkpredict_core::data::{LoadOptions, Task, TASK_COUNT};
use pkpredict_core::eval::{
    default_thresholds, evaluate_predictions, recall, render_table, EvalReport,
};
use pkpredict_core::nn::{
    forward, init_network, train, LayerSpec, LossSpec, NetworkModel, TrainConfig, TrainData,
};
use pkpredict_core::split::{mdfiswd_split, random_split, DistanceWeights, SplitMethod, Subset};
use pkpredict_core::transfer::{
    build_consensus, load_model, save_model, transfer_feature_layers, ConsensusMember,
    ConsensusModel, SelectionScore,
};

use crate::pipeline::{
    design_matrix, label_matrices, load_split_csv, save_split_csv, subset_data, Ctx, RunManifest,
};

const TASK_NAMES: [&str; TASK_COUNT] = ["ba", "ppbr", "vdss", "hl"];

pub fn fingerprint(ctx: &Ctx) -> Result<()> {
    ctx.ensure_dirs()?;
    let ds = ctx.load_dataset_with(LoadOptions {
        require_labels: false,
    })?;
    let fps = ctx.fingerprints(&ds)?;
    let path = ctx.report_path("fingerprints.csv");
    let mut out = String::from("id,ecfp\n");
    for (rec, fp) in ds.records.iter().zip(&fps) {
        out.push_str(&format!("{},{}\n", rec.id, fp.to_bitstring()));
    }
    std::fs::write(&path, out)?;
    println!(
        "fingerprint: wrote {} ({} molecules, {} bits, radius {})",
        path.display(),
        ds.len(),
        ctx.config.fingerprint.nbits,
        ctx.config.fingerprint.radius
    );

    let mut manifest = RunManifest::new(ctx, "fingerprint");
    manifest.input(&ctx.config.paths.dataset)?;
    manifest.output(&path);
    manifest.write(ctx)
}

#[derive(Serialize)]
struct SeReport {
    method: SplitMethod,
    seed: u64,
    groups: usize,
    sizes: (usize, usize, usize),
    /// Subset error per task, in percentage points; `null` when a subset
    /// has no present label for the task.
    se: BTreeMap<String, Option<f64>>,
}

pub fn split(ctx: &Ctx, method_override: Option<SplitMethod>) -> Result<()> {
    ctx.ensure_dirs()?;
    let ds = ctx.normalized_dataset()?;
    let cfg = &ctx.config.split;
    let method = method_override.unwrap_or(cfg.method);
    let assignment = match method {
        SplitMethod::MdFisWd => {
            let w = DistanceWeights::new(cfg.w1, cfg.w2)?;
            mdfiswd_split(&ds, &w, cfg.seed)?
        }
        SplitMethod::Random => random_split(&ds, cfg.seed)?,
    };

    let split_path = ctx.report_path("split.csv");
    save_split_csv(&split_path, &ds, &assignment)?;

    let mut se = BTreeMap::new();
    for task in Task::ALL {
        let value = pkpredict_core::split::subset_error(&ds, &assignment, task, cfg.se_groups).ok();
        se.insert(task.name().to_string(), value);
    }
    let report = SeReport {
        method,
        seed: cfg.seed,
        groups: cfg.se_groups,
        sizes: (
            assignment.train.len(),
            assignment.validation.len(),
            assignment.test.len(),
        ),
        se,
    };
    let se_path = ctx.report_path("se_report.json");
    std::fs::write(&se_path, serde_json::to_string_pretty(&report)?)?;

    println!(
        "split: {:?} sizes {:?} -> {}, SE report {}",
        method,
        report.sizes,
        split_path.display(),
        se_path.display()
    );
    for (task, value) in &report.se {
        match value {
            Some(v) => println!("  SE[{task}] = {v:.2}"),
            None => println!("  SE[{task}] = n/a"),
        }
    }

    let mut manifest = RunManifest::new(ctx, "split");
    manifest.seed("split", cfg.seed);
    manifest.input(&ctx.config.paths.dataset)?;
    manifest.output(&split_path).output(&se_path);
    manifest.write(ctx)
}

/// Bioactivity rows aggregated into a dense (molecule, target) grid.
struct BioactivityData {
    x: Array2<f64>,
    labels: Array2<f64>,
    mask: Array2<bool>,
    targets: usize,
    positives: usize,
    cells: usize,
}

fn load_bioactivity(ctx: &Ctx) -> Result<BioactivityData> {
    let path = &ctx.config.paths.bioactivity;
    if !path.exists() {
        bail!("MissingArtifact: bioactivity file {}", path.display());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("bioactivity file missing column `{name}`"))
    };
    let smiles_col = col("smiles")?;
    let target_col = col("target_id")?;
    let active_col = col("active")?;

    let mut molecules: Vec<String> = Vec::new();
    let mut mol_index: HashMap<String, usize> = HashMap::new();
    let mut target_index: HashMap<String, usize> = HashMap::new();
    let mut triplets: Vec<(u32, u32, bool)> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let smiles = record.get(smiles_col).unwrap_or("").trim().to_string();
        let target = record.get(target_col).unwrap_or("").trim().to_string();
        let active = match record.get(active_col).unwrap_or("").trim() {
            "0" => false,
            "1" => true,
            other => bail!("bioactivity row {row}: active must be 0/1, got `{other}`"),
        };
        let next_mol = molecules.len();
        let m = *mol_index.entry(smiles.clone()).or_insert_with(|| {
            molecules.push(smiles);
            next_mol
        });
        let next_target = target_index.len();
        let t = *target_index.entry(target).or_insert(next_target);
        triplets.push((m as u32, t as u32, active));
    }
    if molecules.is_empty() {
        bail!("bioactivity file {} has no rows", path.display());
    }

    let fp_cfg = &ctx.config.fingerprint;
    let fps = molecules
        .iter()
        .map(|s| {
            pkpredict_core::fingerprint::ecfp_from_smiles(s, fp_cfg.radius, fp_cfg.nbits)
                .with_context(|| format!("fingerprinting `{s}`"))
        })
        .collect::<Result<Vec<_>>>()?;
    let x = design_matrix(&fps);

    let targets = target_index.len();
    let mut labels = Array2::zeros((molecules.len(), targets));
    let mut mask = Array2::from_elem((molecules.len(), targets), false);
    let mut positives = 0usize;
    for &(m, t, active) in &triplets {
        let cell = (m as usize, t as usize);
        labels[cell] = if active { 1.0 } else { 0.0 };
        mask[cell] = true;
        if active {
            positives += 1;
        }
    }
    Ok(BioactivityData {
        x,
        labels,
        mask,
        targets,
        positives,
        cells: triplets.len(),
    })
}

fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    order
}

/// Recall over present cells of a (molecule, target) grid at cutoff 0.5.
fn grid_recall(model: &NetworkModel<f64>, data: &TrainData<f64>) -> Result<Option<f64>> {
    let preds = forward(model, &data.x)?;
    let mut p = Vec::new();
    let mut l = Vec::new();
    for ((pv, lv), &m) in preds.iter().zip(data.labels.iter()).zip(data.mask.iter()) {
        if m {
            p.push(*pv);
            l.push(*lv);
        }
    }
    Ok(recall(&p, &l, 0.5).ok())
}

#[derive(Serialize)]
struct PretrainReport {
    molecules: usize,
    targets: usize,
    labeled_cells: usize,
    positive_fraction: f64,
    recall_train: Option<f64>,
    recall_holdout: Option<f64>,
    final_train_loss: Option<f64>,
}

pub fn pretrain(ctx: &Ctx) -> Result<()> {
    ctx.ensure_dirs()?;
    let bio = load_bioactivity(ctx)?;
    let cfg = &ctx.config.pretrain;
    let n = bio.x.nrows();

    // Molecule-level holdout for the recall report.
    let order = shuffled_indices(n, cfg.seed);
    let holdout = ((n as f64) * cfg.holdout_fraction).floor() as usize;
    let (holdout_rows, train_rows) = order.split_at(holdout);
    let select = |rows: &[usize]| -> Result<TrainData<f64>> {
        Ok(TrainData::new(
            bio.x.select(ndarray::Axis(0), rows),
            bio.labels.select(ndarray::Axis(0), rows),
            bio.mask.select(ndarray::Axis(0), rows),
        )?)
    };
    let train_data = select(train_rows)?;
    let holdout_data = if holdout > 0 {
        Some(select(holdout_rows)?)
    } else {
        None
    };

    let sizes = ctx.config.pretrain_sizes(bio.targets);
    let spec = LayerSpec::dense(sizes)?;
    let mut model = init_network::<f64>(spec, cfg.seed)?;
    let train_cfg = TrainConfig {
        layers: model.spec.sizes.clone(),
        activations: None,
        lr: cfg.lr,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        lambda: cfg.lambda,
        eps: cfg.eps,
        epochs: cfg.epochs,
        batch_size: Some(cfg.batch_size),
        seed: cfg.seed,
        task_weights: None,
        pos_neg_weights: Some([cfg.pos_weight, cfg.neg_weight]),
        frozen_layers: 0,
    };
    let loss: LossSpec<f64> = train_cfg.loss()?;
    let history = train(&mut model, &train_data, None, &loss, &train_cfg)?;

    let checkpoint = ctx.checkpoint_path("pretrain");
    save_model(&model, "binary", &checkpoint)?;

    let report = PretrainReport {
        molecules: n,
        targets: bio.targets,
        labeled_cells: bio.cells,
        positive_fraction: bio.positives as f64 / bio.cells as f64,
        recall_train: grid_recall(&model, &train_data)?,
        recall_holdout: holdout_data
            .as_ref()
            .map(|d| grid_recall(&model, d))
            .transpose()?
            .flatten(),
        final_train_loss: history.train_loss.last().copied(),
    };
    let report_path = ctx.report_path("pretrain_report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    println!(
        "pretrain: {} molecules x {} targets, recall train {:?} holdout {:?} -> {}",
        n,
        bio.targets,
        report.recall_train,
        report.recall_holdout,
        checkpoint.display()
    );

    let mut manifest = RunManifest::new(ctx, "pretrain");
    manifest.seed("pretrain", cfg.seed);
    manifest.input(&ctx.config.paths.bioactivity)?;
    manifest.output(&checkpoint).output(&report_path);
    manifest.write(ctx)
}

/// Shared assembly for the supervised pharmacokinetic stages.
struct PkStage {
    x: Array2<f64>,
    labels: Array2<f64>,
    mask: Array2<bool>,
    split: pkpredict_core::split::SplitAssignment,
}

fn pk_stage(ctx: &Ctx) -> Result<PkStage> {
    let ds = ctx.normalized_dataset()?;
    let fps = ctx.fingerprints(&ds)?;
    let x = design_matrix(&fps);
    let (labels, mask) = label_matrices(&ds);
    let split = load_split_csv(&ctx.report_path("split.csv"), &ds)?;
    Ok(PkStage {
        x,
        labels,
        mask,
        split,
    })
}

pub fn train_multitask(ctx: &Ctx) -> Result<()> {
    ctx.ensure_dirs()?;
    let stage = pk_stage(ctx)?;
    let cfg = &ctx.config.multitask;
    let all_tasks: Vec<usize> = (0..TASK_COUNT).collect();
    let train_data = subset_data(
        &stage.x,
        &stage.labels,
        &stage.mask,
        &stage.split.train,
        &all_tasks,
    )?;
    let val_data = subset_data(
        &stage.x,
        &stage.labels,
        &stage.mask,
        &stage.split.validation,
        &all_tasks,
    )?;

    let spec = LayerSpec::dense(ctx.config.multitask_sizes())?;
    let mut model = init_network::<f64>(spec, cfg.seed)?;
    let train_cfg = TrainConfig {
        layers: model.spec.sizes.clone(),
        activations: None,
        lr: cfg.lr,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        lambda: cfg.lambda,
        eps: cfg.eps,
        epochs: cfg.epochs,
        batch_size: Some(cfg.batch_size),
        seed: cfg.seed,
        task_weights: Some(cfg.task_weights.to_vec()),
        pos_neg_weights: None,
        frozen_layers: 0,
    };
    let loss: LossSpec<f64> = train_cfg.loss()?;
    let history = train(&mut model, &train_data, Some(&val_data), &loss, &train_cfg)?;

    let checkpoint = ctx.checkpoint_path("multitask");
    save_model(&model, "multitask", &checkpoint)?;
    let history_path = ctx.report_path("multitask_history.json");
    std::fs::write(&history_path, serde_json::to_string_pretty(&history)?)?;
    println!(
        "train: multitask model ({} epochs, final loss {:?}) -> {}",
        cfg.epochs,
        history.train_loss.last(),
        checkpoint.display()
    );

    let mut manifest = RunManifest::new(ctx, "train");
    manifest.seed("multitask", cfg.seed);
    manifest.input(&ctx.config.paths.dataset)?;
    manifest.output(&checkpoint).output(&history_path);
    manifest.write(ctx)
}

pub fn transfer(ctx: &Ctx) -> Result<()> {
    ctx.ensure_dirs()?;
    let pretrain_path = ctx.checkpoint_path("pretrain");
    if !pretrain_path.exists() {
        bail!(
            "MissingArtifact: pretrained checkpoint {} (run `pretrain` first)",
            pretrain_path.display()
        );
    }
    let (pretrained, _) = load_model::<f64>(&pretrain_path)?;
    let stage = pk_stage(ctx)?;
    let cfg = &ctx.config.transfer;
    let task_weights = ctx.config.multitask.task_weights;

    struct Job {
        name: String,
        model: NetworkModel<f64>,
        train_data: TrainData<f64>,
        val_data: TrainData<f64>,
        train_cfg: TrainConfig,
        loss: LossSpec<f64>,
    }

    let mut jobs = Vec::new();
    for (i, net) in cfg.networks.iter().enumerate() {
        let columns: Vec<usize> = net.tasks.iter().map(|t| t.index()).collect();
        let weights: Vec<f64> = columns.iter().map(|&c| task_weights[c]).collect();
        let model = transfer_feature_layers(
            &pretrained,
            net.task_layer,
            net.tasks.len(),
            cfg.seed + i as u64,
        )?;
        let train_cfg = TrainConfig {
            layers: model.spec.sizes.clone(),
            activations: None,
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            lambda: cfg.lambda,
            eps: cfg.eps,
            epochs: net.epochs,
            batch_size: Some(cfg.batch_size),
            seed: cfg.seed + i as u64,
            task_weights: Some(weights),
            pos_neg_weights: None,
            frozen_layers: 0,
        };
        let loss: LossSpec<f64> = train_cfg.loss()?;
        jobs.push(Job {
            name: net.name.clone(),
            model,
            train_data: subset_data(
                &stage.x,
                &stage.labels,
                &stage.mask,
                &stage.split.train,
                &columns,
            )?,
            val_data: subset_data(
                &stage.x,
                &stage.labels,
                &stage.mask,
                &stage.split.validation,
                &columns,
            )?,
            train_cfg,
            loss,
        });
    }

    // Each network trains independently and deterministically, so any
    // thread interleaving yields byte-identical checkpoints.
    let results: Vec<(String, NetworkModel<f64>, _)> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chunk in jobs.chunks_mut(ctx.threads.max(1)) {
            let mut chunk_handles = Vec::new();
            for job in chunk.iter_mut() {
                chunk_handles.push(scope.spawn(move || {
                    let history = train(
                        &mut job.model,
                        &job.train_data,
                        Some(&job.val_data),
                        &job.loss,
                        &job.train_cfg,
                    )?;
                    Ok::<_, anyhow::Error>((job.name.clone(), job.model.clone(), history))
                }));
            }
            for handle in chunk_handles {
                handles.push(handle.join().expect("training thread panicked"));
            }
        }
        handles
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut manifest = RunManifest::new(ctx, "transfer");
    manifest.seed("transfer", cfg.seed);
    manifest.input(&pretrain_path)?;
    for (name, model, history) in &results {
        let path = ctx.checkpoint_path(&format!("transfer_{name}"));
        save_model(model, "multitask", &path)?;
        let history_path = ctx.report_path(&format!("transfer_{name}_history.json"));
        std::fs::write(&history_path, serde_json::to_string_pretty(history)?)?;
        println!(
            "transfer: {name} (final loss {:?}) -> {}",
            history.train_loss.last(),
            path.display()
        );
        manifest.output(&path).output(&history_path);
    }
    manifest.write(ctx)
}

#[derive(Serialize, Deserialize)]
struct ConsensusManifestEntry {
    file: String,
    tasks: Vec<Task>,
}

#[derive(Serialize, Deserialize)]
struct ConsensusManifest {
    members: Vec<ConsensusManifestEntry>,
    /// Task name -> member index.
    selection: BTreeMap<String, usize>,
    scores: Vec<SelectionScore<f64>>,
}

pub fn consensus(ctx: &Ctx) -> Result<()> {
    ctx.ensure_dirs()?;
    let stage = pk_stage(ctx)?;
    let mut members = Vec::new();
    let mut entries = Vec::new();
    for net in &ctx.config.transfer.networks {
        let file = format!("transfer_{}.pkmodel.json", net.name);
        let path = ctx.checkpoint_dir().join(&file);
        if !path.exists() {
            bail!(
                "MissingArtifact: checkpoint {} (run `transfer` first)",
                path.display()
            );
        }
        let (model, _) = load_model::<f64>(&path)?;
        members.push(ConsensusMember::new(model, net.tasks.clone())?);
        entries.push(ConsensusManifestEntry {
            file,
            tasks: net.tasks.clone(),
        });
    }

    let val_rows = &stage.split.validation;
    let val_x = stage.x.select(ndarray::Axis(0), val_rows);
    let val_labels = stage.labels.select(ndarray::Axis(0), val_rows);
    let val_mask = stage.mask.select(ndarray::Axis(0), val_rows);
    let (model, scores) = build_consensus(members, &val_x, &val_labels, &val_mask)?;

    let mut selection = BTreeMap::new();
    for task in Task::ALL {
        selection.insert(task.name().to_string(), model.selection[task.index()]);
    }
    let manifest_path = ctx.report_path("consensus.json");
    let payload = ConsensusManifest {
        members: entries,
        selection: selection.clone(),
        scores,
    };
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&payload)?)?;
    println!(
        "consensus: selection {selection:?} -> {}",
        manifest_path.display()
    );

    let mut run = RunManifest::new(ctx, "consensus");
    run.input(&ctx.config.paths.dataset)?;
    run.output(&manifest_path);
    run.write(ctx)
}

/// Prediction source: a single four-task checkpoint or the consensus.
enum Predictor {
    Single(NetworkModel<f64>),
    Consensus(ConsensusModel<f64>),
}

impl Predictor {
    fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            Predictor::Single(model) => Ok(forward(model, x)?),
            Predictor::Consensus(model) => Ok(model.predict(x)?),
        }
    }
}

fn load_predictor(ctx: &Ctx, model_flag: Option<&Path>) -> Result<Predictor> {
    if let Some(path) = model_flag {
        if !path.exists() {
            bail!("MissingArtifact: checkpoint {}", path.display());
        }
        let (model, _) = load_model::<f64>(path)?;
        if model.spec.output_size() != TASK_COUNT {
            bail!(
                "checkpoint {} predicts {} outputs; evaluation over all four tasks needs 4 \
                 (use the consensus for task-specific transfer models)",
                path.display(),
                model.spec.output_size()
            );
        }
        return Ok(Predictor::Single(model));
    }
    let manifest_path = ctx.report_path("consensus.json");
    if !manifest_path.exists() {
        bail!(
            "MissingArtifact: consensus manifest {} (run `consensus`, or pass --model)",
            manifest_path.display()
        );
    }
    let manifest: ConsensusManifest =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)
            .with_context(|| format!("parsing {}", manifest_path.display()))?;
    let mut members = Vec::new();
    for entry in &manifest.members {
        let path = ctx.checkpoint_dir().join(&entry.file);
        if !path.exists() {
            bail!("MissingArtifact: checkpoint {}", path.display());
        }
        let (model, _) = load_model::<f64>(&path)?;
        members.push(ConsensusMember::new(model, entry.tasks.clone())?);
    }
    let mut selection = [usize::MAX; TASK_COUNT];
    for task in Task::ALL {
        let member = *manifest
            .selection
            .get(task.name())
            .ok_or_else(|| anyhow!("consensus manifest misses task {}", task.name()))?;
        if member >= members.len() || !members[member].tasks.contains(&task) {
            bail!(
                "consensus manifest routes {} to an invalid member",
                task.name()
            );
        }
        selection[task.index()] = member;
    }
    Ok(Predictor::Consensus(ConsensusModel { members, selection }))
}

pub fn evaluate(ctx: &Ctx, model_flag: Option<&Path>) -> Result<()> {
    ctx.ensure_dirs()?;
    let stage = pk_stage(ctx)?;
    let predictor = load_predictor(ctx, model_flag)?;
    let normalization = ctx.normalization()?;
    let thresholds = default_thresholds::<f64>();

    let mut reports: BTreeMap<&str, EvalReport<f64>> = BTreeMap::new();
    for subset in Subset::ALL {
        let rows = stage.split.subset_indices(subset);
        let x = stage.x.select(ndarray::Axis(0), rows);
        let labels = stage.labels.select(ndarray::Axis(0), rows);
        let mask = stage.mask.select(ndarray::Axis(0), rows);
        let preds = predictor.predict(&x)?;
        let report = evaluate_predictions(
            &preds,
            &labels,
            &mask,
            &TASK_NAMES,
            &thresholds,
            &normalization,
        )?;
        reports.insert(subset.name(), report);
    }

    let json_path = ctx.report_path("report.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&reports)?)?;
    let table = render_table(&[
        ("train", &reports["train"]),
        ("val", &reports["val"]),
        ("test", &reports["test"]),
    ]);
    let table_path = ctx.report_path("report.txt");
    std::fs::write(&table_path, &table)?;
    println!("evaluate: accuracies on the normalized scale (thresholds 0.1/0.2/0.3)");
    print!("{table}");
    println!(
        "evaluate: wrote {} and {}",
        json_path.display(),
        table_path.display()
    );

    let mut manifest = RunManifest::new(ctx, "evaluate");
    manifest.input(&ctx.config.paths.dataset)?;
    manifest.output(&json_path).output(&table_path);
    manifest.write(ctx)
}

pub fn predict(ctx: &Ctx, model_flag: Option<&Path>) -> Result<()> {
    ctx.ensure_dirs()?;
    let ds = ctx.normalized_dataset_with(LoadOptions {
        require_labels: false,
    })?;
    let fps = ctx.fingerprints(&ds)?;
    let x = design_matrix(&fps);
    let predictor = load_predictor(ctx, model_flag)?;
    let preds = predictor.predict(&x)?;
    let normalization = ctx.normalization()?;

    let path = ctx.report_path("predictions.csv");
    let mut out = String::from("id,ba,ppbr,vdss,hl\n");
    for (i, rec) in ds.records.iter().enumerate() {
        out.push_str(&rec.id);
        for task in Task::ALL {
            let raw = normalization.denormalize(task, preds[(i, task.index())]);
            out.push_str(&format!(",{raw}"));
        }
        out.push('\n');
    }
    std::fs::write(&path, out)?;
    println!("predict: wrote {} ({} molecules)", path.display(), ds.len());

    let mut manifest = RunManifest::new(ctx, "predict");
    manifest.input(&ctx.config.paths.dataset)?;
    manifest.output(&path);
    manifest.write(ctx)
}

pub fn parse_method(text: &str) -> Result<SplitMethod> {
    match text {
        "mdfiswd" => Ok(SplitMethod::MdFisWd),
        "random" => Ok(SplitMethod::Random),
        other => bail!("ConfigError: unknown split method `{other}` (mdfiswd|random)"),
    }
}
