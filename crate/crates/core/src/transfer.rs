//! Model serialization, feature-layer transfer into new task networks, and
//! the per-parameter consensus model.

use std::collections::HashMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Task, TASK_COUNT};
use crate::eval::{accuracy_at, mae};
use crate::nn::{forward, init_network, AdamState, LayerSpec, NetworkModel, NnError};
use crate::scalar::{real, Real};

/// On-disk checkpoint format version.
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("checkpoint version {found} unsupported (expected {CHECKPOINT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("corrupt checkpoint file: {0}")]
    CorruptFile(String),
    #[error("pretrained model incompatible with transfer: {0}")]
    IncompatiblePretrained(String),
    #[error("no member predicts task {0}")]
    NoMemberForTask(Task),
    #[error("validation slice has no present label for task {0}")]
    EmptyValidationTask(Task),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Serialized model: JSON with floats written as shortest round-trip
/// decimals, so save -> load -> forward is bit-identical.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Checkpoint<T: Real> {
    pub format_version: u32,
    pub spec: LayerSpec,
    pub weights: Vec<Vec<Vec<T>>>,
    pub biases: Vec<Vec<T>>,
    pub adam: AdamState<T>,
    pub epoch_count: u64,
    pub rng_seed: u64,
    /// Free-form tag naming the training cost (for example `multitask`).
    pub loss: String,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

/// Writes a checkpoint; the conventional extension is `.pkmodel.json`.
pub fn save_model<T: Real>(
    model: &NetworkModel<T>,
    loss: &str,
    path: impl AsRef<Path>,
) -> Result<(), TransferError> {
    let checkpoint = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        spec: model.spec.clone(),
        weights: model
            .weights
            .iter()
            .map(|w| w.rows().into_iter().map(|r| r.to_vec()).collect())
            .collect(),
        biases: model.biases.iter().map(|b| b.to_vec()).collect(),
        adam: model.adam.clone(),
        epoch_count: model.epoch_count,
        rng_seed: model.rng_seed,
        loss: loss.to_string(),
    };
    let json = serde_json::to_string(&checkpoint)
        .map_err(|e| TransferError::CorruptFile(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Reads a checkpoint, checking the format version before decoding.
pub fn load_model<T: Real>(
    path: impl AsRef<Path>,
) -> Result<(NetworkModel<T>, String), TransferError> {
    let text = std::fs::read_to_string(path)?;
    let probe: VersionProbe =
        serde_json::from_str(&text).map_err(|e| TransferError::CorruptFile(e.to_string()))?;
    if probe.format_version != CHECKPOINT_VERSION {
        return Err(TransferError::VersionMismatch {
            found: probe.format_version,
        });
    }
    let checkpoint: Checkpoint<T> =
        serde_json::from_str(&text).map_err(|e| TransferError::CorruptFile(e.to_string()))?;
    let spec = checkpoint.spec;
    let mut weights = Vec::with_capacity(spec.layer_count());
    for (l, rows) in checkpoint.weights.iter().enumerate() {
        let (out, input) = (spec.sizes[l + 1], spec.sizes[l]);
        if rows.len() != out || rows.iter().any(|r| r.len() != input) {
            return Err(TransferError::CorruptFile(format!(
                "layer {l} weight shape does not match spec"
            )));
        }
        let flat: Vec<T> = rows.iter().flatten().copied().collect();
        let w = Array2::from_shape_vec((out, input), flat)
            .map_err(|e| TransferError::CorruptFile(e.to_string()))?;
        weights.push(w);
    }
    if checkpoint.biases.len() != spec.layer_count()
        || checkpoint
            .biases
            .iter()
            .enumerate()
            .any(|(l, b)| b.len() != spec.sizes[l + 1])
    {
        return Err(TransferError::CorruptFile("bias shape mismatch".into()));
    }
    let biases: Vec<ndarray::Array1<T>> = checkpoint
        .biases
        .into_iter()
        .map(ndarray::Array1::from_vec)
        .collect();
    let adam = checkpoint.adam;
    let accumulators_match = adam.m_weights.len() == weights.len()
        && adam.v_weights.len() == weights.len()
        && adam.m_biases.len() == biases.len()
        && adam.v_biases.len() == biases.len()
        && weights
            .iter()
            .zip(adam.m_weights.iter().zip(&adam.v_weights))
            .all(|(w, (m, v))| w.dim() == m.dim() && w.dim() == v.dim())
        && biases
            .iter()
            .zip(adam.m_biases.iter().zip(&adam.v_biases))
            .all(|(b, (m, v))| b.len() == m.len() && b.len() == v.len());
    if !accumulators_match {
        return Err(TransferError::CorruptFile(
            "optimizer state shape mismatch".into(),
        ));
    }
    Ok((
        NetworkModel {
            spec,
            weights,
            biases,
            adam,
            epoch_count: checkpoint.epoch_count,
            rng_seed: checkpoint.rng_seed,
        },
        checkpoint.loss,
    ))
}

/// Builds a task network from a pretrained model: every layer except the
/// pretrained task and output heads is copied bit-exactly as the feature
/// stack, then a fresh task layer (`task_layer_size` tanh units) and a fresh
/// `out_size`-unit sigmoid output are appended. Adam state is reset and all
/// layers stay trainable.
pub fn transfer_feature_layers<T: Real>(
    pretrained: &NetworkModel<T>,
    task_layer_size: usize,
    out_size: usize,
    seed: u64,
) -> Result<NetworkModel<T>, TransferError> {
    let layer_count = pretrained.spec.layer_count();
    if layer_count < 3 {
        return Err(TransferError::IncompatiblePretrained(format!(
            "need feature, task and output layers; model has {layer_count}"
        )));
    }
    if task_layer_size == 0 || out_size == 0 {
        return Err(TransferError::IncompatiblePretrained(
            "task and output sizes must be at least 1".into(),
        ));
    }
    let feature_layers = layer_count - 2;
    let mut sizes: Vec<usize> = pretrained.spec.sizes[..=feature_layers].to_vec();
    sizes.push(task_layer_size);
    sizes.push(out_size);
    let spec = LayerSpec::dense(sizes)?;

    // Fresh parameters for every layer, then overwrite the feature stack
    // with the pretrained weights.
    let mut model = init_network(spec, seed)?;
    for l in 0..feature_layers {
        model.weights[l] = pretrained.weights[l].clone();
        model.biases[l] = pretrained.biases[l].clone();
    }
    model.adam.reset();
    Ok(model)
}

/// One consensus member: a trained network and the tasks its output columns
/// cover, in column order.
#[derive(Clone, Debug)]
pub struct ConsensusMember<T: Real> {
    pub model: NetworkModel<T>,
    pub tasks: Vec<Task>,
}

impl<T: Real> ConsensusMember<T> {
    pub fn new(model: NetworkModel<T>, tasks: Vec<Task>) -> Result<Self, TransferError> {
        if model.spec.output_size() != tasks.len() {
            return Err(TransferError::IncompatiblePretrained(format!(
                "member predicts {} columns but covers {} tasks",
                model.spec.output_size(),
                tasks.len()
            )));
        }
        Ok(Self { model, tasks })
    }

    fn column_of(&self, task: Task) -> Option<usize> {
        self.tasks.iter().position(|&t| t == task)
    }
}

/// Routes each task to the member that won it on validation data.
#[derive(Clone, Debug)]
pub struct ConsensusModel<T: Real> {
    pub members: Vec<ConsensusMember<T>>,
    /// Task index -> member index.
    pub selection: [usize; TASK_COUNT],
}

/// Per-task and per-member validation scores recorded during selection.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SelectionScore<T: Real> {
    pub task: Task,
    pub member: usize,
    pub accuracy: T,
    pub mae: T,
}

/// Picks, for each task, the member with the highest validation accuracy at
/// |error| <= 0.1 among members covering that task; ties resolve to the
/// lower validation MAE, then the lower member index.
pub fn build_consensus<T: Real>(
    members: Vec<ConsensusMember<T>>,
    val_x: &Array2<T>,
    val_labels: &Array2<T>,
    val_mask: &Array2<bool>,
) -> Result<(ConsensusModel<T>, Vec<SelectionScore<T>>), TransferError> {
    let threshold = real::<T>(0.1);
    let outputs: Vec<Array2<T>> = members
        .iter()
        .map(|m| forward(&m.model, val_x))
        .collect::<Result<_, _>>()?;

    let mut selection = [usize::MAX; TASK_COUNT];
    let mut scores = Vec::new();
    for task in Task::ALL {
        let col = task.index();
        let rows: Vec<usize> = (0..val_labels.nrows())
            .filter(|&i| val_mask[(i, col)])
            .collect();
        let mut best: Option<(usize, T, T)> = None;
        let mut any_member = false;
        for (m, member) in members.iter().enumerate() {
            let Some(member_col) = member.column_of(task) else {
                continue;
            };
            any_member = true;
            if rows.is_empty() {
                return Err(TransferError::EmptyValidationTask(task));
            }
            let pred: Vec<T> = rows.iter().map(|&i| outputs[m][(i, member_col)]).collect();
            let label: Vec<T> = rows.iter().map(|&i| val_labels[(i, col)]).collect();
            let acc = accuracy_at(&pred, &label, threshold)
                .map_err(|e| TransferError::CorruptFile(e.to_string()))?;
            let err = mae(&pred, &label).map_err(|e| TransferError::CorruptFile(e.to_string()))?;
            scores.push(SelectionScore {
                task,
                member: m,
                accuracy: acc,
                mae: err,
            });
            let wins = match best {
                None => true,
                Some((_, best_acc, best_mae)) => {
                    acc > best_acc || (acc == best_acc && err < best_mae)
                }
            };
            if wins {
                best = Some((m, acc, err));
            }
        }
        if !any_member {
            return Err(TransferError::NoMemberForTask(task));
        }
        selection[col] = best.expect("member scored").0;
    }

    Ok((ConsensusModel { members, selection }, scores))
}

impl<T: Real> ConsensusModel<T> {
    /// Predicts all four tasks for a batch, routing each task to its
    /// selected member. Output columns follow [`Task::ALL`] order.
    pub fn predict(&self, x: &Array2<T>) -> Result<Array2<T>, TransferError> {
        let mut needed: HashMap<usize, Array2<T>> = HashMap::new();
        for &m in &self.selection {
            if let std::collections::hash_map::Entry::Vacant(e) = needed.entry(m) {
                e.insert(forward(&self.members[m].model, x)?);
            }
        }
        let mut out = Array2::zeros((x.nrows(), TASK_COUNT));
        for task in Task::ALL {
            let m = self.selection[task.index()];
            let member_col = self.members[m]
                .column_of(task)
                .expect("selection covers member tasks");
            let preds = &needed[&m];
            for i in 0..x.nrows() {
                out[(i, task.index())] = preds[(i, member_col)];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_network_zeroed, LayerSpec};
    use ndarray::Array1;
    use tempfile::tempdir;

    fn small_model(seed: u64) -> NetworkModel<f64> {
        let spec = LayerSpec::dense(vec![6, 5, 4, 3]).unwrap();
        init_network(spec, seed).unwrap()
    }

    #[test]
    fn checkpoint_round_trip_preserves_forward() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.pkmodel.json");
        let model = small_model(9);
        save_model(&model, "multitask", &path).unwrap();
        let (loaded, loss) = load_model::<f64>(&path).unwrap();
        assert_eq!(loss, "multitask");
        assert_eq!(loaded.spec, model.spec);
        assert_eq!(loaded.weights, model.weights);
        assert_eq!(loaded.biases, model.biases);
        let x = Array2::from_shape_fn((10, 6), |(i, j)| ((i + 2 * j) as f64).sin());
        assert_eq!(forward(&model, &x).unwrap(), forward(&loaded, &x).unwrap());
    }

    #[test]
    fn checkpoint_is_a_byte_level_fixed_point() {
        let dir = tempdir().unwrap();
        let p1 = dir.path().join("a.pkmodel.json");
        let p2 = dir.path().join("b.pkmodel.json");
        let model = small_model(3);
        save_model(&model, "multitask", &p1).unwrap();
        let (loaded, _) = load_model::<f64>(&p1).unwrap();
        save_model(&loaded, "multitask", &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn corrupt_and_mismatched_files_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.pkmodel.json");
        let model = small_model(1);
        save_model(&model, "multitask", &path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(
            load_model::<f64>(&path).unwrap_err(),
            TransferError::CorruptFile(_)
        ));

        let bumped = text.replace("\"format_version\":1", "\"format_version\":99");
        std::fs::write(&path, bumped).unwrap();
        assert!(matches!(
            load_model::<f64>(&path).unwrap_err(),
            TransferError::VersionMismatch { found: 99 }
        ));
    }

    #[test]
    fn transfer_copies_feature_layers_exactly() {
        // Pretrained: 2 feature layers + task + output.
        let spec = LayerSpec::dense(vec![6, 5, 4, 8, 3]).unwrap();
        let pretrained: NetworkModel<f64> = init_network(spec, 42).unwrap();
        let transferred = transfer_feature_layers(&pretrained, 7, 2, 99).unwrap();
        assert_eq!(transferred.spec.sizes, vec![6, 5, 4, 7, 2]);
        for l in 0..2 {
            assert_eq!(transferred.weights[l], pretrained.weights[l]);
            assert_eq!(transferred.biases[l], pretrained.biases[l]);
        }
        assert_eq!(transferred.adam.t, 0);
        assert_eq!(transferred.epoch_count, 0);

        // Different seeds differ only in the fresh layers.
        let other = transfer_feature_layers(&pretrained, 7, 2, 100).unwrap();
        for l in 0..2 {
            assert_eq!(other.weights[l], transferred.weights[l]);
        }
        assert_ne!(other.weights[2], transferred.weights[2]);
        assert_ne!(other.weights[3], transferred.weights[3]);

        // Re-running with the same seed is idempotent.
        let again = transfer_feature_layers(&pretrained, 7, 2, 99).unwrap();
        assert_eq!(again.weights, transferred.weights);
    }

    #[test]
    fn transfer_rejects_shallow_models() {
        let spec = LayerSpec::dense(vec![6, 3]).unwrap();
        let pretrained: NetworkModel<f64> = init_network(spec, 0).unwrap();
        assert!(matches!(
            transfer_feature_layers(&pretrained, 4, 2, 0).unwrap_err(),
            TransferError::IncompatiblePretrained(_)
        ));
    }

    /// A constant predictor: zero weights with output biases chosen so the
    /// sigmoid emits the requested values.
    fn constant_member(values: &[f64], tasks: Vec<Task>) -> ConsensusMember<f64> {
        let spec = LayerSpec::dense(vec![2, 3, values.len()]).unwrap();
        let mut model = init_network_zeroed(spec).unwrap();
        let logits: Vec<f64> = values.iter().map(|v| (v / (1.0 - v)).ln()).collect();
        model.biases[1] = Array1::from_vec(logits);
        ConsensusMember::new(model, tasks).unwrap()
    }

    fn full_mask(n: usize) -> Array2<bool> {
        Array2::from_elem((n, TASK_COUNT), true)
    }

    #[test]
    fn single_member_consensus_is_that_member() {
        let member = constant_member(&[0.5, 0.5, 0.5, 0.5], Task::ALL.to_vec());
        let x = Array2::zeros((3, 2));
        let labels = Array2::from_elem((3, TASK_COUNT), 0.5);
        let (consensus, _) = build_consensus(vec![member], &x, &labels, &full_mask(3)).unwrap();
        assert_eq!(consensus.selection, [0; TASK_COUNT]);
        let preds = consensus.predict(&x).unwrap();
        assert!(preds.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn selection_routes_each_task_to_its_winner() {
        // Labels: BA 0.30, PPBR 0.50, VDss 0.50, HL 0.70.
        // Member A nails BA and ties B elsewhere; member B nails HL.
        let labels = ndarray::concatenate![
            ndarray::Axis(0),
            Array2::from_shape_vec((1, 4), vec![0.30, 0.50, 0.50, 0.70]).unwrap(),
            Array2::from_shape_vec((1, 4), vec![0.30, 0.50, 0.50, 0.70]).unwrap()
        ];
        let a = constant_member(&[0.30, 0.50, 0.50, 0.30], Task::ALL.to_vec());
        let b = constant_member(&[0.70, 0.50, 0.50, 0.70], Task::ALL.to_vec());
        let x = Array2::zeros((2, 2));
        let (consensus, scores) = build_consensus(vec![a, b], &x, &labels, &full_mask(2)).unwrap();
        assert_eq!(consensus.selection[Task::Ba.index()], 0);
        assert_eq!(consensus.selection[Task::Hl.index()], 1);
        // Tied accuracy and MAE on PPBR/VDss resolve to the lower index.
        assert_eq!(consensus.selection[Task::Ppbr.index()], 0);
        assert_eq!(consensus.selection[Task::Vdss.index()], 0);
        assert_eq!(scores.len(), 8);

        let preds = consensus.predict(&x).unwrap();
        assert!((preds[(0, Task::Ba.index())] - 0.30).abs() < 1e-12);
        assert!((preds[(0, Task::Hl.index())] - 0.70).abs() < 1e-12);
    }

    #[test]
    fn consensus_errors() {
        let member = constant_member(&[0.5], vec![Task::Ba]);
        let x = Array2::zeros((2, 2));
        let labels = Array2::from_elem((2, TASK_COUNT), 0.5);
        assert!(matches!(
            build_consensus(vec![member], &x, &labels, &full_mask(2)).unwrap_err(),
            TransferError::NoMemberForTask(_)
        ));

        let member = constant_member(&[0.5, 0.5, 0.5, 0.5], Task::ALL.to_vec());
        let mut mask = full_mask(2);
        mask.column_mut(Task::Vdss.index()).fill(false);
        assert!(matches!(
            build_consensus(vec![member], &x, &labels, &mask).unwrap_err(),
            TransferError::EmptyValidationTask(Task::Vdss)
        ));
    }
}
