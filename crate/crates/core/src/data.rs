//! Molecule records, CSV dataset ingestion, and target normalization.
//!
//! Datasets are immutable after construction. Each record carries eight
//! molecular descriptors and four optional pharmacokinetic labels; missing
//! labels are first-class (encoded as `None`, exposed as a mask) and are
//! never imputed.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{real, Real};

/// Number of molecular descriptors per record.
pub const DESCRIPTOR_COUNT: usize = 8;
/// Number of pharmacokinetic prediction tasks.
pub const TASK_COUNT: usize = 4;

/// The four predicted pharmacokinetic parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Oral bioavailability, percent.
    Ba,
    /// Plasma protein binding rate, percent.
    Ppbr,
    /// Steady-state volume of distribution, liters.
    Vdss,
    /// Elimination half-life, hours.
    Hl,
}

impl Task {
    pub const ALL: [Task; TASK_COUNT] = [Task::Ba, Task::Ppbr, Task::Vdss, Task::Hl];

    pub fn index(self) -> usize {
        match self {
            Task::Ba => 0,
            Task::Ppbr => 1,
            Task::Vdss => 2,
            Task::Hl => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Ba => "ba",
            Task::Ppbr => "ppbr",
            Task::Vdss => "vdss",
            Task::Hl => "hl",
        }
    }

    /// Valid raw-unit range, as (min, max, min_exclusive).
    fn bounds(self) -> (f64, f64, bool) {
        match self {
            Task::Ba | Task::Ppbr => (0.0, 100.0, false),
            Task::Vdss => (0.0, 2000.0, true),
            Task::Hl => (0.0, 168.0, true),
        }
    }

    fn in_range(self, v: f64) -> bool {
        let (lo, hi, lo_excl) = self.bounds();
        let above = if lo_excl { v > lo } else { v >= lo };
        above && v <= hi
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One drug: identifier, structure, descriptors and labels.
#[derive(Clone, Debug, PartialEq)]
pub struct MoleculeRecord<T: Real> {
    pub id: String,
    pub smiles: String,
    /// MW, TPSA, rotatable bonds, H-bond donors, H-bond acceptors,
    /// heavy atoms, complexity, covalently-bonded units.
    pub descriptors: [T; DESCRIPTOR_COUNT],
    /// BA %, PPBR %, VDss L, HL h. `None` = label missing.
    pub labels: [Option<T>; TASK_COUNT],
}

impl<T: Real> MoleculeRecord<T> {
    /// Presence mask over the four labels.
    pub fn mask(&self) -> [bool; TASK_COUNT] {
        [
            self.labels[0].is_some(),
            self.labels[1].is_some(),
            self.labels[2].is_some(),
            self.labels[3].is_some(),
        ]
    }

    pub fn label(&self, task: Task) -> Option<T> {
        self.labels[task.index()]
    }
}

/// Divisors mapping raw label units onto the network's (0, 1] output range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NormalizationSpec<T: Real> {
    pub divisors: [T; TASK_COUNT],
}

impl<T: Real> NormalizationSpec<T> {
    pub fn new(divisors: [T; TASK_COUNT]) -> Result<Self, DataError> {
        if divisors.iter().any(|d| *d <= T::zero() || !d.is_finite()) {
            return Err(DataError::BadDivisors);
        }
        Ok(Self { divisors })
    }

    pub fn normalize(&self, task: Task, raw: T) -> T {
        raw / self.divisors[task.index()]
    }

    pub fn denormalize(&self, task: Task, normalized: T) -> T {
        normalized * self.divisors[task.index()]
    }
}

impl<T: Real> Default for NormalizationSpec<T> {
    /// BA and PPBR are percentages; VDss and HL divisors equal the data
    /// bounds (2000 L, 168 h).
    fn default() -> Self {
        Self {
            divisors: [real(100.0), real(100.0), real(2000.0), real(168.0)],
        }
    }
}

/// An immutable collection of molecule records.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T: Real> {
    pub records: Vec<MoleculeRecord<T>>,
    /// Set once `normalize_targets` has run.
    pub normalization: Option<NormalizationSpec<T>>,
}

impl<T: Real> Dataset<T> {
    pub fn new(records: Vec<MoleculeRecord<T>>) -> Self {
        Self {
            records,
            normalization: None,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of records with a present label for `task`.
    pub fn present_count(&self, task: Task) -> usize {
        self.records
            .iter()
            .filter(|r| r.label(task).is_some())
            .count()
    }
}

/// Column-name mapping for dataset CSV files.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvSchema {
    pub id: String,
    pub smiles: String,
    pub descriptors: [String; DESCRIPTOR_COUNT],
    pub labels: [String; TASK_COUNT],
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            id: "id".into(),
            smiles: "smiles".into(),
            descriptors: [
                "mw".into(),
                "tpsa".into(),
                "rotb".into(),
                "hbd".into(),
                "hba".into(),
                "heavy".into(),
                "complexity".into(),
                "cbu".into(),
            ],
            labels: ["ba".into(), "ppbr".into(), "vdss".into(), "hl".into()],
        }
    }
}

impl CsvSchema {
    fn columns(&self) -> Vec<&str> {
        let mut cols = vec![self.id.as_str(), self.smiles.as_str()];
        cols.extend(self.descriptors.iter().map(String::as_str));
        cols.extend(self.labels.iter().map(String::as_str));
        cols
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: column `{col}` is not a finite number")]
    NonNumericCell { row: usize, col: String },
    #[error("row {row}: {task} value {value} outside its valid range")]
    RangeViolation { row: usize, task: Task, value: f64 },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("row {0}: every label is missing")]
    NoLabelPresent(usize),
    #[error("dataset is already normalized")]
    AlreadyNormalized,
    #[error("dataset is not normalized")]
    NotNormalized,
    #[error("row {row}: normalized {task} value {value} outside (0, 1]")]
    ResultOutOfRange { row: usize, task: Task, value: f64 },
    #[error("normalization divisors must be positive and finite")]
    BadDivisors,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Loading behaviour knobs. `require_labels` enforces the at-least-one-label
/// record invariant; prediction-only inputs may relax it.
#[derive(Clone, Copy, Debug)]
pub struct LoadOptions {
    pub require_labels: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            require_labels: true,
        }
    }
}

/// Reads a pharmacokinetic dataset from a comma-delimited, UTF-8 CSV file
/// with a header row. Empty cells are missing labels; row order is preserved.
pub fn load_pk_dataset<T: Real>(
    path: impl AsRef<Path>,
    schema: &CsvSchema,
) -> Result<Dataset<T>, DataError> {
    load_pk_dataset_with(path, schema, LoadOptions::default())
}

pub fn load_pk_dataset_with<T: Real>(
    path: impl AsRef<Path>,
    schema: &CsvSchema,
    options: LoadOptions,
) -> Result<Dataset<T>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };

    let id_col = find(&schema.id)?;
    let smiles_col = find(&schema.smiles)?;
    let mut descriptor_cols = [0usize; DESCRIPTOR_COUNT];
    for (slot, name) in descriptor_cols.iter_mut().zip(&schema.descriptors) {
        *slot = find(name)?;
    }
    let mut label_cols = [0usize; TASK_COUNT];
    for (slot, name) in label_cols.iter_mut().zip(&schema.labels) {
        *slot = find(name)?;
    }

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let record = result?;
        let cell = |col: usize| record.get(col).unwrap_or("");

        let id = cell(id_col).to_string();
        if !seen.insert(id.clone()) {
            return Err(DataError::DuplicateId(id));
        }
        let smiles = cell(smiles_col).to_string();

        let mut descriptors = [T::zero(); DESCRIPTOR_COUNT];
        for (k, &col) in descriptor_cols.iter().enumerate() {
            descriptors[k] =
                parse_cell(cell(col), row, &schema.descriptors[k])?.ok_or_else(|| {
                    DataError::NonNumericCell {
                        row,
                        col: schema.descriptors[k].clone(),
                    }
                })?;
        }

        let mut labels = [None; TASK_COUNT];
        for (task, &col) in Task::ALL.iter().zip(&label_cols) {
            let value: Option<T> = parse_cell(cell(col), row, &schema.labels[task.index()])?;
            if let Some(v) = value {
                let raw = v.to_f64().unwrap_or(f64::NAN);
                if !task.in_range(raw) {
                    return Err(DataError::RangeViolation {
                        row,
                        task: *task,
                        value: raw,
                    });
                }
            }
            labels[task.index()] = value;
        }
        if options.require_labels && labels.iter().all(Option::is_none) {
            return Err(DataError::NoLabelPresent(row));
        }

        records.push(MoleculeRecord {
            id,
            smiles,
            descriptors,
            labels,
        });
    }

    Ok(Dataset::new(records))
}

fn parse_cell<T: Real>(text: &str, row: usize, col: &str) -> Result<Option<T>, DataError> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(None);
    }
    let value: f64 = text.parse().map_err(|_| DataError::NonNumericCell {
        row,
        col: col.to_string(),
    })?;
    if !value.is_finite() {
        return Err(DataError::NonNumericCell {
            row,
            col: col.to_string(),
        });
    }
    Ok(Some(real(value)))
}

/// Writes a dataset in canonical form: canonical column order, `.` decimal
/// separator, empty string for missing labels, shortest round-trip float
/// formatting. `load` followed by `save` is a byte-level fixed point.
pub fn save_pk_dataset<T: Real>(
    ds: &Dataset<T>,
    path: impl AsRef<Path>,
    schema: &CsvSchema,
) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(schema.columns())?;
    for rec in &ds.records {
        let mut row: Vec<String> = vec![rec.id.clone(), rec.smiles.clone()];
        row.extend(rec.descriptors.iter().map(|d| d.to_string()));
        row.extend(
            rec.labels
                .iter()
                .map(|l| l.map(|v| v.to_string()).unwrap_or_default()),
        );
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads one named column from a CSV file as raw strings, preserving row
/// order. Backs the precomputed-fingerprint bypass.
pub fn load_text_column(path: impl AsRef<Path>, column: &str) -> Result<Vec<String>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| DataError::MissingColumn(column.to_string()))?;
    let mut values = Vec::new();
    for record in reader.records() {
        values.push(record?.get(col).unwrap_or("").to_string());
    }
    Ok(values)
}

/// Divides every present label by its task divisor, mapping raw units onto
/// (0, 1]. Masks are untouched. Fails on already-normalized input and on
/// values that leave (0, 1].
pub fn normalize_targets<T: Real>(
    ds: Dataset<T>,
    spec: NormalizationSpec<T>,
) -> Result<Dataset<T>, DataError> {
    if ds.normalization.is_some() {
        return Err(DataError::AlreadyNormalized);
    }
    let mut records = ds.records;
    for (row, rec) in records.iter_mut().enumerate() {
        for task in Task::ALL {
            if let Some(v) = rec.labels[task.index()] {
                let scaled = spec.normalize(task, v);
                if !(scaled > T::zero() && scaled <= T::one()) {
                    return Err(DataError::ResultOutOfRange {
                        row,
                        task,
                        value: scaled.to_f64().unwrap_or(f64::NAN),
                    });
                }
                rec.labels[task.index()] = Some(scaled);
            }
        }
    }
    Ok(Dataset {
        records,
        normalization: Some(spec),
    })
}

/// Inverse of [`normalize_targets`], for raw-unit display.
pub fn denormalize_targets<T: Real>(ds: Dataset<T>) -> Result<Dataset<T>, DataError> {
    let spec = ds.normalization.clone().ok_or(DataError::NotNormalized)?;
    let mut records = ds.records;
    for rec in records.iter_mut() {
        for task in Task::ALL {
            if let Some(v) = rec.labels[task.index()] {
                rec.labels[task.index()] = Some(spec.denormalize(task, v));
            }
        }
    }
    Ok(Dataset {
        records,
        normalization: None,
    })
}
