//! Dataset splitting: maximum-dissimilarity selection with a representative
//! initial set and a weighted descriptor/parameter distance, a random-split
//! baseline, and the subset-error splitting-quality metric.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, Task, DESCRIPTOR_COUNT, TASK_COUNT};
use crate::scalar::{real, Real};

/// Which subset a record was assigned to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    #[serde(rename = "val")]
    Validation,
    Test,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::Train, Subset::Validation, Subset::Test];

    pub fn name(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Validation => "val",
            Subset::Test => "test",
        }
    }
}

/// Splitting algorithm tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMethod {
    #[serde(rename = "mdfiswd")]
    MdFisWd,
    #[serde(rename = "random")]
    Random,
}

/// A 60:20:20 partition of record indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub method: SplitMethod,
}

impl SplitAssignment {
    /// Subset sizes for `n` records: both 20% quotas truncate and the
    /// remainder goes to train, so n = 1104 yields (664, 220, 220).
    pub fn quotas(n: usize) -> (usize, usize, usize) {
        let val = n / 5;
        let test = n / 5;
        (n - val - test, val, test)
    }

    pub fn subset_of(&self, index: usize) -> Option<Subset> {
        if self.train.contains(&index) {
            Some(Subset::Train)
        } else if self.validation.contains(&index) {
            Some(Subset::Validation)
        } else if self.test.contains(&index) {
            Some(Subset::Test)
        } else {
            None
        }
    }

    pub fn subset_indices(&self, subset: Subset) -> &[usize] {
        match subset {
            Subset::Train => &self.train,
            Subset::Validation => &self.validation,
            Subset::Test => &self.test,
        }
    }

    /// Checks that the three subsets partition `0..n` at the exact quotas.
    pub fn is_partition_of(&self, n: usize) -> bool {
        let (train, val, test) = Self::quotas(n);
        if self.train.len() != train || self.validation.len() != val || self.test.len() != test {
            return false;
        }
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.validation).chain(&self.test) {
            if i >= n || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        seen.into_iter().all(|s| s)
    }
}

/// Mixing weights for the descriptor and parameter distance terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DistanceWeights<T: Real> {
    pub w1: T,
    pub w2: T,
}

impl<T: Real> DistanceWeights<T> {
    pub fn new(w1: T, w2: T) -> Result<Self, SplitError> {
        let sum = w1 + w2;
        let ok = w1 >= T::zero() && w2 >= T::zero() && (sum - T::one()).abs() <= real(1e-9);
        if !ok {
            return Err(SplitError::BadWeights);
        }
        Ok(Self { w1, w2 })
    }

    /// `w1 * d + w2 * p`.
    pub fn combine(&self, descriptor_distance: T, parameter_distance: T) -> T {
        self.w1 * descriptor_distance + self.w2 * parameter_distance
    }
}

impl<T: Real> Default for DistanceWeights<T> {
    fn default() -> Self {
        Self {
            w1: real(0.7),
            w2: real(0.3),
        }
    }
}

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("dataset labels must be normalized and descriptors standardized before splitting")]
    NotStandardized,
    #[error("at least 5 records are required")]
    TooFewRecords,
    #[error("distance weights must be non-negative and sum to 1")]
    BadWeights,
    #[error("subset has no present label for task {0}")]
    EmptySubsetForTask(Task),
    #[error("group count must be at least 2")]
    BadGroupCount,
}

/// Standardized record features: per-column z-scored descriptors (computed
/// on the full dataset) and normalized labels.
#[derive(Clone, Debug)]
pub struct SplitFeatures<T: Real> {
    descriptors: Array2<T>,
    labels: Vec<[Option<T>; TASK_COUNT]>,
}

impl<T: Real> SplitFeatures<T> {
    /// Builds standardized features. Requires a normalized dataset so the
    /// parameter distance operates on the (0, 1] label scale.
    pub fn standardize(ds: &Dataset<T>) -> Result<Self, SplitError> {
        if ds.normalization.is_none() {
            return Err(SplitError::NotStandardized);
        }
        let n = ds.len();
        let mut descriptors = Array2::zeros((n, DESCRIPTOR_COUNT));
        for col in 0..DESCRIPTOR_COUNT {
            let mut mean = T::zero();
            for rec in &ds.records {
                mean += rec.descriptors[col];
            }
            mean /= real(n as f64);
            let mut var = T::zero();
            for rec in &ds.records {
                let d = rec.descriptors[col] - mean;
                var += d * d;
            }
            var /= real(n as f64);
            let sd = var.sqrt();
            for (row, rec) in ds.records.iter().enumerate() {
                descriptors[(row, col)] = if sd > T::zero() {
                    (rec.descriptors[col] - mean) / sd
                } else {
                    T::zero()
                };
            }
        }
        let labels = ds.records.iter().map(|r| r.labels).collect();
        Ok(Self {
            descriptors,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Weighted distance between records `a` and `b`: the descriptor term is
    /// the Euclidean distance of the z-scored descriptor vectors rescaled by
    /// 1/sqrt(8); the parameter term is the Euclidean distance over jointly
    /// present normalized labels rescaled by 1/sqrt(#shared), zero when no
    /// label is shared.
    pub fn weighted_distance(&self, a: usize, b: usize, w: &DistanceWeights<T>) -> T {
        let mut d2 = T::zero();
        for col in 0..DESCRIPTOR_COUNT {
            let diff = self.descriptors[(a, col)] - self.descriptors[(b, col)];
            d2 += diff * diff;
        }
        let d = (d2 / real(DESCRIPTOR_COUNT as f64)).sqrt();

        let mut p2 = T::zero();
        let mut shared = 0usize;
        for t in 0..TASK_COUNT {
            if let (Some(x), Some(y)) = (self.labels[a][t], self.labels[b][t]) {
                let diff = x - y;
                p2 += diff * diff;
                shared += 1;
            }
        }
        let p = if shared > 0 {
            (p2 / real(shared as f64)).sqrt()
        } else {
            T::zero()
        };
        w.combine(d, p)
    }
}

/// Maximum-dissimilarity split. The medoid (minimum summed weighted distance
/// to all other records) seeds the train set; the remaining records are
/// picked by max-min distance to the already-selected pool and assigned
/// round-robin validation, test, train, train, train, ties broken by lowest
/// index; once the 20% quotas fill, the remainder goes to train. The result
/// is deterministic; `seed` is only recorded.
pub fn mdfiswd_split<T: Real>(
    ds: &Dataset<T>,
    w: &DistanceWeights<T>,
    seed: u64,
) -> Result<SplitAssignment, SplitError> {
    let features = SplitFeatures::standardize(ds)?;
    let n = features.len();
    if n < 5 {
        return Err(SplitError::TooFewRecords);
    }
    let (train_quota, val_quota, test_quota) = SplitAssignment::quotas(n);

    // Representative initial set: the medoid.
    let mut sums = vec![T::zero(); n];
    for a in 0..n {
        for b in (a + 1)..n {
            let d = features.weighted_distance(a, b, w);
            sums[a] += d;
            sums[b] += d;
        }
    }
    let medoid = (0..n)
        .min_by(|&a, &b| sums[a].partial_cmp(&sums[b]).unwrap())
        .unwrap();

    let mut train = vec![medoid];
    let mut validation = Vec::with_capacity(val_quota);
    let mut test = Vec::with_capacity(test_quota);
    let mut assigned = vec![false; n];
    assigned[medoid] = true;
    let mut min_dist: Vec<T> = (0..n)
        .map(|i| features.weighted_distance(i, medoid, w))
        .collect();

    // val -> test -> train -> train -> train, skipping filled quotas.
    const ROUND_ROBIN: [Subset; 5] = [
        Subset::Validation,
        Subset::Test,
        Subset::Train,
        Subset::Train,
        Subset::Train,
    ];
    let mut slot = 0usize;
    while validation.len() < val_quota || test.len() < test_quota {
        // Max-min pick; ties keep the lowest index.
        let pick = (0..n)
            .filter(|&i| !assigned[i])
            .reduce(|best, i| if min_dist[i] > min_dist[best] { i } else { best })
            .expect("quotas bounded by n");
        assigned[pick] = true;
        for i in 0..n {
            if !assigned[i] {
                let d = features.weighted_distance(i, pick, w);
                if d < min_dist[i] {
                    min_dist[i] = d;
                }
            }
        }
        loop {
            let target = ROUND_ROBIN[slot % ROUND_ROBIN.len()];
            slot += 1;
            let filled = match target {
                Subset::Train => train.len() >= train_quota,
                Subset::Validation => validation.len() >= val_quota,
                Subset::Test => test.len() >= test_quota,
            };
            if !filled {
                match target {
                    Subset::Train => train.push(pick),
                    Subset::Validation => validation.push(pick),
                    Subset::Test => test.push(pick),
                }
                break;
            }
        }
    }
    // Remainder to train.
    train.extend((0..n).filter(|&i| !assigned[i]));

    Ok(SplitAssignment {
        train,
        validation,
        test,
        seed,
        method: SplitMethod::MdFisWd,
    })
}

/// Seeded Fisher-Yates shuffle cut at the 60/20/20 quotas.
pub fn random_split<T: Real>(ds: &Dataset<T>, seed: u64) -> Result<SplitAssignment, SplitError> {
    random_split_n(ds.len(), seed)
}

/// [`random_split`] over an explicit record count.
pub fn random_split_n(n: usize, seed: u64) -> Result<SplitAssignment, SplitError> {
    if n < 5 {
        return Err(SplitError::TooFewRecords);
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fisher_yates(&mut order, &mut rng);
    let (train_quota, val_quota, _) = SplitAssignment::quotas(n);
    let validation = order[train_quota..train_quota + val_quota].to_vec();
    let test = order[train_quota + val_quota..].to_vec();
    let mut train = order;
    train.truncate(train_quota);
    Ok(SplitAssignment {
        train,
        validation,
        test,
        seed,
        method: SplitMethod::Random,
    })
}

pub(crate) fn fisher_yates<R: rand::Rng>(items: &mut [usize], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Subset error for one task: the whole-dataset range of present labels is
/// cut into `ngroups` equal-width bins; per subset, a bin's frequency is the
/// percentage of that subset's present labels falling in it; SE is the mean
/// over bins of (max subset frequency - min subset frequency), in percentage
/// points.
pub fn subset_error<T: Real>(
    ds: &Dataset<T>,
    split: &SplitAssignment,
    task: Task,
    ngroups: usize,
) -> Result<T, SplitError> {
    if ngroups < 2 {
        return Err(SplitError::BadGroupCount);
    }
    let values: Vec<T> = ds.records.iter().filter_map(|r| r.label(task)).collect();
    if values.is_empty() {
        return Err(SplitError::EmptySubsetForTask(task));
    }
    let lo = values.iter().copied().fold(T::infinity(), T::min);
    let hi = values.iter().copied().fold(T::neg_infinity(), T::max);
    let width = (hi - lo) / real(ngroups as f64);

    let bin_of = |v: T| -> usize {
        if width > T::zero() {
            let raw = ((v - lo) / width).to_f64().unwrap().floor() as usize;
            raw.min(ngroups - 1)
        } else {
            0
        }
    };

    let mut freqs = [vec![], vec![], vec![]];
    for (s, subset) in Subset::ALL.iter().enumerate() {
        let indices = split.subset_indices(*subset);
        let present: Vec<T> = indices
            .iter()
            .filter_map(|&i| ds.records[i].label(task))
            .collect();
        if present.is_empty() {
            return Err(SplitError::EmptySubsetForTask(task));
        }
        let mut counts = vec![0usize; ngroups];
        for v in &present {
            counts[bin_of(*v)] += 1;
        }
        freqs[s] = counts
            .iter()
            .map(|&c| real::<T>(100.0) * real(c as f64) / real(present.len() as f64))
            .collect();
    }

    let mut total = T::zero();
    for ((a, b), c) in freqs[0].iter().zip(&freqs[1]).zip(&freqs[2]) {
        let max = a.max(*b).max(*c);
        let min = a.min(*b).min(*c);
        total += max - min;
    }
    Ok(total / real(ngroups as f64))
}

/// Grid search over `w1` candidates; returns the weights with the lowest
/// mean subset error across all four tasks.
pub fn grid_search_weights<T: Real>(
    ds: &Dataset<T>,
    w1_candidates: &[T],
    ngroups: usize,
) -> Result<(DistanceWeights<T>, T), SplitError> {
    let mut best: Option<(DistanceWeights<T>, T)> = None;
    for &w1 in w1_candidates {
        let w = DistanceWeights::new(w1, T::one() - w1)?;
        let split = mdfiswd_split(ds, &w, 0)?;
        let mut mean = T::zero();
        let mut count = 0usize;
        for task in Task::ALL {
            if ds.present_count(task) > 0 {
                mean += subset_error(ds, &split, task, ngroups)?;
                count += 1;
            }
        }
        if count == 0 {
            return Err(SplitError::EmptySubsetForTask(Task::Ba));
        }
        mean /= real(count as f64);
        if best.is_none_or(|(_, se)| mean < se) {
            best = Some((w, mean));
        }
    }
    best.ok_or(SplitError::BadWeights)
}
