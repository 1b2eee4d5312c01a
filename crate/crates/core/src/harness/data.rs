//! Synthetic classification data and client partitions.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma, Normal};

use super::HarnessError;
use crate::rng::derived_rng;

/// Default within-class standard deviation relative to unit-variance class
/// means.
pub const DEFAULT_SPREAD: f64 = 1.6;

/// Gaussian blobs, one per class. Features are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    feature_count: usize,
    classes: usize,
}

impl SyntheticDataset {
    pub fn from_parts(
        features: Vec<f64>,
        labels: Vec<usize>,
        feature_count: usize,
        classes: usize,
    ) -> Result<Self, HarnessError> {
        if feature_count == 0 || features.len() != labels.len() * feature_count {
            return Err(HarnessError::InvalidArgument(
                "feature matrix does not match label count".into(),
            ));
        }
        if labels.iter().any(|&y| y >= classes) {
            return Err(HarnessError::InvalidArgument("label out of range".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(HarnessError::InvalidArgument("non-finite feature".into()));
        }
        Ok(Self {
            features,
            labels,
            feature_count,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_count..(i + 1) * self.feature_count]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        class_histogram(self, &(0..self.len()).collect::<Vec<_>>())
    }

    /// Copies the rows in `indices`.
    pub fn subset(&self, indices: &[usize]) -> SyntheticDataset {
        let mut features = Vec::with_capacity(indices.len() * self.feature_count);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        SyntheticDataset {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_count: self.feature_count,
            classes: self.classes,
        }
    }
}

pub fn generate_dataset(
    classes: usize,
    features: usize,
    samples: usize,
    seed: u64,
) -> Result<SyntheticDataset, HarnessError> {
    generate_dataset_with_spread(classes, features, samples, DEFAULT_SPREAD, seed)
}

/// Class `c` gets `samples / C` or one more rows drawn from
/// `N(μ_c, spread² I)` with `μ_c ~ N(0, I)`.
pub fn generate_dataset_with_spread(
    classes: usize,
    features: usize,
    samples: usize,
    spread: f64,
    seed: u64,
) -> Result<SyntheticDataset, HarnessError> {
    if classes < 2 || samples < classes || features == 0 {
        return Err(HarnessError::InvalidArgument(format!(
            "need C ≥ 2, m ≥ C and f ≥ 1 (got C={classes}, m={samples}, f={features})"
        )));
    }
    if !(spread.is_finite() && spread >= 0.0) {
        return Err(HarnessError::InvalidArgument(format!("bad spread {spread}")));
    }
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = derived_rng(seed, "class-means", 0);
    let means: Vec<f64> = (0..classes * features).map(|_| std.sample(&mut rng)).collect();

    let mut labels: Vec<usize> = (0..samples).map(|i| i % classes).collect();
    let mut rng = derived_rng(seed, "samples", 0);
    labels.shuffle(&mut rng);
    let mut data = Vec::with_capacity(samples * features);
    for &y in &labels {
        let mu = &means[y * features..(y + 1) * features];
        data.extend(mu.iter().map(|m| m + spread * std.sample(&mut rng)));
    }
    SyntheticDataset::from_parts(data, labels, features, classes)
}

/// Stratified holdout: `test_fraction` of every class goes to the test set.
pub fn train_test_split(
    data: &SyntheticDataset,
    test_fraction: f64,
    seed: u64,
) -> (SyntheticDataset, SyntheticDataset) {
    let mut rng = derived_rng(seed, "holdout", 0);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..data.classes() {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.label(i) == c).collect();
        idx.shuffle(&mut rng);
        let k = (idx.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (data.subset(&train), data.subset(&test))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionMode {
    Iid,
    Dirichlet(f64),
}

impl PartitionMode {
    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        if s == "iid" {
            return Ok(PartitionMode::Iid);
        }
        let alpha = s
            .strip_prefix("dirichlet:")
            .and_then(|a| a.parse::<f64>().ok())
            .filter(|a| a.is_finite() && *a > 0.0)
            .ok_or_else(|| {
                HarnessError::InvalidArgument(format!(
                    "partition must be `iid` or `dirichlet:<α>`, got `{s}`"
                ))
            })?;
        Ok(PartitionMode::Dirichlet(alpha))
    }
}

impl std::fmt::Display for PartitionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PartitionMode::Iid => write!(f, "iid"),
            PartitionMode::Dirichlet(a) => write!(f, "dirichlet:{a}"),
        }
    }
}

/// Disjoint per-client index lists covering the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub shards: Vec<Vec<usize>>,
    pub mode: PartitionMode,
}

impl Partition {
    pub fn client_count(&self) -> usize {
        self.shards.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.shards.iter().map(Vec::len).collect()
    }

    /// Mean over clients of `Σ_c p_c²` (1 = single class, 1/C = uniform).
    pub fn concentration(&self, data: &SyntheticDataset) -> f64 {
        let total: f64 = self
            .shards
            .iter()
            .map(|s| {
                let h = class_histogram(data, s);
                let n = s.len() as f64;
                h.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
            })
            .sum();
        total / self.shards.len() as f64
    }
}

pub fn class_histogram(data: &SyntheticDataset, indices: &[usize]) -> Vec<usize> {
    let mut h = vec![0; data.classes()];
    for &i in indices {
        h[data.label(i)] += 1;
    }
    h
}

/// IID: shuffle and deal evenly. Dirichlet(α): each class is split across
/// clients with proportions drawn from `Dir(α·1_M)`; empty clients then take
/// one sample from the currently largest client.
pub fn partition(
    data: &SyntheticDataset,
    clients: usize,
    mode: PartitionMode,
    seed: u64,
) -> Result<Partition, HarnessError> {
    if clients == 0 || clients > data.len() {
        return Err(HarnessError::InvalidArgument(format!(
            "cannot split {} samples across {clients} clients",
            data.len()
        )));
    }
    let mut rng = derived_rng(seed, "partition", 0);
    let mut shards = vec![Vec::new(); clients];
    match mode {
        PartitionMode::Iid => {
            let mut idx: Vec<usize> = (0..data.len()).collect();
            idx.shuffle(&mut rng);
            for (k, i) in idx.into_iter().enumerate() {
                shards[k % clients].push(i);
            }
        }
        PartitionMode::Dirichlet(alpha) => {
            let gamma = Gamma::new(alpha, 1.0)
                .map_err(|e| HarnessError::InvalidArgument(format!("Dirichlet α: {e}")))?;
            for c in 0..data.classes() {
                let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.label(i) == c).collect();
                idx.shuffle(&mut rng);
                let mut p: Vec<f64> = (0..clients).map(|_| gamma.sample(&mut rng)).collect();
                let sum: f64 = p.iter().sum();
                if !(sum > 0.0 && sum.is_finite()) {
                    p.fill(1.0);
                }
                let sum: f64 = p.iter().sum();
                let mut acc = 0.0;
                let mut start = 0;
                for (k, pk) in p.iter().enumerate() {
                    acc += pk / sum;
                    let end = if k + 1 == clients {
                        idx.len()
                    } else {
                        ((acc * idx.len() as f64).round() as usize).clamp(start, idx.len())
                    };
                    shards[k].extend_from_slice(&idx[start..end]);
                    start = end;
                }
            }
            while let Some(empty) = shards.iter().position(Vec::is_empty) {
                let largest = (0..clients).max_by_key(|&k| shards[k].len()).expect("clients > 0");
                let moved = shards[largest].pop().expect("largest shard non-empty");
                shards[empty].push(moved);
            }
        }
    }
    for s in &mut shards {
        s.sort_unstable();
    }
    Ok(Partition { shards, mode })
}
