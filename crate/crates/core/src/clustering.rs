//! Scalar k-means over a flat weight vector.
//!
//! The whole model is clustered at once: every parameter is a 1-D point and the
//! result is `κ` centroids plus, for each parameter, the index of the centroid
//! it was assigned to. Seeding is k-means++; Lloyd iterations run until the
//! assignment stops changing or [`MAX_LLOYD_ITERATIONS`] is reached.

use rand::Rng;
use thiserror::Error;

use crate::rng::rng_from_seed;

pub const MAX_LLOYD_ITERATIONS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusteringError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A non-empty vector of finite model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ClusteringError> {
        if values.is_empty() {
            return Err(ClusteringError::InvalidArgument(
                "weight vector must not be empty".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ClusteringError::InvalidArgument(format!(
                "weight {i} is not finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for WeightVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Centroids `Z` and the cluster-weight mapping `P` of one weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredModel {
    centroids: Vec<f64>,
    mapping: Vec<u32>,
}

impl ClusteredModel {
    pub fn new(centroids: Vec<f64>, mapping: Vec<u32>) -> Result<Self, ClusteringError> {
        if centroids.is_empty() || mapping.is_empty() {
            return Err(ClusteringError::InvalidArgument(
                "clustered model needs at least one centroid and one weight".into(),
            ));
        }
        if centroids.iter().any(|c| !c.is_finite()) {
            return Err(ClusteringError::InvalidArgument(
                "centroids must be finite".into(),
            ));
        }
        let kappa = centroids.len();
        if let Some(i) = mapping.iter().position(|&p| p as usize >= kappa) {
            return Err(ClusteringError::InvalidArgument(format!(
                "mapping entry {i} = {} is not below κ = {kappa}",
                mapping[i]
            )));
        }
        Ok(Self { centroids, mapping })
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn mapping(&self) -> &[u32] {
        &self.mapping
    }

    pub fn kappa(&self) -> usize {
        self.centroids.len()
    }

    /// Number of weights `d`.
    pub fn dim(&self) -> usize {
        self.mapping.len()
    }

    /// Materializes `θ[i] = Z[P[i]]`.
    pub fn reconstruct(&self) -> WeightVector {
        WeightVector(
            self.mapping
                .iter()
                .map(|&p| self.centroids[p as usize])
                .collect(),
        )
    }
}

/// Index of the centroid closest to `value`; ties go to the lowest index.
#[inline]
pub fn nearest_centroid(value: f64, centroids: &[f64]) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (j, &c) in centroids.iter().enumerate() {
        let dist = (value - c) * (value - c);
        if dist < best_dist {
            best = j;
            best_dist = dist;
        }
    }
    best
}

/// One assignment pass. Returns whether any entry of `mapping` changed.
///
/// Costs `O(κ·d)`: every weight is compared against every centroid.
pub fn assign_nearest(weights: &[f64], centroids: &[f64], mapping: &mut [u32]) -> bool {
    let mut changed = false;
    for (w, slot) in weights.iter().zip(mapping.iter_mut()) {
        let j = nearest_centroid(*w, centroids) as u32;
        if *slot != j {
            *slot = j;
            changed = true;
        }
    }
    changed
}

/// Clusters `weights` into `kappa` centroids minimizing the within-cluster
/// sum of squares. Deterministic in `(weights, kappa, seed)`.
///
/// Centroids of the returned model are sorted ascending.
pub fn cluster_weights(
    weights: &WeightVector,
    kappa: usize,
    seed: u64,
) -> Result<ClusteredModel, ClusteringError> {
    let w = weights.as_slice();
    let d = w.len();
    if kappa == 0 {
        return Err(ClusteringError::InvalidArgument("κ must be at least 1".into()));
    }
    if kappa > d {
        return Err(ClusteringError::InvalidArgument(format!(
            "κ = {kappa} exceeds the number of weights d = {d}"
        )));
    }

    let mut centroids = kmeans_plus_plus(w, kappa, seed);
    let mut mapping = vec![0u32; d];
    assign_nearest(w, &centroids, &mut mapping);

    for _ in 0..MAX_LLOYD_ITERATIONS {
        update_centroids(w, &mut centroids, &mut mapping);
        if !assign_nearest(w, &centroids, &mut mapping) {
            break;
        }
    }

    // Canonical order; reassign so ties still resolve to the lowest index.
    centroids.sort_by(|a, b| a.total_cmp(b));
    assign_nearest(w, &centroids, &mut mapping);
    ClusteredModel::new(centroids, mapping)
}

/// `Σ_i (θ_i − Z[P_i])²`.
pub fn clustering_loss(
    weights: &WeightVector,
    model: &ClusteredModel,
) -> Result<f64, ClusteringError> {
    if weights.len() != model.dim() {
        return Err(ClusteringError::InvalidArgument(format!(
            "weight vector has {} entries but the mapping has {}",
            weights.len(),
            model.dim()
        )));
    }
    Ok(weights
        .as_slice()
        .iter()
        .zip(model.mapping())
        .map(|(w, &p)| {
            let e = w - model.centroids()[p as usize];
            e * e
        })
        .sum())
}

pub fn reconstruct_weights(model: &ClusteredModel) -> WeightVector {
    model.reconstruct()
}

fn kmeans_plus_plus(w: &[f64], kappa: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let d = w.len();
    let mut chosen = vec![false; d];
    let first = rng.gen_range(0..d);
    chosen[first] = true;
    let mut centroids = Vec::with_capacity(kappa);
    centroids.push(w[first]);
    let mut dist: Vec<f64> = w.iter().map(|x| (x - w[first]) * (x - w[first])).collect();

    while centroids.len() < kappa {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &di) in dist.iter().enumerate() {
                if di <= 0.0 {
                    continue;
                }
                if target < di {
                    pick = Some(i);
                    break;
                }
                target -= di;
            }
            // Rounding can walk past the end; fall back to the last candidate.
            pick.unwrap_or_else(|| dist.iter().rposition(|&di| di > 0.0).unwrap())
        } else {
            // Fewer distinct values than κ: take the next unused position.
            chosen.iter().position(|&c| !c).unwrap()
        };
        chosen[pick] = true;
        let c = w[pick];
        centroids.push(c);
        for (di, x) in dist.iter_mut().zip(w) {
            let nd = (x - c) * (x - c);
            if nd < *di {
                *di = nd;
            }
        }
    }
    centroids
}

fn update_centroids(w: &[f64], centroids: &mut [f64], mapping: &mut [u32]) {
    let kappa = centroids.len();
    let mut sums = vec![0.0f64; kappa];
    let mut counts = vec![0usize; kappa];
    for (x, &p) in w.iter().zip(mapping.iter()) {
        sums[p as usize] += x;
        counts[p as usize] += 1;
    }
    for j in 0..kappa {
        if counts[j] > 0 {
            centroids[j] = sums[j] / counts[j] as f64;
        }
    }
    for j in 0..kappa {
        if counts[j] > 0 {
            continue;
        }
        // Re-seed at the point farthest from its own centroid, taken from a
        // cluster that can spare it.
        let mut far = None;
        let mut far_dist = -1.0;
        for (i, (x, &p)) in w.iter().zip(mapping.iter()).enumerate() {
            if counts[p as usize] < 2 {
                continue;
            }
            let e = x - centroids[p as usize];
            if e * e > far_dist {
                far_dist = e * e;
                far = Some(i);
            }
        }
        if let Some(i) = far {
            counts[mapping[i] as usize] -= 1;
            mapping[i] = j as u32;
            counts[j] = 1;
            centroids[j] = w[i];
        }
    }
}
