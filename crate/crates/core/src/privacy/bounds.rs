//! Lower bounds on `E‖θ* − θ‖²` when each mapping entry is independently
//! misassigned with probability `2^-ξ`, for one client and for the mean of
//! `N` clients.

use rand::Rng;

use super::PrivacyError;
use crate::clustering::{ClusteredModel, WeightVector};
use crate::filter::{mapping_keys, BitsPerEntry, FuseFilter};
use crate::protocol::{reconstruct_mapping, UNKNOWN_CLUSTER};
use crate::rng::{derive_seed, rng_from_seed};

/// Printed in CSV cells that have no value (e.g. `D_inter` at `κ = 1`).
pub const NOT_APPLICABLE: &str = "NA";

pub const BOUND_CSV_HEADER: &str = "trial,clients,d,kappa,bpe,d_intra,d_inter,mean_d_intra,mean_d_inter,bound_single,empirical_single,expected_single,bound_aggregate,empirical_aggregate,holds";

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBoundReport {
    pub d: usize,
    pub kappa: usize,
    pub bpe: u32,
    pub clients: usize,
    /// `min_i (θ*_i − c_{P_i})²`.
    pub d_intra: f64,
    /// `min_i mean_{j ≠ P_i} (θ*_i − c_j)²`; `None` when `κ = 1`.
    pub d_inter: Option<f64>,
    /// Means of the per-client values (equal to the above for one client).
    pub mean_d_intra: f64,
    pub mean_d_inter: Option<f64>,
    /// `d((1 − p)·D_intra + p·D_inter)` with `p = 2^-ξ`.
    pub bound_single: Option<f64>,
    /// `‖θ* − θ‖²` of the first client, averaged over sampled corruptions.
    pub empirical_single: f64,
    /// The same error averaged exactly over the corruption distribution.
    pub expected_single: f64,
    /// `d((1 − p)·D̄_intra + p·D̄_inter)/N`.
    pub bound_aggregate: Option<f64>,
    /// `‖mean θ* − mean θ‖²`, averaged over sampled corruptions.
    pub empirical_aggregate: Option<f64>,
}

impl ErrorBoundReport {
    /// True when every available empirical value is at least its bound.
    pub fn holds(&self) -> bool {
        let single = self.bound_single.is_none_or(|b| self.empirical_single >= b);
        let aggregate = match (self.bound_aggregate, self.empirical_aggregate) {
            (Some(b), Some(e)) => e >= b,
            _ => true,
        };
        single && aggregate
    }

    pub fn csv_row(&self, trial: usize) -> String {
        let opt = |v: Option<f64>| v.map_or(NOT_APPLICABLE.to_string(), |x| format!("{x:.9e}"));
        format!(
            "{trial},{},{},{},{},{:.9e},{},{:.9e},{},{},{:.9e},{:.9e},{},{},{}",
            self.clients,
            self.d,
            self.kappa,
            self.bpe,
            self.d_intra,
            opt(self.d_inter),
            self.mean_d_intra,
            opt(self.mean_d_inter),
            opt(self.bound_single),
            self.empirical_single,
            self.expected_single,
            opt(self.bound_aggregate),
            opt(self.empirical_aggregate),
            self.holds()
        )
    }
}

fn error_probability(bpe: u32) -> f64 {
    0.5f64.powi(bpe as i32)
}

fn check(weights: &WeightVector, model: &ClusteredModel) -> Result<(), PrivacyError> {
    if weights.len() != model.dim() {
        return Err(PrivacyError::InvalidArgument(format!(
            "weights have {} entries, clustering has {}",
            weights.len(),
            model.dim()
        )));
    }
    Ok(())
}

/// `(D_intra, D_inter)` as minima over weights.
pub fn inter_intra_distances(
    weights: &WeightVector,
    model: &ClusteredModel,
) -> Result<(f64, Option<f64>), PrivacyError> {
    check(weights, model)?;
    let c = model.centroids();
    let k = c.len();
    let mut intra = f64::INFINITY;
    let mut inter = f64::INFINITY;
    for (&w, &p) in weights.as_slice().iter().zip(model.mapping()) {
        let own = (w - c[p as usize]).powi(2);
        intra = intra.min(own);
        if k > 1 {
            let all: f64 = c.iter().map(|cj| (w - cj).powi(2)).sum();
            inter = inter.min((all - own) / (k - 1) as f64);
        }
    }
    Ok((intra, (k > 1).then_some(inter)))
}

/// Each entry independently moves, with probability `p`, to a uniformly
/// chosen different cluster.
pub fn corrupt_mapping(mapping: &[u32], kappa: usize, p: f64, rng: &mut impl Rng) -> Vec<u32> {
    mapping
        .iter()
        .map(|&m| {
            if kappa > 1 && rng.gen_bool(p) {
                let j = rng.gen_range(0..kappa as u32 - 1);
                if j >= m {
                    j + 1
                } else {
                    j
                }
            } else {
                m
            }
        })
        .collect()
}

fn squared_error(weights: &[f64], centroids: &[f64], mapping: &[u32]) -> f64 {
    weights
        .iter()
        .zip(mapping)
        .map(|(w, &m)| (w - centroids[m as usize]).powi(2))
        .sum()
}

/// Exact expectation of the squared error under the corruption model.
fn expected_error(weights: &[f64], model: &ClusteredModel, p: f64) -> f64 {
    let c = model.centroids();
    let k = c.len();
    weights
        .iter()
        .zip(model.mapping())
        .map(|(&w, &m)| {
            let own = (w - c[m as usize]).powi(2);
            if k == 1 {
                return own;
            }
            let all: f64 = c.iter().map(|cj| (w - cj).powi(2)).sum();
            (1.0 - p) * own + p * (all - own) / (k - 1) as f64
        })
        .sum()
}

fn check_draws(draws: usize) -> Result<(), PrivacyError> {
    if draws == 0 {
        return Err(PrivacyError::InvalidArgument("need at least one draw".into()));
    }
    Ok(())
}

/// Single-client report. The empirical error is the mean over `draws`
/// corruptions sampled from `seed`.
pub fn estimation_error_bound(
    weights: &WeightVector,
    model: &ClusteredModel,
    bpe: u32,
    draws: usize,
    seed: u64,
) -> Result<ErrorBoundReport, PrivacyError> {
    check_draws(draws)?;
    let (d_intra, d_inter) = inter_intra_distances(weights, model)?;
    let p = error_probability(bpe);
    let d = weights.len();
    let mut rng = rng_from_seed(seed);
    let empirical = (0..draws)
        .map(|_| {
            let corrupted = corrupt_mapping(model.mapping(), model.kappa(), p, &mut rng);
            squared_error(weights.as_slice(), model.centroids(), &corrupted)
        })
        .sum::<f64>()
        / draws as f64;
    Ok(ErrorBoundReport {
        d,
        kappa: model.kappa(),
        bpe,
        clients: 1,
        d_intra,
        d_inter,
        mean_d_intra: d_intra,
        mean_d_inter: d_inter,
        bound_single: d_inter.map(|inter| d as f64 * ((1.0 - p) * d_intra + p * inter)),
        empirical_single: empirical,
        expected_single: expected_error(weights.as_slice(), model, p),
        bound_aggregate: None,
        empirical_aggregate: None,
    })
}

/// One client's true weights and its clustering.
pub type BoundInputs<'a> = (&'a WeightVector, &'a ClusteredModel);

/// Aggregate report over `N ≥ 2` clients.
///
/// The bound's divisor is the client count `N`. The single-client fields
/// describe the first client.
pub fn aggregate_error_bound(
    clients: &[BoundInputs<'_>],
    bpe: u32,
    draws: usize,
    seed: u64,
) -> Result<ErrorBoundReport, PrivacyError> {
    check_draws(draws)?;
    if clients.len() < 2 {
        return Err(PrivacyError::InvalidArgument("need at least two clients".into()));
    }
    let d = clients[0].0.len();
    if clients.iter().any(|(w, m)| w.len() != d || m.dim() != d) {
        return Err(PrivacyError::InvalidArgument("clients differ in d".into()));
    }
    let p = error_probability(bpe);
    let n = clients.len() as f64;
    let mut reports = Vec::with_capacity(clients.len());
    for (k, &(w, m)) in clients.iter().enumerate() {
        reports.push(estimation_error_bound(w, m, bpe, draws, derive_seed(seed, "client", k as u64))?);
    }
    let mut true_mean = vec![0.0; d];
    for (w, _) in clients {
        for (t, x) in true_mean.iter_mut().zip(w.as_slice()) {
            *t += x / n;
        }
    }
    let mut rng = rng_from_seed(derive_seed(seed, "aggregate", 0));
    let mut empirical = 0.0;
    let mut est_mean = vec![0.0; d];
    for _ in 0..draws {
        est_mean.fill(0.0);
        for (_, m) in clients {
            let corrupted = corrupt_mapping(m.mapping(), m.kappa(), p, &mut rng);
            for (e, &j) in est_mean.iter_mut().zip(&corrupted) {
                *e += m.centroids()[j as usize] / n;
            }
        }
        empirical += true_mean
            .iter()
            .zip(&est_mean)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>();
    }

    let mean_d_intra = reports.iter().map(|r| r.d_intra).sum::<f64>() / n;
    let mean_d_inter = reports
        .iter()
        .map(|r| r.d_inter)
        .sum::<Option<f64>>()
        .map(|s| s / n);
    let mut report = reports.swap_remove(0);
    report.clients = clients.len();
    report.mean_d_intra = mean_d_intra;
    report.mean_d_inter = mean_d_inter;
    report.bound_aggregate =
        mean_d_inter.map(|inter| d as f64 * ((1.0 - p) * mean_d_intra + p * inter) / n);
    report.empirical_aggregate = Some(empirical / draws as f64);
    Ok(report)
}

/// `‖θ* − θ′‖²` after a real filter round trip with first-match
/// reconstruction; unknown entries fall back to cluster 0.
pub fn filter_reconstruction_error(
    weights: &WeightVector,
    model: &ClusteredModel,
    arity: u8,
    bpe: BitsPerEntry,
    seed: u64,
) -> Result<f64, PrivacyError> {
    check(weights, model)?;
    let filter = FuseFilter::build(&mapping_keys(model.mapping()), arity, bpe, seed)?;
    let p = reconstruct_mapping(&filter, model.dim(), model.kappa(), seed);
    let p: Vec<u32> = p.into_iter().map(|m| if m == UNKNOWN_CLUSTER { 0 } else { m }).collect();
    Ok(squared_error(weights.as_slice(), model.centroids(), &p))
}
