//! The cluster-inference attack: an aggregator that clusters the global
//! model and snaps each of a client's weights to the nearest aggregate
//! centroid. It needs the client's true weights, so it upper-bounds what a
//! real attacker can recover.

use nalgebra::{DMatrix, SymmetricEigen};

use super::bounds::{inter_intra_distances, NOT_APPLICABLE};
use super::PrivacyError;
use crate::clustering::{cluster_weights, nearest_centroid, ClusteredModel, WeightVector};
use crate::harness::{
    client_secret, weighted_average, Environment, ExperimentConfig, Mode, PartitionMode,
    SyntheticDataset, TinyModel,
};
use crate::protocol::clustering_seed;
use crate::rng::derive_seed;

pub const PCA_COMPONENTS: usize = 2;

pub const ATTACK_CSV_HEADER: &str =
    "seed,setting,round,mse_weight_space,mse_embedding_space,d_intra,d_inter";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    Iid,
    NonIid,
}

impl Setting {
    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Iid => "iid",
            Setting::NonIid => "noniid",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub round: u64,
    pub setting: Setting,
    /// Mean over attacked clients of the per-weight squared error.
    pub mse_weight_space: f64,
    pub mse_embedding_space: f64,
    /// Distances of the clients' weights to the aggregate centroids, averaged
    /// over clients.
    pub d_intra: f64,
    pub d_inter: Option<f64>,
}

impl AttackResult {
    pub fn csv_row(&self, seed: u64) -> String {
        format!(
            "{seed},{},{},{:.9e},{:.9e},{:.9e},{}",
            self.setting.as_str(),
            self.round,
            self.mse_weight_space,
            self.mse_embedding_space,
            self.d_intra,
            self.d_inter
                .map_or(NOT_APPLICABLE.to_string(), |v| format!("{v:.9e}"))
        )
    }
}

/// `θ̂_n[i]` = centroid of `cluster(θ_A, κ)` nearest to `θ_n[i]`.
pub fn perfect_estimation_attack(
    target: &WeightVector,
    aggregated: &WeightVector,
    kappa: usize,
    seed: u64,
) -> Result<WeightVector, PrivacyError> {
    Ok(attack_with_centroids(target, aggregated, kappa, seed)?.1)
}

fn attack_with_centroids(
    target: &WeightVector,
    aggregated: &WeightVector,
    kappa: usize,
    seed: u64,
) -> Result<(ClusteredModel, WeightVector), PrivacyError> {
    if target.len() != aggregated.len() {
        return Err(PrivacyError::InvalidArgument(format!(
            "target has {} weights, aggregate {}",
            target.len(),
            aggregated.len()
        )));
    }
    let ca = cluster_weights(aggregated, kappa, seed)?;
    let mapping: Vec<u32> = target
        .as_slice()
        .iter()
        .map(|&w| nearest_centroid(w, ca.centroids()) as u32)
        .collect();
    let snapped = ClusteredModel::new(ca.centroids().to_vec(), mapping)?;
    let estimate = snapped.reconstruct();
    Ok((snapped, estimate))
}

/// Mean squared difference per weight.
pub fn weight_mse(a: &WeightVector, b: &WeightVector) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / a.len() as f64
}

/// Which activations the principal components are fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaFit {
    /// The first model's activations only.
    Reference,
    /// Both models' activations stacked; symmetric under swapping models.
    Pooled,
}

fn activations(model: &TinyModel, data: &SyntheticDataset) -> DMatrix<f64> {
    let h = model.architecture().hidden;
    let mut out = DMatrix::zeros(data.len(), h);
    let mut row = vec![0.0; h];
    for i in 0..data.len() {
        model.hidden(data.row(i), &mut row);
        for (j, v) in row.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    out
}

/// Column means and the top principal directions (columns), with signs fixed
/// so the largest-magnitude entry is positive.
fn principal_components(a: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let (m, h) = a.shape();
    let mean: Vec<f64> = (0..h).map(|j| a.column(j).sum() / m as f64).collect();
    let mut centered = a.clone();
    for j in 0..h {
        centered.column_mut(j).add_scalar_mut(-mean[j]);
    }
    let cov = centered.transpose() * &centered / m as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..h).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
    let k = k.min(h);
    let mut v = DMatrix::zeros(h, k);
    for (c, &j) in order.iter().take(k).enumerate() {
        let col = eig.eigenvectors.column(j);
        let pivot = col.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        v.set_column(c, &(col * sign));
    }
    (mean, v)
}

fn project(a: &DMatrix<f64>, mean: &[f64], v: &DMatrix<f64>) -> DMatrix<f64> {
    let mut centered = a.clone();
    for (j, mu) in mean.iter().enumerate() {
        centered.column_mut(j).add_scalar_mut(-mu);
    }
    centered * v
}

/// Mean squared difference between the two models' hidden activations on
/// `data` after projection onto the top principal components.
pub fn embedding_mse(
    a: &TinyModel,
    b: &TinyModel,
    data: &SyntheticDataset,
    fit: PcaFit,
) -> Result<f64, PrivacyError> {
    if a.architecture() != b.architecture() {
        return Err(PrivacyError::InvalidArgument("architectures differ".into()));
    }
    if data.len() < PCA_COMPONENTS {
        return Err(PrivacyError::InvalidArgument(format!(
            "need at least {PCA_COMPONENTS} samples, got {}",
            data.len()
        )));
    }
    let xa = activations(a, data);
    let xb = activations(b, data);
    let (mean, v) = match fit {
        PcaFit::Reference => principal_components(&xa, PCA_COMPONENTS),
        PcaFit::Pooled => {
            let mut stacked = DMatrix::zeros(xa.nrows() * 2, xa.ncols());
            stacked.rows_mut(0, xa.nrows()).copy_from(&xa);
            stacked.rows_mut(xa.nrows(), xb.nrows()).copy_from(&xb);
            principal_components(&stacked, PCA_COMPONENTS)
        }
    };
    let diff = project(&xa, &mean, &v) - project(&xb, &mean, &v);
    Ok(diff.norm_squared() / diff.len() as f64)
}

/// Federated run used for the IID vs non-IID attack comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub base: ExperimentConfig,
    /// Dirichlet concentration of the non-IID setting.
    pub alpha: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            base: ExperimentConfig {
                clients: 10,
                rounds: 5,
                kappa: 32,
                mode: Mode::FedAvgWc,
                ..ExperimentConfig::default()
            },
            alpha: 0.1,
        }
    }
}

/// Runs clustered FedAvg under `setting` and attacks every participant after
/// each round, using the clients' post-training weights and the aggregate.
/// Embeddings are measured on the test split.
pub fn attack_trial(
    cfg: &AttackConfig,
    setting: Setting,
    seed: u64,
) -> Result<Vec<AttackResult>, PrivacyError> {
    let mut ec = cfg.base.clone();
    ec.seed = seed;
    ec.partition = match setting {
        Setting::Iid => PartitionMode::Iid,
        Setting::NonIid => PartitionMode::Dirichlet(cfg.alpha),
    };
    ec.validate()?;
    let env = Environment::new(&ec)?;
    let mut global = env.initial.clone();
    let mut out = Vec::with_capacity(ec.rounds);
    for round in 1..=ec.rounds as u64 {
        let ids = env.participants(&ec, round);
        let locals = env.local_models(&ec, &global, round, &ids)?;
        let samples: Vec<u64> = ids.iter().map(|&c| env.sample_count(c)).collect();
        let mut reconstructed = Vec::with_capacity(locals.len());
        for (&c, m) in ids.iter().zip(&locals) {
            let seed_c = clustering_seed(client_secret(ec.seed, c), round);
            reconstructed.push(cluster_weights(&m.to_weights()?, ec.kappa, seed_c)?.reconstruct());
        }
        let views: Vec<&[f64]> = reconstructed.iter().map(WeightVector::as_slice).collect();
        let aggregate = WeightVector::new(weighted_average(&views, &samples))?;
        global = TinyModel::from_weights(env.arch, &aggregate)?;

        let attack_seed = derive_seed(seed, "attack", round);
        let mut mse_w = 0.0;
        let mut mse_e = 0.0;
        let mut intra = 0.0;
        let mut inter = Some(0.0);
        for m in &locals {
            let target = m.to_weights()?;
            let (snapped, estimate) = attack_with_centroids(&target, &aggregate, ec.kappa, attack_seed)?;
            mse_w += weight_mse(&target, &estimate);
            let est_model = TinyModel::from_weights(env.arch, &estimate)?;
            mse_e += embedding_mse(m, &est_model, &env.test, PcaFit::Reference)?;
            let (a, b) = inter_intra_distances(&target, &snapped)?;
            intra += a;
            inter = inter.zip(b).map(|(s, x)| s + x);
        }
        let n = locals.len() as f64;
        out.push(AttackResult {
            round,
            setting,
            mse_weight_space: mse_w / n,
            mse_embedding_space: mse_e / n,
            d_intra: intra / n,
            d_inter: inter.map(|s| s / n),
        });
    }
    Ok(out)
}
