//! Round loop shared by all aggregation modes.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::seq::index::sample;

use super::config::{ExperimentConfig, Mode};
use super::data::{generate_dataset_with_spread, partition, train_test_split, Partition, SyntheticDataset};
use super::model::{local_train, Architecture, TinyModel, TrainParams};
use super::HarnessError;
use crate::clustering::{cluster_weights, WeightVector};
use crate::dmcfe::{keygen, PairingCurve, PublicParams, SetupTranscript};
use crate::protocol::{
    client_prepare_update, clustered_plaintext_average, clustering_seed, secure_aggregate,
    FixedPointCodec, MappingEncoding, OverflowPolicy, ProtocolError, RoundParams, Weighting,
    UNKNOWN_CLUSTER,
};
use crate::rng::{derive_seed, derived_rng};

pub const METRICS_CSV_HEADER: &str =
    "round,mode,accuracy,uplink_bytes,bpp,ratio_vs_fedavg,enc_ms,agg_ms,mapping_mismatch_rate";

#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: u64,
    pub mode: Mode,
    pub accuracy: f64,
    pub uplink_bytes: usize,
    pub bpp: f64,
    pub ratio_vs_fedavg: f64,
    /// Mean per-client upload preparation time, excluding training.
    pub enc_ms: f64,
    pub agg_ms: f64,
    pub mapping_mismatch_rate: f64,
    pub participants: usize,
    pub saturated: usize,
}

impl RoundMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{},{:.6},{:.6},{:.3},{:.3},{:.6}",
            self.round,
            self.mode,
            self.accuracy,
            self.uplink_bytes,
            self.bpp,
            self.ratio_vs_fedavg,
            self.enc_ms,
            self.agg_ms,
            self.mapping_mismatch_rate
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentMetrics {
    pub config: ExperimentConfig,
    pub initial_accuracy: f64,
    /// Measured partition concentration (mean `Σ_c p_c²`).
    pub concentration: f64,
    pub rounds: Vec<RoundMetrics>,
    /// Global weights after each round.
    pub global_models: Vec<Vec<f64>>,
}

impl ExperimentMetrics {
    pub fn final_accuracy(&self) -> f64 {
        self.rounds.last().map_or(self.initial_accuracy, |r| r.accuracy)
    }

    /// Header line plus one row per round.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_CSV_HEADER);
        out.push('\n');
        for r in &self.rounds {
            writeln!(out, "{}", r.csv_row()).expect("write to string");
        }
        out
    }

    /// First round whose accuracy reaches `threshold`.
    pub fn rounds_to_accuracy(&self, threshold: f64) -> Option<u64> {
        self.rounds.iter().find(|r| r.accuracy >= threshold).map(|r| r.round)
    }
}

/// The filter seed a client shares with the server; also seeds its k-means.
pub fn client_secret(master: u64, client: usize) -> u64 {
    derive_seed(master, "client-secret", client as u64)
}

/// Data, split, partition and initial model derived from the master seed.
#[derive(Debug, Clone)]
pub struct Environment {
    pub train: SyntheticDataset,
    pub test: SyntheticDataset,
    pub partition: Partition,
    pub arch: Architecture,
    pub initial: TinyModel,
}

impl Environment {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let data = generate_dataset_with_spread(
            cfg.classes,
            cfg.features,
            cfg.samples,
            cfg.spread,
            derive_seed(cfg.seed, "data", 0),
        )?;
        let (train, test) = train_test_split(&data, cfg.test_fraction(), derive_seed(cfg.seed, "split", 0));
        let partition = partition(&train, cfg.clients, cfg.partition, derive_seed(cfg.seed, "partition", 0))?;
        let arch = Architecture::new(cfg.features, cfg.hidden, cfg.classes)?;
        let initial = TinyModel::init(arch, derive_seed(cfg.seed, "init", 0));
        Ok(Self {
            train,
            test,
            partition,
            arch,
            initial,
        })
    }

    /// Sorted ids of the `⌈ρM⌉` clients sampled in `round`.
    pub fn participants(&self, cfg: &ExperimentConfig, round: u64) -> Vec<usize> {
        let n = cfg.clients_per_round();
        if n >= cfg.clients {
            return (0..cfg.clients).collect();
        }
        let mut v = sample(&mut derived_rng(cfg.seed, "participants", round), cfg.clients, n).into_vec();
        v.sort_unstable();
        v
    }

    /// Local training of every participant from `global`.
    pub fn local_models(
        &self,
        cfg: &ExperimentConfig,
        global: &TinyModel,
        round: u64,
        participants: &[usize],
    ) -> Result<Vec<TinyModel>, HarnessError> {
        let tp = TrainParams {
            epochs: cfg.epochs,
            lr: cfg.lr,
            batch: cfg.batch,
        };
        let round_seed = derive_seed(cfg.seed, "train", round);
        participants
            .iter()
            .map(|&c| {
                local_train(
                    global,
                    &self.train,
                    &self.partition.shards[c],
                    tp,
                    derive_seed(round_seed, "client", c as u64),
                )
            })
            .collect()
    }

    pub fn sample_count(&self, client: usize) -> u64 {
        self.partition.shards[client].len() as u64
    }
}

/// Sample-weighted mean of parameter vectors.
pub fn weighted_average(models: &[&[f64]], weights: &[u64]) -> Vec<f64> {
    let total: f64 = weights.iter().map(|&w| w as f64).sum();
    let mut acc = vec![0.0; models.first().map_or(0, |m| m.len())];
    for (m, &w) in models.iter().zip(weights) {
        for (a, v) in acc.iter_mut().zip(m.iter()) {
            *a += w as f64 * v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    acc
}

struct StepOutcome {
    weights: Vec<f64>,
    uplink_bytes: usize,
    client_time: Duration,
    server_time: Duration,
    mismatched: usize,
    saturated: usize,
}

/// Runs `cfg.rounds` rounds under `cfg.mode`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentMetrics, HarnessError> {
    cfg.validate()?;
    let env = Environment::new(cfg)?;
    match cfg.mode {
        Mode::FedAvg => run_rounds(cfg, &env, |_, _, locals, samples| {
            let t0 = Instant::now();
            let views: Vec<&[f64]> = locals.iter().map(|m| m.params()).collect();
            let weights = weighted_average(&views, samples);
            Ok(StepOutcome {
                uplink_bytes: locals.len() * 4 * env.arch.parameter_count(),
                client_time: Duration::ZERO,
                server_time: t0.elapsed(),
                weights,
                mismatched: 0,
                saturated: 0,
            })
        }),
        Mode::FedAvgWc => run_rounds(cfg, &env, |round, ids, locals, samples| {
            let t0 = Instant::now();
            let mut models = Vec::with_capacity(locals.len());
            for (&c, m) in ids.iter().zip(locals) {
                let seed = clustering_seed(client_secret(cfg.seed, c), round);
                models.push(cluster_weights(&m.to_weights()?, cfg.kappa, seed)?);
            }
            let t1 = Instant::now();
            let pairs: Vec<_> = models.iter().zip(samples.iter().copied()).collect();
            let avg = clustered_plaintext_average(&pairs, Weighting::BySamples)
                .map_err(|source| HarnessError::RoundFailed { round, source })?;
            let d = env.arch.parameter_count();
            let index_bits = usize::BITS - (cfg.kappa.max(2) - 1).leading_zeros();
            let per_client = 4 * cfg.kappa + (d * index_bits as usize).div_ceil(8);
            Ok(StepOutcome {
                weights: avg.into_inner(),
                uplink_bytes: per_client * locals.len(),
                client_time: t1 - t0,
                server_time: t1.elapsed(),
                mismatched: 0,
                saturated: 0,
            })
        }),
        Mode::EncCluster | Mode::EncClusterNoBf => {
            let level = cfg.security_level()?;
            crate::with_curve!(level, |E| run_encrypted::<E>(cfg, &env))
        }
    }
}

fn run_encrypted<E: PairingCurve>(
    cfg: &ExperimentConfig,
    env: &Environment,
) -> Result<ExperimentMetrics, HarnessError> {
    let fail = |round: u64| move |e: crate::dmcfe::DmcfeError| HarnessError::RoundFailed {
        round,
        source: ProtocolError::from(e),
    };
    let pp = PublicParams::<E>::setup(
        cfg.security_level()?,
        cfg.clients as u32,
        derive_seed(cfg.seed, "public-params", 0),
    )
    .and_then(|pp| pp.with_bounds(cfg.slot_bound, cfg.aggregate_bound))
    .and_then(|pp| pp.with_baby_steps(cfg.baby_steps))
    .map_err(fail(0))?;
    let codec = FixedPointCodec::new(cfg.fractional_bits, cfg.slot_bound, OverflowPolicy::Saturate)
        .map_err(|source| HarnessError::RoundFailed { round: 0, source })?;
    let mapping = match cfg.mode {
        Mode::EncCluster => MappingEncoding::Filter {
            arity: cfg.arity,
            bpe: cfg.bits_per_entry()?,
        },
        _ => MappingEncoding::Huffman,
    };
    let params = RoundParams {
        kappa: cfg.kappa,
        codec,
        mapping,
        weighting: Weighting::BySamples,
    };

    run_rounds(cfg, env, |round, ids, locals, samples| {
        let ids32: Vec<u32> = ids.iter().map(|&c| c as u32).collect();
        // Fresh key material per round: the functional key must cover exactly
        // the sampled participants.
        let transcript =
            SetupTranscript::generate(&pp, &ids32, derive_seed(cfg.seed, "transcript", round))
                .map_err(fail(round))?;
        let mut updates = Vec::with_capacity(ids.len());
        let mut client_time = Duration::ZERO;
        for ((&c, m), &n) in ids.iter().zip(locals).zip(samples) {
            let kp = keygen(c as u32, &transcript).map_err(fail(round))?;
            let t0 = Instant::now();
            let u = client_prepare_update(
                &pp,
                &kp,
                &m.to_weights()?,
                n,
                round,
                &params,
                client_secret(cfg.seed, c),
            )
            .map_err(|source| HarnessError::RoundFailed { round, source })?;
            client_time += t0.elapsed();
            updates.push(u);
        }
        let messages: Vec<_> = updates.iter().map(|u| u.message.clone()).collect();
        let uplink_bytes = messages.iter().map(|m| m.encoded_len()).sum();

        let t0 = Instant::now();
        let out = secure_aggregate(&pp, &messages, &params, |id| client_secret(cfg.seed, id as usize))
            .map_err(|source| HarnessError::RoundFailed { round, source })?;
        let server_time = t0.elapsed();

        let mismatched = out
            .mappings
            .iter()
            .zip(&updates)
            .map(|((_, p), u)| {
                p.iter()
                    .zip(u.model.mapping())
                    .filter(|(a, b)| **a == UNKNOWN_CLUSTER || a != b)
                    .count()
            })
            .sum();
        Ok(StepOutcome {
            weights: out.weights.into_inner(),
            uplink_bytes,
            client_time: client_time / ids.len() as u32,
            server_time,
            mismatched,
            saturated: updates.iter().map(|u| u.saturated).sum(),
        })
    })
}

fn run_rounds(
    cfg: &ExperimentConfig,
    env: &Environment,
    mut step: impl FnMut(u64, &[usize], &[TinyModel], &[u64]) -> Result<StepOutcome, HarnessError>,
) -> Result<ExperimentMetrics, HarnessError> {
    let d = env.arch.parameter_count();
    let mut global = env.initial.clone();
    let initial_accuracy = global.accuracy(&env.test);
    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut global_models = Vec::with_capacity(cfg.rounds);
    for round in 1..=cfg.rounds as u64 {
        let ids = env.participants(cfg, round);
        let locals = env.local_models(cfg, &global, round, &ids)?;
        let samples: Vec<u64> = ids.iter().map(|&c| env.sample_count(c)).collect();
        let mut out = step(round, &ids, &locals, &samples)?;
        if cfg.mode == Mode::FedAvg {
            out.client_time = Duration::ZERO;
        }
        global = TinyModel::from_weights(env.arch, &WeightVector::new(out.weights)?)?;
        let n = ids.len();
        let baseline = (n * 4 * d) as f64;
        rounds.push(RoundMetrics {
            round,
            mode: cfg.mode,
            accuracy: global.accuracy(&env.test),
            uplink_bytes: out.uplink_bytes,
            bpp: out.uplink_bytes as f64 * 8.0 / (n * d) as f64,
            ratio_vs_fedavg: out.uplink_bytes as f64 / baseline,
            enc_ms: out.client_time.as_secs_f64() * 1e3,
            agg_ms: out.server_time.as_secs_f64() * 1e3,
            mapping_mismatch_rate: out.mismatched as f64 / (n * d) as f64,
            participants: n,
            saturated: out.saturated,
        });
        global_models.push(global.params().to_vec());
    }
    Ok(ExperimentMetrics {
        config: cfg.clone(),
        initial_accuracy,
        concentration: env.partition.concentration(&env.train),
        rounds,
        global_models,
    })
}
