//! Experiment configuration and its flat `key = value` text form.

use std::fmt;
use std::str::FromStr;

use super::data::PartitionMode;
use super::HarnessError;
use crate::dmcfe::{SecurityLevel, DEFAULT_AGGREGATE_BOUND, DEFAULT_SLOT_BOUND};
use crate::filter::BitsPerEntry;
use crate::protocol::DEFAULT_FRACTIONAL_BITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Weighted mean of raw client weights.
    FedAvg,
    /// Cluster, then average the reconstructed weights in the clear.
    FedAvgWc,
    /// Encrypted centroids plus filter-encoded mappings.
    EncCluster,
    /// Encrypted centroids plus Huffman-coded plaintext mappings.
    EncClusterNoBf,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::FedAvg, Mode::FedAvgWc, Mode::EncCluster, Mode::EncClusterNoBf];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::FedAvg => "fedavg",
            Mode::FedAvgWc => "fedavg_wc",
            Mode::EncCluster => "enccluster",
            Mode::EncClusterNoBf => "enccluster_nobf",
        }
    }

    pub fn is_encrypted(self) -> bool {
        matches!(self, Mode::EncCluster | Mode::EncClusterNoBf)
    }

    pub fn is_clustered(self) -> bool {
        self != Mode::FedAvg
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| HarnessError::InvalidArgument(format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub clients: usize,
    pub rounds: usize,
    pub epochs: usize,
    pub participation: f64,
    pub kappa: usize,
    pub bpe: u32,
    pub arity: u8,
    pub key_size: u32,
    pub fractional_bits: u32,
    pub seed: u64,
    pub mode: Mode,
    pub partition: PartitionMode,
    pub lr: f64,
    pub batch: usize,
    pub features: usize,
    pub hidden: usize,
    pub classes: usize,
    pub samples: usize,
    pub spread: f64,
    pub slot_bound: u64,
    pub aggregate_bound: u64,
    pub baby_steps: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            clients: 30,
            rounds: 10,
            epochs: 1,
            participation: 1.0,
            kappa: 128,
            bpe: 8,
            arity: 4,
            key_size: 256,
            fractional_bits: DEFAULT_FRACTIONAL_BITS,
            seed: 0,
            mode: Mode::EncCluster,
            partition: PartitionMode::Iid,
            lr: 0.05,
            batch: 32,
            features: 16,
            hidden: 32,
            classes: 4,
            samples: 4000,
            spread: super::data::DEFAULT_SPREAD,
            slot_bound: DEFAULT_SLOT_BOUND,
            aggregate_bound: DEFAULT_AGGREGATE_BOUND,
            baby_steps: 1 << 20,
        }
    }
}

const TEST_FRACTION: f64 = 0.2;

impl ExperimentConfig {
    pub fn test_fraction(&self) -> f64 {
        TEST_FRACTION
    }

    /// `⌈ρM⌉`, computed with a small slack so that e.g. 0.1 × 30 is 3.
    pub fn clients_per_round(&self) -> usize {
        ((self.participation * self.clients as f64) - 1e-9).ceil().max(0.0) as usize
    }

    pub fn dimension(&self) -> usize {
        self.hidden * self.features + self.hidden + self.classes * self.hidden + self.classes
    }

    pub fn security_level(&self) -> Result<SecurityLevel, HarnessError> {
        SecurityLevel::from_bits(self.key_size)
            .map_err(|e| HarnessError::InvalidArgument(e.to_string()))
    }

    pub fn bits_per_entry(&self) -> Result<BitsPerEntry, HarnessError> {
        BitsPerEntry::from_bits(self.bpe).map_err(|e| HarnessError::InvalidArgument(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidArgument(m));
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return bad(format!("participation must be in (0, 1], got {}", self.participation));
        }
        let n = self.clients_per_round();
        if n < 2 {
            return bad(format!(
                "ρ·M = {} × {} gives {n} participants; at least 2 are required",
                self.participation, self.clients
            ));
        }
        if self.rounds == 0 {
            return bad("rounds must be positive".into());
        }
        if self.kappa == 0 || self.kappa > self.dimension() {
            return bad(format!("κ must be in [1, d = {}], got {}", self.dimension(), self.kappa));
        }
        if self.features == 0 || self.hidden == 0 || self.classes < 2 {
            return bad("model needs f ≥ 1, h ≥ 1, C ≥ 2".into());
        }
        if self.samples < self.classes.max(self.clients) {
            return bad(format!(
                "{} samples cannot cover {} clients and {} classes",
                self.samples, self.clients, self.classes
            ));
        }
        // Each client must keep a non-empty shard after the holdout split.
        if (self.samples as f64 * (1.0 - TEST_FRACTION)) < self.clients as f64 {
            return bad("too few training samples for the client count".into());
        }
        if self.batch == 0 || !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("batch and lr must be positive".into());
        }
        if !(self.spread.is_finite() && self.spread >= 0.0) {
            return bad(format!("bad spread {}", self.spread));
        }
        self.bits_per_entry()?;
        self.security_level()?;
        if self.arity != 3 && self.arity != 4 {
            return bad(format!("arity must be 3 or 4, got {}", self.arity));
        }
        if self.fractional_bits > 52 {
            return bad(format!("at most 52 fractional bits, got {}", self.fractional_bits));
        }
        if self.mode.is_encrypted() {
            if self.slot_bound == 0 || self.slot_bound > self.aggregate_bound {
                return bad("need 0 < B_slot ≤ B_agg".into());
            }
            if (n as u64).saturating_mul(self.slot_bound) > self.aggregate_bound {
                return bad(format!(
                    "{n} participants × B_slot {} exceeds B_agg {}",
                    self.slot_bound, self.aggregate_bound
                ));
            }
            if self.baby_steps == 0 {
                return bad("baby_steps must be positive".into());
            }
        }
        Ok(())
    }

    /// Flat `key = value` lines, parseable by [`ExperimentConfig::parse`].
    pub fn to_kv(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("clients", self.clients.to_string()),
            ("rounds", self.rounds.to_string()),
            ("epochs", self.epochs.to_string()),
            ("participation", self.participation.to_string()),
            ("clusters", self.kappa.to_string()),
            ("bpe", self.bpe.to_string()),
            ("arity", self.arity.to_string()),
            ("key_size", self.key_size.to_string()),
            ("fractional_bits", self.fractional_bits.to_string()),
            ("seed", self.seed.to_string()),
            ("mode", self.mode.to_string()),
            ("partition", self.partition.to_string()),
            ("lr", self.lr.to_string()),
            ("batch", self.batch.to_string()),
            ("features", self.features.to_string()),
            ("hidden", self.hidden.to_string()),
            ("classes", self.classes.to_string()),
            ("samples", self.samples.to_string()),
            ("spread", self.spread.to_string()),
            ("slot_bound", self.slot_bound.to_string()),
            ("aggregate_bound", self.aggregate_bound.to_string()),
            ("baby_steps", self.baby_steps.to_string()),
        ]
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, HarnessError> {
            v.parse()
                .map_err(|_| HarnessError::InvalidArgument(format!("bad value `{v}` for `{key}`")))
        }
        match key {
            "clients" => self.clients = num(key, value)?,
            "rounds" => self.rounds = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "participation" => self.participation = num(key, value)?,
            "clusters" => self.kappa = num(key, value)?,
            "bpe" => self.bpe = num(key, value)?,
            "arity" => self.arity = num(key, value)?,
            "key_size" => self.key_size = num(key, value)?,
            "fractional_bits" => self.fractional_bits = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "mode" => self.mode = value.parse()?,
            "partition" => self.partition = PartitionMode::parse(value)?,
            "lr" => self.lr = num(key, value)?,
            "batch" => self.batch = num(key, value)?,
            "features" => self.features = num(key, value)?,
            "hidden" => self.hidden = num(key, value)?,
            "classes" => self.classes = num(key, value)?,
            "samples" => self.samples = num(key, value)?,
            "spread" => self.spread = num(key, value)?,
            "slot_bound" => self.slot_bound = num(key, value)?,
            "aggregate_bound" => self.aggregate_bound = num(key, value)?,
            "baby_steps" => self.baby_steps = num(key, value)?,
            other => {
                return Err(HarnessError::InvalidArgument(format!("unknown key `{other}`")))
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                HarnessError::InvalidArgument(format!("line {}: expected key = value", n + 1))
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}
