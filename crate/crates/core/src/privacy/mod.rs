//! Privacy evaluation: the cluster-inference ("perfect estimation") attack,
//! lower bounds on the estimation error introduced by clustering and mapping
//! corruption, and attack-complexity bookkeeping.

mod attack;
mod bounds;

use num_bigint::BigUint;
use thiserror::Error;

use crate::clustering::ClusteringError;
use crate::filter::FilterError;
use crate::harness::HarnessError;

pub use attack::{
    attack_trial, embedding_mse, perfect_estimation_attack, weight_mse, AttackConfig,
    AttackResult, PcaFit, Setting, ATTACK_CSV_HEADER, PCA_COMPONENTS,
};
pub use bounds::{
    aggregate_error_bound, corrupt_mapping, estimation_error_bound, filter_reconstruction_error,
    inter_intra_distances, BoundInputs, ErrorBoundReport, BOUND_CSV_HEADER, NOT_APPLICABLE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrivacyError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attacker {
    /// Sees only ciphertexts: every weight could sit in any cluster.
    Blind,
    /// Knows the mappings and must match clusters to centroids.
    ServerWithMapping,
}

/// Search-space size: `κ^d` for a blind attacker, `κ!` given the mapping.
pub fn attack_complexity(d: u64, kappa: u64, attacker: Attacker) -> BigUint {
    match attacker {
        Attacker::Blind => {
            let mut out = BigUint::from(1u32);
            let k = BigUint::from(kappa);
            // Square-and-multiply; d can be large.
            let mut base = k;
            let mut e = d;
            while e > 0 {
                if e & 1 == 1 {
                    out *= &base;
                }
                base = &base * &base;
                e >>= 1;
            }
            out
        }
        Attacker::ServerWithMapping => (1..=kappa).fold(BigUint::from(1u32), |acc, k| acc * k),
    }
}

/// One-sided sign test: `P(X ≥ successes)` for `X ~ Bin(trials, 1/2)`.
pub fn sign_test_p_value(successes: usize, trials: usize) -> f64 {
    if successes == 0 {
        return 1.0;
    }
    let ln2 = std::f64::consts::LN_2;
    let mut ln_choose = 0.0; // ln C(trials, 0)
    let mut total = 0.0;
    for k in 0..=trials {
        if k > 0 {
            ln_choose += ((trials - k + 1) as f64).ln() - (k as f64).ln();
        }
        if k >= successes {
            total += (ln_choose - trials as f64 * ln2).exp();
        }
    }
    total.min(1.0)
}
