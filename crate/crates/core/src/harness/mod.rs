//! Desk-scale federated learning simulation: synthetic data, client
//! partitions, a tiny MLP, and rounds under each aggregation mode.

mod config;
mod data;
mod experiment;
mod model;

use thiserror::Error;

use crate::clustering::ClusteringError;
use crate::protocol::ProtocolError;

pub use config::{ExperimentConfig, Mode};
pub use data::{
    class_histogram, generate_dataset, generate_dataset_with_spread, partition, train_test_split,
    Partition, PartitionMode, SyntheticDataset, DEFAULT_SPREAD,
};
pub use experiment::{
    client_secret, run_experiment, weighted_average, Environment, ExperimentMetrics,
    RoundMetrics, METRICS_CSV_HEADER,
};
pub use model::{local_train, Architecture, TinyModel, TrainParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("round {round} failed: {source}")]
    RoundFailed { round: u64, source: ProtocolError },
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
}
