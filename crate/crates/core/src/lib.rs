//! Privacy-preserving federated aggregation built from three pieces:
//!
//! * [`clustering`] compresses a client's weights into `κ` centroids plus a
//!   per-weight cluster index (the mapping).
//! * [`dmcfe`] encrypts the centroids with a decentralized multi-client
//!   inner-product functional encryption scheme over a pairing group.
//! * [`filter`] encodes the mapping as `(position, cluster)` keys in a seeded
//!   binary fuse filter, so only holders of the seed can query it.
//!
//! [`protocol`] wires these into a client upload and a server-side secure
//! aggregation. [`harness`] runs desk-scale federated learning experiments on
//! synthetic data and [`privacy`] evaluates reconstruction attacks and
//! estimation-error bounds.

pub mod bench;
pub mod clustering;
pub mod dmcfe;
pub mod filter;
pub mod harness;
pub mod privacy;
pub mod protocol;
pub mod rng;
pub mod wire;

pub use clustering::{ClusteredModel, WeightVector};
