//! One aggregation round: client upload preparation and server-side secure
//! aggregation.
//!
//! A client clusters its trained weights, encrypts the quantized centroids
//! (pre-scaled by its sample count) under the round label, encodes the
//! cluster-weight mapping (binary fuse filter keyed by a seed shared with the
//! server, or a Huffman code in the filter-free variant), and attaches its
//! partial key for the all-ones function over the round's participants.
//!
//! The server reconstructs every client's mapping, substitutes for each
//! weight position the ciphertext slot of the centroid that client assigned
//! to it, and decrypts the sum over clients.
//!
//! # Message layout
//!
//! All integers little-endian.
//!
//! | size | field |
//! |------|-------|
//! | 1 | version (1) |
//! | 1 | mapping kind (1 = filter, 2 = Huffman) |
//! | 4 | client id |
//! | 8 | round |
//! | 4 | κ |
//! | 8 | d |
//! | 8 | sample count |
//! | 4 + n | ciphertext |
//! | 4 + n | mapping |
//! | 4 + n | partial key |

mod codec;
mod huffman;
mod ledger;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::clustering::{cluster_weights, ClusteredModel, ClusteringError, WeightVector};
use crate::dmcfe::{
    combine_keys, derive_partial_key, encrypt, round_label, Ciphertext, ClientKeyPair,
    DmcfeError, PairingCurve, PartialDecKey, PublicParams, RoundDecryptor,
};
use crate::filter::{mapping_keys, BitsPerEntry, FilterError, FuseFilter, MappingKey};
use crate::rng::derive_seed;
use crate::wire::{put_prefixed, Reader, WireError};

pub use codec::{FixedPointCodec, OverflowPolicy, Quantized, DEFAULT_FRACTIONAL_BITS};
pub use huffman::{decode_mapping, encode_mapping};
pub use ledger::{account_round, CommunicationLedger, MessageBytes, CSV_HEADER};

pub const MESSAGE_VERSION: u8 = 1;
pub const MESSAGE_HEADER_LEN: usize = 34;
/// Reconstructed mapping entry for a position no cluster matched.
pub const UNKNOWN_CLUSTER: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("plaintext bound exceeded: {0}")]
    PlaintextBoundExceeded(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error(transparent)]
    Dmcfe(#[from] DmcfeError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
}

impl From<WireError> for ProtocolError {
    fn from(e: WireError) -> Self {
        ProtocolError::Decode(e.0)
    }
}

impl ProtocolError {
    pub fn is_label_mismatch(&self) -> bool {
        matches!(self, ProtocolError::Dmcfe(DmcfeError::LabelMismatch))
    }
}

/// How the mapping travels to the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappingEncoding {
    Filter { arity: u8, bpe: BitsPerEntry },
    Huffman,
}

impl Default for MappingEncoding {
    fn default() -> Self {
        MappingEncoding::Filter {
            arity: 4,
            bpe: BitsPerEntry::B8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Pre-scale by the client's sample count, divide by the total.
    #[default]
    BySamples,
    /// Unweighted mean over participants.
    Uniform,
}

/// Round settings shared by all clients and the server.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundParams {
    pub kappa: usize,
    pub codec: FixedPointCodec,
    pub mapping: MappingEncoding,
    pub weighting: Weighting,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MappingPayload {
    Filter(Vec<u8>),
    Huffman(Vec<u8>),
}

impl MappingPayload {
    pub fn bytes(&self) -> &[u8] {
        match self {
            MappingPayload::Filter(b) | MappingPayload::Huffman(b) => b,
        }
    }

    fn kind(&self) -> u8 {
        match self {
            MappingPayload::Filter(_) => 1,
            MappingPayload::Huffman(_) => 2,
        }
    }
}

/// One client's upload for one round.
pub struct RoundMessage<E: PairingCurve> {
    pub client_id: u32,
    pub round: u64,
    pub kappa: u32,
    pub d: u64,
    pub sample_count: u64,
    pub ciphertext: Ciphertext<E>,
    pub mapping: MappingPayload,
    pub partial_key: PartialDecKey<E>,
}

impl<E: PairingCurve> Clone for RoundMessage<E> {
    fn clone(&self) -> Self {
        Self {
            client_id: self.client_id,
            round: self.round,
            kappa: self.kappa,
            d: self.d,
            sample_count: self.sample_count,
            ciphertext: self.ciphertext.clone(),
            mapping: self.mapping.clone(),
            partial_key: self.partial_key.clone(),
        }
    }
}

impl<E: PairingCurve> std::fmt::Debug for RoundMessage<E> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RoundMessage")
            .field("client_id", &self.client_id)
            .field("round", &self.round)
            .field("kappa", &self.kappa)
            .field("d", &self.d)
            .field("sample_count", &self.sample_count)
            .field("mapping_bytes", &self.mapping.bytes().len())
            .finish_non_exhaustive()
    }
}

impl<E: PairingCurve> PartialEq for RoundMessage<E> {
    fn eq(&self, other: &Self) -> bool {
        self.client_id == other.client_id
            && self.round == other.round
            && self.kappa == other.kappa
            && self.d == other.d
            && self.sample_count == other.sample_count
            && self.ciphertext == other.ciphertext
            && self.mapping == other.mapping
            && self.partial_key == other.partial_key
    }
}

impl<E: PairingCurve> RoundMessage<E> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(MESSAGE_HEADER_LEN + self.mapping.bytes().len() + 1024);
        out.push(MESSAGE_VERSION);
        out.push(self.mapping.kind());
        out.extend_from_slice(&self.client_id.to_le_bytes());
        out.extend_from_slice(&self.round.to_le_bytes());
        out.extend_from_slice(&self.kappa.to_le_bytes());
        out.extend_from_slice(&self.d.to_le_bytes());
        out.extend_from_slice(&self.sample_count.to_le_bytes());
        put_prefixed(&mut out, &self.ciphertext.to_bytes());
        put_prefixed(&mut out, self.mapping.bytes());
        put_prefixed(&mut out, &self.partial_key.to_bytes());
        out
    }

    pub fn encoded_len(&self) -> usize {
        MESSAGE_HEADER_LEN
            + 12
            + self.ciphertext.to_bytes().len()
            + self.mapping.bytes().len()
            + self.partial_key.to_bytes().len()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(bytes);
        let version = r.u8()?;
        if version != MESSAGE_VERSION {
            return Err(ProtocolError::Decode(format!("unknown message version {version}")));
        }
        let kind = r.u8()?;
        let client_id = r.u32()?;
        let round = r.u64()?;
        let kappa = r.u32()?;
        let d = r.u64()?;
        let sample_count = r.u64()?;
        let ciphertext = Ciphertext::from_bytes(r.prefixed()?)?;
        let mapping_bytes = r.prefixed()?.to_vec();
        let mapping = match kind {
            1 => MappingPayload::Filter(mapping_bytes),
            2 => MappingPayload::Huffman(mapping_bytes),
            other => return Err(ProtocolError::Decode(format!("unknown mapping kind {other}"))),
        };
        let partial_key = PartialDecKey::from_bytes(r.prefixed()?)?;
        r.finish()?;
        if ciphertext.client_id != client_id || partial_key.client_id != client_id {
            return Err(ProtocolError::Decode("component client ids disagree".into()));
        }
        if ciphertext.slot_count() != kappa as usize {
            return Err(ProtocolError::Decode(format!(
                "ciphertext has {} slots, header says κ = {kappa}",
                ciphertext.slot_count()
            )));
        }
        Ok(Self {
            client_id,
            round,
            kappa,
            d,
            sample_count,
            ciphertext,
            mapping,
            partial_key,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClientTimings {
    pub cluster: Duration,
    pub encrypt: Duration,
    pub mapping: Duration,
    pub key: Duration,
}

/// A prepared upload plus client-side diagnostics.
pub struct ClientUpdate<E: PairingCurve> {
    pub message: RoundMessage<E>,
    pub model: ClusteredModel,
    /// Centroids clamped by the codec.
    pub saturated: usize,
    pub timings: ClientTimings,
}

/// Seed for the k-means initialization of `client_seed`'s owner in `round`.
pub fn clustering_seed(client_seed: u64, round: u64) -> u64 {
    derive_seed(client_seed, "cluster", round)
}

/// Client side of one round: cluster, quantize and encrypt the centroids,
/// encode the mapping, and derive the partial key.
pub fn client_prepare_update<E: PairingCurve>(
    pp: &PublicParams<E>,
    keypair: &ClientKeyPair<E>,
    weights: &WeightVector,
    sample_count: u64,
    round: u64,
    params: &RoundParams,
    client_seed: u64,
) -> Result<ClientUpdate<E>, ProtocolError> {
    if sample_count == 0 {
        return Err(ProtocolError::InvalidArgument("sample count must be positive".into()));
    }
    let t0 = Instant::now();
    let model = relabel_by_population(&cluster_weights(
        weights,
        params.kappa,
        clustering_seed(client_seed, round),
    )?);
    let t1 = Instant::now();
    let (message, saturated, timings) =
        encode_update(pp, keypair, &model, sample_count, round, params, client_seed)?;
    Ok(ClientUpdate {
        message,
        model,
        saturated,
        timings: ClientTimings {
            cluster: t1 - t0,
            ..timings
        },
    })
}

/// Renumbers clusters by descending population (ties by ascending centroid).
///
/// First-match reconstruction lets a false positive at a lower index preempt
/// the true cluster, so giving the low indices to the most populated
/// clusters lowers the preemption rate and turns the remaining errors into
/// pulls toward dense regions instead of a drift toward small centroids.
pub fn relabel_by_population(model: &ClusteredModel) -> ClusteredModel {
    let mut counts = vec![0usize; model.kappa()];
    for &p in model.mapping() {
        counts[p as usize] += 1;
    }
    let mut order: Vec<usize> = (0..model.kappa()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let mut new_index = vec![0u32; model.kappa()];
    for (new, &old) in order.iter().enumerate() {
        new_index[old] = new as u32;
    }
    let centroids = order.iter().map(|&j| model.centroids()[j]).collect();
    let mapping = model.mapping().iter().map(|&p| new_index[p as usize]).collect();
    ClusteredModel::new(centroids, mapping).expect("permutation of a valid model")
}

/// Builds the upload for an already clustered model, keeping its labels.
pub fn encode_update<E: PairingCurve>(
    pp: &PublicParams<E>,
    keypair: &ClientKeyPair<E>,
    model: &ClusteredModel,
    sample_count: u64,
    round: u64,
    params: &RoundParams,
    client_seed: u64,
) -> Result<(RoundMessage<E>, usize, ClientTimings), ProtocolError> {
    if params.codec.slot_bound() > pp.slot_bound() {
        return Err(ProtocolError::InvalidArgument(format!(
            "codec slot bound {} exceeds the scheme's {}",
            params.codec.slot_bound(),
            pp.slot_bound()
        )));
    }
    let scale = match params.weighting {
        Weighting::BySamples => sample_count,
        Weighting::Uniform => 1,
    };
    let label = round_label(round);

    let t0 = Instant::now();
    let mut saturated = 0;
    let mut plaintexts = Vec::with_capacity(model.kappa());
    for &c in model.centroids() {
        let q = params.codec.quantize(c, scale)?;
        saturated += q.saturated as usize;
        plaintexts.push(q.value);
    }
    let ciphertext = encrypt(pp, keypair, &plaintexts, &label)?;
    let t1 = Instant::now();

    let mapping = match params.mapping {
        MappingEncoding::Filter { arity, bpe } => {
            let filter = FuseFilter::build(&mapping_keys(model.mapping()), arity, bpe, client_seed)?;
            MappingPayload::Filter(filter.to_bytes())
        }
        MappingEncoding::Huffman => {
            MappingPayload::Huffman(encode_mapping(model.mapping(), model.kappa() as u32)?)
        }
    };
    let t2 = Instant::now();

    let ones = vec![1u64; keypair.participants().len()];
    let partial_key = derive_partial_key(pp, keypair, &ones, &label)?;
    let t3 = Instant::now();

    let message = RoundMessage {
        client_id: keypair.client_id(),
        round,
        kappa: model.kappa() as u32,
        d: model.dim() as u64,
        sample_count,
        ciphertext,
        mapping,
        partial_key,
    };
    Ok((
        message,
        saturated,
        ClientTimings {
            cluster: Duration::ZERO,
            encrypt: t1 - t0,
            mapping: t2 - t1,
            key: t3 - t2,
        },
    ))
}

/// Server-side mapping recovery: the lowest cluster index whose key is a
/// member, or [`UNKNOWN_CLUSTER`].
pub fn reconstruct_mapping(filter: &FuseFilter, d: usize, kappa: usize, seed: u64) -> Vec<u32> {
    (0..d)
        .map(|i| {
            (0..kappa as u32)
                .find(|&j| filter.member_with_seed(MappingKey::new(i as u64, j), seed))
                .unwrap_or(UNKNOWN_CLUSTER)
        })
        .collect()
}

/// Result of one secure aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateOutcome {
    pub weights: WeightVector,
    /// `(client_id, P′)` in the key's participant order.
    pub mappings: Vec<(u32, Vec<u32>)>,
    /// Positions where a client's mapping entry was unknown and slot 0 was
    /// used instead.
    pub substitute_failures: usize,
    pub total_samples: u64,
    pub reconstruct_time: Duration,
    pub decrypt_time: Duration,
}

/// SecureAggr: reconstruct mappings, substitute encrypted centroids, decrypt
/// the per-position sums and rescale. `seed_of` returns the filter seed the
/// server shares with a client.
pub fn secure_aggregate<E: PairingCurve>(
    pp: &PublicParams<E>,
    messages: &[RoundMessage<E>],
    params: &RoundParams,
    seed_of: impl Fn(u32) -> u64,
) -> Result<AggregateOutcome, ProtocolError> {
    let first = messages
        .first()
        .ok_or(DmcfeError::InsufficientCiphertexts { got: 0, need: 2 })?;
    // Replay defense first: every ciphertext and header must name one round.
    let label = &first.ciphertext.label;
    if messages
        .iter()
        .any(|m| &m.ciphertext.label != label || round_label(m.round) != *label)
    {
        return Err(DmcfeError::LabelMismatch.into());
    }
    let participants = first.partial_key.tag.participants.clone();
    if messages.len() < participants.len() {
        return Err(DmcfeError::InsufficientCiphertexts {
            got: messages.len(),
            need: participants.len(),
        }
        .into());
    }
    let (d, kappa) = (first.d as usize, first.kappa as usize);
    if messages.iter().any(|m| m.d as usize != d || m.kappa as usize != kappa) {
        return Err(ProtocolError::InvalidArgument(
            "messages disagree on d or κ".into(),
        ));
    }
    let n = participants.len() as u64;
    if n.saturating_mul(params.codec.slot_bound()) > pp.aggregate_bound() {
        return Err(ProtocolError::InvalidArgument(format!(
            "{n} clients × B_slot {} exceeds B_agg {}",
            params.codec.slot_bound(),
            pp.aggregate_bound()
        )));
    }

    let shares: Vec<PartialDecKey<E>> = messages.iter().map(|m| m.partial_key.clone()).collect();
    let dk = combine_keys(&shares)?;
    let cts: Vec<Ciphertext<E>> = messages.iter().map(|m| m.ciphertext.clone()).collect();

    let t0 = Instant::now();
    let by_client: HashMap<u32, &RoundMessage<E>> =
        messages.iter().map(|m| (m.client_id, m)).collect();
    let mut mappings = Vec::with_capacity(participants.len());
    for &id in &participants {
        let m = by_client.get(&id).ok_or(DmcfeError::InsufficientCiphertexts {
            got: messages.len(),
            need: participants.len(),
        })?;
        let mapping = match &m.mapping {
            MappingPayload::Filter(bytes) => {
                let seed = seed_of(id);
                let filter = FuseFilter::from_bytes(bytes, seed)?;
                if filter.key_count() != d {
                    return Err(ProtocolError::InvalidArgument(format!(
                        "client {id}: filter holds {} keys, expected d = {d}",
                        filter.key_count()
                    )));
                }
                reconstruct_mapping(&filter, d, kappa, seed)
            }
            MappingPayload::Huffman(bytes) => decode_mapping(bytes, d, kappa as u32)?,
        };
        mappings.push((id, mapping));
    }
    let t1 = Instant::now();

    let decryptor = RoundDecryptor::new(pp, &dk, &cts)?;
    let total_samples: u64 = messages.iter().map(|m| m.sample_count).sum();
    let divisor = match params.weighting {
        Weighting::BySamples => total_samples as f64,
        Weighting::Uniform => n as f64,
    };
    let mut substitute_failures = 0;
    let mut memo: HashMap<Vec<usize>, i64> = HashMap::new();
    let mut selection = vec![0usize; mappings.len()];
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        for (slot, (_, mapping)) in selection.iter_mut().zip(&mappings) {
            *slot = match mapping[i] {
                UNKNOWN_CLUSTER => {
                    substitute_failures += 1;
                    0
                }
                j => j as usize,
            };
        }
        let sum = match memo.get(&selection) {
            Some(&v) => v,
            None => {
                let v = decryptor.decrypt_selection(&selection)?;
                memo.insert(selection.clone(), v);
                v
            }
        };
        out.push(params.codec.dequantize(sum) / divisor);
    }
    let t2 = Instant::now();

    Ok(AggregateOutcome {
        weights: WeightVector::new(out)?,
        mappings,
        substitute_failures,
        total_samples,
        reconstruct_time: t1 - t0,
        decrypt_time: t2 - t1,
    })
}

/// Plaintext reference: weighted (or uniform) mean of the reconstructed
/// clustered models.
pub fn clustered_plaintext_average(
    models: &[(&ClusteredModel, u64)],
    weighting: Weighting,
) -> Result<WeightVector, ProtocolError> {
    let Some((first, _)) = models.first() else {
        return Err(ProtocolError::InvalidArgument("no models to average".into()));
    };
    let d = first.dim();
    if models.iter().any(|(m, _)| m.dim() != d) {
        return Err(ProtocolError::InvalidArgument("models differ in dimension".into()));
    }
    let weight = |s: u64| match weighting {
        Weighting::BySamples => s as f64,
        Weighting::Uniform => 1.0,
    };
    let total: f64 = models.iter().map(|&(_, s)| weight(s)).sum();
    let mut acc = vec![0.0; d];
    for &(m, s) in models {
        let w = weight(s);
        for (a, &p) in acc.iter_mut().zip(m.mapping()) {
            *a += w * m.centroids()[p as usize];
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(WeightVector::new(acc)?)
}
