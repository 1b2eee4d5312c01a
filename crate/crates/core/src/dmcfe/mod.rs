//! Decentralized multi-client functional encryption for inner products.
//!
//! Pairing-based construction with additive notation, generators `g1 ∈ G1`,
//! `g2 ∈ G2` and `gT = e(g1, g2)`:
//!
//! * Client `i` holds `s_i ∈ Zp²` and a share matrix `T_i ∈ Zp^{2×2}`; a
//!   setup transcript guarantees `Σ_i T_i = 0`.
//! * Encryption of slot values `x_1..x_κ` under label `l`: with
//!   `(u_0, u_1) = H_1(l)`, each slot is `x_j·g1 + s_i0·u_0 + s_i1·u_1`. All
//!   slots of one client share the mask, which is what lets the server pick a
//!   different slot per client and still decrypt.
//! * Partial key for weights `y`: with `(v_0, v_1) = H_2(tag)`,
//!   `dk_i = T_i·v + y_i·s_i·g2`. Summing all shares cancels the `T_i·v`
//!   terms and leaves `d = Σ_i y_i·s_i·g2`.
//! * Decryption: `e(Σ_i y_i·ct_i, g2) − e(u_0, d_0) − e(u_1, d_1) = (Σ_i y_i·x_i)·gT`,
//!   and the exponent is recovered by baby-step/giant-step over
//!   `[−B_agg, B_agg]`.

mod bsgs;
mod curve;

use std::fmt;
use std::sync::Arc;

use ark_ec::pairing::PairingOutput;
use ark_ec::{AffineRepr, CurveGroup, VariableBaseMSM};
use ark_ff::{PrimeField, UniformRand, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use thiserror::Error;

use crate::rng::{derive_seed, rng_from_seed};
use crate::wire::{put_prefixed, Reader, WireError};

pub use bsgs::{balanced_baby_steps, shared_table, BsgsTable};
pub use curve::{Bls12_381, CurveId, Mnt4_298, Mnt4_753, PairingCurve, SecurityLevel};

/// Default plaintext bound per slot, `|x| ≤ B_slot`.
pub const DEFAULT_SLOT_BOUND: u64 = 1 << 26;
/// Default bound on a decrypted inner product, `|Σ y_i·x_i| ≤ B_agg`.
pub const DEFAULT_AGGREGATE_BOUND: u64 = 1 << 32;
/// Largest accepted function coefficient `y_i`.
pub const MAX_FUNCTION_COEFFICIENT: u64 = 1 << 16;
pub const WIRE_VERSION: u8 = 1;

const FIXED_BASE_WINDOWS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DmcfeError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("plaintext bound exceeded: {0}")]
    PlaintextBoundExceeded(String),
    #[error("insufficient key shares: got {got}, need {need}")]
    InsufficientShares { got: usize, need: usize },
    #[error("partial keys were issued for different functions")]
    TagMismatch,
    #[error("ciphertexts carry different labels")]
    LabelMismatch,
    #[error("insufficient ciphertexts: got {got}, need {need}")]
    InsufficientCiphertexts { got: usize, need: usize },
    #[error("aggregate outside [-{bound}, {bound}]")]
    DlogOutOfRange { bound: u64 },
    #[error("decode error: {0}")]
    Decode(String),
}

impl From<WireError> for DmcfeError {
    fn from(e: WireError) -> Self {
        DmcfeError::Decode(e.0)
    }
}

/// The label of round `r`: its decimal representation.
pub fn round_label(round: u64) -> Vec<u8> {
    round.to_string().into_bytes()
}

struct ParamsInner<E: PairingCurve> {
    level: SecurityLevel,
    clients: u32,
    seed: u64,
    slot_bound: u64,
    aggregate_bound: u64,
    baby_steps: u32,
    label_dst: Vec<u8>,
    tag_dst: Vec<u8>,
    g1: E::G1Affine,
    g2: E::G2Affine,
    g2_prepared: E::G2Prepared,
    /// `b·2^(8w)·g1` at index `256·w + b`.
    g1_table: Arc<Vec<E::G1Affine>>,
}

impl<E: PairingCurve> Clone for ParamsInner<E> {
    fn clone(&self) -> Self {
        Self {
            level: self.level,
            clients: self.clients,
            seed: self.seed,
            slot_bound: self.slot_bound,
            aggregate_bound: self.aggregate_bound,
            baby_steps: self.baby_steps,
            label_dst: self.label_dst.clone(),
            tag_dst: self.tag_dst.clone(),
            g1: self.g1,
            g2: self.g2,
            g2_prepared: self.g2_prepared.clone(),
            g1_table: self.g1_table.clone(),
        }
    }
}

/// Public parameters shared by all parties. Cheap to clone.
pub struct PublicParams<E: PairingCurve>(Arc<ParamsInner<E>>);

impl<E: PairingCurve> Clone for PublicParams<E> {
    fn clone(&self) -> Self {
        Self(self.0.clone())
    }
}

impl<E: PairingCurve> fmt::Debug for PublicParams<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PublicParams")
            .field("curve", &E::ID)
            .field("security_level", &self.0.level.bits())
            .field("clients", &self.0.clients)
            .field("seed", &self.0.seed)
            .field("slot_bound", &self.0.slot_bound)
            .field("aggregate_bound", &self.0.aggregate_bound)
            .field("baby_steps", &self.0.baby_steps)
            .finish()
    }
}

impl<E: PairingCurve> PartialEq for PublicParams<E> {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (&self.0, &other.0);
        a.level == b.level
            && a.clients == b.clients
            && a.seed == b.seed
            && a.slot_bound == b.slot_bound
            && a.aggregate_bound == b.aggregate_bound
            && a.baby_steps == b.baby_steps
            && a.label_dst == b.label_dst
            && a.tag_dst == b.tag_dst
            && a.g1 == b.g1
            && a.g2 == b.g2
    }
}

impl<E: PairingCurve> Eq for PublicParams<E> {}

/// `Setup(λ, n)`. `E` must be the group that `level` maps to.
pub fn setup<E: PairingCurve>(
    level: SecurityLevel,
    clients: u32,
    seed: u64,
) -> Result<PublicParams<E>, DmcfeError> {
    PublicParams::setup(level, clients, seed)
}

impl<E: PairingCurve> PublicParams<E> {
    pub fn setup(level: SecurityLevel, clients: u32, seed: u64) -> Result<Self, DmcfeError> {
        if level.curve() != E::ID {
            return Err(DmcfeError::InvalidArgument(format!(
                "key size {} maps to {}, not {}",
                level.bits(),
                level.curve(),
                E::ID
            )));
        }
        if clients < 2 {
            return Err(DmcfeError::InvalidArgument(format!(
                "need at least 2 clients, got {clients}"
            )));
        }
        let g1 = E::G1Affine::generator();
        let g2 = E::G2Affine::generator();
        Ok(Self(Arc::new(ParamsInner {
            level,
            clients,
            seed,
            slot_bound: DEFAULT_SLOT_BOUND,
            aggregate_bound: DEFAULT_AGGREGATE_BOUND,
            baby_steps: balanced_baby_steps(DEFAULT_AGGREGATE_BOUND),
            label_dst: format!("clustered-fe/v1/label/{seed:016x}").into_bytes(),
            tag_dst: format!("clustered-fe/v1/function/{seed:016x}").into_bytes(),
            g1,
            g2,
            g2_prepared: g2.into(),
            g1_table: Arc::new(fixed_base_table::<E>(g1)),
        })))
    }

    /// Replaces the plaintext bounds. Requires `1 ≤ slot_bound ≤ aggregate_bound < 2^62`.
    /// Resets the baby-step count to the balanced value for the new bound.
    pub fn with_bounds(&self, slot_bound: u64, aggregate_bound: u64) -> Result<Self, DmcfeError> {
        if slot_bound == 0 || slot_bound > aggregate_bound || aggregate_bound >= 1 << 62 {
            return Err(DmcfeError::InvalidArgument(format!(
                "bounds must satisfy 1 <= B_slot <= B_agg < 2^62, got {slot_bound} and {aggregate_bound}"
            )));
        }
        let mut inner = (*self.0).clone();
        inner.slot_bound = slot_bound;
        inner.aggregate_bound = aggregate_bound;
        inner.baby_steps = balanced_baby_steps(aggregate_bound);
        Ok(Self(Arc::new(inner)))
    }

    /// Sets the baby-step table size. Larger tables trade memory and a
    /// one-off build for fewer giant steps per decryption.
    pub fn with_baby_steps(&self, baby_steps: u32) -> Result<Self, DmcfeError> {
        if baby_steps == 0 {
            return Err(DmcfeError::InvalidArgument("baby-step count must be positive".into()));
        }
        let mut inner = (*self.0).clone();
        inner.baby_steps = baby_steps;
        Ok(Self(Arc::new(inner)))
    }

    pub fn curve(&self) -> CurveId {
        E::ID
    }

    pub fn security_level(&self) -> SecurityLevel {
        self.0.level
    }

    pub fn client_count(&self) -> u32 {
        self.0.clients
    }

    pub fn seed(&self) -> u64 {
        self.0.seed
    }

    pub fn slot_bound(&self) -> u64 {
        self.0.slot_bound
    }

    pub fn aggregate_bound(&self) -> u64 {
        self.0.aggregate_bound
    }

    pub fn baby_steps(&self) -> u32 {
        self.0.baby_steps
    }

    /// Bits in the prime group order.
    pub fn order_bits(&self) -> u32 {
        E::ScalarField::MODULUS_BIT_SIZE
    }

    pub fn g1_size(&self) -> usize {
        self.0.g1.compressed_size()
    }

    pub fn g2_size(&self) -> usize {
        self.0.g2.compressed_size()
    }

    /// The per-round elements `(u_0, u_1) = H_1(label)`.
    pub fn label_points(&self, label: &[u8]) -> [E::G1Affine; 2] {
        let mut msg = label.to_vec();
        msg.push(0);
        let u0 = E::hash_to_g1(&self.0.label_dst, &msg);
        *msg.last_mut().unwrap() = 1;
        let u1 = E::hash_to_g1(&self.0.label_dst, &msg);
        [u0, u1]
    }

    fn function_points(&self, tag: &FunctionTag) -> [E::G2Affine; 2] {
        let mut msg = tag.to_bytes();
        msg.push(0);
        let v0 = E::hash_to_g2(&self.0.tag_dst, &msg);
        *msg.last_mut().unwrap() = 1;
        let v1 = E::hash_to_g2(&self.0.tag_dst, &msg);
        [v0, v1]
    }

    /// `x·g1` from the fixed-base table.
    pub fn encode(&self, x: i64) -> E::G1 {
        let mut acc = E::G1::zero();
        let mut v = x.unsigned_abs();
        let mut w = 0;
        while v != 0 {
            let b = (v & 0xFF) as usize;
            if b != 0 {
                acc += self.0.g1_table[256 * w + b];
            }
            v >>= 8;
            w += 1;
        }
        if x < 0 {
            -acc
        } else {
            acc
        }
    }

    pub fn bsgs_table(&self) -> Arc<BsgsTable<E>> {
        shared_table::<E>(self.0.baby_steps)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.0;
        let mut out = vec![WIRE_VERSION, E::ID.to_byte()];
        out.extend_from_slice(&(p.level.bits() as u16).to_le_bytes());
        out.extend_from_slice(&p.clients.to_le_bytes());
        out.extend_from_slice(&p.seed.to_le_bytes());
        out.extend_from_slice(&p.slot_bound.to_le_bytes());
        out.extend_from_slice(&p.aggregate_bound.to_le_bytes());
        out.extend_from_slice(&p.baby_steps.to_le_bytes());
        put_prefixed(&mut out, &point_bytes(&p.g1));
        put_prefixed(&mut out, &point_bytes(&p.g2));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DmcfeError> {
        let mut r = Reader::new(bytes);
        read_header::<E>(&mut r)?;
        let level = SecurityLevel::from_bits(u32::from(r.u16()?))
            .map_err(|e| DmcfeError::Decode(e.to_string()))?;
        let clients = r.u32()?;
        let seed = r.u64()?;
        let slot_bound = r.u64()?;
        let aggregate_bound = r.u64()?;
        let baby_steps = r.u32()?;
        let g1: E::G1Affine = read_point(r.prefixed()?)?;
        let g2: E::G2Affine = read_point(r.prefixed()?)?;
        r.finish()?;
        let decode = |e: DmcfeError| DmcfeError::Decode(e.to_string());
        let pp = Self::setup(level, clients, seed)
            .and_then(|pp| pp.with_bounds(slot_bound, aggregate_bound))
            .and_then(|pp| pp.with_baby_steps(baby_steps))
            .map_err(decode)?;
        if pp.0.g1 != g1 || pp.0.g2 != g2 {
            return Err(DmcfeError::Decode("unexpected generators".into()));
        }
        Ok(pp)
    }
}

fn fixed_base_table<E: PairingCurve>(g1: E::G1Affine) -> Vec<E::G1Affine> {
    let mut points = Vec::with_capacity(256 * FIXED_BASE_WINDOWS);
    let mut base: E::G1 = g1.into_group();
    for _ in 0..FIXED_BASE_WINDOWS {
        let mut cur = E::G1::zero();
        for _ in 0..256 {
            points.push(cur);
            cur += base;
        }
        // `cur` is now 256·base.
        base = cur;
    }
    E::G1::normalize_batch(&points)
}

fn point_bytes<P: CanonicalSerialize>(p: &P) -> Vec<u8> {
    let mut out = Vec::with_capacity(p.compressed_size());
    p.serialize_compressed(&mut out).expect("writing to a Vec cannot fail");
    out
}

fn read_point<P: CanonicalDeserialize>(bytes: &[u8]) -> Result<P, DmcfeError> {
    P::deserialize_compressed(bytes)
        .map_err(|e| DmcfeError::Decode(format!("invalid group element: {e}")))
}

fn read_header<E: PairingCurve>(r: &mut Reader<'_>) -> Result<(), DmcfeError> {
    let version = r.u8()?;
    if version != WIRE_VERSION {
        return Err(DmcfeError::Decode(format!("unknown version {version}")));
    }
    let curve = r.u8()?;
    if CurveId::from_byte(curve) != Some(E::ID) {
        return Err(DmcfeError::Decode(format!(
            "curve byte {curve} does not name {}",
            E::ID
        )));
    }
    Ok(())
}

/// TPA-side output of key generation for one participant set: per-client
/// secrets whose share matrices sum to zero.
pub struct SetupTranscript<E: PairingCurve> {
    participants: Arc<[u32]>,
    secrets: Vec<([E::ScalarField; 2], [[E::ScalarField; 2]; 2])>,
}

impl<E: PairingCurve> fmt::Debug for SetupTranscript<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SetupTranscript")
            .field("participants", &self.participants)
            .finish_non_exhaustive()
    }
}

impl<E: PairingCurve> SetupTranscript<E> {
    /// Samples keys for `participants` (client ids, in function-vector order).
    pub fn generate(
        pp: &PublicParams<E>,
        participants: &[u32],
        seed: u64,
    ) -> Result<Self, DmcfeError> {
        if participants.len() < 2 {
            return Err(DmcfeError::InvalidArgument(format!(
                "a transcript needs at least 2 participants, got {}",
                participants.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for &id in participants {
            if id >= pp.client_count() {
                return Err(DmcfeError::InvalidArgument(format!(
                    "client id {id} outside [0, {})",
                    pp.client_count()
                )));
            }
            if !seen.insert(id) {
                return Err(DmcfeError::InvalidArgument(format!(
                    "client id {id} appears twice in the transcript"
                )));
            }
        }
        let mut rng = rng_from_seed(derive_seed(seed, "setup-transcript", pp.seed()));
        let mut sum = [[E::ScalarField::zero(); 2]; 2];
        let mut secrets = Vec::with_capacity(participants.len());
        for k in 0..participants.len() {
            let s = [E::ScalarField::rand(&mut rng), E::ScalarField::rand(&mut rng)];
            let mut t = [[E::ScalarField::zero(); 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    t[a][b] = if k + 1 == participants.len() {
                        -sum[a][b]
                    } else {
                        E::ScalarField::rand(&mut rng)
                    };
                    sum[a][b] += t[a][b];
                }
            }
            secrets.push((s, t));
        }
        Ok(Self {
            participants: participants.into(),
            secrets,
        })
    }

    pub fn participants(&self) -> &[u32] {
        &self.participants
    }
}

/// `KeyGen`: extracts client `client_id`'s keys from the transcript.
pub fn keygen<E: PairingCurve>(
    client_id: u32,
    transcript: &SetupTranscript<E>,
) -> Result<ClientKeyPair<E>, DmcfeError> {
    let index = transcript
        .participants
        .iter()
        .position(|&p| p == client_id)
        .ok_or_else(|| {
            DmcfeError::InvalidArgument(format!("client {client_id} is not in the transcript"))
        })?;
    let (s, t) = transcript.secrets[index];
    Ok(ClientKeyPair {
        client_id,
        index,
        participants: transcript.participants.clone(),
        s,
        t,
    })
}

/// Secret key `(s_i, T_i)`; the encryption key is `s_i`.
pub struct ClientKeyPair<E: PairingCurve> {
    client_id: u32,
    index: usize,
    participants: Arc<[u32]>,
    s: [E::ScalarField; 2],
    t: [[E::ScalarField; 2]; 2],
}

impl<E: PairingCurve> Clone for ClientKeyPair<E> {
    fn clone(&self) -> Self {
        Self {
            client_id: self.client_id,
            index: self.index,
            participants: self.participants.clone(),
            s: self.s,
            t: self.t,
        }
    }
}

impl<E: PairingCurve> fmt::Debug for ClientKeyPair<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClientKeyPair")
            .field("client_id", &self.client_id)
            .field("participants", &self.participants)
            .finish_non_exhaustive()
    }
}

impl<E: PairingCurve> ClientKeyPair<E> {
    pub fn client_id(&self) -> u32 {
        self.client_id
    }

    pub fn participants(&self) -> &[u32] {
        &self.participants
    }

    pub fn encryption_key(&self) -> [E::ScalarField; 2] {
        self.s
    }

    pub fn share_matrix(&self) -> [[E::ScalarField; 2]; 2] {
        self.t
    }
}

/// Description of the function `f_y` a key is issued for.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FunctionTag {
    pub participants: Vec<u32>,
    pub y: Vec<u64>,
    pub scope: Vec<u8>,
}

impl FunctionTag {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 12 * self.y.len() + self.scope.len());
        out.extend_from_slice(&(self.participants.len() as u32).to_le_bytes());
        for p in &self.participants {
            out.extend_from_slice(&p.to_le_bytes());
        }
        for y in &self.y {
            out.extend_from_slice(&y.to_le_bytes());
        }
        put_prefixed(&mut out, &self.scope);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DmcfeError> {
        let mut r = Reader::new(bytes);
        let n = r.u32()? as usize;
        if n > bytes.len() / 12 {
            return Err(DmcfeError::Decode(format!("participant count {n} too large")));
        }
        let participants = (0..n).map(|_| r.u32()).collect::<Result<_, _>>()?;
        let y = (0..n).map(|_| r.u64()).collect::<Result<_, _>>()?;
        let scope = r.prefixed()?.to_vec();
        r.finish()?;
        Ok(Self {
            participants,
            y,
            scope,
        })
    }
}

/// `dk_i`.
pub struct PartialDecKey<E: PairingCurve> {
    pub client_id: u32,
    pub tag: FunctionTag,
    pub shares: [E::G2Affine; 2],
}

impl<E: PairingCurve> Clone for PartialDecKey<E> {
    fn clone(&self) -> Self {
        Self {
            client_id: self.client_id,
            tag: self.tag.clone(),
            shares: self.shares,
        }
    }
}

impl<E: PairingCurve> fmt::Debug for PartialDecKey<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PartialDecKey")
            .field("client_id", &self.client_id)
            .field("tag", &self.tag)
            .finish_non_exhaustive()
    }
}

impl<E: PairingCurve> PartialEq for PartialDecKey<E> {
    fn eq(&self, other: &Self) -> bool {
        self.client_id == other.client_id && self.tag == other.tag && self.shares == other.shares
    }
}

impl<E: PairingCurve> PartialDecKey<E> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![WIRE_VERSION, E::ID.to_byte()];
        out.extend_from_slice(&self.client_id.to_le_bytes());
        put_prefixed(&mut out, &self.tag.to_bytes());
        let elem = self.shares[0].compressed_size();
        out.extend_from_slice(&(elem as u32).to_le_bytes());
        for s in &self.shares {
            out.extend_from_slice(&point_bytes(s));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DmcfeError> {
        let mut r = Reader::new(bytes);
        read_header::<E>(&mut r)?;
        let client_id = r.u32()?;
        let tag = FunctionTag::from_bytes(r.prefixed()?)?;
        let elem = r.u32()? as usize;
        let d0 = read_point(r.take(elem)?)?;
        let d1 = read_point(r.take(elem)?)?;
        r.finish()?;
        Ok(Self {
            client_id,
            tag,
            shares: [d0, d1],
        })
    }
}

/// `dKeyShare`: client's share of the key for `Σ_k y_k·x_k` over the
/// transcript's participants, bound to `scope`.
pub fn derive_partial_key<E: PairingCurve>(
    pp: &PublicParams<E>,
    keypair: &ClientKeyPair<E>,
    y: &[u64],
    scope: &[u8],
) -> Result<PartialDecKey<E>, DmcfeError> {
    let n = keypair.participants.len();
    if y.len() != n {
        return Err(DmcfeError::InvalidArgument(format!(
            "function vector has {} entries, transcript has {n} participants",
            y.len()
        )));
    }
    if let Some((k, &v)) = y.iter().enumerate().find(|(_, &v)| v > MAX_FUNCTION_COEFFICIENT) {
        return Err(DmcfeError::PlaintextBoundExceeded(format!(
            "y[{k}] = {v} exceeds {MAX_FUNCTION_COEFFICIENT}"
        )));
    }
    let tag = FunctionTag {
        participants: keypair.participants.to_vec(),
        y: y.to_vec(),
        scope: scope.to_vec(),
    };
    let [v0, v1] = pp.function_points(&tag);
    let yi = E::ScalarField::from(y[keypair.index]);
    let bases = [v0, v1, pp.0.g2];
    let mut shares = [E::G2::zero(); 2];
    for (a, share) in shares.iter_mut().enumerate() {
        let scalars = [keypair.t[a][0], keypair.t[a][1], yi * keypair.s[a]];
        *share = E::G2::msm(&bases, &scalars).expect("equal lengths");
    }
    let [d0, d1] = shares;
    Ok(PartialDecKey {
        client_id: keypair.client_id,
        tag,
        shares: [d0.into_affine(), d1.into_affine()],
    })
}

/// `dk_f`.
pub struct FunctionalDecKey<E: PairingCurve> {
    pub tag: FunctionTag,
    pub key: [E::G2Affine; 2],
}

impl<E: PairingCurve> Clone for FunctionalDecKey<E> {
    fn clone(&self) -> Self {
        Self {
            tag: self.tag.clone(),
            key: self.key,
        }
    }
}

impl<E: PairingCurve> fmt::Debug for FunctionalDecKey<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionalDecKey")
            .field("tag", &self.tag)
            .finish_non_exhaustive()
    }
}

impl<E: PairingCurve> FunctionalDecKey<E> {
    pub fn contributing_count(&self) -> usize {
        self.tag.participants.len()
    }
}

/// `dKeyComb`: requires one share from every participant of one tag.
pub fn combine_keys<E: PairingCurve>(
    shares: &[PartialDecKey<E>],
) -> Result<FunctionalDecKey<E>, DmcfeError> {
    let Some(first) = shares.first() else {
        return Err(DmcfeError::InsufficientShares { got: 0, need: 2 });
    };
    if shares.iter().any(|s| s.tag != first.tag) {
        return Err(DmcfeError::TagMismatch);
    }
    let participants = &first.tag.participants;
    let mut seen = vec![false; participants.len()];
    for s in shares {
        let k = participants
            .iter()
            .position(|&p| p == s.client_id)
            .ok_or_else(|| {
                DmcfeError::InvalidArgument(format!(
                    "share from client {} who is not a participant",
                    s.client_id
                ))
            })?;
        if std::mem::replace(&mut seen[k], true) {
            return Err(DmcfeError::InvalidArgument(format!(
                "two shares from client {}",
                s.client_id
            )));
        }
    }
    if shares.len() != participants.len() {
        return Err(DmcfeError::InsufficientShares {
            got: shares.len(),
            need: participants.len(),
        });
    }
    let mut d = [E::G2::zero(); 2];
    for s in shares {
        d[0] += s.shares[0];
        d[1] += s.shares[1];
    }
    Ok(FunctionalDecKey {
        tag: first.tag.clone(),
        key: [d[0].into_affine(), d[1].into_affine()],
    })
}

/// `ct_{i,l}`: one G1 element per plaintext slot.
pub struct Ciphertext<E: PairingCurve> {
    pub client_id: u32,
    pub label: Vec<u8>,
    pub slots: Vec<E::G1Affine>,
}

impl<E: PairingCurve> Clone for Ciphertext<E> {
    fn clone(&self) -> Self {
        Self {
            client_id: self.client_id,
            label: self.label.clone(),
            slots: self.slots.clone(),
        }
    }
}

impl<E: PairingCurve> fmt::Debug for Ciphertext<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ciphertext")
            .field("client_id", &self.client_id)
            .field("label", &String::from_utf8_lossy(&self.label))
            .field("slot_count", &self.slots.len())
            .finish()
    }
}

impl<E: PairingCurve> PartialEq for Ciphertext<E> {
    fn eq(&self, other: &Self) -> bool {
        self.client_id == other.client_id && self.label == other.label && self.slots == other.slots
    }
}

impl<E: PairingCurve> Ciphertext<E> {
    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Serialized length for `slot_count` slots and a label of `label_len`
    /// bytes.
    pub fn encoded_len(pp: &PublicParams<E>, slot_count: usize, label_len: usize) -> usize {
        2 + 4 + 4 + label_len + 4 + 4 + slot_count * pp.g1_size()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let elem = self
            .slots
            .first()
            .map_or(0, |p| p.compressed_size());
        let mut out = Vec::with_capacity(18 + self.label.len() + elem * self.slots.len());
        out.push(WIRE_VERSION);
        out.push(E::ID.to_byte());
        out.extend_from_slice(&self.client_id.to_le_bytes());
        put_prefixed(&mut out, &self.label);
        out.extend_from_slice(&(self.slots.len() as u32).to_le_bytes());
        out.extend_from_slice(&(elem as u32).to_le_bytes());
        for p in &self.slots {
            p.serialize_compressed(&mut out).expect("writing to a Vec cannot fail");
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DmcfeError> {
        let mut r = Reader::new(bytes);
        read_header::<E>(&mut r)?;
        let client_id = r.u32()?;
        let label = r.prefixed()?.to_vec();
        if label.is_empty() {
            return Err(DmcfeError::Decode("empty label".into()));
        }
        let count = r.u32()? as usize;
        let elem = r.u32()? as usize;
        if count == 0 || elem == 0 || count.saturating_mul(elem) > bytes.len() {
            return Err(DmcfeError::Decode("inconsistent slot layout".into()));
        }
        let slots = (0..count)
            .map(|_| r.take(elem).map_err(DmcfeError::from).and_then(read_point))
            .collect::<Result<Vec<_>, _>>()?;
        r.finish()?;
        Ok(Self {
            client_id,
            label,
            slots,
        })
    }
}

/// `Enc`: encrypts `plaintexts` (one per slot) under `label`.
pub fn encrypt<E: PairingCurve>(
    pp: &PublicParams<E>,
    keypair: &ClientKeyPair<E>,
    plaintexts: &[i64],
    label: &[u8],
) -> Result<Ciphertext<E>, DmcfeError> {
    if label.is_empty() {
        return Err(DmcfeError::InvalidArgument("label must not be empty".into()));
    }
    if plaintexts.is_empty() {
        return Err(DmcfeError::InvalidArgument("nothing to encrypt".into()));
    }
    let bound = pp.slot_bound();
    if let Some((j, x)) = plaintexts
        .iter()
        .enumerate()
        .find(|(_, x)| x.unsigned_abs() > bound)
    {
        return Err(DmcfeError::PlaintextBoundExceeded(format!(
            "slot {j} holds {x}, bound is {bound}"
        )));
    }
    let [u0, u1] = pp.label_points(label);
    let mask = E::G1::msm(&[u0, u1], &keypair.s).expect("equal lengths");
    let slots: Vec<E::G1> = plaintexts.iter().map(|&x| pp.encode(x) + mask).collect();
    Ok(Ciphertext {
        client_id: keypair.client_id,
        label: label.to_vec(),
        slots: E::G1::normalize_batch(&slots),
    })
}

/// Checks labels, then orders `cts` by the key's participant list.
fn order_ciphertexts<'a, E: PairingCurve>(
    dk: &FunctionalDecKey<E>,
    cts: &'a [Ciphertext<E>],
) -> Result<Vec<&'a Ciphertext<E>>, DmcfeError> {
    let need = dk.tag.participants.len();
    let Some(first) = cts.first() else {
        return Err(DmcfeError::InsufficientCiphertexts { got: 0, need });
    };
    if cts.iter().any(|c| c.label != first.label) {
        return Err(DmcfeError::LabelMismatch);
    }
    let mut ordered: Vec<Option<&Ciphertext<E>>> = vec![None; need];
    for c in cts {
        let k = dk
            .tag
            .participants
            .iter()
            .position(|&p| p == c.client_id)
            .ok_or_else(|| {
                DmcfeError::InvalidArgument(format!(
                    "ciphertext from client {} who is not a participant",
                    c.client_id
                ))
            })?;
        if ordered[k].replace(c).is_some() {
            return Err(DmcfeError::InvalidArgument(format!(
                "two ciphertexts from client {}",
                c.client_id
            )));
        }
    }
    if cts.len() != need {
        return Err(DmcfeError::InsufficientCiphertexts {
            got: cts.len(),
            need,
        });
    }
    Ok(ordered.into_iter().map(|c| c.unwrap()).collect())
}

/// `Dec` for one slot index shared by all clients.
pub fn decrypt<E: PairingCurve>(
    pp: &PublicParams<E>,
    dk: &FunctionalDecKey<E>,
    cts: &[Ciphertext<E>],
    slot: usize,
) -> Result<i64, DmcfeError> {
    let ordered = order_ciphertexts(dk, cts)?;
    let mut sum = E::G1::zero();
    for (c, &y) in ordered.iter().zip(&dk.tag.y) {
        let p = c.slots.get(slot).ok_or_else(|| {
            DmcfeError::InvalidArgument(format!(
                "slot {slot} out of range for a {}-slot ciphertext",
                c.slots.len()
            ))
        })?;
        sum += p.mul_bigint([y]);
    }
    let [u0, u1] = pp.label_points(&ordered[0].label);
    let g1s = [
        E::G1Prepared::from(sum),
        E::G1Prepared::from(-u0.into_group()),
        E::G1Prepared::from(-u1.into_group()),
    ];
    let g2s = [
        pp.0.g2_prepared.clone(),
        E::G2Prepared::from(dk.key[0]),
        E::G2Prepared::from(dk.key[1]),
    ];
    let target = E::multi_pairing(g1s, g2s);
    let bound = pp.aggregate_bound();
    pp.bsgs_table()
        .solve(target, bound)
        .ok_or(DmcfeError::DlogOutOfRange { bound })
}

/// `Dec` for every slot: the key term is paired once, then one pairing and
/// one discrete logarithm per slot.
pub fn decrypt_all<E: PairingCurve>(
    pp: &PublicParams<E>,
    dk: &FunctionalDecKey<E>,
    cts: &[Ciphertext<E>],
) -> Result<Vec<i64>, DmcfeError> {
    let ordered = order_ciphertexts(dk, cts)?;
    let slots = ordered[0].slots.len();
    if let Some(c) = ordered.iter().find(|c| c.slots.len() != slots) {
        return Err(DmcfeError::InvalidArgument(format!(
            "client {} sent {} slots, expected {slots}",
            c.client_id,
            c.slots.len()
        )));
    }
    let [u0, u1] = pp.label_points(&ordered[0].label);
    let key_term = E::multi_pairing([u0, u1], [dk.key[0], dk.key[1]]);
    let table = pp.bsgs_table();
    let bound = pp.aggregate_bound();
    (0..slots)
        .map(|j| {
            let mut sum = E::G1::zero();
            for (c, &y) in ordered.iter().zip(&dk.tag.y) {
                sum += c.slots[j].mul_bigint([y]);
            }
            let target = E::pairing(sum, pp.0.g2_prepared.clone()) - key_term;
            table.solve(target, bound).ok_or(DmcfeError::DlogOutOfRange { bound })
        })
        .collect()
}

/// Decryption state for one round: every slot of every ciphertext is paired
/// once, after which any per-client choice of slots decrypts with target-group
/// additions and one discrete logarithm.
pub struct RoundDecryptor<E: PairingCurve> {
    paired: Vec<Vec<PairingOutput<E>>>,
    key_term: PairingOutput<E>,
    table: Arc<BsgsTable<E>>,
    bound: u64,
}

impl<E: PairingCurve> RoundDecryptor<E> {
    pub fn new(
        pp: &PublicParams<E>,
        dk: &FunctionalDecKey<E>,
        cts: &[Ciphertext<E>],
    ) -> Result<Self, DmcfeError> {
        let ordered = order_ciphertexts(dk, cts)?;
        let paired = ordered
            .iter()
            .zip(&dk.tag.y)
            .map(|(c, &y)| {
                c.slots
                    .iter()
                    .map(|p| match y {
                        0 => PairingOutput::<E>::zero(),
                        1 => E::pairing(*p, pp.0.g2_prepared.clone()),
                        _ => E::pairing(p.mul_bigint([y]), pp.0.g2_prepared.clone()),
                    })
                    .collect()
            })
            .collect();
        let [u0, u1] = pp.label_points(&ordered[0].label);
        let key_term = E::multi_pairing([u0, u1], [dk.key[0], dk.key[1]]);
        Ok(Self {
            paired,
            key_term,
            table: pp.bsgs_table(),
            bound: pp.aggregate_bound(),
        })
    }

    pub fn participant_count(&self) -> usize {
        self.paired.len()
    }

    /// Decrypts `Σ_k y_k·x_{k, slots[k]}`; `slots` follows the key's
    /// participant order.
    pub fn decrypt_selection(&self, slots: &[usize]) -> Result<i64, DmcfeError> {
        if slots.len() != self.paired.len() {
            return Err(DmcfeError::InvalidArgument(format!(
                "{} slot choices for {} participants",
                slots.len(),
                self.paired.len()
            )));
        }
        let mut acc = -self.key_term;
        for (row, &j) in self.paired.iter().zip(slots) {
            acc += row.get(j).ok_or_else(|| {
                DmcfeError::InvalidArgument(format!(
                    "slot {j} out of range for a {}-slot ciphertext",
                    row.len()
                ))
            })?;
        }
        self.table
            .solve(acc, self.bound)
            .ok_or(DmcfeError::DlogOutOfRange { bound: self.bound })
    }

    pub fn decrypt_slot(&self, slot: usize) -> Result<i64, DmcfeError> {
        self.decrypt_selection(&vec![slot; self.paired.len()])
    }
}

#[cfg(test)]
mod tests;
