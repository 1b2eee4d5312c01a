//! Seeded binary fuse filter over `(position, cluster_id)` keys.
//!
//! Each key hashes to one 64-bit value under the filter seed. The value is
//! split into `μ` array locations (one per consecutive segment window) and a
//! `ξ`-bit fingerprint; construction peels the resulting XOR system so that
//! the fingerprints stored at a member's locations XOR to its fingerprint.
//!
//! The seed never leaves the process: [`FuseFilter::to_bytes`] omits it and
//! [`FuseFilter::from_bytes`] takes it as an argument. Querying with a wrong
//! seed yields answers unrelated to the inserted keys.
//!
//! # Wire format
//!
//! All integers little-endian.
//!
//! | offset | size | field            |
//! |--------|------|------------------|
//! | 0      | 1    | format version (1) |
//! | 1      | 1    | arity `μ`        |
//! | 2      | 1    | bits per entry `ξ` |
//! | 3      | 1    | construction retries |
//! | 4      | 4    | key count        |
//! | 8      | 4    | segment length   |
//! | 12     | 4    | segment count    |
//! | 16     | 4    | array length `t` |
//! | 20     | `t·ξ/8` | fingerprints, `ξ/8` bytes each |

use thiserror::Error;

use crate::rng::splitmix64;

pub const FORMAT_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 20;
pub const MAX_RETRIES: u8 = 32;
const MAX_SEGMENT_LENGTH: u32 = 1 << 18;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FilterError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("filter construction failed after {0} seed retries")]
    ConstructionFailed(u8),
    #[error("decode error: {0}")]
    Decode(String),
}

/// One element of the key set `U = {(i, P_i)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MappingKey {
    pub position: u64,
    pub cluster_id: u32,
}

impl MappingKey {
    pub fn new(position: u64, cluster_id: u32) -> Self {
        Self {
            position,
            cluster_id,
        }
    }

    /// Position as 64-bit LE followed by cluster id as 32-bit LE.
    pub fn to_bytes(self) -> [u8; 12] {
        let mut out = [0u8; 12];
        out[..8].copy_from_slice(&self.position.to_le_bytes());
        out[8..].copy_from_slice(&self.cluster_id.to_le_bytes());
        out
    }
}

/// Builds the key set of a cluster-weight mapping.
pub fn mapping_keys(mapping: &[u32]) -> Vec<MappingKey> {
    mapping
        .iter()
        .enumerate()
        .map(|(i, &j)| MappingKey::new(i as u64, j))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitsPerEntry {
    B8,
    B16,
    B32,
}

impl BitsPerEntry {
    pub fn bits(self) -> u32 {
        match self {
            BitsPerEntry::B8 => 8,
            BitsPerEntry::B16 => 16,
            BitsPerEntry::B32 => 32,
        }
    }

    pub fn from_bits(bits: u32) -> Result<Self, FilterError> {
        match bits {
            8 => Ok(BitsPerEntry::B8),
            16 => Ok(BitsPerEntry::B16),
            32 => Ok(BitsPerEntry::B32),
            other => Err(FilterError::InvalidArgument(format!(
                "bits per entry must be 8, 16 or 32, got {other}"
            ))),
        }
    }

    fn mask(self) -> u32 {
        match self {
            BitsPerEntry::B8 => 0xFF,
            BitsPerEntry::B16 => 0xFFFF,
            BitsPerEntry::B32 => u32::MAX,
        }
    }
}

/// MurmurHash64A.
pub fn murmur64a(data: &[u8], seed: u64) -> u64 {
    const M: u64 = 0xc6a4_a793_5bd1_e995;
    const R: u32 = 47;
    let mut h = seed ^ (data.len() as u64).wrapping_mul(M);
    let mut chunks = data.chunks_exact(8);
    for chunk in &mut chunks {
        let mut k = u64::from_le_bytes(chunk.try_into().unwrap());
        k = k.wrapping_mul(M);
        k ^= k >> R;
        k = k.wrapping_mul(M);
        h ^= k;
        h = h.wrapping_mul(M);
    }
    let tail = chunks.remainder();
    if !tail.is_empty() {
        for (i, &b) in tail.iter().enumerate() {
            h ^= u64::from(b) << (8 * i);
        }
        h = h.wrapping_mul(M);
    }
    h ^= h >> R;
    h = h.wrapping_mul(M);
    h ^= h >> R;
    h
}

/// MurmurHash3 64-bit finalizer.
#[inline]
pub fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

#[inline]
fn key_hash(key: MappingKey, seed: u64) -> u64 {
    fmix64(murmur64a(&key.to_bytes(), seed))
}

#[inline]
fn fingerprint_of_hash(hash: u64, bpe: BitsPerEntry) -> u32 {
    ((hash ^ (hash >> 32)) as u32) & bpe.mask()
}

/// The `ξ`-bit fingerprint `g(key)` under `seed`.
pub fn fingerprint(key: MappingKey, seed: u64, bpe: BitsPerEntry) -> u32 {
    fingerprint_of_hash(key_hash(key, seed), bpe)
}

fn effective_seed(seed: u64, retries: u8) -> u64 {
    if retries == 0 {
        seed
    } else {
        splitmix64(seed ^ splitmix64(u64::from(retries)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    arity: u8,
    segment_length: u32,
    segment_count: u32,
    array_length: u32,
}

impl Layout {
    fn for_keys(arity: u8, key_count: usize) -> Self {
        let n = key_count.max(2) as f64;
        let (seg_exp, factor) = if arity == 3 {
            (
                (n.ln() / 3.33f64.ln() + 2.25).floor(),
                (0.875 + 0.25 * 1e6f64.ln() / n.ln()).max(1.125),
            )
        } else {
            (
                (n.ln() / 2.91f64.ln() - 0.5).floor(),
                (0.77 + 0.305 * 600_000f64.ln() / n.ln()).max(1.075),
            )
        };
        let segment_length = (1u32 << seg_exp.clamp(2.0, 18.0) as u32).min(MAX_SEGMENT_LENGTH);
        let capacity = (n * factor).round() as u32;
        let extra = u32::from(arity) - 1;
        let segments_needed = capacity.div_ceil(segment_length);
        let segment_count = segments_needed.saturating_sub(extra).max(1);
        Self {
            arity,
            segment_length,
            segment_count,
            array_length: (segment_count + extra) * segment_length,
        }
    }

    #[inline]
    fn locations(&self, hash: u64, out: &mut [usize; 4]) {
        let span = u64::from(self.segment_count) * u64::from(self.segment_length);
        let h0 = ((u128::from(hash) * u128::from(span)) >> 64) as u64;
        let mask = u64::from(self.segment_length - 1);
        let mixed = fmix64(hash ^ 0x5851_f42d_4c95_7f2d);
        const SHIFTS: [u32; 3] = [0, 21, 42];
        out[0] = h0 as usize;
        for k in 1..self.arity as usize {
            let base = h0 + k as u64 * u64::from(self.segment_length);
            out[k] = (base ^ ((mixed >> SHIFTS[k - 1]) & mask)) as usize;
        }
    }
}

/// Immutable binary fuse filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuseFilter {
    layout: Layout,
    bpe: BitsPerEntry,
    seed: u64,
    retries: u8,
    key_count: u32,
    fingerprints: Vec<u32>,
}

impl FuseFilter {
    /// Builds a filter over `keys`. Positions must be unique.
    pub fn build(
        keys: &[MappingKey],
        arity: u8,
        bpe: BitsPerEntry,
        seed: u64,
    ) -> Result<Self, FilterError> {
        if arity != 3 && arity != 4 {
            return Err(FilterError::InvalidArgument(format!(
                "arity must be 3 or 4, got {arity}"
            )));
        }
        if keys.is_empty() {
            return Err(FilterError::InvalidArgument("key set must not be empty".into()));
        }
        if keys.len() > u32::MAX as usize / 2 {
            return Err(FilterError::InvalidArgument("too many keys".into()));
        }
        check_unique_positions(keys)?;

        let layout = Layout::for_keys(arity, keys.len());
        let mut hashes = vec![0u64; keys.len()];
        for retries in 0..=MAX_RETRIES {
            let seed_r = effective_seed(seed, retries);
            for (h, k) in hashes.iter_mut().zip(keys) {
                *h = key_hash(*k, seed_r);
            }
            if let Some(fingerprints) = peel_and_assign(&layout, &hashes, bpe) {
                return Ok(Self {
                    layout,
                    bpe,
                    seed,
                    retries,
                    key_count: keys.len() as u32,
                    fingerprints,
                });
            }
        }
        Err(FilterError::ConstructionFailed(MAX_RETRIES))
    }

    /// Membership under the seed the filter was built with.
    pub fn member(&self, key: MappingKey) -> bool {
        self.member_with_seed(key, self.seed)
    }

    /// Membership when the querier believes the seed is `seed`.
    pub fn member_with_seed(&self, key: MappingKey, seed: u64) -> bool {
        let hash = key_hash(key, effective_seed(seed, self.retries));
        let mut loc = [0usize; 4];
        self.layout.locations(hash, &mut loc);
        let mut acc = fingerprint_of_hash(hash, self.bpe);
        for &l in &loc[..self.layout.arity as usize] {
            acc ^= self.fingerprints[l];
        }
        acc == 0
    }

    pub fn arity(&self) -> u8 {
        self.layout.arity
    }

    pub fn bits_per_entry(&self) -> BitsPerEntry {
        self.bpe
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn retries(&self) -> u8 {
        self.retries
    }

    pub fn key_count(&self) -> usize {
        self.key_count as usize
    }

    /// Array length `t`.
    pub fn size(&self) -> usize {
        self.fingerprints.len()
    }

    pub fn fingerprints(&self) -> &[u32] {
        &self.fingerprints
    }

    pub fn segment_length(&self) -> u32 {
        self.layout.segment_length
    }

    pub fn segment_count(&self) -> u32 {
        self.layout.segment_count
    }

    /// Fingerprint bits stored per inserted key.
    pub fn bits_per_key(&self) -> f64 {
        (self.size() as f64 * f64::from(self.bpe.bits())) / self.key_count as f64
    }

    pub fn serialized_len(&self) -> usize {
        HEADER_LEN + self.payload_len()
    }

    fn payload_len(&self) -> usize {
        self.size() * self.bpe.bits() as usize / 8
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        out.push(FORMAT_VERSION);
        out.push(self.layout.arity);
        out.push(self.bpe.bits() as u8);
        out.push(self.retries);
        out.extend_from_slice(&self.key_count.to_le_bytes());
        out.extend_from_slice(&self.layout.segment_length.to_le_bytes());
        out.extend_from_slice(&self.layout.segment_count.to_le_bytes());
        out.extend_from_slice(&self.layout.array_length.to_le_bytes());
        let width = self.bpe.bits() as usize / 8;
        for &f in &self.fingerprints {
            out.extend_from_slice(&f.to_le_bytes()[..width]);
        }
        out
    }

    /// Parses bytes produced by [`FuseFilter::to_bytes`]; `seed` is supplied
    /// out of band.
    pub fn from_bytes(bytes: &[u8], seed: u64) -> Result<Self, FilterError> {
        if bytes.len() < HEADER_LEN {
            return Err(FilterError::Decode(format!(
                "need {HEADER_LEN} header bytes, got {}",
                bytes.len()
            )));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        if bytes[0] != FORMAT_VERSION {
            return Err(FilterError::Decode(format!("unknown version {}", bytes[0])));
        }
        let arity = bytes[1];
        if arity != 3 && arity != 4 {
            return Err(FilterError::Decode(format!("bad arity {arity}")));
        }
        let bpe = BitsPerEntry::from_bits(u32::from(bytes[2]))
            .map_err(|_| FilterError::Decode(format!("bad bits per entry {}", bytes[2])))?;
        let retries = bytes[3];
        if retries > MAX_RETRIES {
            return Err(FilterError::Decode(format!("retry count {retries} out of range")));
        }
        let key_count = u32_at(4);
        let segment_length = u32_at(8);
        let segment_count = u32_at(12);
        let array_length = u32_at(16);
        if key_count == 0 {
            return Err(FilterError::Decode("zero key count".into()));
        }
        if !segment_length.is_power_of_two() || segment_length > MAX_SEGMENT_LENGTH {
            return Err(FilterError::Decode(format!("bad segment length {segment_length}")));
        }
        let expected_len = u64::from(segment_count) + u64::from(arity) - 1;
        if segment_count == 0 || expected_len * u64::from(segment_length) != u64::from(array_length) {
            return Err(FilterError::Decode("inconsistent segment layout".into()));
        }
        let width = bpe.bits() as usize / 8;
        let payload = array_length as usize * width;
        if bytes.len() != HEADER_LEN + payload {
            return Err(FilterError::Decode(format!(
                "payload is {} bytes, header implies {payload}",
                bytes.len() - HEADER_LEN
            )));
        }
        let fingerprints = bytes[HEADER_LEN..]
            .chunks_exact(width)
            .map(|c| {
                let mut b = [0u8; 4];
                b[..width].copy_from_slice(c);
                u32::from_le_bytes(b)
            })
            .collect();
        Ok(Self {
            layout: Layout {
                arity,
                segment_length,
                segment_count,
                array_length,
            },
            bpe,
            seed,
            retries,
            key_count,
            fingerprints,
        })
    }
}

pub fn build_filter(
    keys: &[MappingKey],
    arity: u8,
    bpe: BitsPerEntry,
    seed: u64,
) -> Result<FuseFilter, FilterError> {
    FuseFilter::build(keys, arity, bpe, seed)
}

pub fn member(filter: &FuseFilter, key: MappingKey) -> bool {
    filter.member(key)
}

pub fn serialize_filter(filter: &FuseFilter) -> Vec<u8> {
    filter.to_bytes()
}

pub fn deserialize_filter(bytes: &[u8], seed: u64) -> Result<FuseFilter, FilterError> {
    FuseFilter::from_bytes(bytes, seed)
}

fn check_unique_positions(keys: &[MappingKey]) -> Result<(), FilterError> {
    let max = keys.iter().map(|k| k.position).max().unwrap();
    if max < (keys.len() as u64).saturating_mul(4) {
        let mut seen = vec![false; max as usize + 1];
        for k in keys {
            let slot = &mut seen[k.position as usize];
            if *slot {
                return Err(duplicate(k.position));
            }
            *slot = true;
        }
    } else {
        let mut positions: Vec<u64> = keys.iter().map(|k| k.position).collect();
        positions.sort_unstable();
        if let Some(w) = positions.windows(2).find(|w| w[0] == w[1]) {
            return Err(duplicate(w[0]));
        }
    }
    Ok(())
}

fn duplicate(position: u64) -> FilterError {
    FilterError::InvalidArgument(format!("position {position} appears more than once"))
}

/// Peels the hypergraph defined by `hashes`; returns the fingerprint array or
/// `None` if a 2-core remains.
fn peel_and_assign(layout: &Layout, hashes: &[u64], bpe: BitsPerEntry) -> Option<Vec<u32>> {
    let len = layout.array_length as usize;
    let arity = layout.arity as usize;
    let mut count = vec![0u32; len];
    let mut xor_hash = vec![0u64; len];
    let mut loc = [0usize; 4];
    for &h in hashes {
        layout.locations(h, &mut loc);
        for &l in &loc[..arity] {
            count[l] += 1;
            xor_hash[l] ^= h;
        }
    }

    let mut queue: Vec<usize> = (0..len).filter(|&i| count[i] == 1).collect();
    // (hash, the location it was peeled from)
    let mut stack: Vec<(u64, usize)> = Vec::with_capacity(hashes.len());
    while let Some(i) = queue.pop() {
        if count[i] != 1 {
            continue;
        }
        let h = xor_hash[i];
        stack.push((h, i));
        layout.locations(h, &mut loc);
        for &l in &loc[..arity] {
            count[l] -= 1;
            xor_hash[l] ^= h;
            if count[l] == 1 {
                queue.push(l);
            }
        }
    }
    if stack.len() != hashes.len() {
        return None;
    }

    let mut fingerprints = vec![0u32; len];
    for &(h, i) in stack.iter().rev() {
        layout.locations(h, &mut loc);
        let mut f = fingerprint_of_hash(h, bpe);
        for &l in &loc[..arity] {
            if l != i {
                f ^= fingerprints[l];
            }
        }
        fingerprints[i] = f;
    }
    Some(fingerprints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_mapping(d: usize, kappa: u32, seed: u64) -> Vec<u32> {
        let mut rng = rng_from_seed(seed);
        (0..d).map(|_| rng.gen_range(0..kappa)).collect()
    }

    #[test]
    fn murmur64a_reference_values() {
        // Values from an independent script implementation of the C reference.
        assert_eq!(murmur64a(b"", 0), 0);
        assert_eq!(murmur64a(b"hello", 0), 0x1e68_d17c_457b_f117);
        assert_eq!(murmur64a(b"hello world!", 42), 0xd680_7ae4_b30e_7eed);
    }

    #[test]
    fn three_keys_are_members() {
        let keys = [MappingKey::new(0, 1), MappingKey::new(1, 0), MappingKey::new(2, 1)];
        for arity in [3, 4] {
            let f = build_filter(&keys, arity, BitsPerEntry::B8, 42).unwrap();
            assert!(keys.iter().all(|&k| f.member(k)));
        }
    }

    #[test]
    fn single_key() {
        let keys = [MappingKey::new(0, 0)];
        let f = build_filter(&keys, 4, BitsPerEntry::B16, 1).unwrap();
        assert!(f.member(keys[0]));
    }

    #[test]
    fn duplicate_position_rejected() {
        let keys = [MappingKey::new(3, 0), MappingKey::new(3, 1)];
        assert!(matches!(
            build_filter(&keys, 4, BitsPerEntry::B8, 0),
            Err(FilterError::InvalidArgument(_))
        ));
        let keys = [MappingKey::new(u64::MAX, 0), MappingKey::new(u64::MAX, 1)];
        assert!(matches!(
            build_filter(&keys, 4, BitsPerEntry::B8, 0),
            Err(FilterError::InvalidArgument(_))
        ));
    }

    #[test]
    fn bad_parameters_rejected() {
        let keys = [MappingKey::new(0, 0)];
        assert!(build_filter(&keys, 2, BitsPerEntry::B8, 0).is_err());
        assert!(build_filter(&[], 4, BitsPerEntry::B8, 0).is_err());
        assert!(BitsPerEntry::from_bits(12).is_err());
    }

    #[test]
    fn different_seeds_give_different_arrays() {
        let keys = mapping_keys(&random_mapping(200, 8, 1));
        let a = build_filter(&keys, 4, BitsPerEntry::B8, 1).unwrap();
        let b = build_filter(&keys, 4, BitsPerEntry::B8, 2).unwrap();
        assert!(a.size() >= 64);
        assert_ne!(a.fingerprints(), b.fingerprints());
    }

    #[test]
    fn fpr_at_eight_bits() {
        let d = 20_000;
        let keys = mapping_keys(&random_mapping(d, 16, 3));
        let f = build_filter(&keys, 4, BitsPerEntry::B8, 99).unwrap();
        let mut rng = rng_from_seed(11);
        let probes = 200_000;
        let mut fp = 0;
        for _ in 0..probes {
            // Positions beyond d are never members.
            let k = MappingKey::new(rng.gen_range(d as u64..u64::MAX), rng.gen());
            fp += f.member(k) as usize;
        }
        let rate = fp as f64 / probes as f64;
        let target = 1.0 / 256.0;
        assert!(rate > 0.5 * target && rate < 2.0 * target, "rate {rate}");
    }

    #[test]
    fn wrong_cluster_is_rejected_at_32_bits() {
        let mapping = random_mapping(5_000, 64, 8);
        let keys = mapping_keys(&mapping);
        let f = build_filter(&keys, 4, BitsPerEntry::B32, 5).unwrap();
        for (i, &p) in mapping.iter().enumerate() {
            for j in 0..64 {
                assert_eq!(f.member(MappingKey::new(i as u64, j)), j == p);
            }
        }
    }

    #[test]
    fn space_for_ten_thousand_keys() {
        let keys = mapping_keys(&random_mapping(10_000, 128, 4));
        for arity in [3, 4] {
            let f = build_filter(&keys, arity, BitsPerEntry::B8, 7).unwrap();
            let payload = f.serialized_len() - HEADER_LEN;
            assert!(payload as f64 <= 1.30 * 10_000.0, "arity {arity}: {payload}");
            assert!(f.bits_per_key() <= 1.30 * 8.0);
        }
    }

    #[test]
    fn fingerprint_uniform_chi_square() {
        let mut rng = rng_from_seed(21);
        let n = 1 << 16;
        let mut buckets = [0u32; 256];
        for _ in 0..n {
            let k = MappingKey::new(rng.gen(), rng.gen());
            buckets[fingerprint(k, 1234, BitsPerEntry::B8) as usize] += 1;
        }
        let expected = n as f64 / 256.0;
        let sigma = (expected * (1.0 - 1.0 / 256.0)).sqrt();
        for &b in &buckets {
            assert!((f64::from(b) - expected).abs() <= 5.0 * sigma);
        }
        let chi2: f64 = buckets
            .iter()
            .map(|&b| (f64::from(b) - expected).powi(2) / expected)
            .sum();
        // 255 degrees of freedom; mean 255, sd ≈ 22.6.
        assert!(chi2 < 255.0 + 5.0 * 22.6, "chi2 {chi2}");
    }

    #[test]
    fn fingerprint_seed_independence() {
        let mut rng = rng_from_seed(22);
        let n = 100_000;
        let mut equal = 0;
        for _ in 0..n {
            let k = MappingKey::new(rng.gen(), rng.gen());
            let s: u64 = rng.gen();
            let a = fingerprint(k, s, BitsPerEntry::B8);
            let b = fingerprint(k, s.wrapping_add(1), BitsPerEntry::B8);
            equal += (a == b) as u32;
        }
        let rate = f64::from(equal) / n as f64;
        assert!((rate - 1.0 / 256.0).abs() < 0.0015, "rate {rate}");
    }

    #[test]
    fn round_trip_and_truncation() {
        let keys = mapping_keys(&random_mapping(1000, 16, 5));
        for bpe in [BitsPerEntry::B8, BitsPerEntry::B16, BitsPerEntry::B32] {
            let f = build_filter(&keys, 4, bpe, 77).unwrap();
            let bytes = serialize_filter(&f);
            assert_eq!(bytes.len(), f.serialized_len());
            assert_eq!(bytes.len(), HEADER_LEN + (f.size() * bpe.bits() as usize).div_ceil(8));
            let g = deserialize_filter(&bytes, 77).unwrap();
            assert_eq!(f, g);
            assert!(matches!(
                deserialize_filter(&bytes[..bytes.len() - 1], 77),
                Err(FilterError::Decode(_))
            ));
            let mut extra = bytes.clone();
            extra.push(0);
            assert!(deserialize_filter(&extra, 77).is_err());
        }
    }

    #[test]
    fn malformed_headers() {
        let keys = mapping_keys(&random_mapping(100, 4, 5));
        let bytes = build_filter(&keys, 3, BitsPerEntry::B8, 1).unwrap().to_bytes();
        for (offset, value) in [(0usize, 9u8), (1, 5), (2, 7), (3, 200), (8, 3), (12, 0)] {
            let mut b = bytes.clone();
            b[offset] = value;
            if offset == 12 {
                b[12..16].copy_from_slice(&0u32.to_le_bytes());
            }
            assert!(deserialize_filter(&b, 1).is_err(), "offset {offset}");
        }
        assert!(deserialize_filter(&bytes[..10], 1).is_err());
    }

    #[test]
    fn wrong_seed_answers_are_uninformative() {
        let kappa = 8u32;
        let mapping = random_mapping(20_000, kappa, 6);
        let f = build_filter(&mapping_keys(&mapping), 4, BitsPerEntry::B8, 1000).unwrap();
        let mut hits = 0u32;
        let mut total = 0u32;
        for (i, &p) in mapping.iter().enumerate() {
            for j in 0..kappa {
                let m = f.member_with_seed(MappingKey::new(i as u64, j), 1001);
                if j == p {
                    hits += m as u32;
                    total += 1;
                }
            }
        }
        // True keys look like random probes: FPR, not 1.
        assert!(f64::from(hits) / f64::from(total) < 0.01);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn no_false_negatives(
            d in 1usize..3000,
            kappa in 1u32..300,
            seed in any::<u64>(),
            arity in 3u8..=4,
            bpe_idx in 0usize..3,
        ) {
            let bpe = [BitsPerEntry::B8, BitsPerEntry::B16, BitsPerEntry::B32][bpe_idx];
            let keys = mapping_keys(&random_mapping(d, kappa, seed));
            let f = build_filter(&keys, arity, bpe, seed).unwrap();
            for &k in &keys {
                prop_assert!(f.member(k));
            }
            let g = deserialize_filter(&f.to_bytes(), seed).unwrap();
            for &k in &keys {
                prop_assert!(g.member(k));
            }
        }
    }
}
