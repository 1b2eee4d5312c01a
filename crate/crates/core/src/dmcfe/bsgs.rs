//! Baby-step/giant-step discrete logarithm in the pairing target group,
//! restricted to a symmetric interval `[-bound, bound]`.

use std::collections::HashMap;
use std::hash::{BuildHasher, Hash};
use std::sync::Arc;

use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::PrimeGroup;
use ark_ff::Zero;
use rustc_hash::FxBuildHasher;

use super::curve::PairingCurve;

/// Baby steps `j·g` for `j ∈ [0, m)`, keyed by a 64-bit digest of the
/// element. Digest collisions among the looked-up elements are ignored; with
/// at most a few million entries their probability is below `2^-40` per
/// lookup.
pub struct BsgsTable<E: Pairing> {
    baby_steps: u32,
    index: HashMap<u64, u32, FxBuildHasher>,
    giant: PairingOutput<E>,
}

#[inline]
fn digest<E: Pairing>(x: &PairingOutput<E>) -> u64 {
    let mut h = FxBuildHasher.build_hasher();
    x.hash(&mut h);
    std::hash::Hasher::finish(&h)
}

impl<E: Pairing> BsgsTable<E> {
    pub fn build(base: PairingOutput<E>, baby_steps: u32) -> Self {
        let m = baby_steps.max(1);
        let mut index = HashMap::with_capacity_and_hasher(m as usize, FxBuildHasher);
        let mut cur = PairingOutput::<E>::zero();
        for j in 0..m {
            index.entry(digest(&cur)).or_insert(j);
            cur += base;
        }
        // After the loop `cur = m·base`.
        Self {
            baby_steps: m,
            index,
            giant: cur,
        }
    }

    pub fn baby_steps(&self) -> u32 {
        self.baby_steps
    }

    /// Finds `x` with `x·base = target` and `|x| ≤ bound`.
    pub fn solve(&self, target: PairingOutput<E>, bound: u64) -> Option<i64> {
        let m = u64::from(self.baby_steps);
        let max_i = bound / m + 1;
        let mut down = target; // target − i·m·base
        let mut up = target; // target + i·m·base
        for i in 0..=max_i {
            if let Some(&j) = self.index.get(&digest(&down)) {
                let x = i * m + u64::from(j);
                if x <= bound {
                    return Some(x as i64);
                }
            }
            if i > 0 {
                if let Some(&j) = self.index.get(&digest(&up)) {
                    let x = (i * m) as i64 - i64::from(j);
                    if x as u64 <= bound {
                        return Some(-x);
                    }
                }
            }
            down -= self.giant;
            up += self.giant;
        }
        None
    }
}

/// Shared table over the canonical generator `e(g1, g2)` of curve `E`.
pub fn shared_table<E: PairingCurve>(baby_steps: u32) -> Arc<BsgsTable<E>> {
    let mut cache = E::table_cache().lock().unwrap_or_else(|e| e.into_inner());
    cache
        .entry(baby_steps)
        .or_insert_with(|| Arc::new(BsgsTable::build(PairingOutput::<E>::generator(), baby_steps)))
        .clone()
}

/// `⌈√(2·bound + 1)⌉`, the baby-step count that balances table size against
/// the worst-case number of giant steps.
pub fn balanced_baby_steps(bound: u64) -> u32 {
    let span = 2.0 * bound as f64 + 1.0;
    (span.sqrt().ceil() as u64).clamp(1, u64::from(u32::MAX)) as u32
}
