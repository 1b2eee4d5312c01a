//! Supported pairing groups, security-level mapping and hashing into G1/G2.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use ark_ec::pairing::Pairing;
use ark_ec::short_weierstrass::{Affine, SWCurveConfig};
use ark_ec::AffineRepr;
use ark_ff::{Field, PrimeField};
use sha2::{Digest, Sha512};

use super::bsgs::BsgsTable;
use super::DmcfeError;

pub use ark_bls12_381::Bls12_381;
pub use ark_mnt4_298::MNT4_298 as Mnt4_298;
pub use ark_mnt4_753::MNT4_753 as Mnt4_753;

/// Identifies a concrete pairing group on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveId {
    Bls12_381,
    Mnt4_298,
    Mnt4_753,
}

impl CurveId {
    pub fn to_byte(self) -> u8 {
        match self {
            CurveId::Bls12_381 => 1,
            CurveId::Mnt4_298 => 2,
            CurveId::Mnt4_753 => 3,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            1 => Some(CurveId::Bls12_381),
            2 => Some(CurveId::Mnt4_298),
            3 => Some(CurveId::Mnt4_753),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CurveId::Bls12_381 => "BLS12-381",
            CurveId::Mnt4_298 => "MNT4-298",
            CurveId::Mnt4_753 => "MNT4-753",
        }
    }

    /// Bit length of the prime group order.
    pub fn order_bits(self) -> u32 {
        match self {
            CurveId::Bls12_381 => 255,
            CurveId::Mnt4_298 => 298,
            CurveId::Mnt4_753 => 753,
        }
    }
}

impl fmt::Display for CurveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Key-size parameter `KS`.
///
/// Each level maps to the smallest supported group whose prime order has at
/// least `KS` bits:
///
/// | KS  | group     | order bits |
/// |-----|-----------|------------|
/// | 128 | BLS12-381 | 255 |
/// | 192 | BLS12-381 | 255 |
/// | 256 | MNT4-298  | 298 |
/// | 384 | MNT4-753  | 753 |
/// | 521 | MNT4-753  | 753 |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SecurityLevel {
    Ks128,
    Ks192,
    Ks256,
    Ks384,
    Ks521,
}

impl SecurityLevel {
    pub const ALL: [SecurityLevel; 5] = [
        SecurityLevel::Ks128,
        SecurityLevel::Ks192,
        SecurityLevel::Ks256,
        SecurityLevel::Ks384,
        SecurityLevel::Ks521,
    ];

    pub fn from_bits(ks: u32) -> Result<Self, DmcfeError> {
        match ks {
            128 => Ok(SecurityLevel::Ks128),
            192 => Ok(SecurityLevel::Ks192),
            256 => Ok(SecurityLevel::Ks256),
            384 => Ok(SecurityLevel::Ks384),
            521 => Ok(SecurityLevel::Ks521),
            other => Err(DmcfeError::InvalidArgument(format!(
                "unsupported key size {other}; expected one of 128, 192, 256, 384, 521"
            ))),
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            SecurityLevel::Ks128 => 128,
            SecurityLevel::Ks192 => 192,
            SecurityLevel::Ks256 => 256,
            SecurityLevel::Ks384 => 384,
            SecurityLevel::Ks521 => 521,
        }
    }

    pub fn curve(self) -> CurveId {
        match self {
            SecurityLevel::Ks128 | SecurityLevel::Ks192 => CurveId::Bls12_381,
            SecurityLevel::Ks256 => CurveId::Mnt4_298,
            SecurityLevel::Ks384 | SecurityLevel::Ks521 => CurveId::Mnt4_753,
        }
    }
}

/// Runs `$body` with `$E` bound to the pairing type selected by a
/// [`SecurityLevel`].
#[macro_export]
macro_rules! with_curve {
    ($level:expr, |$E:ident| $body:expr) => {
        match $crate::dmcfe::SecurityLevel::curve($level) {
            $crate::dmcfe::CurveId::Bls12_381 => {
                type $E = $crate::dmcfe::Bls12_381;
                $body
            }
            $crate::dmcfe::CurveId::Mnt4_298 => {
                type $E = $crate::dmcfe::Mnt4_298;
                $body
            }
            $crate::dmcfe::CurveId::Mnt4_753 => {
                type $E = $crate::dmcfe::Mnt4_753;
                $body
            }
        }
    };
}

pub(crate) type TableCache<E> = Mutex<HashMap<u32, Arc<BsgsTable<E>>>>;

/// A pairing group usable by the scheme.
pub trait PairingCurve: Pairing {
    const ID: CurveId;

    /// Hashes `msg` into the prime-order subgroup of G1.
    fn hash_to_g1(dst: &[u8], msg: &[u8]) -> Self::G1Affine;

    /// Hashes `msg` into the prime-order subgroup of G2.
    fn hash_to_g2(dst: &[u8], msg: &[u8]) -> Self::G2Affine;

    #[doc(hidden)]
    fn table_cache() -> &'static TableCache<Self>;
}

macro_rules! impl_curve {
    ($E:ty, $id:expr, $g1:ty, $g2:ty) => {
        impl PairingCurve for $E {
            const ID: CurveId = $id;

            fn hash_to_g1(dst: &[u8], msg: &[u8]) -> Self::G1Affine {
                try_and_increment::<$g1>(dst, msg)
            }

            fn hash_to_g2(dst: &[u8], msg: &[u8]) -> Self::G2Affine {
                try_and_increment::<$g2>(dst, msg)
            }

            fn table_cache() -> &'static TableCache<Self> {
                static CACHE: OnceLock<TableCache<$E>> = OnceLock::new();
                CACHE.get_or_init(|| Mutex::new(HashMap::new()))
            }
        }
    };
}

impl_curve!(
    Bls12_381,
    CurveId::Bls12_381,
    ark_bls12_381::g1::Config,
    ark_bls12_381::g2::Config
);
impl_curve!(
    Mnt4_298,
    CurveId::Mnt4_298,
    ark_mnt4_298::g1::Config,
    ark_mnt4_298::g2::Config
);
impl_curve!(
    Mnt4_753,
    CurveId::Mnt4_753,
    ark_mnt4_753::g1::Config,
    ark_mnt4_753::g2::Config
);

/// 128 bytes of SHA-512 output bound to every input component.
fn expand(dst: &[u8], msg: &[u8], counter: u32, coeff: u8) -> [u8; 128] {
    let mut out = [0u8; 128];
    for (block, chunk) in out.chunks_mut(64).enumerate() {
        let mut h = Sha512::new();
        h.update([dst.len() as u8]);
        h.update(dst);
        h.update((msg.len() as u64).to_le_bytes());
        h.update(msg);
        h.update(counter.to_le_bytes());
        h.update([coeff, block as u8]);
        chunk.copy_from_slice(&h.finalize());
    }
    out
}

/// Try-and-increment: derive a candidate x-coordinate, take the point above it
/// if one exists, and clear the cofactor.
fn try_and_increment<P: SWCurveConfig>(dst: &[u8], msg: &[u8]) -> Affine<P> {
    let degree = P::BaseField::extension_degree() as u8;
    for counter in 0u32.. {
        let coeffs = (0..degree).map(|k| {
            <P::BaseField as Field>::BasePrimeField::from_le_bytes_mod_order(&expand(
                dst, msg, counter, k,
            ))
        });
        let x = P::BaseField::from_base_prime_field_elems(coeffs)
            .expect("coefficient count equals the extension degree");
        let greatest = expand(dst, msg, counter, 0xFF)[0] & 1 == 1;
        if let Some(p) = Affine::<P>::get_point_from_x_unchecked(x, greatest) {
            let q = p.clear_cofactor();
            if !q.is_zero() {
                return q;
            }
        }
    }
    unreachable!("counter space exhausted")
}
