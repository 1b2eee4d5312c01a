//! Wall-clock measurements shared by the CLI and the acceptance suite.

use std::time::{Duration, Instant};

use rand::Rng;

use crate::dmcfe::{encrypt, keygen, round_label, PairingCurve, PublicParams, SecurityLevel, SetupTranscript};
use crate::filter::{mapping_keys, BitsPerEntry, FilterError, FuseFilter, MappingKey};
use crate::rng::derived_rng;

/// Median and 10th/90th percentiles of a sample, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub median_ms: f64,
    pub p10_ms: f64,
    pub p90_ms: f64,
}

impl Timing {
    pub fn from_samples(samples: &[Duration]) -> Self {
        assert!(!samples.is_empty(), "no timing samples");
        let mut ms: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        let pick = |q: f64| ms[((ms.len() - 1) as f64 * q).round() as usize];
        Self {
            median_ms: if ms.len() % 2 == 1 {
                ms[ms.len() / 2]
            } else {
                (ms[ms.len() / 2 - 1] + ms[ms.len() / 2]) / 2.0
            },
            p10_ms: pick(0.1),
            p90_ms: pick(0.9),
        }
    }
}

/// One warm-up call, then `repeat` timed calls.
pub fn measure<T>(repeat: usize, mut f: impl FnMut() -> T) -> Timing {
    std::hint::black_box(f());
    let samples: Vec<Duration> = (0..repeat.max(1))
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(f());
            t.elapsed()
        })
        .collect();
    Timing::from_samples(&samples)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncryptBench {
    /// Encrypt κ centroids and build the filter over d keys.
    pub clustered: Timing,
    /// The filter build alone.
    pub filter: Timing,
    /// Encrypt all d values; `None` when not measured.
    pub full: Option<Timing>,
}

impl EncryptBench {
    /// Full-encryption median over clustered median.
    pub fn ratio(&self) -> Option<f64> {
        self.full.map(|f| f.median_ms / self.clustered.median_ms)
    }
}

/// Times one client's upload work with and without clustering. Full
/// encryption is skipped when `with_full` is false.
pub fn encrypt_cost(
    level: SecurityLevel,
    kappa: usize,
    d: usize,
    repeat: usize,
    seed: u64,
    with_full: bool,
) -> Result<EncryptBench, crate::dmcfe::DmcfeError> {
    crate::with_curve!(level, |E| encrypt_cost_on::<E>(level, kappa, d, repeat, seed, with_full))
}

fn encrypt_cost_on<E: PairingCurve>(
    level: SecurityLevel,
    kappa: usize,
    d: usize,
    repeat: usize,
    seed: u64,
    with_full: bool,
) -> Result<EncryptBench, crate::dmcfe::DmcfeError> {
    if kappa == 0 || d == 0 {
        return Err(crate::dmcfe::DmcfeError::InvalidArgument(
            "κ and d must be positive".into(),
        ));
    }
    let pp = PublicParams::<E>::setup(level, 2, seed)?;
    let t = SetupTranscript::generate(&pp, &[0, 1], seed)?;
    let kp = keygen(0, &t)?;
    let mut rng = derived_rng(seed, "bench", 0);
    let bound = 1i64 << 16;
    let centroids: Vec<i64> = (0..kappa).map(|_| rng.gen_range(-bound..=bound)).collect();
    let values: Vec<i64> = (0..d).map(|_| rng.gen_range(-bound..=bound)).collect();
    let mapping: Vec<u32> = (0..d).map(|_| rng.gen_range(0..kappa as u32)).collect();
    let keys = mapping_keys(&mapping);
    let label = round_label(1);

    let build = || FuseFilter::build(&keys, 4, BitsPerEntry::B8, seed).expect("filter builds");
    let filter = measure(repeat, build);
    let clustered = measure(repeat, || {
        (encrypt(&pp, &kp, &centroids, &label).expect("in range"), build())
    });
    let full = with_full.then(|| measure(repeat, || encrypt(&pp, &kp, &values, &label).expect("in range")));
    Ok(EncryptBench {
        clustered,
        filter,
        full,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterBench {
    pub build: Timing,
    pub bits_per_key: f64,
    pub false_positive_rate: f64,
    pub probes: usize,
}

/// Builds a filter over `d` random mapping keys and probes it with keys at
/// positions `d..d+probes`, which are never members.
pub fn filter_cost(
    d: usize,
    kappa: u32,
    arity: u8,
    bpe: BitsPerEntry,
    probes: usize,
    repeat: usize,
    seed: u64,
) -> Result<FilterBench, FilterError> {
    if kappa == 0 {
        return Err(FilterError::InvalidArgument("κ must be positive".into()));
    }
    let mut rng = derived_rng(seed, "bench-filter", 0);
    let mapping: Vec<u32> = (0..d).map(|_| rng.gen_range(0..kappa)).collect();
    let keys = mapping_keys(&mapping);
    let f = FuseFilter::build(&keys, arity, bpe, seed)?;
    let build = measure(repeat, || FuseFilter::build(&keys, arity, bpe, seed).expect("built once"));
    let hits = (0..probes)
        .filter(|&i| f.member(MappingKey::new((d + i) as u64, rng.gen_range(0..kappa))))
        .count();
    Ok(FilterBench {
        build,
        bits_per_key: f.bits_per_key(),
        false_positive_rate: hits as f64 / probes.max(1) as f64,
        probes,
    })
}
