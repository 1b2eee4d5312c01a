//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! `cargo test --release --test acceptance` runs everything; pass criterion
//! numbers after `--` to run a subset. The process exits non-zero on a FAIL
//! only when `ACCEPTANCE_STRICT=1`, so `cargo test --workspace` reports the
//! lines without treating a documented shortfall as a build break.

use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use clustered_fe::bench::encrypt_cost;
use clustered_fe::clustering::{cluster_weights, ClusteredModel, WeightVector};
use clustered_fe::dmcfe::{
    combine_keys, decrypt, decrypt_all, derive_partial_key, encrypt, keygen, round_label, setup, Bls12_381,
    DmcfeError, Mnt4_298, Mnt4_753, PairingCurve, PublicParams, RoundDecryptor, SecurityLevel,
    SetupTranscript,
};
use clustered_fe::filter::{mapping_keys, BitsPerEntry, FuseFilter, MappingKey};
use clustered_fe::harness::{
    generate_dataset, run_experiment, Architecture, ExperimentConfig, Mode, TinyModel,
};
use clustered_fe::privacy::{
    aggregate_error_bound, attack_trial, estimation_error_bound, sign_test_p_value, AttackConfig,
    Setting,
};
use clustered_fe::protocol::{
    account_round, client_prepare_update, clustered_plaintext_average, encode_update,
    reconstruct_mapping, secure_aggregate, FixedPointCodec, MappingEncoding, OverflowPolicy,
    RoundMessage, RoundParams, Weighting,
};
use clustered_fe::rng::{derive_seed, rng_from_seed};

type Verdict = Result<(bool, String), Box<dyn std::error::Error>>;

const BABY_STEPS: u32 = 1 << 20;

fn main() {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(u32, &str, Option<u64>, fn() -> Verdict); 14] = [
        (1, "DMCFE inner-product correctness", Some(300), c01_inner_product),
        (2, "label binding", None, c02_label_binding),
        (3, "all-n key requirement", None, c03_all_keys),
        (4, "filter false-positive rate", Some(120), c04_filter_fpr),
        (5, "mapping reconstruction at 32 bits per entry", None, c05_reconstruction),
        (6, "end-to-end oracle equivalence", Some(600), c06_oracle_equivalence),
        (7, "communication ratio", None, c07_communication),
        (8, "ratio insensitivity to key size", None, c08_key_size_sweep),
        (9, "encryption-cost separation", None, c09_encryption_cost),
        (10, "desk-scale accuracy", Some(900), c10_accuracy),
        (11, "accuracy non-decreasing in kappa", None, c11_kappa_shape),
        (12, "estimation-error lower bounds", None, c12_bounds),
        (13, "attack ordering", None, c13_attack_ordering),
        (14, "gradient sanity", None, c14_gradient),
    ];
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let verdict = run();
        let elapsed = start.elapsed();
        let (mut pass, mut detail) = match verdict {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(secs) = limit {
            if elapsed > Duration::from_secs(secs) {
                pass = false;
                detail.push_str(&format!("; over the {secs} s limit"));
            }
        }
        failed += usize::from(!pass);
        println!(
            "{} {id:>2} {name}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {failed} criteria failed");
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").as_deref() == Ok("1") {
        std::process::exit(1);
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn ks256_params(clients: u32, seed: u64) -> Result<PublicParams<Mnt4_298>, DmcfeError> {
    setup::<Mnt4_298>(SecurityLevel::Ks256, clients, seed)
}

fn c01_inner_product() -> Verdict {
    let pp = ks256_params(10, 1)?.with_bounds(1 << 10, 1 << 23)?.with_baby_steps(BABY_STEPS)?;
    let sizes = [2usize, 3, 5, 10];
    let kappas = [1usize, 16, 128];
    let trials = 1000;
    let mut exact = 0;
    let mut slots = 0;
    for t in 0..trials {
        let n = sizes[t % 4];
        let kappa = kappas[(t / 4) % 3];
        let mut rng = rng_from_seed(derive_seed(1, "trial", t as u64));
        let ids: Vec<u32> = sample(&mut rng, 10, n).iter().map(|i| i as u32).collect();
        let transcript = SetupTranscript::generate(&pp, &ids, rng.gen())?;
        let kps = ids.iter().map(|&i| keygen(i, &transcript)).collect::<Result<Vec<_>, _>>()?;
        let y: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=64)).collect();
        let xs: Vec<Vec<i64>> = (0..n)
            .map(|_| (0..kappa).map(|_| rng.gen_range(-1024..=1024)).collect())
            .collect();
        let label = round_label(t as u64);
        let cts = kps
            .iter()
            .zip(&xs)
            .map(|(k, x)| encrypt(&pp, k, x, &label))
            .collect::<Result<Vec<_>, _>>()?;
        let shares = kps
            .iter()
            .map(|k| derive_partial_key(&pp, k, &y, &label))
            .collect::<Result<Vec<_>, _>>()?;
        let dk = combine_keys(&shares)?;
        let want: Vec<i64> = (0..kappa)
            .map(|j| y.iter().zip(&xs).map(|(&yk, x)| yk as i64 * x[j]).sum())
            .collect();
        // Spot-check the single-slot path against the batch path.
        let probe = rng.gen_range(0..kappa);
        let got = decrypt_all(&pp, &dk, &cts)?;
        exact += usize::from(got == want && decrypt(&pp, &dk, &cts, probe)? == want[probe]);
        slots += kappa;
    }
    Ok((exact == trials, format!("{exact}/{trials} trials exact over {slots} slots")))
}

fn c02_label_binding() -> Verdict {
    let pp = ks256_params(6, 2)?.with_bounds(1 << 20, 1 << 28)?;
    let codec = FixedPointCodec::new(16, 1 << 20, OverflowPolicy::Saturate).map_err(err)?;
    let params = RoundParams {
        kappa: 4,
        codec,
        mapping: MappingEncoding::Filter { arity: 4, bpe: BitsPerEntry::B8 },
        weighting: Weighting::Uniform,
    };
    let normal = Normal::new(0.0, 0.2).unwrap();
    let trials = 100;
    let mut attempts = 0;
    let mut rejected = 0;
    for t in 0..trials {
        let mut rng = rng_from_seed(derive_seed(2, "trial", t as u64));
        let n = 2 + t % 5;
        let ids: Vec<u32> = (0..n as u32).collect();
        let transcript = SetupTranscript::generate(&pp, &ids, rng.gen())?;
        let kps = ids.iter().map(|&i| keygen(i, &transcript)).collect::<Result<Vec<_>, _>>()?;
        let r = rng.gen_range(1..1000u64);
        let replayed = r + rng.gen_range(1..5u64);
        let odd = rng.gen_range(0..n);

        // Scheme level: one ciphertext from another round, keys for either round.
        let cts: Vec<_> = kps
            .iter()
            .enumerate()
            .map(|(k, kp)| {
                let label = round_label(if k == odd { replayed } else { r });
                encrypt(&pp, kp, &[rng.gen_range(-100..100)], &label)
            })
            .collect::<Result<_, _>>()?;
        let ones = vec![1u64; n];
        for key_round in [r, replayed] {
            let shares = kps
                .iter()
                .map(|kp| derive_partial_key(&pp, kp, &ones, &round_label(key_round)))
                .collect::<Result<Vec<_>, _>>()?;
            let dk = combine_keys(&shares)?;
            attempts += 2;
            rejected += usize::from(matches!(decrypt(&pp, &dk, &cts, 0), Err(DmcfeError::LabelMismatch)));
            rejected += usize::from(matches!(
                RoundDecryptor::new(&pp, &dk, &cts),
                Err(DmcfeError::LabelMismatch)
            ));
        }

        // Protocol level: a whole upload replayed from another round.
        let msgs = kps
            .iter()
            .enumerate()
            .map(|(k, kp)| {
                let w = WeightVector::new((0..40).map(|_| normal.sample(&mut rng)).collect())
                    .map_err(err)?;
                let round = if k == odd { replayed } else { r };
                client_prepare_update(&pp, kp, &w, 10, round, &params, k as u64)
                    .map(|u| u.message)
                    .map_err(err)
            })
            .collect::<Result<Vec<_>, String>>()?;
        attempts += 1;
        match secure_aggregate(&pp, &msgs, &params, |id| id as u64) {
            Err(e) if e.is_label_mismatch() => rejected += 1,
            Err(_) => {}
            Ok(_) => return Ok((false, format!("trial {t}: mixed-label round decrypted"))),
        }
    }
    Ok((
        rejected == attempts,
        format!("{rejected}/{attempts} mixed-label attempts rejected with a label mismatch"),
    ))
}

fn c03_all_keys() -> Verdict {
    let pp = ks256_params(6, 3)?;
    let mut subsets = 0;
    let mut refused = 0;
    for n in 2..=6usize {
        let ids: Vec<u32> = (0..n as u32).collect();
        let transcript = SetupTranscript::generate(&pp, &ids, n as u64)?;
        let kps = ids.iter().map(|&i| keygen(i, &transcript)).collect::<Result<Vec<_>, _>>()?;
        let y: Vec<u64> = (1..=n as u64).collect();
        let label = round_label(n as u64);
        let shares = kps
            .iter()
            .map(|k| derive_partial_key(&pp, k, &y, &label))
            .collect::<Result<Vec<_>, _>>()?;
        if combine_keys(&shares).is_err() {
            return Ok((false, format!("full share set rejected for n = {n}")));
        }
        for mask in 0..(1u32 << n) - 1 {
            let subset: Vec<_> = (0..n)
                .filter(|k| mask >> k & 1 == 1)
                .map(|k| shares[k].clone())
                .collect();
            subsets += 1;
            refused += usize::from(combine_keys(&subset).is_err());
        }
    }
    Ok((refused == subsets, format!("{refused}/{subsets} proper subsets refused for n = 2..6")))
}

fn random_mapping(d: usize, kappa: usize, seed: u64) -> Vec<u32> {
    let mut rng = rng_from_seed(seed);
    (0..d).map(|_| rng.gen_range(0..kappa as u32)).collect()
}

fn c04_filter_fpr() -> Verdict {
    let (d, kappa) = (100_000usize, 128u32);
    let mapping = random_mapping(d, kappa as usize, 4);
    let filter = FuseFilter::build(&mapping_keys(&mapping), 4, BitsPerEntry::B8, 44).map_err(err)?;
    let misses = mapping
        .iter()
        .enumerate()
        .filter(|&(i, &j)| !filter.member(MappingKey::new(i as u64, j)))
        .count();
    let probes = 1_000_000;
    let mut rng = rng_from_seed(404);
    let mut hits = 0;
    for _ in 0..probes {
        let i = rng.gen_range(0..d);
        let mut j = rng.gen_range(0..kappa - 1);
        if j >= mapping[i] {
            j += 1;
        }
        hits += usize::from(filter.member(MappingKey::new(i as u64, j)));
    }
    let fpr = hits as f64 / probes as f64;
    let target = 2f64.powi(-8);
    let pass = misses == 0 && (0.5 * target..=2.0 * target).contains(&fpr);
    Ok((
        pass,
        format!(
            "FPR {fpr:.5} = {:.2} x 2^-8 over {probes} probes; {misses} false negatives over {d} keys",
            fpr / target
        ),
    ))
}

fn c05_reconstruction() -> Verdict {
    let (d, kappa) = (10_000, 128);
    let mut exact = 0;
    for t in 0..20u64 {
        let mapping = random_mapping(d, kappa, derive_seed(5, "mapping", t));
        let seed = derive_seed(5, "filter", t);
        let filter = FuseFilter::build(&mapping_keys(&mapping), 4, BitsPerEntry::B32, seed).map_err(err)?;
        let wire = FuseFilter::from_bytes(&filter.to_bytes(), seed).map_err(err)?;
        exact += usize::from(reconstruct_mapping(&wire, d, kappa, seed) == mapping);
    }
    Ok((exact == 20, format!("{exact}/20 mappings reconstructed exactly")))
}

fn c06_oracle_equivalence() -> Verdict {
    let pp = ks256_params(10, 6)?.with_bounds(1 << 24, 1 << 28)?.with_baby_steps(BABY_STEPS)?;
    let params = RoundParams {
        kappa: 128,
        codec: FixedPointCodec::new(16, 1 << 24, OverflowPolicy::Error).map_err(err)?,
        mapping: MappingEncoding::Filter { arity: 4, bpe: BitsPerEntry::B32 },
        weighting: Weighting::BySamples,
    };
    let normal = Normal::new(0.0, 0.2).unwrap();
    let mut worst_ratio = 0.0f64;
    let mut passed = 0;
    for s in 0..10u64 {
        let n = [2usize, 5, 10][s as usize % 3];
        let d = [1_000usize, 10_000][s as usize % 2];
        let mut rng = rng_from_seed(derive_seed(6, "seed", s));
        let ids: Vec<u32> = (0..n as u32).collect();
        let transcript = SetupTranscript::generate(&pp, &ids, rng.gen())?;
        let client_seed = |id: u32| derive_seed(6, "client", s * 100 + id as u64);
        let updates = ids
            .iter()
            .map(|&id| {
                let kp = keygen(id, &transcript).map_err(err)?;
                let w = WeightVector::new((0..d).map(|_| normal.sample(&mut rng)).collect())
                    .map_err(err)?;
                let samples = rng.gen_range(1..=100);
                client_prepare_update(&pp, &kp, &w, samples, s + 1, &params, client_seed(id))
                    .map_err(err)
            })
            .collect::<Result<Vec<_>, String>>()?;
        let msgs: Vec<_> = updates.iter().map(|u| u.message.clone()).collect();
        let out = secure_aggregate(&pp, &msgs, &params, client_seed).map_err(err)?;
        let models: Vec<_> = updates.iter().map(|u| (&u.model, u.message.sample_count)).collect();
        let oracle = clustered_plaintext_average(&models, params.weighting).map_err(err)?;
        let diff = out
            .weights
            .as_slice()
            .iter()
            .zip(oracle.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let tol = 2.0 * n as f64 * 2f64.powi(-16);
        worst_ratio = worst_ratio.max(diff / tol);
        passed += usize::from(diff <= tol);
    }
    Ok((
        passed == 10,
        format!("{passed}/10 seeds within 2n x 2^-16; worst max-abs error is {worst_ratio:.3} of the tolerance"),
    ))
}

/// Uplink ratio of a two-client round at key size `ks` with `d` weights.
fn round_ratio<E: PairingCurve>(ks: u32, d: usize, mapping: MappingEncoding) -> Result<(f64, f64), String> {
    let level = SecurityLevel::from_bits(ks).map_err(err)?;
    let pp = setup::<E>(level, 2, 7).map_err(err)?;
    let params = RoundParams {
        kappa: 128,
        codec: FixedPointCodec::new(16, pp.slot_bound(), OverflowPolicy::Saturate).map_err(err)?,
        mapping,
        weighting: Weighting::BySamples,
    };
    let transcript = SetupTranscript::generate(&pp, &[0, 1], 7).map_err(err)?;
    let normal = Normal::new(0.0, 0.05).unwrap();
    let mut msgs: Vec<RoundMessage<E>> = Vec::new();
    for id in 0..2u32 {
        let mut rng = rng_from_seed(derive_seed(7, "weights", id as u64));
        let w = WeightVector::new((0..d).map(|_| normal.sample(&mut rng)).collect()).map_err(err)?;
        let model = clustered_model(&w, 128, id as u64)?;
        let kp = keygen(id, &transcript).map_err(err)?;
        let (m, _, _) = encode_update(&pp, &kp, &model, 100, 1, &params, id as u64).map_err(err)?;
        msgs.push(m);
    }
    let ledger = account_round(&msgs, d);
    Ok((ledger.ratio(), ledger.ratio_excluding_keys()))
}

fn clustered_model(w: &WeightVector, kappa: usize, seed: u64) -> Result<ClusteredModel, String> {
    cluster_weights(w, kappa, seed).map_err(err)
}

fn ratio_at(ks: u32, d: usize, mapping: MappingEncoding) -> Result<(f64, f64), String> {
    match SecurityLevel::from_bits(ks).map_err(err)?.curve().name() {
        "BLS12-381" => round_ratio::<Bls12_381>(ks, d, mapping),
        "MNT4-298" => round_ratio::<Mnt4_298>(ks, d, mapping),
        _ => round_ratio::<Mnt4_753>(ks, d, mapping),
    }
}

const FILTER_B8: MappingEncoding = MappingEncoding::Filter { arity: 4, bpe: BitsPerEntry::B8 };

fn c07_communication() -> Verdict {
    let d = 100_000;
    let (filter, filter_excl) = ratio_at(256, d, FILTER_B8)?;
    let (huffman, huffman_excl) = ratio_at(256, d, MappingEncoding::Huffman)?;
    let pass = (0.25..=0.32).contains(&filter) && huffman <= 0.05;
    Ok((
        pass,
        format!(
            "filter ratio {filter:.4} ({filter_excl:.4} without keys), target [0.25, 0.32]; \
             Huffman ratio {huffman:.4} ({huffman_excl:.4} without keys), target <= 0.05"
        ),
    ))
}

fn c08_key_size_sweep() -> Verdict {
    let d = 100_000;
    let mut ratios = Vec::new();
    for ks in [128, 192, 256, 384, 521] {
        ratios.push((ks, ratio_at(ks, d, FILTER_B8)?.0));
    }
    let lo = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let listed: Vec<String> = ratios.iter().map(|(k, r)| format!("{k}:{r:.4}")).collect();
    Ok((hi - lo < 0.02, format!("spread {:.4} across {}", hi - lo, listed.join(" "))))
}

fn c09_encryption_cost() -> Verdict {
    let b = encrypt_cost(SecurityLevel::Ks256, 128, 100_000, 5, 9, true).map_err(err)?;
    let ratio = b.ratio().ok_or("full encryption was not measured")?;
    let full = b.full.map_or(f64::NAN, |t| t.median_ms);
    Ok((
        ratio >= 10.0,
        format!(
            "full {full:.1} ms vs centroids + filter {:.1} ms (filter {:.1} ms): ratio {ratio:.1}",
            b.clustered.median_ms, b.filter.median_ms
        ),
    ))
}

fn desk_config(mode: Mode, kappa: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        clients: 10,
        rounds: 20,
        participation: 1.0,
        kappa,
        mode,
        seed,
        ..ExperimentConfig::default()
    }
}

fn mean_final_accuracy(mode: Mode, kappa: usize) -> Result<(f64, Vec<f64>), String> {
    let accs = (0..5u64)
        .map(|s| run_experiment(&desk_config(mode, kappa, s)).map(|m| m.final_accuracy()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    Ok((accs.iter().sum::<f64>() / accs.len() as f64, accs))
}

fn c10_accuracy() -> Verdict {
    let (enc, enc_all) = mean_final_accuracy(Mode::EncCluster, 128)?;
    let (fed, fed_all) = mean_final_accuracy(Mode::FedAvg, 128)?;
    let gap = fed - enc;
    let worst = fed_all.iter().zip(&enc_all).map(|(f, e)| f - e).fold(f64::MIN, f64::max);
    Ok((
        gap <= 0.02,
        format!(
            "mean accuracy enccluster {enc:.4} vs fedavg {fed:.4}, gap {:.2} points (worst seed {:.2})",
            gap * 100.0,
            worst * 100.0
        ),
    ))
}

fn c11_kappa_shape() -> Verdict {
    let mut means = Vec::new();
    for kappa in [16, 32, 64, 128] {
        means.push((kappa, mean_final_accuracy(Mode::FedAvgWc, kappa)?.0));
    }
    let pass = means.windows(2).all(|w| w[1].1 >= w[0].1 - 0.01);
    let listed: Vec<String> = means.iter().map(|(k, a)| format!("{k}:{a:.4}")).collect();
    Ok((pass, format!("fedavg_wc mean final accuracy by kappa {}", listed.join(" "))))
}

fn c12_bounds() -> Verdict {
    // (d, kappa, bpe, clients)
    let configs = [(1000usize, 16usize, 8u32, 4usize), (500, 4, 2, 3), (2000, 64, 4, 8)];
    let mut total = 0;
    let mut held = 0;
    let mut min_margin = f64::INFINITY;
    for (c, &(d, kappa, bpe, clients)) in configs.iter().enumerate() {
        for t in 0..100u64 {
            let ts = derive_seed(12, "trial", c as u64 * 1000 + t);
            let weights: Vec<WeightVector> = (0..clients)
                .map(|k| {
                    let mut rng = rng_from_seed(derive_seed(ts, "weights", k as u64));
                    WeightVector::new((0..d).map(|_| rng.gen::<f64>()).collect()).unwrap()
                })
                .collect();
            let models = weights
                .iter()
                .enumerate()
                .map(|(k, w)| clustered_model(w, kappa, derive_seed(ts, "cluster", k as u64)))
                .collect::<Result<Vec<_>, _>>()?;
            let single = estimation_error_bound(&weights[0], &models[0], bpe, 100, ts).map_err(err)?;
            let inputs: Vec<_> = weights.iter().zip(&models).collect();
            let agg = aggregate_error_bound(&inputs, bpe, 100, ts).map_err(err)?;
            let present = single.bound_single.is_some() && agg.bound_aggregate.is_some();
            let ok = present && single.holds() && agg.holds();
            if let Some(b) = single.bound_single {
                min_margin = min_margin.min(single.empirical_single / b);
            }
            if let (Some(e), Some(b)) = (agg.empirical_aggregate, agg.bound_aggregate) {
                min_margin = min_margin.min(e / b);
            }
            total += 1;
            held += usize::from(ok);
        }
    }
    Ok((
        held == total,
        format!("{held}/{total} trials over {} configurations; smallest empirical/bound ratio {min_margin:.2}", configs.len()),
    ))
}

fn c13_attack_ordering() -> Verdict {
    let cfg = AttackConfig::default();
    let mut wins = 0;
    let seeds = 20;
    for seed in 0..seeds as u64 {
        let last = |s: Setting| -> Result<f64, String> {
            attack_trial(&cfg, s, seed)
                .map_err(err)?
                .last()
                .map(|r| r.mse_weight_space)
                .ok_or_else(|| "no rounds".to_string())
        };
        wins += usize::from(last(Setting::NonIid)? > last(Setting::Iid)?);
    }
    let p = sign_test_p_value(wins, seeds);
    Ok((p < 0.05, format!("non-IID MSE above IID in {wins}/{seeds} seeds, sign test p = {p:.2e}")))
}

fn c14_gradient() -> Verdict {
    let arch = Architecture::new(16, 32, 4).map_err(err)?;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in 0..10u64 {
        let data = generate_dataset(4, 16, 200, seed).map_err(err)?;
        let model = TinyModel::init(arch, seed);
        let idx: Vec<usize> = (0..64).collect();
        let g = model.gradient(&data, &idx);
        let mut rng = rng_from_seed(derive_seed(seed, "coords", 14));
        for _ in 0..10 {
            let k = rng.gen_range(0..arch.parameter_count());
            let h = 1e-5;
            let mut plus = model.clone();
            plus.params_mut()[k] += h;
            let mut minus = model.clone();
            minus.params_mut()[k] -= h;
            let fd = (plus.loss(&data, &idx) - minus.loss(&data, &idx)) / (2.0 * h);
            let scale = g[k].abs().max(fd.abs());
            // Coordinates with a vanishing gradient are compared absolutely.
            let rel = if scale < 1e-8 { (g[k] - fd).abs() } else { (g[k] - fd).abs() / scale };
            worst = worst.max(rel);
            checked += 1;
        }
    }
    Ok((worst < 1e-4, format!("worst relative error {worst:.2e} over {checked} coordinates")))
}
