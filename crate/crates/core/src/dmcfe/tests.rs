use super::*;
use crate::rng::rng_from_seed;
use ark_ec::pairing::Pairing;
use ark_ec::PrimeGroup;
use ark_ff::BigInteger;
use rand::Rng;

type E = Mnt4_298;

fn scalar_from_i64<F: PrimeField>(x: i64) -> F {
    let f = F::from(x.unsigned_abs());
    if x < 0 {
        -f
    } else {
        f
    }
}


fn params(n: u32) -> PublicParams<E> {
    setup::<E>(SecurityLevel::Ks256, n, 11)
        .unwrap()
        .with_bounds(1 << 20, 1 << 28)
        .unwrap()
}

fn keys(pp: &PublicParams<E>, participants: &[u32], seed: u64) -> Vec<ClientKeyPair<E>> {
    let t = SetupTranscript::generate(pp, participants, seed).unwrap();
    participants.iter().map(|&id| keygen(id, &t).unwrap()).collect()
}

fn functional_key(
    pp: &PublicParams<E>,
    kps: &[ClientKeyPair<E>],
    y: &[u64],
    scope: &[u8],
) -> FunctionalDecKey<E> {
    let shares: Vec<_> = kps
        .iter()
        .map(|k| derive_partial_key(pp, k, y, scope).unwrap())
        .collect();
    combine_keys(&shares).unwrap()
}

#[test]
fn setup_contract() {
    let pp = setup::<E>(SecurityLevel::Ks256, 30, 1).unwrap();
    assert!(pp.order_bits() >= 256);
    assert_eq!(pp.client_count(), 30);
    assert!(matches!(
        setup::<E>(SecurityLevel::Ks256, 1, 1),
        Err(DmcfeError::InvalidArgument(_))
    ));
    assert!(matches!(
        setup::<E>(SecurityLevel::Ks128, 3, 1),
        Err(DmcfeError::InvalidArgument(_))
    ));
    assert_eq!(pp, setup::<E>(SecurityLevel::Ks256, 30, 1).unwrap());
    assert_ne!(pp, setup::<E>(SecurityLevel::Ks256, 30, 2).unwrap());
    assert!(pp.with_bounds(10, 5).is_err());
    assert!(pp.with_baby_steps(0).is_err());
}

#[test]
fn params_round_trip() {
    let pp = params(4).with_baby_steps(1000).unwrap();
    let bytes = pp.to_bytes();
    assert_eq!(PublicParams::<E>::from_bytes(&bytes).unwrap(), pp);
    assert!(PublicParams::<E>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    assert!(PublicParams::<Bls12_381>::from_bytes(&bytes).is_err());
}

#[test]
fn share_matrices_sum_to_zero() {
    let pp = params(3);
    let kps = keys(&pp, &[0, 1, 2], 5);
    let mut sum = [[<E as Pairing>::ScalarField::zero(); 2]; 2];
    for k in &kps {
        let t = k.share_matrix();
        for a in 0..2 {
            for b in 0..2 {
                sum[a][b] += t[a][b];
            }
        }
    }
    assert!(sum.iter().flatten().all(|x| x.is_zero()));
    assert_ne!(kps[0].encryption_key(), kps[1].encryption_key());
    assert_ne!(kps[0].share_matrix(), kps[1].share_matrix());
}

#[test]
fn transcript_argument_errors() {
    let pp = params(3);
    assert!(matches!(
        SetupTranscript::generate(&pp, &[0, 1, 1], 0),
        Err(DmcfeError::InvalidArgument(_))
    ));
    assert!(SetupTranscript::generate(&pp, &[0, 3], 0).is_err());
    assert!(SetupTranscript::generate(&pp, &[0], 0).is_err());
    let t = SetupTranscript::generate(&pp, &[0, 2], 0).unwrap();
    assert!(keygen(1, &t).is_err());
}

#[test]
fn one_keypair_does_not_determine_another() {
    // Low bits of client 0's and client 1's first share entry, over many
    // transcripts, should look independent (2x2 chi-square, 1 dof).
    let pp = params(3);
    let trials = 4000;
    let mut table = [[0f64; 2]; 2];
    for seed in 0..trials {
        let kps = keys(&pp, &[0, 1, 2], seed);
        let bit = |k: &ClientKeyPair<E>| k.share_matrix()[0][0].into_bigint().get_bit(0) as usize;
        table[bit(&kps[0])][bit(&kps[1])] += 1.0;
    }
    let total = trials as f64;
    let mut chi2 = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let row: f64 = table[a].iter().sum();
            let col = table[0][b] + table[1][b];
            let expected = row * col / total;
            chi2 += (table[a][b] - expected).powi(2) / expected;
        }
    }
    // 99.9% quantile of chi-square with one degree of freedom.
    assert!(chi2 < 10.83, "chi2 {chi2}");
}

#[test]
fn sum_of_two_clients() {
    let pp = params(2);
    let kps = keys(&pp, &[0, 1], 1);
    let label = round_label(7);
    assert_eq!(label, b"7");
    let cts = vec![
        encrypt(&pp, &kps[0], &[3], &label).unwrap(),
        encrypt(&pp, &kps[1], &[4], &label).unwrap(),
    ];
    let dk = functional_key(&pp, &kps, &[1, 1], &label);
    assert_eq!(decrypt(&pp, &dk, &cts, 0).unwrap(), 7);
    // Ciphertext order does not matter.
    let rev: Vec<_> = cts.iter().rev().cloned().collect();
    assert_eq!(decrypt(&pp, &dk, &rev, 0).unwrap(), 7);
}

#[test]
fn weighted_sums_and_negative_values() {
    let pp = params(3);
    let kps = keys(&pp, &[2, 0, 1], 3);
    let label = b"12";
    let xs = [[-5i64, 100], [7, -100], [0, -3]];
    let y = [3u64, 1, 40];
    let cts: Vec<_> = kps
        .iter()
        .zip(&xs)
        .map(|(k, x)| encrypt(&pp, k, x, label).unwrap())
        .collect();
    let dk = functional_key(&pp, &kps, &y, b"scope");
    for slot in 0..2 {
        let expected: i64 = xs.iter().zip(&y).map(|(x, &w)| x[slot] * w as i64).sum();
        assert_eq!(decrypt(&pp, &dk, &cts, slot).unwrap(), expected);
    }
    assert_eq!(decrypt_all(&pp, &dk, &cts).unwrap(), vec![-8, 80]);
    let short = encrypt(&pp, &kps[0], &[1], label).unwrap();
    assert!(decrypt_all(&pp, &dk, &[short, cts[1].clone(), cts[2].clone()]).is_err());
}

#[test]
fn all_zero_round_decrypts_to_zero() {
    let pp = params(3);
    let kps = keys(&pp, &[0, 1, 2], 4);
    let cts: Vec<_> = kps
        .iter()
        .map(|k| encrypt(&pp, k, &[0; 4], b"1").unwrap())
        .collect();
    let dk = functional_key(&pp, &kps, &[1, 1, 1], b"1");
    let rd = RoundDecryptor::new(&pp, &dk, &cts).unwrap();
    for s in 0..4 {
        assert_eq!(decrypt(&pp, &dk, &cts, s).unwrap(), 0);
        assert_eq!(rd.decrypt_slot(s).unwrap(), 0);
    }
}

#[test]
fn slot_bound_is_inclusive() {
    let pp = params(2);
    let kps = keys(&pp, &[0, 1], 2);
    let b = pp.slot_bound() as i64;
    assert!(encrypt(&pp, &kps[0], &[b, -b], b"1").is_ok());
    assert!(matches!(
        encrypt(&pp, &kps[0], &[b + 1], b"1"),
        Err(DmcfeError::PlaintextBoundExceeded(_))
    ));
    assert!(matches!(
        encrypt(&pp, &kps[0], &[-b - 1], b"1"),
        Err(DmcfeError::PlaintextBoundExceeded(_))
    ));
    assert!(encrypt(&pp, &kps[0], &[1], b"").is_err());
    assert!(encrypt(&pp, &kps[0], &[], b"1").is_err());
}

#[test]
fn aggregate_out_of_range() {
    let pp = params(2).with_bounds(1000, 1500).unwrap();
    let kps = keys(&pp, &[0, 1], 2);
    let cts: Vec<_> = kps
        .iter()
        .map(|k| encrypt(&pp, k, &[1000, -750], b"3").unwrap())
        .collect();
    let dk = functional_key(&pp, &kps, &[1, 1], b"");
    assert_eq!(
        decrypt(&pp, &dk, &cts, 0),
        Err(DmcfeError::DlogOutOfRange { bound: 1500 })
    );
    assert_eq!(decrypt(&pp, &dk, &cts, 1).unwrap(), -1500);
}

#[test]
fn partial_key_contract() {
    let pp = params(3);
    let kps = keys(&pp, &[0, 1, 2], 6);
    assert!(derive_partial_key(&pp, &kps[0], &[1, 1, 1], b"").is_ok());
    assert!(derive_partial_key(&pp, &kps[0], &[120, 40, 300], b"").is_ok());
    assert!(matches!(
        derive_partial_key(&pp, &kps[0], &[1, 1], b""),
        Err(DmcfeError::InvalidArgument(_))
    ));
    assert!(matches!(
        derive_partial_key(&pp, &kps[0], &[1, MAX_FUNCTION_COEFFICIENT + 1, 1], b""),
        Err(DmcfeError::PlaintextBoundExceeded(_))
    ));
}

#[test]
fn combine_contract() {
    let pp = params(5);
    let kps = keys(&pp, &[0, 1, 2, 3, 4], 8);
    let y = [1u64; 5];
    let shares: Vec<_> = kps
        .iter()
        .map(|k| derive_partial_key(&pp, k, &y, b"r").unwrap())
        .collect();
    let dk = combine_keys(&shares).unwrap();
    assert_eq!(dk.contributing_count(), 5);
    assert_eq!(
        combine_keys(&shares[..4]).unwrap_err(),
        DmcfeError::InsufficientShares { got: 4, need: 5 }
    );
    let mut dup = shares[..4].to_vec();
    dup.push(shares[0].clone());
    assert!(matches!(combine_keys(&dup), Err(DmcfeError::InvalidArgument(_))));
    assert!(matches!(combine_keys::<E>(&[]), Err(DmcfeError::InsufficientShares { .. })));

    let pp2 = params(2);
    let pair = keys(&pp2, &[0, 1], 9);
    let mixed = vec![
        derive_partial_key(&pp2, &pair[0], &[1, 1], b"").unwrap(),
        derive_partial_key(&pp2, &pair[1], &[1, 2], b"").unwrap(),
    ];
    assert_eq!(combine_keys(&mixed).unwrap_err(), DmcfeError::TagMismatch);
    let scoped = vec![
        derive_partial_key(&pp2, &pair[0], &[1, 1], b"4").unwrap(),
        derive_partial_key(&pp2, &pair[1], &[1, 1], b"5").unwrap(),
    ];
    assert_eq!(combine_keys(&scoped).unwrap_err(), DmcfeError::TagMismatch);
}

#[test]
fn every_proper_subset_fails_to_combine() {
    let n = 4u32;
    let pp = params(n);
    let ids: Vec<u32> = (0..n).collect();
    let kps = keys(&pp, &ids, 10);
    let shares: Vec<_> = kps
        .iter()
        .map(|k| derive_partial_key(&pp, k, &[1; 4], b"").unwrap())
        .collect();
    for mask in 0u32..(1 << n) - 1 {
        let subset: Vec<_> = (0..n as usize)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| shares[i].clone())
            .collect();
        assert!(matches!(
            combine_keys(&subset),
            Err(DmcfeError::InsufficientShares { .. })
        ));
    }
}

#[test]
fn label_mismatch_detected_before_decryption() {
    let pp = params(2);
    let kps = keys(&pp, &[0, 1], 12);
    let cts = vec![
        encrypt(&pp, &kps[0], &[1], &round_label(4)).unwrap(),
        encrypt(&pp, &kps[1], &[1], &round_label(5)).unwrap(),
    ];
    let dk = functional_key(&pp, &kps, &[1, 1], b"");
    assert_eq!(decrypt(&pp, &dk, &cts, 0), Err(DmcfeError::LabelMismatch));
    assert!(matches!(
        RoundDecryptor::new(&pp, &dk, &cts),
        Err(DmcfeError::LabelMismatch)
    ));
    // Label mismatch wins over a missing ciphertext or a bad slot.
    assert_eq!(decrypt(&pp, &dk, &cts, 99), Err(DmcfeError::LabelMismatch));
}

#[test]
fn missing_and_foreign_ciphertexts() {
    let pp = params(3);
    let kps = keys(&pp, &[0, 1, 2], 13);
    let cts: Vec<_> = kps
        .iter()
        .map(|k| encrypt(&pp, k, &[2], b"9").unwrap())
        .collect();
    let dk = functional_key(&pp, &kps, &[1, 1, 1], b"");
    assert_eq!(
        decrypt(&pp, &dk, &cts[..2], 0),
        Err(DmcfeError::InsufficientCiphertexts { got: 2, need: 3 })
    );
    let dup = vec![cts[0].clone(), cts[0].clone(), cts[1].clone()];
    assert!(matches!(decrypt(&pp, &dk, &dup, 0), Err(DmcfeError::InvalidArgument(_))));
    assert!(matches!(decrypt(&pp, &dk, &cts, 1), Err(DmcfeError::InvalidArgument(_))));
}

#[test]
fn randomized_inner_products_match_oracle() {
    let pp = params(4);
    let mut rng = rng_from_seed(14);
    for trial in 0..3u64 {
        let kps = keys(&pp, &[3, 1, 0, 2], 100 + trial);
        let kappa = 16;
        let xs: Vec<Vec<i64>> = (0..4)
            .map(|_| (0..kappa).map(|_| rng.gen_range(-1024..=1024)).collect())
            .collect();
        let y: Vec<u64> = (0..4).map(|_| rng.gen_range(1..=64)).collect();
        let label = round_label(trial);
        let cts: Vec<_> = kps
            .iter()
            .zip(&xs)
            .map(|(k, x)| encrypt(&pp, k, x, &label).unwrap())
            .collect();
        let dk = functional_key(&pp, &kps, &y, &label);
        let rd = RoundDecryptor::new(&pp, &dk, &cts).unwrap();
        for s in 0..kappa {
            let oracle: i64 = xs.iter().zip(&y).map(|(x, &w)| x[s] * w as i64).sum();
            assert_eq!(rd.decrypt_slot(s).unwrap(), oracle);
        }
        assert_eq!(decrypt(&pp, &dk, &cts, 5).unwrap(), rd.decrypt_slot(5).unwrap());
        let all = decrypt_all(&pp, &dk, &cts).unwrap();
        assert_eq!(all, (0..kappa).map(|s| rd.decrypt_slot(s).unwrap()).collect::<Vec<_>>());
        // Per-client slot choices.
        let pick = [0usize, 15, 7, 3];
        let oracle: i64 = (0..4).map(|k| xs[k][pick[k]] * y[k] as i64).sum();
        assert_eq!(rd.decrypt_selection(&pick).unwrap(), oracle);
        assert!(rd.decrypt_selection(&[0, 0, 0]).is_err());
        assert!(rd.decrypt_selection(&[0, 0, 0, 16]).is_err());
    }
}

#[test]
fn ciphertexts_are_not_degenerate() {
    let pp = params(2);
    let kps = keys(&pp, &[0, 1], 15);
    let a = encrypt(&pp, &kps[0], &[5, 6, 7], b"1").unwrap();
    let b = encrypt(&pp, &kps[0], &[5, 6, 7], b"2").unwrap();
    let c = encrypt(&pp, &kps[0], &[5, 9, 7], b"1").unwrap();
    assert!(a.slots.iter().zip(&b.slots).all(|(x, y)| x != y));
    assert_eq!(a.slots[0], c.slots[0]);
    assert_ne!(a.slots[1], c.slots[1]);
    assert_eq!(a.slots[2], c.slots[2]);
}

#[test]
fn wire_round_trips() {
    let pp = params(2);
    let kps = keys(&pp, &[0, 1], 16);
    let ct = encrypt(&pp, &kps[0], &[1, -2, 3], b"42").unwrap();
    let bytes = ct.to_bytes();
    assert_eq!(bytes.len(), Ciphertext::encoded_len(&pp, 3, 2));
    assert_eq!(Ciphertext::<E>::from_bytes(&bytes).unwrap(), ct);
    assert!(Ciphertext::<E>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    // An all-ones encoding is not a canonical field element.
    let mut corrupt = bytes.clone();
    let n = corrupt.len();
    corrupt[n - pp.g1_size()..].fill(0xFF);
    assert!(Ciphertext::<E>::from_bytes(&corrupt).is_err());

    let pk = derive_partial_key(&pp, &kps[1], &[1, 1], b"42").unwrap();
    let bytes = pk.to_bytes();
    assert_eq!(PartialDecKey::<E>::from_bytes(&bytes).unwrap(), pk);
    assert!(PartialDecKey::<E>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    assert!(PartialDecKey::<Mnt4_753>::from_bytes(&bytes).is_err());
}

#[test]
fn ciphertext_size_depends_on_slots_and_curve_only() {
    let pp = params(2);
    assert_eq!(pp.g1_size(), 38);
    assert_eq!(Ciphertext::<E>::encoded_len(&pp, 128, 1), 19 + 128 * 38);
}

#[test]
fn fixed_base_encoding_matches_scalar_multiplication() {
    let pp = params(2);
    let g = <E as Pairing>::G1::generator();
    for x in [0i64, 1, -1, 255, 256, -65_537, 1 << 40, -(1 << 26), i64::MAX] {
        let expected = g * scalar_from_i64::<<E as Pairing>::ScalarField>(x);
        assert_eq!(pp.encode(x), expected, "x = {x}");
    }
}

fn smoke<C: PairingCurve>(level: SecurityLevel) {
    let pp = setup::<C>(level, 3, 1).unwrap().with_bounds(1 << 10, 1 << 14).unwrap();
    let t = SetupTranscript::generate(&pp, &[0, 1, 2], 2).unwrap();
    let kps: Vec<_> = (0..3).map(|i| keygen(i, &t).unwrap()).collect();
    let xs = [[10i64, -20], [300, 1], [-1024, 1024]];
    let cts: Vec<_> = kps
        .iter()
        .zip(&xs)
        .map(|(k, x)| encrypt(&pp, k, x, b"1").unwrap())
        .collect();
    let shares: Vec<_> = kps
        .iter()
        .map(|k| derive_partial_key(&pp, k, &[1, 2, 3], b"1").unwrap())
        .collect();
    let dk = combine_keys(&shares).unwrap();
    assert_eq!(decrypt(&pp, &dk, &cts, 0).unwrap(), 10 + 600 - 3072);
    assert_eq!(decrypt(&pp, &dk, &cts, 1).unwrap(), -20 + 2 + 3072);
}

#[test]
fn other_curves_decrypt() {
    smoke::<Bls12_381>(SecurityLevel::Ks128);
    smoke::<Mnt4_753>(SecurityLevel::Ks521);
    assert_eq!(
        crate::with_curve!(SecurityLevel::Ks384, |C| C::ID),
        CurveId::Mnt4_753
    );
}
