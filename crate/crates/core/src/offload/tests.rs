use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::bgv::BgvParams;

fn params_257() -> Arc<BgvParams> {
    BgvParams::with_defaults(RingParams::toy_single(), 17).unwrap()
}

fn params_17() -> Arc<BgvParams> {
    BgvParams::with_defaults(RingParams::new(4, &[17]).unwrap(), 3).unwrap()
}

fn two_limb() -> Arc<BgvParams> {
    BgvParams::with_defaults(RingParams::toy_pair(), 17).unwrap()
}

fn rng(seed: u64) -> ChaCha20Rng {
    derive_rng(seed, "offload-test")
}

fn zero_ct(params: &Arc<BgvParams>) -> Ciphertext {
    let z = RingElement::zero(params.ring(), Representation::Coefficient);
    Ciphertext::from_parts(params, vec![z.clone(), z], 0, 0u32.into(), 1).unwrap()
}

#[test]
fn honest_matches_engine() {
    let p = two_limb();
    let mut r = rng(1);
    let (a, b) = (random_ciphertext(&p, &mut r), random_ciphertext(&p, &mut r));
    assert_eq!(tensor_untrusted(&a, &b, None).unwrap().parts(), tensor(&a, &b).unwrap().parts());
}

#[test]
fn tamper_changes_declared_part_only() {
    let p = two_limb();
    let mut r = rng(2);
    let (a, b) = (random_ciphertext(&p, &mut r), random_ciphertext(&p, &mut r));
    let honest = tensor(&a, &b).unwrap();
    for part in 0..3 {
        let tp = Tamper { part, coeff: 3, delta: 5 };
        let bad = tensor_untrusted(&a, &b, Some(tp)).unwrap();
        for j in 0..3 {
            assert_eq!(bad.parts()[j] == honest.parts()[j], j != part);
        }
    }
    assert!(tensor_untrusted(&a, &b, Some(Tamper { part: 3, coeff: 0, delta: 1 })).is_err());
}

#[test]
fn zero_inputs_give_zero() {
    let p = two_limb();
    let z = zero_ct(&p);
    let out = tensor_untrusted(&z, &z, None).unwrap();
    assert!(out.parts().iter().all(|e| e.limbs().iter().flatten().all(|&v| v == 0)));
}

#[test]
fn single_ledger() {
    let p = params_257();
    let mut r = rng(3);
    let (a, b) = (random_ciphertext(&p, &mut r), random_ciphertext(&p, &mut r));
    let out = tensor(&a, &b).unwrap();
    let tr = sz_check_single(&a, &b, &out, &[42]).unwrap();
    assert!(tr.accepted);
    assert_eq!(tr.ledger, OpLedger::new(4, 4, 1));
}

#[test]
fn batch_ledgers() {
    let p = params_257();
    let mut r = rng(4);
    assert_eq!(OpLedger::batch_formula(3), OpLedger::new(12, 16, 3));
    for k in [1usize, 2, 3, 8, 64] {
        let pairs: Vec<_> = (0..k).map(|_| (random_ciphertext(&p, &mut r), random_ciphertext(&p, &mut r))).collect();
        let outs: Vec<_> = pairs.iter().map(|(a, b)| tensor(a, b).unwrap()).collect();
        let points: Vec<_> = (0..k).map(|_| vec![r.gen_range(0..257)]).collect();
        let tr = sz_check_batch(&pairs, &outs, &points).unwrap();
        assert!(tr.accepted);
        assert_eq!(tr.ledger, OpLedger::new(4 * k as u64, 6 * k as u64 - 2, k as u64), "k={k}");
        let singles: OpLedger =
            (0..k).map(|i| sz_check_single(&pairs[i].0, &pairs[i].1, &outs[i], &points[i]).unwrap().ledger).sum();
        assert_eq!(tr.ledger, singles + OpLedger::new(0, 2 * (k as u64 - 1), 0));
        let (ok, rl) = recompute_check(&pairs, &outs).unwrap();
        assert!(ok);
        assert_eq!(rl.r_times_r, 4 * tr.ledger.r_times_r);
    }
}

#[test]
fn completeness_random_points() {
    let p = two_limb();
    let mut r = rng(5);
    let mut v = Verifier::new(&p, 0, LimbPolicy::All, 9).unwrap();
    for _ in 0..1000 {
        let (a, b) = (random_ciphertext(&p, &mut r), random_ciphertext(&p, &mut r));
        let out = tensor_untrusted(&a, &b, None).unwrap();
        assert!(v.check_single(&a, &b, &out).unwrap().accepted);
    }
}

#[test]
fn exhaustive_sweep_q17() {
    let p = params_17();
    let mut r = rng(6);
    let mut worst = 0;
    for _ in 0..300 {
        let (a, b) = (random_ciphertext(&p, &mut r), random_ciphertext(&p, &mut r));
        let honest = tensor(&a, &b).unwrap();
        assert_eq!(accepting_points(&a, &b, &honest).unwrap().len(), 17);
        let bad = tensor_untrusted(&a, &b, Some(Tamper::random(&p, &mut r))).unwrap();
        let hits = accepting_points(&a, &b, &bad).unwrap();
        worst = worst.max(hits.len());
    }
    assert!(worst <= 2, "{worst}");
}

#[test]
fn sweep_hits_degree_bound() {
    // Adding (d0, d1, d2) to the parts shifts g(a) by d0 + a·d1 + a²·d2.
    let p = params_17();
    let mut r = rng(7);
    let (a, b) = (random_ciphertext(&p, &mut r), random_ciphertext(&p, &mut r));
    let honest = tensor(&a, &b).unwrap();
    // (a − 2)(a − 5) = a² − 7a + 10 in every slot.
    let ring = p.ring().clone();
    let deltas = [10i64, -7, 1];
    let parts: Vec<_> =
        honest.parts().iter().zip(deltas).map(|(e, d)| e.add(&RingElement::constant(&ring, d)).unwrap()).collect();
    let bad = Ciphertext::from_parts(&p, parts, 0, honest.noise_bound().clone(), 1).unwrap();
    assert_eq!(accepting_points(&a, &b, &bad).unwrap(), vec![2, 5]);
}

fn acceptance_rate(batch: usize, seed: u64) -> f64 {
    let p = params_257();
    let mut r = rng(seed);
    let mut v = Verifier::new(&p, 0, LimbPolicy::First, seed).unwrap();
    let trials = 10_000;
    let pairs: Vec<_> = (0..batch).map(|_| (random_ciphertext(&p, &mut r), random_ciphertext(&p, &mut r))).collect();
    let mut outs: Vec<_> = pairs.iter().map(|(a, b)| tensor(a, b).unwrap()).collect();
    let victim = r.gen_range(0..batch);
    outs[victim] = tensor_untrusted(&pairs[victim].0, &pairs[victim].1, Some(Tamper::random(&p, &mut r))).unwrap();
    let accepted = (0..trials).filter(|_| v.check_batch(&pairs, &outs).unwrap().accepted).count();
    accepted as f64 / trials as f64
}

fn bound_257() -> f64 {
    let pr: f64 = 2.0 / 257.0;
    pr + 3.0 * (pr * (1.0 - pr) / 10_000.0).sqrt()
}

#[test]
fn soundness_single_q257() {
    assert!(acceptance_rate(1, 10) <= bound_257());
}

#[test]
fn soundness_batch_q257() {
    assert!(acceptance_rate(8, 11) <= bound_257());
}

#[test]
fn soundness_bits_accounting() {
    let p = two_limb();
    let first = Verifier::new(&p, 0, LimbPolicy::First, 0).unwrap();
    assert!((first.soundness_bits() - 257f64.log2()).abs() < 1e-12);
    let all = Verifier::new(&p, 0, LimbPolicy::All, 0).unwrap();
    assert!((all.soundness_bits() - 257f64.log2() - 241f64.log2()).abs() < 1e-12);
    assert!(ExceptionalSet::new(255).is_err());
}

#[test]
fn rejects_bad_inputs() {
    let p = params_257();
    let mut r = rng(12);
    let (a, b) = (random_ciphertext(&p, &mut r), random_ciphertext(&p, &mut r));
    let out = tensor(&a, &b).unwrap();
    assert!(matches!(sz_check_single(&a, &b, &out, &[257]), Err(Error::OutOfRange(_))));
    assert!(matches!(sz_check_single(&a, &b, &out, &[1, 2]), Err(Error::SizeMismatch(_))));
    assert!(matches!(sz_check_single(&a, &b, &a, &[1]), Err(Error::WrongDegree { .. })));
    assert!(sz_check_batch(&[], &[], &[]).is_err());
}

#[test]
fn bench_report() {
    let p = two_limb();
    let honest = offload_bench(8, &p, false, LimbPolicy::First, 1).unwrap();
    assert!(honest.verdict);
    assert_eq!(honest.rxr_ratio, 4.0);
    assert_eq!(honest.ledger, OpLedger::batch_formula(8));
    let bad = offload_bench(8, &p, true, LimbPolicy::All, 1).unwrap();
    assert!(!bad.verdict);
    let json = serde_json::to_value(&honest).unwrap();
    for key in ["verdict", "ledger", "soundness_bits", "timings"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn honest_always_accepts(seed in any::<u64>(), a0 in 0u64..257, a1 in 0u64..241) {
        let p = two_limb();
        let mut r = rng(seed);
        let (x, y) = (random_ciphertext(&p, &mut r), random_ciphertext(&p, &mut r));
        let out = tensor(&x, &y).unwrap();
        prop_assert!(sz_check_single(&x, &y, &out, &[a0, a1]).unwrap().accepted);
    }

    #[test]
    fn ledger_sum_associative(k in 1u64..100, j in 1u64..100) {
        let l = OpLedger::batch_formula(k) + OpLedger::recompute_formula(j);
        prop_assert_eq!(l, OpLedger::recompute_formula(j) + OpLedger::batch_formula(k));
    }
}
