//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use vfhe_core::bgv::{
    attack::squared_key_mod_t, attack_relin_key, attack_trivial_ct, keygen, BgvParams, Ciphertext, Plaintext,
    UncheckedOracle,
};
use vfhe_core::encoding::{
    analytic_expansion, expansion_factor, linear_combine, Encoding, EncodingKey, EncodingParams,
};
use vfhe_core::offload::{
    accepting_points, random_ciphertext, tensor_untrusted, LimbPolicy, OpLedger, Tamper, Verifier,
};
use vfhe_core::protocol::{self, eval_identity, sample_inputs, soundness_experiment, InputTag, Strategy, VfheOracle};
use vfhe_core::r1cs::{
    chain_experiment, lazy::capacity_for, mimc::Mimc, reduction_cost_ratio, FheCircuit, FieldParams, Op, Predicate,
    Schedule,
};
use vfhe_core::ring::{derive_rng, RingParams};
use vfhe_core::workload::{compile_workload, run_workload, Mode, ParamSpec, RunOptions, Workload};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err(e: vfhe_core::Error) -> String {
    e.to_string()
}

fn desk() -> Arc<BgvParams> {
    ParamSpec::desk().bgv().expect("desk preset")
}

fn fhe_correctness() -> Outcome {
    let spec = ParamSpec::desk();
    let start = Instant::now();
    let mut runs = 0;
    for w in Workload::ALL {
        for seed in 0..1000 {
            let r = run_workload(w, &spec, Mode::FheOnly, RunOptions { seed, tamper: false }).map_err(err)?;
            ensure(r.verdicts.decrypted_correct == Some(true), format!("{w} seed {seed} decrypted wrong"))?;
            runs += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("{runs} runs took {secs:.1}s"))?;
    Ok(format!("{runs}/{runs} exact in {secs:.2}s"))
}

fn trivial_key_recovery() -> Outcome {
    let spec = ParamSpec::desk();
    let params = desk();
    let (mut leaked, mut refused) = (0, 0);
    for seed in 0..100 {
        let keys =
            protocol::kgen(&Workload::Toy.circuit(), &params, &spec.field_params().map_err(err)?, seed).map_err(err)?;
        let sk = keys.verify.secret_key();
        let got = attack_trivial_ct(&mut UncheckedOracle::new(sk), &params).ok_or("baseline refused")?;
        leaked += usize::from(got == sk.coeffs());

        // The server holds ek, so it can tag the probe itself; the oracle still refuses
        // because the client never issued it.
        let probe = Ciphertext::trivial_key_probe(&params);
        let tau_x = InputTag(vec![probe.clone()]);
        let tau_y = eval_identity(&keys.eval, &probe).map_err(err)?;
        let mut oracle = VfheOracle::new(keys.verify.clone());
        refused += usize::from(oracle.oracle_dec(&probe, &tau_x, &tau_y).is_none());
    }
    ensure(leaked == 100 && refused == 100, format!("leaked {leaked}/100, refused {refused}/100"))?;
    Ok("baseline leaked sk 100/100, oracle returned ⊥ 100/100".into())
}

fn relin_key_attack() -> Outcome {
    let params = desk();
    let mut hits = 0;
    for seed in 0..100 {
        let (sk, _, rk) = keygen(&params, 1000 + seed);
        let got = attack_relin_key(&mut UncheckedOracle::new(&sk), &rk).ok_or("baseline refused")?;
        hits += usize::from(got == squared_key_mod_t(&sk));
    }
    ensure(hits == 100, format!("{hits}/100"))?;
    Ok("s² mod t recovered 100/100".into())
}

fn lazy_reduction() -> Outcome {
    let bn = FieldParams::bn254();
    ensure(bn.bit_length() == 254, "field is not 254 bits")?;
    let q60 = 1152921504606846577u64;
    let q30 = [1073741441u64, 1073741329];
    let single = chain_experiment(&bn, &[q60], 64, Schedule::Lazy).map_err(err)?;
    ensure(single.capacity == 4, format!("capacity {}", single.capacity))?;
    ensure(capacity_for(&bn, 60) == 4, "cost-model capacity")?;
    let ratio = reduction_cost_ratio(&bn, 60, 30, 2);
    ensure(ratio == 8.0, format!("cost ratio {ratio}"))?;
    let eager = chain_experiment(&bn, &[q60], 64, Schedule::Eager).map_err(err)?;
    let split = chain_experiment(&bn, &q30, 64, Schedule::Lazy).map_err(err)?;
    for r in [&single, &eager, &split] {
        ensure(r.constraints == r.emitted, format!("chain ledger {} vs emitted {}", r.constraints, r.emitted))?;
    }
    for w in Workload::ALL {
        let c = compile_workload(w, &ParamSpec::desk()).map_err(err)?;
        ensure(c.constraints_emitted == c.stats.constraints_total, format!("{w} ledger mismatch"))?;
    }
    let measured = eager.reduction_bits as f64 / split.reduction_bits as f64;
    Ok(format!(
        "capacity 4, cost-model ratio 8, ledgers exact; 64-step chain reductions {} eager vs {} lazy, measured bit ratio {measured:.2}",
        eager.reductions, split.reductions
    ))
}

fn r1cs_soundness() -> Outcome {
    let spec = ParamSpec::desk();
    let params = desk();
    let field = spec.field_params().map_err(err)?;
    let (mut tamperings, mut honest) = (0, 0);
    for (i, w) in Workload::ALL.into_iter().enumerate() {
        let circuit = w.circuit();
        let keys = protocol::kgen(&circuit, &params, &field, 500 + i as u64).map_err(err)?;
        let (n, t) = (params.degree(), params.plain_modulus());
        let mut sampler = |rng: &mut ChaCha20Rng| sample_inputs(&circuit, n, t, rng);
        let ok = soundness_experiment(&keys, Strategy::Honest, 100, i as u64, &mut sampler).map_err(err)?;
        ensure(ok.rejected == 0 && ok.accepted_wrong == 0, format!("{w}: honest runs rejected {}", ok.rejected))?;
        honest += ok.trials;
        for s in [Strategy::FlipOutput, Strategy::ForgeWitness] {
            let r = soundness_experiment(&keys, s, 170, i as u64, &mut sampler).map_err(err)?;
            ensure(r.accepted_wrong == 0, format!("{w} {}: {} wrong answers accepted", s.name(), r.accepted_wrong))?;
            tamperings += r.trials;
        }
        // Flipping a coefficient after proving leaves the tag stale.
        for seed in 0..10 {
            let r = run_workload(w, &spec, Mode::Vfhe, RunOptions { seed, tamper: true }).map_err(err)?;
            ensure(r.verdicts.verified == Some(false), format!("{w} stale tag accepted"))?;
            tamperings += 1;
        }
    }
    ensure(tamperings >= 1000, format!("only {tamperings} tamperings"))?;
    Ok(format!("0 accepted-wrong over {tamperings} tamperings, completeness {honest}/{honest}"))
}

fn offload() -> Outcome {
    let p17 = BgvParams::with_defaults(RingParams::new(4, &[17]).map_err(err)?, 3).map_err(err)?;
    let mut rng = derive_rng(17, "acceptance");
    let mut worst = 0;
    for _ in 0..200 {
        let (a, b) = (random_ciphertext(&p17, &mut rng), random_ciphertext(&p17, &mut rng));
        let bad = tensor_untrusted(&a, &b, Some(Tamper::random(&p17, &mut rng))).map_err(err)?;
        worst = worst.max(accepting_points(&a, &b, &bad).map_err(err)?.len());
    }
    ensure(worst <= 2, format!("a tampering passed at {worst} points"))?;

    let params = desk();
    let mut verifier = Verifier::new(&params, 0, LimbPolicy::First, 3).map_err(err)?;
    let (a, b) = (random_ciphertext(&params, &mut rng), random_ciphertext(&params, &mut rng));
    let single = verifier.check_single(&a, &b, &tensor_untrusted(&a, &b, None).map_err(err)?).map_err(err)?;
    ensure(single.accepted && single.ledger == OpLedger::new(4, 4, 1), format!("single ledger {:?}", single.ledger))?;
    let mut ratio = 0.0;
    for k in [2u64, 3, 8, 64] {
        let pairs: Vec<_> =
            (0..k).map(|_| (random_ciphertext(&params, &mut rng), random_ciphertext(&params, &mut rng))).collect();
        let outs =
            pairs.iter().map(|(a, b)| tensor_untrusted(a, b, None)).collect::<Result<Vec<_>, _>>().map_err(err)?;
        let t = verifier.check_batch(&pairs, &outs).map_err(err)?;
        ensure(t.accepted, format!("honest batch {k} rejected"))?;
        ensure(t.ledger == OpLedger::new(4 * k, 6 * k - 2, k), format!("k={k} ledger {:?}", t.ledger))?;
        let (_, rec) = vfhe_core::offload::recompute_check(&pairs, &outs).map_err(err)?;
        ratio = rec.r_times_r as f64 / t.ledger.r_times_r as f64;
        ensure(ratio == 4.0, format!("k={k} R×R ratio {ratio}"))?;
    }
    Ok(format!("worst sweep {worst} accepting points of 17, ledgers exact, R×R ratio {ratio}"))
}

fn encoding() -> Outcome {
    let (q, k_max) = (17u64, 16usize);
    let params = EncodingParams::new(8, q, k_max).map_err(err)?;
    let key = EncodingKey::generate(&params, 5);
    let mut rng = derive_rng(5, "acceptance");
    let mut combos = 0;
    for _ in 0..200 {
        let m = rng.gen_range(1..=k_max);
        let xs: Vec<Vec<u64>> = (0..m).map(|_| (0..8).map(|_| rng.gen_range(0..q)).collect()).collect();
        let cs: Vec<u64> = (0..m).map(|_| rng.gen_range(0..q)).collect();
        let encs = xs.iter().map(|x| key.encode(x, rng.gen())).collect::<Result<Vec<_>, _>>().map_err(err)?;
        let refs: Vec<&Encoding> = encs.iter().collect();
        let got = key.decode(&linear_combine(&refs, &cs).map_err(err)?).map_err(err)?;
        let want: Vec<u64> = (0..8).map(|j| xs.iter().zip(&cs).map(|(x, c)| x[j] * c).sum::<u64>() % q).collect();
        ensure(got == want, format!("combination of {m} decoded wrong"))?;
        combos += 1;
    }
    let r = expansion_factor(&params);
    let log_big: f64 = params.target().moduli().iter().map(|&p| (p as f64).log2()).sum();
    let expected = log_big / (q as f64).log2();
    ensure((r.analytic - expected).abs() < 1e-9, format!("analytic {} vs {expected}", r.analytic))?;
    ensure(analytic_expansion(1, (q as f64).log2(), log_big) == r.analytic, "formula")?;
    Ok(format!(
        "{combos}/{combos} combinations exact; expansion analytic {:.3}, measured single {:.3}, measured pair {:.3}",
        r.analytic, r.measured_single, r.measured_pair
    ))
}

fn paper_scale_count() -> Outcome {
    let spec = ParamSpec::paper();
    let start = Instant::now();
    let a = compile_workload(Workload::Medium, &spec).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    let b = compile_workload(Workload::Medium, &spec).map_err(err)?;
    ensure(a == b, "compilation is not deterministic")?;
    ensure(a.constraints_emitted == a.stats.constraints_total, "count differs from cost model")?;
    let n = a.stats.constraints_total;
    let log2 = (n as f64).log2();
    let side = if log2 < 22.0 {
        "below"
    } else if log2 <= 24.0 {
        "within"
    } else {
        "above"
    };
    Ok(format!("{n} constraints (2^{log2:.2}), {side} the 2^22..2^24 reference range, compiled in {secs:.2}s"))
}

fn predicate_enforcement() -> Outcome {
    let params = desk();
    let field = FieldParams::bn254();
    let (n, t) = (params.degree(), params.plain_modulus());
    let committed: Vec<i64> = (0..n as i64).map(|i| (i * 5) % 9 - 4).collect();
    let digest = Mimc::new(&field).map_err(err)?.hash_signed(&committed);
    let circuit = FheCircuit {
        name: "affine-checked".into(),
        ct_inputs: 1,
        pt_inputs: 2,
        ops: vec![Op::CtPtMul { ct: 0, pt: 0 }, Op::CtPtAdd { ct: 1, pt: 1 }, Op::NoiseFlood { ct: 2, count: 1 }],
        output: 3,
        predicates: vec![(0, Predicate::RangeBound(3)), (1, Predicate::CommitmentMatch(digest))],
    };
    let keys = protocol::kgen(&circuit, &params, &field, 9).map_err(err)?;
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let half = (t / 2) as i64;
    let (mut range, mut commit) = (0, 0);
    for i in 0..1000u64 {
        let x = Plaintext::from_signed(&(0..n).map(|_| rng.gen_range(0..t as i64)).collect::<Vec<_>>(), t);
        let (c_x, tau_x) = protocol::enc(keys.eval.public_key(), &[x], i).map_err(err)?;
        let mut v: Vec<i64> = (0..n).map(|_| rng.gen_range(-3..=3)).collect();
        let mut w = committed.clone();
        let j = rng.gen_range(0..n);
        if i % 2 == 0 {
            v[j] = if rng.gen() { rng.gen_range(4..=half) } else { -rng.gen_range(4..=half) };
            range += 1;
        } else {
            w[j] = (w[j] + half + rng.gen_range(1..t as i64)).rem_euclid(t as i64) - half;
            commit += 1;
        }
        let (c_y, tau_y) = protocol::eval(&keys.eval, &c_x, &[v, w], i).map_err(err)?;
        ensure(!protocol::verify(&keys.verify, &c_y, &tau_x, &tau_y), format!("violation {i} verified"))?;
    }
    Ok(format!("{} violations ({range} range, {commit} commitment) all rejected", range + commit))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("FHE correctness", fhe_correctness),
        ("trivial key recovery", trivial_key_recovery),
        ("relinearization-key attack", relin_key_attack),
        ("lazy reduction", lazy_reduction),
        ("R1CS soundness by mutation", r1cs_soundness),
        ("Schwartz-Zippel offload", offload),
        ("RLWE encoding", encoding),
        ("medium count on the paper preset", paper_scale_count),
        ("predicate enforcement", predicate_enforcement),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
