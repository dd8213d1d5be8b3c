use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::*;
use crate::bgv::eval::apply_flood;
use crate::bgv::*;
use crate::ring::RingParams;

fn build(mode: BuildMode) -> Builder {
    Builder::new(FieldParams::test31(), Schedule::Lazy, mode)
}

fn check(b: Builder) -> bool {
    let out = b.finish();
    let sys = out.system.expect("rows");
    sys.is_satisfied(&out.public.unwrap(), &out.witness.unwrap()).unwrap()
}

fn big(v: i64) -> BigInt {
    BigInt::from(v)
}

fn range_holds(v: i64, bits: u32) -> bool {
    let mut b = build(BuildMode::Full);
    let x = b.witness_vec(1 << 20, 1, big(0), big(v), || vec![big(v)]);
    b.range(&x, bits).unwrap();
    check(b)
}

#[test]
fn range_cost_and_boundaries() {
    let mut b = build(BuildMode::Count);
    let x = b.witness_vec(257, 1, big(0), big(255), Vec::new);
    b.range(&x, 8).unwrap();
    assert_eq!(b.ledger().total, 9);
    assert!(range_holds(0, 8));
    assert!(range_holds(255, 8));
    assert!(!range_holds(256, 8));
}

#[test]
fn range_rejects_non_boolean_bit() {
    let mut b = build(BuildMode::Full);
    let x = b.witness_vec(257, 1, big(0), big(3), || vec![big(3)]);
    b.range(&x, 2).unwrap();
    let out = b.finish();
    let sys = out.system.unwrap();
    // witness = [x, bit0, bit1]; 3 = 3·1 + 0·2 keeps the sum but breaks booleanity
    let w: Vec<BigUint> = [3u32, 3, 0].iter().map(|&v| BigUint::from(v)).collect();
    assert!(!sys.is_satisfied(&[], &w).unwrap());
}

#[test]
fn range_rejects_oversized_field_request() {
    let mut b = build(BuildMode::Count);
    let x = b.witness_vec(257, 1, big(0), big(3), Vec::new);
    assert!(matches!(b.range(&x, 30), Err(crate::Error::FieldTooSmall(_))));
}

/// `x = k·q + r` with caller-chosen `(k, r)`; range bits recomputed from the claimed values.
fn reduction_with(x: u64, k: u64, r: u64) -> bool {
    let q = 257u64;
    let mut b = build(BuildMode::Structure);
    let vars = b.alloc_public(1, None);
    let sv = SlotVec { hi: big(256 * 257 - 1), ..b.public_vec(q, &vars) };
    b.reduce_forced(&sv).unwrap();
    let sys = b.finish().system.unwrap();
    let bits = |v: BigInt, n: u32| -> Vec<BigUint> {
        let p = BigInt::from(sys.field.modulus().clone());
        let v = ((v % &p) + &p) % &p;
        let v = v.to_biguint().unwrap();
        (0..n).map(|i| BigUint::from(v.bit(i as u64) as u8)).collect()
    };
    let mut w = vec![BigUint::from(k), BigUint::from(r)];
    w.extend(bits(big(r as i64), 9));
    w.extend(bits(big(256 - r as i64), 9));
    w.extend(bits(big(k as i64), 8));
    assert_eq!(w.len(), sys.num_witness);
    sys.is_satisfied(&[BigUint::from(x)], &w).unwrap()
}

#[test]
fn reduction_gadget_examples() {
    assert_eq!((61937 / 257, 61937 % 257), (241, 0));
    assert!(reduction_with(61937, 241, 0));
    assert!(!reduction_with(61937, 240, 257));
    assert!(reduction_with(100, 0, 100));
    assert!(!reduction_with(100, 0, 101));
    assert!(!reduction_with(61937, 241, 1));
}

#[test]
fn reduction_cost_matches_formula() {
    let mut b = build(BuildMode::Count);
    let x = b.witness_vec(257, 4, big(0), big(256 * 257 - 1), Vec::new);
    b.reduce_forced(&x).unwrap();
    let per = builder::cost::mod_reduce(9, 8);
    assert_eq!(per, 1 + 2 * 10 + 9);
    assert_eq!(b.ledger().total, 4 * per);
    assert_eq!(b.ledger().reductions, 4);
    assert_eq!(b.ledger().reduction_bits, 4 * 9);
}

#[test]
fn mod_switch_delta_boundary() {
    let q_last = 241u64;
    let holds = |v: i64| {
        let mut b = build(BuildMode::Full);
        let x = b.witness_vec(q_last, 1, big(0), big(q_last as i64 - 1), || vec![big(v)]);
        b.below(&x, &BigInt::from(q_last)).unwrap();
        check(b)
    };
    assert!(holds(0));
    assert!(holds(q_last as i64 - 1));
    assert!(!holds(q_last as i64));
    assert!(!holds(-1));
}

fn toy_params() -> Arc<BgvParams> {
    BgvParams::with_defaults(RingParams::toy_single(), 17).unwrap()
}

fn roomy_params() -> Arc<BgvParams> {
    BgvParams::with_defaults(RingParams::new(8, &[65537, 12289]).unwrap(), 17).unwrap()
}

fn ctx(params: &Arc<BgvParams>, field: FieldParams, seed: u64) -> (CompileContext, SecretKey) {
    let (sk, pk, rk) = keygen(params, seed);
    let ctx = CompileContext { field, params: params.clone(), pk: Some(pk), rk: Some(rk), schedule: Schedule::Lazy };
    (ctx, sk)
}

fn circuit(ct_inputs: usize, pt_inputs: usize, ops: Vec<Op>) -> FheCircuit {
    let output = ct_inputs + ops.len() - 1;
    FheCircuit { name: "test".into(), ct_inputs, pt_inputs, ops, output, predicates: Vec::new() }
}

#[test]
fn empty_circuit_has_no_constraints() {
    let params = toy_params();
    let (ctx, _) = ctx(&params, FieldParams::test31(), 1);
    let c = FheCircuit {
        name: "empty".into(),
        ct_inputs: 0,
        pt_inputs: 0,
        ops: Vec::new(),
        output: 0,
        predicates: Vec::new(),
    };
    // no wires at all: the output index is dangling
    assert!(compile(&c, &ctx).is_err());
    let id = FheCircuit::identity();
    let compiled = compile(&id, &ctx).unwrap();
    assert!(compiled.stats.constraints_by_gadget.keys().all(|k| k == "output_binding"));
}

#[test]
fn ct_add_is_free() {
    let params = toy_params();
    let (ctx, _) = ctx(&params, FieldParams::test31(), 1);
    let add = circuit(2, 0, vec![Op::CtAdd { a: 0, b: 1 }]);
    let id = FheCircuit::identity();
    let a = compile(&add, &ctx).unwrap().stats;
    let base = compile(&id, &ctx).unwrap().stats;
    assert!(!a.constraints_by_gadget.contains_key("slot_mul"));
    // only the binding of the output differs, and that is one congruence per slot per part
    assert_eq!(a.constraints_by_gadget.len(), base.constraints_by_gadget.len());
}

#[test]
fn tensor_costs_four_products_per_slot() {
    let params = toy_params();
    let (ctx, _) = ctx(&params, FieldParams::test31(), 1);
    let c = circuit(2, 0, vec![Op::Tensor { a: 0, b: 1 }]);
    let stats = compile(&c, &ctx).unwrap().stats;
    assert_eq!(stats.constraints_by_gadget["slot_mul"], 32);
}

fn medium_like() -> FheCircuit {
    let mut c = circuit(
        1,
        1,
        vec![
            Op::CtPtSub { ct: 0, pt: 0 },
            Op::Tensor { a: 1, b: 1 },
            Op::Relin { ct: 2 },
            Op::ModSwitch { ct: 3 },
            Op::NoiseFlood { ct: 4, count: 2 },
        ],
    );
    c.predicates.push((0, Predicate::RangeBound(3)));
    c
}

fn honest_trace(c: &FheCircuit, ctx: &CompileContext, seed: u64) -> Trace {
    let params = &ctx.params;
    let n = params.degree();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let pk = ctx.pk.as_ref().unwrap();
    let inputs: Vec<Ciphertext> = (0..c.ct_inputs)
        .map(|i| {
            let m = Plaintext::from_signed(&(0..n).map(|_| rng.gen_range(-2..=2)).collect::<Vec<_>>(), 17);
            encrypt(pk, &m, seed * 31 + i as u64).unwrap()
        })
        .collect();
    let pts: Vec<Vec<i64>> = (0..c.pt_inputs).map(|_| (0..n).map(|_| rng.gen_range(-3..=3)).collect()).collect();
    c.evaluate(pk, ctx.rk.as_ref(), &inputs, &pts, seed).unwrap()
}

fn satisfied(c: &FheCircuit, ctx: &CompileContext, trace: &Trace) -> bool {
    let sys = compile(c, ctx).unwrap().system;
    let w = generate_witness(c, ctx, trace).unwrap();
    sys.is_satisfied(&w.public, &w.private).unwrap()
}

#[test]
fn honest_trace_satisfies_every_op() {
    let params = roomy_params();
    let (ctx, _) = ctx(&params, FieldParams::bn254(), 7);
    let c = medium_like();
    for seed in 0..3 {
        let trace = honest_trace(&c, &ctx, seed);
        let full = build_full(&c, &ctx, &trace).unwrap();
        assert_eq!(full.bound_violations, 0);
        let sys = full.system.unwrap();
        assert!(sys.is_satisfied(full.public.as_ref().unwrap(), full.witness.as_ref().unwrap()).unwrap());
        let w = generate_witness(&c, &ctx, &trace).unwrap();
        assert_eq!(Some(&w.private), full.witness.as_ref());
        assert_eq!(w.private.len(), sys.num_witness);
        assert_eq!(sys, compile(&c, &ctx).unwrap().system);
    }
}

#[test]
fn honest_trace_satisfies_small_field_ops() {
    let params = toy_params();
    let (ctx, _) = ctx(&params, FieldParams::test31(), 3);
    let c = circuit(
        2,
        1,
        vec![
            Op::CtAdd { a: 0, b: 1 },
            Op::CtPtMul { ct: 2, pt: 0 },
            Op::CtSub { a: 3, b: 0 },
            Op::CtPtAdd { ct: 1, pt: 0 },
            Op::CtAdd { a: 4, b: 5 },
        ],
    );
    let trace = honest_trace(&c, &ctx, 11);
    assert!(satisfied(&c, &ctx, &trace));
}

#[test]
fn mutations_break_satisfaction() {
    let params = roomy_params();
    let (ctx, _) = ctx(&params, FieldParams::bn254(), 8);
    let c = medium_like();
    let trace = honest_trace(&c, &ctx, 4);
    let sys = compile(&c, &ctx).unwrap().system;
    let w = generate_witness(&c, &ctx, &trace).unwrap();
    assert!(sys.unsatisfied(&w.public, &w.private).is_empty());
    assert!(sys.constrained_variables().iter().all(|&x| x));
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    for _ in 0..150 {
        let mut priv_ = w.private.clone();
        let i = rng.gen_range(0..priv_.len());
        priv_[i] = (&priv_[i] + 1u32) % sys.field.modulus();
        assert!(!sys.is_satisfied(&w.public, &priv_).unwrap(), "witness {i}");
    }
    for _ in 0..20 {
        let mut pub_ = w.public.clone();
        let i = rng.gen_range(0..pub_.len());
        pub_[i] = (&pub_[i] + 1u32) % sys.field.modulus();
        assert!(!sys.is_satisfied(&pub_, &w.private).unwrap(), "public {i}");
    }
    let zeros = vec![BigUint::zero(); w.private.len()];
    assert!(!sys.is_satisfied(&w.public, &zeros).unwrap());
    assert!(sys.is_satisfied(&w.public, &w.private[1..]).is_err());
}

#[test]
fn out_of_domain_server_input_fails() {
    let params = roomy_params();
    let (ctx, _) = ctx(&params, FieldParams::bn254(), 9);
    let c = medium_like();
    let mut trace = honest_trace(&c, &ctx, 5);
    let pk = ctx.pk.as_ref().unwrap();
    let mut pts = trace.pts.clone();
    pts[0][0] = 5; // inside Z_t, outside the predicate bound
    trace = c.evaluate(pk, ctx.rk.as_ref(), &trace.inputs, &pts, 5).unwrap();
    assert!(!satisfied(&c, &ctx, &trace));
    pts[0][0] = 40; // outside Z_t entirely
    trace = c.evaluate(pk, ctx.rk.as_ref(), &trace.inputs, &pts, 5).unwrap();
    assert!(!satisfied(&c, &ctx, &trace));
}

#[test]
fn tampered_mod_switch_fails() {
    let params = roomy_params();
    let (ctx, _) = ctx(&params, FieldParams::bn254(), 10);
    let c = circuit(1, 0, vec![Op::ModSwitch { ct: 0 }]);
    let trace = honest_trace(&c, &ctx, 6);
    assert!(satisfied(&c, &ctx, &trace));
    let mut bad = trace.clone();
    bad.mod_switch[0][0][0] += 1;
    assert!(!satisfied(&c, &ctx, &bad));
    // c' perturbed by one in a single coefficient
    let mut bad = trace.clone();
    let p0 = bad.output.parts()[0].clone();
    let bumped = p0.add(&crate::ring::RingElement::constant(p0.params(), 1).to_form(p0.form())).unwrap();
    bad.output = Ciphertext::from_parts(
        bad.output.params(),
        vec![bumped, bad.output.parts()[1].clone()],
        bad.output.level(),
        bad.output.noise_bound().clone(),
        bad.output.correction(),
    )
    .unwrap();
    assert!(!satisfied(&c, &ctx, &bad));
}

#[test]
fn zero_encryption_counterexamples() {
    let params = roomy_params();
    let (ctx, _) = ctx(&params, FieldParams::bn254(), 12);
    let pk = ctx.pk.clone().unwrap();
    let c = circuit(1, 0, vec![Op::NoiseFlood { ct: 0, count: 1 }]);
    let trace = honest_trace(&c, &ctx, 7);
    assert!(satisfied(&c, &ctx, &trace));

    // the addend encrypts 1 instead of 0
    let mut one = trace.clone();
    one.output = eval_add_pt(&trace.output, &Plaintext::constant(1, params.degree(), 17)).unwrap();
    assert!(!satisfied(&c, &ctx, &one));

    // e0 leaves the flooding bound but the output is consistent with it
    let mut wide = trace.clone();
    wide.flood[0][0].e0[0] = params.flood_error_bound() as i64 + 1;
    wide.output = apply_flood(&trace.inputs[0], &pk, &wide.flood[0]).unwrap();
    assert!(!satisfied(&c, &ctx, &wide));
    let mut edge = trace.clone();
    edge.flood[0][0].e0[0] = params.flood_error_bound() as i64;
    edge.output = apply_flood(&trace.inputs[0], &pk, &edge.flood[0]).unwrap();
    assert!(satisfied(&c, &ctx, &edge));

    // u must be ternary
    let mut fat = trace.clone();
    fat.flood[0][0].u[0] = 2;
    fat.output = apply_flood(&trace.inputs[0], &pk, &fat.flood[0]).unwrap();
    assert!(!satisfied(&c, &ctx, &fat));
}

#[test]
fn commitment_predicate() {
    let params = toy_params();
    let field = FieldParams::test31();
    let (ctx, _) = ctx(&params, field.clone(), 13);
    let n = params.degree();
    let w: Vec<i64> = (0..n as i64).map(|i| i % 5 - 2).collect();
    let digest = mimc::Mimc::new(&field).unwrap().hash_signed(&w);
    let mut c = circuit(1, 1, vec![Op::CtPtAdd { ct: 0, pt: 0 }]);
    c.predicates.push((0, Predicate::CommitmentMatch(digest.clone())));
    assert!(predicate_holds(&c.predicates[0].1, &w, &field).unwrap());
    let pk = ctx.pk.as_ref().unwrap();
    let base = honest_trace(&c, &ctx, 8);
    let good = c.evaluate(pk, None, &base.inputs, std::slice::from_ref(&w), 1).unwrap();
    assert!(satisfied(&c, &ctx, &good));
    let mut w2 = w.clone();
    w2[3] += 1;
    assert!(!predicate_holds(&c.predicates[0].1, &w2, &field).unwrap());
    let bad = c.evaluate(pk, None, &base.inputs, &[w2], 1).unwrap();
    assert!(!satisfied(&c, &ctx, &bad));
}

#[test]
fn export_import_roundtrip() {
    let params = toy_params();
    let (ctx, _) = ctx(&params, FieldParams::test31(), 14);
    let c = circuit(2, 0, vec![Op::Tensor { a: 0, b: 1 }]);
    let sys = compile(&c, &ctx).unwrap().system;
    let text = sys.to_text();
    assert!(text.starts_with("VR1CS1\np 2147483629\n"));
    let counts = format!("counts {} {} {}", sys.num_public, sys.num_witness, sys.constraints.len());
    assert!(text.lines().nth(2).unwrap().starts_with(&counts));
    assert_eq!(ConstraintSystem::from_text(&text).unwrap(), sys);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.r1cs");
    sys.export(&path).unwrap();
    assert_eq!(ConstraintSystem::import(&path).unwrap().digest(), sys.digest());
    assert!(ConstraintSystem::from_text(&text.replace("VR1CS1", "VR1CS2")).is_err());
}

#[test]
fn ledger_balances_and_modes_agree() {
    let params = roomy_params();
    let (ctx, _) = ctx(&params, FieldParams::bn254(), 15);
    let c = medium_like();
    let compiled = compile(&c, &ctx).unwrap();
    let s = &compiled.stats;
    assert_eq!(s.constraints_by_gadget.values().sum::<u64>(), s.constraints_total);
    assert_eq!(s.constraints_total, compiled.system.constraints.len() as u64);
    let counted = compile_counts(&c, &ctx).unwrap();
    assert_eq!(&counted.stats, s);
    assert_eq!(counted.stream_digest, compiled.stream_digest);
    let keyless = CompileContext { pk: None, rk: None, ..ctx.clone() };
    assert_eq!(compile_counts(&c, &keyless).unwrap(), counted);
    assert!(compile(&c, &keyless).is_err());
    // deterministic
    assert_eq!(compile(&c, &ctx).unwrap().system.digest(), compiled.system.digest());
}

#[test]
fn lazy_never_exceeds_eager() {
    let params = toy_params();
    let (ctx, _) = ctx(&params, FieldParams::test31(), 16);
    let c = circuit(2, 1, vec![Op::Tensor { a: 0, b: 1 }, Op::CtPtMul { ct: 2, pt: 0 }, Op::CtPtMul { ct: 3, pt: 0 }]);
    let lazy = compile(&c, &ctx).unwrap().stats;
    assert!(lazy.reductions_count <= lazy.eager_baseline_count);
    assert!(lazy.lazy_ratio >= 1.0);
    let trace = honest_trace(&c, &ctx, 3);
    assert!(satisfied(&c, &ctx, &trace));
    let eager_ctx = CompileContext { schedule: Schedule::Eager, ..ctx };
    assert!(satisfied(&c, &eager_ctx, &trace));
}

#[test]
fn chain_capacity_matches_bit_budget() {
    let bn = FieldParams::bn254();
    let q60 = 1152921504606846577u64;
    let r = chain_experiment(&bn, &[q60], 40, Schedule::Lazy).unwrap();
    assert_eq!(r.capacity, 4);
    let r = chain_experiment(&bn, &[1073741441, 1073741329], 40, Schedule::Lazy).unwrap();
    assert_eq!(r.capacity, 8);
    let p31 = FieldParams::test31();
    let r = chain_experiment(&p31, &[257], 30, Schedule::Lazy).unwrap();
    assert_eq!(r.capacity, 3);
    assert_eq!(r.capacity as u32, 31 / 9);
}

#[test]
fn eager_chain_reduces_every_product() {
    for k in [1, 5, 17] {
        let r = chain_experiment(&FieldParams::bn254(), &[1152921504606846577], k, Schedule::Eager).unwrap();
        assert_eq!(r.reductions, k as u64);
        assert_eq!(r.constraints, r.emitted);
    }
}

#[test]
fn reduction_cost_model() {
    let bn = FieldParams::bn254();
    assert_eq!(lazy::capacity_for(&bn, 60), 4);
    assert_eq!(lazy::capacity_for(&bn, 30), 8);
    assert_eq!(reduction_cost_ratio(&bn, 60, 30, 2), 8.0);
    assert_eq!(reduction_cost_ratio(&bn, 60, 60, 1), 4.0);
}

#[test]
fn scheduler_overflow_when_limb_too_wide() {
    let p31 = FieldParams::test31();
    assert!(matches!(
        chain_experiment(&p31, &[1073741441], 2, Schedule::Lazy),
        Err(crate::Error::SchedulerOverflow(_))
    ));
}

#[test]
fn malformed_circuits_are_rejected() {
    let params = toy_params();
    let bad = [
        circuit(1, 0, vec![Op::CtAdd { a: 0, b: 3 }]),
        circuit(1, 0, vec![Op::Relin { ct: 0 }]),
        circuit(1, 0, vec![Op::CtPtAdd { ct: 0, pt: 0 }]),
        circuit(1, 0, vec![Op::ModSwitch { ct: 0 }]),
        circuit(2, 0, vec![Op::Tensor { a: 0, b: 1 }, Op::Tensor { a: 2, b: 0 }]),
    ];
    for c in bad {
        assert!(matches!(c.shapes(&params), Err(crate::Error::MalformedCircuit(_))), "{c:?}");
    }
}
