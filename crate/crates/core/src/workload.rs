//! The toy, small and medium workloads, their run reports and the attack demos.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use num_traits::ToPrimitive;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bgv::attack::{biased_affine_unchecked, key_from_recovered, oversized_w2, squared_key_mod_t};
use crate::bgv::{
    attack_overflow_probe, attack_relin_key, attack_trivial_ct, decrypt, encrypt, keygen, BgvConfig, BgvParams,
    Plaintext, ReactionClient, UncheckedOracle,
};
use crate::error::{Error, Result};
use crate::protocol::{self, flip_coefficient, sample_inputs, VfheOracle};
use crate::r1cs::{compile_counts, CompileContext, CostStats, CountReport, FheCircuit, FieldParams, Op, Schedule};
use crate::ring::{derive_rng, Distribution, RingParams};

pub const REPORT_SCHEMA: &str = "vfhe-report/1";

/// Ring, plaintext modulus, noise knobs and proof field, as stored in a params file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub degree: usize,
    pub moduli: Vec<u64>,
    pub plain_modulus: u64,
    #[serde(default = "default_relin_bits")]
    pub relin_base_bits: u32,
    #[serde(default = "default_flood_bits")]
    pub flood_bits: u32,
    /// `"bn254"`, `"p31"` or a decimal prime.
    #[serde(default = "default_field")]
    pub field: String,
    /// Only constraint counting is attempted for the proof side.
    #[serde(default)]
    pub count_only: bool,
}

fn default_relin_bits() -> u32 {
    BgvConfig::default().relin_base_bits
}

fn default_flood_bits() -> u32 {
    BgvConfig::default().flood_bits
}

fn default_field() -> String {
    "bn254".into()
}

impl ParamSpec {
    pub const PRESETS: [&'static str; 2] = ["desk", "paper"];

    /// N = 8, q = 65537·12289, t = 17: small enough to prove end to end.
    pub fn desk() -> Self {
        Self {
            name: "desk".into(),
            degree: 8,
            moduli: vec![65537, 12289],
            plain_modulus: 17,
            relin_base_bits: default_relin_bits(),
            flood_bits: default_flood_bits(),
            field: default_field(),
            count_only: false,
        }
    }

    /// N = 8192 with 45, 46 and 46-bit limbs (log2 q ≈ 137); counted, not proved.
    pub fn paper() -> Self {
        Self {
            name: "paper".into(),
            degree: 8192,
            moduli: vec![35184371613697, 70368743669761, 70368743587841],
            plain_modulus: 65537,
            relin_base_bits: default_relin_bits(),
            flood_bits: default_flood_bits(),
            field: default_field(),
            count_only: true,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk" => Some(Self::desk()),
            "paper" => Some(Self::paper()),
            _ => None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidParams(format!("{}: {e}", path.display())))
    }

    /// A preset name, or else a path to a params file.
    pub fn resolve(arg: &str) -> Result<Self> {
        match Self::preset(arg) {
            Some(p) => Ok(p),
            None if Path::new(arg).exists() => Self::load(Path::new(arg)),
            None => Err(Error::InvalidParams(format!("{arg} is neither a preset nor a params file"))),
        }
    }

    pub fn bgv(&self) -> Result<Arc<BgvParams>> {
        let ring = RingParams::new(self.degree, &self.moduli)?;
        let config = BgvConfig {
            error: Distribution::CenteredBinomial(2),
            relin_base_bits: self.relin_base_bits,
            flood_bits: self.flood_bits,
        };
        BgvParams::new(ring, self.plain_modulus, config)
    }

    pub fn field_params(&self) -> Result<FieldParams> {
        match self.field.as_str() {
            "bn254" => Ok(FieldParams::bn254()),
            "p31" => Ok(FieldParams::test31()),
            s => {
                let p = s.parse().map_err(|_| Error::InvalidParams(format!("unknown field {s}")))?;
                FieldParams::new(p)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Workload {
    Toy,
    Small,
    Medium,
}

impl Workload {
    pub const ALL: [Workload; 3] = [Self::Toy, Self::Small, Self::Medium];

    pub fn name(self) -> &'static str {
        match self {
            Self::Toy => "toy",
            Self::Small => "small",
            Self::Medium => "medium",
        }
    }

    /// Toy: `x1·x2`, tensoring only. Small: `NoiseFlood(x·v + w)`.
    /// Medium: `NoiseFlood(ModSwitch((x − w)²))` with relinearization.
    pub fn circuit(self) -> FheCircuit {
        let (ct_inputs, pt_inputs, ops) = match self {
            Self::Toy => (2, 0, vec![Op::Tensor { a: 0, b: 1 }]),
            Self::Small => (
                1,
                2,
                vec![Op::CtPtMul { ct: 0, pt: 0 }, Op::CtPtAdd { ct: 1, pt: 1 }, Op::NoiseFlood { ct: 2, count: 1 }],
            ),
            Self::Medium => (
                1,
                1,
                vec![
                    Op::CtPtSub { ct: 0, pt: 0 },
                    Op::Tensor { a: 1, b: 1 },
                    Op::Relin { ct: 2 },
                    Op::ModSwitch { ct: 3 },
                    Op::NoiseFlood { ct: 4, count: 1 },
                ],
            ),
        };
        FheCircuit {
            name: self.name().into(),
            ct_inputs,
            pt_inputs,
            output: ct_inputs + ops.len() - 1,
            ops,
            predicates: Vec::new(),
        }
    }
}

impl fmt::Display for Workload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Workload {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown workload {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    FheOnly,
    Vfhe,
    AttackDemo,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Self::FheOnly => "fhe-only",
            Self::Vfhe => "vfhe",
            Self::AttackDemo => "attack-demo",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::FheOnly, Self::Vfhe, Self::AttackDemo]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown mode {s}")))
    }
}

/// Seconds per phase: key generation, homomorphic evaluation with proving, and
/// encryption with verification and decryption.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup: f64,
    pub prover: f64,
    pub verifier: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    /// Result of verification; absent when no proof was produced.
    pub verified: Option<bool>,
    /// Whether decryption matched the plaintext reference.
    pub decrypted_correct: Option<bool>,
    /// Whether the server deviated from the circuit in this run.
    pub tampered: bool,
    /// Whether a client without verification would have accepted a wrong result.
    pub baseline_fooled: Option<bool>,
    pub count_only: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub os: String,
    pub arch: String,
    pub threads: usize,
    pub version: String,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            threads: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub workload: Workload,
    pub preset: String,
    pub mode: Mode,
    pub seed: u64,
    pub timings: Timings,
    pub constraints: CostStats,
    pub verdicts: Verdicts,
    pub environment: Environment,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: u64,
    /// Makes the server perturb its output in `vfhe` mode.
    pub tamper: bool,
}

/// Labeled sub-seed, so each role draws from its own stream.
pub fn sub_seed(seed: u64, label: &str) -> u64 {
    derive_rng(seed, label).gen()
}

/// Rejects presets whose modulus chain is too short for the circuit.
pub fn check_depth(circuit: &FheCircuit, params: &BgvParams) -> Result<()> {
    circuit
        .shapes(params)
        .map(|_| ())
        .map_err(|e| Error::InvalidParams(format!("preset cannot host circuit {}: {e}", circuit.name)))
}

fn count_context(spec: &ParamSpec) -> Result<CompileContext> {
    Ok(CompileContext {
        field: spec.field_params()?,
        params: spec.bgv()?,
        pk: None,
        rk: None,
        schedule: Schedule::Lazy,
    })
}

/// Constraint counts for a workload without running any encryption.
pub fn compile_workload(workload: Workload, spec: &ParamSpec) -> Result<CountReport> {
    let ctx = count_context(spec)?;
    let circuit = workload.circuit();
    check_depth(&circuit, &ctx.params)?;
    compile_counts(&circuit, &ctx)
}

fn secs(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

pub fn run_workload(workload: Workload, spec: &ParamSpec, mode: Mode, opts: RunOptions) -> Result<RunReport> {
    let params = spec.bgv()?;
    let circuit = workload.circuit();
    check_depth(&circuit, &params)?;
    let mut report = RunReport {
        schema: REPORT_SCHEMA.into(),
        workload,
        preset: spec.name.clone(),
        mode,
        seed: opts.seed,
        timings: Timings::default(),
        constraints: CostStats::empty(),
        verdicts: Verdicts::default(),
        environment: Environment::current(),
    };
    if mode != Mode::FheOnly && spec.count_only {
        let start = Instant::now();
        report.constraints = compile_workload(workload, spec)?.stats;
        report.timings.setup = secs(start);
        report.verdicts.count_only = true;
        return Ok(report);
    }
    let t = params.plain_modulus();
    let mut rng = derive_rng(opts.seed, "workload-inputs");
    let (xs, ws) = sample_inputs(&circuit, params.degree(), t, &mut rng);
    let expected = circuit.evaluate_plain(&xs, &ws, t)?;
    match mode {
        Mode::FheOnly => {
            let start = Instant::now();
            let (sk, pk, rk) = keygen(&params, sub_seed(opts.seed, "kgen"));
            report.timings.setup = secs(start);
            let start = Instant::now();
            let mut enc_rng = derive_rng(opts.seed, "vfhe-enc");
            let cts = xs.iter().map(|x| encrypt(&pk, x, enc_rng.gen())).collect::<Result<Vec<_>>>()?;
            let mut verifier = secs(start);
            let start = Instant::now();
            let trace = circuit.evaluate(&pk, Some(&rk), &cts, &ws, sub_seed(opts.seed, "eval"))?;
            report.timings.prover = secs(start);
            let start = Instant::now();
            let y = decrypt(&sk, &trace.output);
            verifier += secs(start);
            report.timings.verifier = verifier;
            report.verdicts.decrypted_correct = Some(y == expected);
        }
        Mode::Vfhe | Mode::AttackDemo => {
            let field = spec.field_params()?;
            let start = Instant::now();
            let keys = protocol::kgen(&circuit, &params, &field, sub_seed(opts.seed, "kgen"))?;
            report.timings.setup = secs(start);
            report.constraints = keys.verify.stats(protocol::Target::Circuit).clone();
            let start = Instant::now();
            let (c_x, tau_x) = protocol::enc(keys.eval.public_key(), &xs, sub_seed(opts.seed, "enc"))?;
            let mut verifier = secs(start);
            let attack = mode == Mode::AttackDemo;
            let mut server_rng = derive_rng(opts.seed, "server");
            let ek = &keys.eval;
            let start = Instant::now();
            let mut w = ws.clone();
            let oversize = attack && circuit.pt_inputs > 0;
            if oversize {
                let half = (t / 2) as i64;
                w[0][0] = server_rng.gen_range(half + 1..=64 * t as i64);
            }
            let mut trace =
                circuit.evaluate(ek.public_key(), Some(ek.relin_key()), &c_x, &w, sub_seed(opts.seed, "eval"))?;
            if (attack || opts.tamper) && !oversize {
                trace.output = flip_coefficient(&trace.output, &mut server_rng)?;
            }
            let tau_y = protocol::prove(ek, protocol::Target::Circuit, &trace)?;
            let c_y = trace.output;
            report.timings.prover = secs(start);
            report.verdicts.tampered = attack || opts.tamper;
            let start = Instant::now();
            let ok = protocol::verify(&keys.verify, &c_y, &tau_x, &tau_y);
            let y = protocol::dec(keys.verify.secret_key(), &c_y);
            verifier += secs(start);
            report.timings.verifier = verifier;
            report.verdicts.verified = Some(ok);
            report.verdicts.decrypted_correct = Some(y == expected);
            if report.verdicts.tampered {
                report.verdicts.baseline_fooled = Some(y != expected);
            }
        }
    }
    Ok(report)
}

/// One field that differs beyond tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffEntry {
    pub path: String,
    pub reference: Value,
    pub current: Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiffSummary {
    pub entries: Vec<DiffEntry>,
}

impl DiffSummary {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&p, x, out);
            }
        }
        _ => out.push((prefix.to_string(), v.clone())),
    }
}

/// Field-wise diff of two reports. Timings may drift by `timing_pct` percent; every
/// other field except the environment must match exactly.
pub fn report_compare(current: &Value, reference: &Value, timing_pct: f64) -> Result<DiffSummary> {
    for r in [current, reference] {
        if r.get("schema").and_then(Value::as_str) != Some(REPORT_SCHEMA) {
            return Err(Error::Format(format!("report schema is not {REPORT_SCHEMA}")));
        }
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    flatten("", current, &mut a);
    flatten("", reference, &mut b);
    let mut paths: Vec<&String> = a.iter().chain(&b).map(|(p, _)| p).collect();
    paths.sort();
    paths.dedup();
    let get = |side: &[(String, Value)], p: &str| side.iter().find(|(q, _)| q == p).map(|(_, v)| v.clone());
    let mut summary = DiffSummary::default();
    for p in paths {
        if p.starts_with("environment.") {
            continue;
        }
        let cur = get(&a, p).unwrap_or(Value::Null);
        let rf = get(&b, p).unwrap_or(Value::Null);
        let differs = if p.starts_with("timings.") {
            match (cur.as_f64(), rf.as_f64()) {
                (Some(c), Some(r)) => (c - r).abs() > r.abs() * timing_pct / 100.0,
                _ => cur != rf,
            }
        } else {
            cur != rf
        };
        if differs {
            summary.entries.push(DiffEntry { path: p.clone(), reference: rf, current: cur });
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attack {
    BvTrivial,
    RelinKey,
    OverflowOracle,
}

impl Attack {
    pub const ALL: [Attack; 3] = [Self::BvTrivial, Self::RelinKey, Self::OverflowOracle];

    pub fn name(self) -> &'static str {
        match self {
            Self::BvTrivial => "bv-trivial",
            Self::RelinKey => "relin-key",
            Self::OverflowOracle => "overflow-oracle",
        }
    }
}

impl FromStr for Attack {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| Error::InvalidParams(format!("unknown attack {s}")))
    }
}

/// What a demo printed and whether each side behaved as expected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoTranscript {
    pub attack: Attack,
    pub lines: Vec<String>,
    pub baseline_broken: bool,
    pub vfhe_blocked: bool,
}

impl fmt::Display for DemoTranscript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            writeln!(f, "{l}")?;
        }
        Ok(())
    }
}

fn show(p: Option<&Plaintext>) -> String {
    p.map_or("⊥".into(), |p| format!("{:?}", p.centered()))
}

/// Runs one attack against an unprotected decryptor and against the vFHE oracle.
pub fn demo(attack: Attack, spec: &ParamSpec, seed: u64) -> Result<DemoTranscript> {
    let params = spec.bgv()?;
    let field = spec.field_params()?;
    let circuit = match attack {
        Attack::OverflowOracle => Workload::Small.circuit(),
        _ => Workload::Toy.circuit(),
    };
    let keys = protocol::kgen(&circuit, &params, &field, sub_seed(seed, "kgen"))?;
    let sk = keys.verify.secret_key();
    let mut oracle = VfheOracle::new(keys.verify.clone());
    let mut lines = vec![format!(
        "attack {} on {} (N={}, t={})",
        attack.name(),
        spec.name,
        params.degree(),
        params.plain_modulus()
    )];
    let (baseline_broken, vfhe_blocked) = match attack {
        Attack::BvTrivial => {
            let mut plain = UncheckedOracle::new(sk);
            let recovered = attack_trivial_ct(&mut plain, &params);
            lines.push(format!("baseline: decrypt((0,1)) = {recovered:?}"));
            lines.push(format!("secret key:               {:?}", sk.coeffs()));
            let broken = recovered.as_ref().is_some_and(|r| key_from_recovered(&params, r).coeffs() == sk.coeffs());
            lines.push(format!("baseline recovered the key: {broken}"));
            let answer = attack_trivial_ct(&mut oracle.tagging(&keys.eval), &params);
            lines.push(format!(
                "vfhe: oracle_dec((0,1)) = {}",
                answer.as_ref().map_or("⊥".into(), |a| format!("{a:?}"))
            ));
            (broken, answer.is_none())
        }
        Attack::RelinKey => {
            let rk = keys.eval.relin_key();
            let truth = squared_key_mod_t(sk);
            let mut plain = UncheckedOracle::new(sk);
            let leaked = attack_relin_key(&mut plain, rk);
            lines.push(format!("baseline: decrypt(rk[0]) = {}", show(leaked.as_ref())));
            lines.push(format!("s^2 mod t:               {:?}", truth.centered()));
            let broken = leaked.as_ref() == Some(&truth);
            lines.push(format!("baseline learned s^2 mod t: {broken}"));
            let answer = attack_relin_key(&mut oracle.tagging(&keys.eval), rk);
            lines.push(format!("vfhe: oracle_dec(rk[0]) = {}", show(answer.as_ref())));
            (broken, answer.is_none())
        }
        Attack::OverflowOracle => {
            let t = params.plain_modulus();
            let n = params.degree();
            let mut rng = derive_rng(seed, "overflow");
            let x = Plaintext::from_signed(&(0..n).map(|_| rng.gen_range(0..t as i64)).collect::<Vec<_>>(), t);
            // The application only ever outputs bits, so the client aborts on anything else.
            let client = ReactionClient { sk, valid_below: 2 };
            let (c_x, tau_x) =
                oracle.encrypt(keys.eval.public_key(), std::slice::from_ref(&x), sub_seed(seed, "enc"))?;
            let zero = Plaintext::zero(n, t);
            let one = Plaintext::constant(1, n, t);
            let honest = one.centered();
            let bad = oversized_w2(&params, 0, &one, params.fresh_noise_bound().to_u64().unwrap_or(0), &mut rng);
            let quiet = attack_overflow_probe(&client, &c_x[0], &honest)?;
            let loud = attack_overflow_probe(&client, &c_x[0], &bad)?;
            lines.push(format!("baseline: honest w2 -> client aborts: {quiet}"));
            lines.push(format!("baseline: oversized w2 -> client aborts: {loud}"));
            let broken = !quiet && loud;
            lines.push(format!("baseline leaked a failure bit: {broken}"));
            // The engine refuses to evaluate past its noise headroom, so the server
            // computes the overflowing result itself and tags the best trace it can.
            let ek = &keys.eval;
            let mut trace = circuit.evaluate(
                ek.public_key(),
                Some(ek.relin_key()),
                &c_x,
                &[zero.centered(), honest],
                sub_seed(seed, "eval"),
            )?;
            trace.output = biased_affine_unchecked(&c_x[0], &zero, &bad)?;
            trace.pts[1] = bad;
            let tau_y = protocol::prove(ek, protocol::Target::Circuit, &trace)?;
            let c_y = trace.output;
            let verified = protocol::verify(&keys.verify, &c_y, &tau_x, &tau_y);
            let answer = oracle.oracle_dec(&c_y, &tau_x, &tau_y);
            lines.push(format!("vfhe: verify = {verified}, oracle_dec = {}", show(answer.as_ref())));
            (broken, !verified && answer.is_none())
        }
    };
    lines.push(format!("baseline broken: {baseline_broken}; vfhe blocked: {vfhe_blocked}"));
    Ok(DemoTranscript { attack, lines, baseline_broken, vfhe_blocked })
}

#[cfg(test)]
mod tests;
