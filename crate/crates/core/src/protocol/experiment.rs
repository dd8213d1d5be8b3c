//! Empirical soundness: adversarial servers against the verify-then-decrypt oracle.

use num_bigint::BigUint;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_digest, prove, EvalKey, EvalTag, InputTag, Target, VfheKeys, VfheOracle};
use crate::bgv::{Ciphertext, Plaintext};
use crate::error::{Error, Result};
use crate::r1cs::{compile, generate_witness, plaintext_domain, FheCircuit, Op, Predicate, Trace};
use crate::ring::{derive_rng, RingElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Honest,
    /// Perturbs one output coefficient and re-derives the witness for it.
    FlipOutput,
    /// Keeps the honest output but perturbs one witness value.
    ForgeWitness,
    /// Uses a server input outside its declared domain.
    OversizedInput,
    /// Evaluates a different circuit and tags it.
    WrongCircuit,
    /// Presents an output and tag computed for other client inputs.
    Replay,
}

impl Strategy {
    pub const ADVERSARIAL: [Strategy; 5] =
        [Self::FlipOutput, Self::ForgeWitness, Self::OversizedInput, Self::WrongCircuit, Self::Replay];

    pub fn name(self) -> &'static str {
        match self {
            Self::Honest => "honest",
            Self::FlipOutput => "flip-output",
            Self::ForgeWitness => "forge-witness",
            Self::OversizedInput => "oversized-input",
            Self::WrongCircuit => "wrong-circuit",
            Self::Replay => "replay",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Honest].into_iter().chain(Self::ADVERSARIAL).find(|x| x.name() == s)
    }
}

/// Outcome counts. `accepted_wrong` counts oracle answers that differ from `f(x, w)`;
/// `leaked_bits` counts answers given to out-of-domain evaluations, each of which would
/// tell a reaction attacker whether decryption failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub strategy: Strategy,
    pub trials: u64,
    pub accepted_wrong: u64,
    pub rejected: u64,
    pub leaked_bits: u64,
}

/// Client inputs uniform in `Z_t`; server inputs uniform in their domain, narrowed by
/// any range predicate.
pub fn sample_inputs(circuit: &FheCircuit, n: usize, t: u64, rng: &mut ChaCha20Rng) -> (Vec<Plaintext>, Vec<Vec<i64>>) {
    let xs = (0..circuit.ct_inputs)
        .map(|_| Plaintext::from_signed(&(0..n).map(|_| rng.gen_range(0..t as i64)).collect::<Vec<_>>(), t))
        .collect();
    let (lo, hi) = plaintext_domain(t);
    let ws = (0..circuit.pt_inputs)
        .map(|j| {
            let bound = circuit
                .predicates
                .iter()
                .filter(|(i, _)| *i == j)
                .filter_map(|(_, p)| match p {
                    Predicate::RangeBound(b) => Some(*b as i64),
                    Predicate::CommitmentMatch(_) => None,
                })
                .min();
            let (lo, hi) = bound.map_or((lo, hi), |b| (lo.max(-b), hi.min(b)));
            (0..n).map(|_| rng.gen_range(lo..=hi)).collect()
        })
        .collect();
    (xs, ws)
}

/// Sampler for client and server inputs of each trial.
pub type Sampler<'a> = dyn FnMut(&mut ChaCha20Rng) -> (Vec<Plaintext>, Vec<Vec<i64>>) + 'a;

struct Forged {
    output: Ciphertext,
    tau_x: InputTag,
    tag: EvalTag,
    expected: Plaintext,
}

/// Runs `trials` rounds of `strategy` against a fresh oracle.
pub fn soundness_experiment(
    keys: &VfheKeys,
    strategy: Strategy,
    trials: u64,
    seed: u64,
    sampler: &mut Sampler<'_>,
) -> Result<ExperimentReport> {
    let ek = &keys.eval;
    let circuit = ek.circuit().clone();
    if strategy == Strategy::OversizedInput && circuit.pt_inputs == 0 {
        return Err(Error::MalformedCircuit("oversized-input needs a circuit with server inputs".into()));
    }
    let wrong = wrong_circuit(&circuit);
    let wrong_id: [u8; 32] = if strategy == Strategy::WrongCircuit {
        Sha256::digest(compile(&wrong, ek.context())?.system.to_text().as_bytes()).into()
    } else {
        [0; 32]
    };
    let mut rng = derive_rng(seed, strategy.name());
    let mut oracle = VfheOracle::new(keys.verify.clone());
    let mut report = ExperimentReport { strategy, trials, accepted_wrong: 0, rejected: 0, leaked_bits: 0 };
    for _ in 0..trials {
        let forged = match run_trial(ek, &mut oracle, strategy, &wrong, wrong_id, sampler, &mut rng)? {
            Some(f) => f,
            None => {
                report.rejected += 1;
                continue;
            }
        };
        match oracle.oracle_dec(&forged.output, &forged.tau_x, &forged.tag) {
            None => report.rejected += 1,
            Some(y) => {
                if y != forged.expected {
                    report.accepted_wrong += 1;
                }
                if strategy == Strategy::OversizedInput {
                    report.leaked_bits += 1;
                }
            }
        }
    }
    Ok(report)
}

fn wrong_circuit(f: &FheCircuit) -> FheCircuit {
    let mut g = f.clone();
    g.name = format!("{}-doubled", f.name);
    g.ops.push(Op::CtAdd { a: f.output, b: f.output });
    g.output = g.wires() - 1;
    g
}

fn run_trial(
    ek: &EvalKey,
    oracle: &mut VfheOracle,
    strategy: Strategy,
    wrong: &FheCircuit,
    wrong_id: [u8; 32],
    sampler: &mut Sampler<'_>,
    rng: &mut ChaCha20Rng,
) -> Result<Option<Forged>> {
    let params = ek.params().clone();
    let t = params.plain_modulus();
    let circuit = ek.circuit();
    let (pk, rk) = (ek.public_key(), ek.relin_key());
    let (xs, ws) = sampler(rng);
    let (c_x, tau_x) = oracle.encrypt(pk, &xs, rng.gen())?;
    let expected = circuit.evaluate_plain(&xs, &ws, t)?;
    let flood_seed: u64 = rng.gen();
    let honest = |inputs: &[Ciphertext], w: &[Vec<i64>]| circuit.evaluate(pk, Some(rk), inputs, w, flood_seed);

    let forged = match strategy {
        Strategy::Honest => {
            let trace = honest(&c_x, &ws)?;
            Forged { tag: prove(ek, Target::Circuit, &trace)?, output: trace.output, tau_x, expected }
        }
        Strategy::FlipOutput => {
            let mut trace = honest(&c_x, &ws)?;
            trace.output = flip_coefficient(&trace.output, rng)?;
            Forged { tag: prove(ek, Target::Circuit, &trace)?, output: trace.output, tau_x, expected }
        }
        Strategy::ForgeWitness => {
            let trace = honest(&c_x, &ws)?;
            let mut tag = prove(ek, Target::Circuit, &trace)?;
            let p = ek.field().modulus();
            let i = rng.gen_range(0..tag.witness.len());
            let delta = BigUint::from(rng.gen_range(1..u64::MAX)) % p;
            let delta = if delta == BigUint::from(0u8) { BigUint::from(1u8) } else { delta };
            tag.witness[i] = (&tag.witness[i] + delta) % p;
            Forged { tag, output: trace.output, tau_x, expected }
        }
        Strategy::OversizedInput => {
            let mut w = ws.clone();
            let j = rng.gen_range(0..w.len());
            let k = rng.gen_range(0..w[j].len());
            let magnitude = rng.gen_range(t as i64 / 2 + 1..=64 * t as i64);
            w[j][k] = if rng.gen() { magnitude } else { -magnitude };
            let Ok(trace) = honest(&c_x, &w) else {
                return Ok(None);
            };
            let expected = circuit.evaluate_plain(&xs, &w, t)?;
            Forged { tag: prove(ek, Target::Circuit, &trace)?, output: trace.output, tau_x, expected }
        }
        Strategy::WrongCircuit => {
            let trace = wrong.evaluate(pk, Some(rk), &c_x, &ws, flood_seed)?;
            let w = generate_witness(wrong, ek.context(), &trace)?;
            let system_id = if rng.gen() { wrong_id } else { ek.system_id(Target::Circuit) };
            let tag = EvalTag { system_id, io_digest: io_digest(&w.public), witness: w.private };
            Forged { tag, output: trace.output, tau_x, expected }
        }
        Strategy::Replay => {
            let trace = honest(&c_x, &ws)?;
            let (xs2, _) = sampler(rng);
            let (c_x2, tau_x2) = oracle.encrypt(pk, &xs2, rng.gen())?;
            let expected = circuit.evaluate_plain(&xs2, &ws, t)?;
            let tag = if rng.gen() {
                prove(ek, Target::Circuit, &trace)?
            } else {
                let rebound = Trace { inputs: c_x2, ..trace.clone() };
                prove(ek, Target::Circuit, &rebound)?
            };
            Forged { tag, output: trace.output, tau_x: tau_x2, expected }
        }
    };
    Ok(Some(forged))
}

/// Adds a nonzero multiple of `X^k` to one part.
pub fn flip_coefficient(c: &Ciphertext, rng: &mut impl Rng) -> Result<Ciphertext> {
    let mut parts = c.parts().to_vec();
    let p = rng.gen_range(0..parts.len());
    let ring = parts[p].params().clone();
    let k = rng.gen_range(0..ring.degree());
    let smallest = *ring.moduli().iter().min().expect("nonempty") as i64;
    let delta = rng.gen_range(1..smallest);
    let bump = RingElement::monomial(&ring, k).scale(delta);
    parts[p] = parts[p].add(&bump.to_form(parts[p].form()))?;
    Ciphertext::from_parts(c.params(), parts, c.level(), c.noise_bound().clone(), c.correction())
}
