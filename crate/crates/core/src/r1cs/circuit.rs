//! Evaluation circuits over ciphertext and plaintext wires, and their execution by
//! the BGV engine.

use std::sync::Arc;

use num_bigint::BigUint;

use crate::bgv::eval::{eval_add_raw, eval_mul_raw};
use crate::bgv::{
    eval_add, eval_sub, mod_switch, noise_flood, relinearize, tensor, BgvParams, Ciphertext, EncryptionRandomness,
    Plaintext, PublicKey, RelinKey,
};
use crate::error::{Error, Result};
use crate::ring::derive_rng;

/// One evaluation step. Ciphertext wires are numbered inputs first, then one new wire
/// per op in order; plaintext wires are the server inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    CtAdd {
        a: usize,
        b: usize,
    },
    CtSub {
        a: usize,
        b: usize,
    },
    CtPtAdd {
        ct: usize,
        pt: usize,
    },
    CtPtSub {
        ct: usize,
        pt: usize,
    },
    CtPtMul {
        ct: usize,
        pt: usize,
    },
    Tensor {
        a: usize,
        b: usize,
    },
    Relin {
        ct: usize,
    },
    ModSwitch {
        ct: usize,
    },
    /// Adds `count` encryptions of zero; each addend's randomness is range-checked.
    NoiseFlood {
        ct: usize,
        count: usize,
    },
}

/// Client-registered check on a server input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    /// Every centered coefficient has magnitude at most the bound.
    RangeBound(u64),
    /// MiMC digest of the centered coefficients equals the registered value.
    CommitmentMatch(BigUint),
}

/// Client inputs are public ciphertexts; server inputs are private plaintexts whose
/// centered coefficients must lie in `[−⌊t/2⌋, t − 1 − ⌊t/2⌋]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FheCircuit {
    pub name: String,
    pub ct_inputs: usize,
    pub pt_inputs: usize,
    pub ops: Vec<Op>,
    pub output: usize,
    pub predicates: Vec<(usize, Predicate)>,
}

/// Static shape of a ciphertext wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CtShape {
    pub parts: usize,
    pub level: usize,
    pub correction: u64,
}

/// Everything the witness generator needs from an engine run.
#[derive(Debug, Clone)]
pub struct Trace {
    pub inputs: Vec<Ciphertext>,
    /// Centered server inputs, possibly out of domain when the server cheats.
    pub pts: Vec<Vec<i64>>,
    /// `δ'` per part per coefficient, one entry per `ModSwitch`.
    pub mod_switch: Vec<Vec<Vec<i64>>>,
    /// Zero-encryption randomness, one entry per `NoiseFlood`.
    pub flood: Vec<Vec<EncryptionRandomness>>,
    pub output: Ciphertext,
}

impl FheCircuit {
    /// `c_y = c_x`; lets fresh ciphertexts be tagged for decryption.
    pub fn identity() -> Self {
        Self { name: "identity".into(), ct_inputs: 1, pt_inputs: 0, ops: Vec::new(), output: 0, predicates: Vec::new() }
    }

    pub fn wires(&self) -> usize {
        self.ct_inputs + self.ops.len()
    }

    /// Shapes of every ciphertext wire; rejects malformed dataflow.
    pub fn shapes(&self, params: &BgvParams) -> Result<Vec<CtShape>> {
        let t = params.plain_modulus();
        let mut shapes = vec![CtShape { parts: 2, level: 0, correction: 1 }; self.ct_inputs];
        let ct = |shapes: &Vec<CtShape>, i: usize| {
            shapes.get(i).copied().ok_or_else(|| Error::MalformedCircuit(format!("wire {i} used before definition")))
        };
        let pt = |i: usize| {
            if i < self.pt_inputs {
                Ok(())
            } else {
                Err(Error::MalformedCircuit(format!("no server input {i}")))
            }
        };
        let same = |a: CtShape, b: CtShape| {
            if a.level == b.level && a.correction == b.correction {
                Ok(())
            } else {
                Err(Error::MalformedCircuit("operands differ in level or correction".into()))
            }
        };
        for op in &self.ops {
            let shape = match *op {
                Op::CtAdd { a, b } | Op::CtSub { a, b } => {
                    let (x, y) = (ct(&shapes, a)?, ct(&shapes, b)?);
                    same(x, y)?;
                    CtShape { parts: x.parts.max(y.parts), ..x }
                }
                Op::CtPtAdd { ct: c, pt: p } | Op::CtPtSub { ct: c, pt: p } => {
                    pt(p)?;
                    let x = ct(&shapes, c)?;
                    if x.correction != 1 {
                        return Err(Error::MalformedCircuit("plaintext addition needs correction 1".into()));
                    }
                    x
                }
                Op::CtPtMul { ct: c, pt: p } => {
                    pt(p)?;
                    ct(&shapes, c)?
                }
                Op::Tensor { a, b } => {
                    let (x, y) = (ct(&shapes, a)?, ct(&shapes, b)?);
                    if x.parts != 2 || y.parts != 2 || x.level != y.level {
                        return Err(Error::MalformedCircuit("tensor needs two degree-1 operands at one level".into()));
                    }
                    CtShape { parts: 3, level: x.level, correction: x.correction * y.correction % t }
                }
                Op::Relin { ct: c } => {
                    let x = ct(&shapes, c)?;
                    if x.parts != 3 {
                        return Err(Error::MalformedCircuit("relinearization needs a degree-2 operand".into()));
                    }
                    CtShape { parts: 2, ..x }
                }
                Op::ModSwitch { ct: c } => {
                    let x = ct(&shapes, c)?;
                    if x.level >= params.max_level() {
                        return Err(Error::MalformedCircuit("no level left to drop".into()));
                    }
                    let ring = params.ring_at(x.level)?;
                    let q_last = ring.moduli()[ring.limbs() - 1];
                    CtShape { level: x.level + 1, correction: x.correction * (q_last % t) % t, ..x }
                }
                Op::NoiseFlood { ct: c, .. } => {
                    let x = ct(&shapes, c)?;
                    if x.parts != 2 {
                        return Err(Error::MalformedCircuit("flooding needs a degree-1 operand".into()));
                    }
                    x
                }
            };
            shapes.push(shape);
        }
        if self.output >= shapes.len() {
            return Err(Error::MalformedCircuit("output wire out of range".into()));
        }
        for (i, _) in &self.predicates {
            pt(*i)?;
        }
        Ok(shapes)
    }

    pub fn output_shape(&self, params: &BgvParams) -> Result<CtShape> {
        Ok(self.shapes(params)?[self.output])
    }

    /// Runs the circuit on the engine and records the trace. Server inputs are applied
    /// as raw integer polynomials, so out-of-domain values are evaluated rather than
    /// refused.
    pub fn evaluate(
        &self,
        pk: &PublicKey,
        rk: Option<&RelinKey>,
        inputs: &[Ciphertext],
        pts: &[Vec<i64>],
        flood_seed: u64,
    ) -> Result<Trace> {
        let params: &Arc<BgvParams> = pk.params();
        self.shapes(params)?;
        if inputs.len() != self.ct_inputs || pts.len() != self.pt_inputs {
            return Err(Error::TraceMismatch("input counts".into()));
        }
        if pts.iter().any(|w| w.len() != params.degree()) {
            return Err(Error::TraceMismatch("server input length".into()));
        }
        let mut wires: Vec<Ciphertext> = inputs.to_vec();
        let mut mod_switch_log = Vec::new();
        let mut flood_log = Vec::new();
        let mut rng = derive_rng(flood_seed, "circuit-flood");
        for op in &self.ops {
            let out = match *op {
                Op::CtAdd { a, b } => eval_add(&wires[a], &wires[b])?,
                Op::CtSub { a, b } => eval_sub(&wires[a], &wires[b])?,
                Op::CtPtAdd { ct, pt } => eval_add_raw(&wires[ct], &pts[pt])?,
                Op::CtPtSub { ct, pt } => {
                    let neg: Vec<i64> = pts[pt].iter().map(|x| -x).collect();
                    eval_add_raw(&wires[ct], &neg)?
                }
                Op::CtPtMul { ct, pt } => eval_mul_raw(&wires[ct], &pts[pt])?,
                Op::Tensor { a, b } => tensor(&wires[a], &wires[b])?,
                Op::Relin { ct } => relinearize(&wires[ct], rk)?,
                Op::ModSwitch { ct } => {
                    let (c, deltas) = mod_switch(&wires[ct])?;
                    mod_switch_log.push(deltas);
                    c
                }
                Op::NoiseFlood { ct, count } => {
                    let seed = rand::Rng::gen(&mut rng);
                    let (c, recs) = noise_flood(&wires[ct], pk, count, seed)?;
                    flood_log.push(recs);
                    c
                }
            };
            wires.push(out);
        }
        Ok(Trace {
            inputs: inputs.to_vec(),
            pts: pts.to_vec(),
            mod_switch: mod_switch_log,
            flood: flood_log,
            output: wires[self.output].clone(),
        })
    }
}

impl FheCircuit {
    /// Plaintext reference semantics: `f(x, w)` over `Z_t[X]/(X^N+1)`. Key switching,
    /// modulus switching and flooding leave the message unchanged.
    pub fn evaluate_plain(&self, xs: &[Plaintext], ws: &[Vec<i64>], t: u64) -> Result<Plaintext> {
        if xs.len() != self.ct_inputs || ws.len() != self.pt_inputs {
            return Err(Error::TraceMismatch("input counts".into()));
        }
        let ws: Vec<Plaintext> = ws.iter().map(|w| Plaintext::from_signed(w, t)).collect();
        let mut wires = xs.to_vec();
        for op in &self.ops {
            let out = match *op {
                Op::CtAdd { a, b } => wires[a].add(&wires[b]),
                Op::CtSub { a, b } => wires[a].sub(&wires[b]),
                Op::CtPtAdd { ct, pt } => wires[ct].add(&ws[pt]),
                Op::CtPtSub { ct, pt } => wires[ct].sub(&ws[pt]),
                Op::CtPtMul { ct, pt } => wires[ct].mul(&ws[pt]),
                Op::Tensor { a, b } => wires[a].mul(&wires[b]),
                Op::Relin { ct } | Op::ModSwitch { ct } | Op::NoiseFlood { ct, .. } => wires[ct].clone(),
            };
            wires.push(out);
        }
        wires.get(self.output).cloned().ok_or_else(|| Error::MalformedCircuit("output wire out of range".into()))
    }
}

/// Centered range of server inputs: `[−⌊t/2⌋, t − 1 − ⌊t/2⌋]`.
pub fn plaintext_domain(t: u64) -> (i64, i64) {
    let off = (t / 2) as i64;
    (-off, t as i64 - 1 - off)
}

/// Native evaluation of a predicate.
pub fn predicate_holds(pred: &Predicate, w: &[i64], field: &super::FieldParams) -> Result<bool> {
    Ok(match pred {
        Predicate::RangeBound(b) => w.iter().all(|x| x.unsigned_abs() <= *b),
        Predicate::CommitmentMatch(d) => super::mimc::Mimc::new(field)?.hash_signed(w) == *d,
    })
}
