//! Lowering of [`FheCircuit`]s to constraints.
//!
//! Ciphertext inputs and the output enter as public inputs in slot (NTT) form.
//! Ring products are slot-wise; NTT layers, plaintext scalings and products with
//! public keys are linear and cost nothing beyond wider bounds.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::builder::{BuildMode, BuildOutput, Builder, Ledger, LinearMap, Schedule, SlotVec};
use super::circuit::{CtShape, FheCircuit, Op, Predicate, Trace};
use super::field::FieldParams;
use super::mimc::Mimc;
use super::system::{ConstraintSystem, Lc};
use crate::bgv::{BgvParams, Ciphertext, PublicKey, RelinKey};
use crate::error::{Error, Result};
use crate::ring::modarith::inv_mod;
use crate::ring::{crt_merge, forward_matrix, inverse_matrix, Representation};

/// Everything the lowering needs besides the circuit. Keys are only read when
/// constraints are materialized.
#[derive(Debug, Clone)]
pub struct CompileContext {
    pub field: FieldParams,
    pub params: Arc<BgvParams>,
    pub pk: Option<PublicKey>,
    pub rk: Option<RelinKey>,
    pub schedule: Schedule,
}

/// Constraint accounting for one compiled circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostStats {
    pub constraints_total: u64,
    pub constraints_by_gadget: BTreeMap<String, u64>,
    pub reductions_count: u64,
    pub reductions_bits_total: u64,
    pub eager_baseline_count: u64,
    pub lazy_ratio: f64,
}

impl CostStats {
    /// Stats of a run that produced no proof system.
    pub fn empty() -> Self {
        Self {
            constraints_total: 0,
            constraints_by_gadget: BTreeMap::new(),
            reductions_count: 0,
            reductions_bits_total: 0,
            eager_baseline_count: 0,
            lazy_ratio: 1.0,
        }
    }

    fn new(lazy: &Ledger, eager_reductions: u64) -> Self {
        let lazy_ratio = if lazy.reductions == 0 { 1.0 } else { eager_reductions as f64 / lazy.reductions as f64 };
        Self {
            constraints_total: lazy.total,
            constraints_by_gadget: lazy.by_gadget.clone(),
            reductions_count: lazy.reductions,
            reductions_bits_total: lazy.reduction_bits,
            eager_baseline_count: eager_reductions,
            lazy_ratio,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub system: ConstraintSystem,
    pub stats: CostStats,
    /// Digest of the gadget stream; equal to the count-mode digest of the same circuit.
    pub stream_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountReport {
    pub stats: CostStats,
    pub stream_digest: String,
    /// Constraints counted gadget by gadget; equals `stats.constraints_total` when the
    /// ledger formulas are exact.
    pub constraints_emitted: u64,
}

/// Full assignment for a compiled system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub public: Vec<BigUint>,
    pub private: Vec<BigUint>,
    /// Honest-trace values found outside their tracked interval (always 0 when honest).
    pub bound_violations: u64,
}

pub fn compile(circuit: &FheCircuit, ctx: &CompileContext) -> Result<Compiled> {
    let lazy = lower(circuit, ctx, ctx.schedule, BuildMode::Structure, None)?;
    let eager = lower(circuit, ctx, Schedule::Eager, BuildMode::Count, None)?;
    if lazy.emitted != lazy.ledger.total {
        return Err(Error::Format("constraint ledger out of balance".into()));
    }
    Ok(Compiled {
        system: lazy.system.expect("structure mode"),
        stats: CostStats::new(&lazy.ledger, eager.ledger.reductions),
        stream_digest: lazy.stream_digest,
    })
}

/// Counts without materializing anything; usable at large ring degree.
pub fn compile_counts(circuit: &FheCircuit, ctx: &CompileContext) -> Result<CountReport> {
    let lazy = lower(circuit, ctx, ctx.schedule, BuildMode::Count, None)?;
    let eager = lower(circuit, ctx, Schedule::Eager, BuildMode::Count, None)?;
    Ok(CountReport {
        stats: CostStats::new(&lazy.ledger, eager.ledger.reductions),
        stream_digest: lazy.stream_digest,
        constraints_emitted: lazy.emitted,
    })
}

/// Assignment for the system [`compile`] produces, derived from an engine trace.
/// Never fails on dishonest values; those simply yield an unsatisfying witness.
pub fn generate_witness(circuit: &FheCircuit, ctx: &CompileContext, trace: &Trace) -> Result<Witness> {
    let out = lower(circuit, ctx, ctx.schedule, BuildMode::Witness, Some(trace))?;
    Ok(Witness {
        public: out.public.expect("witness mode"),
        private: out.witness.expect("witness mode"),
        bound_violations: out.bound_violations,
    })
}

/// Constraints and assignment in one pass (tests and diagnostics).
pub fn build_full(circuit: &FheCircuit, ctx: &CompileContext, trace: &Trace) -> Result<BuildOutput> {
    lower(circuit, ctx, ctx.schedule, BuildMode::Full, Some(trace))
}

fn slots(c: &Ciphertext, part: usize, limb: usize) -> Vec<u64> {
    c.parts()[part].to_form(Representation::Ntt).limb(limb).to_vec()
}

/// Public-input vector: every input ciphertext then the output, each as
/// part × limb × slot residues. Fails if a ciphertext does not have the expected shape.
pub fn public_inputs(
    circuit: &FheCircuit,
    params: &BgvParams,
    inputs: &[Ciphertext],
    output: &Ciphertext,
) -> Result<Vec<BigUint>> {
    let shapes = circuit.shapes(params)?;
    let fits = |c: &Ciphertext, s: CtShape| {
        c.params().as_ref() == params
            && c.part_count() == s.parts
            && c.level() == s.level
            && c.correction() == s.correction
    };
    if inputs.len() != circuit.ct_inputs {
        return Err(Error::TraceMismatch("ciphertext input count".into()));
    }
    let mut out = Vec::new();
    for (c, s) in inputs.iter().zip(&shapes).chain([(output, &shapes[circuit.output])]) {
        if !fits(c, *s) {
            return Err(Error::TraceMismatch("ciphertext shape differs from circuit".into()));
        }
        let limbs = params.ring_at(s.level)?.limbs();
        for p in 0..s.parts {
            for i in 0..limbs {
                out.extend(slots(c, p, i).into_iter().map(BigUint::from));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Domain {
    Slot,
    Coeff,
}

#[derive(Clone)]
struct CtWire {
    /// part × limb
    parts: Vec<Vec<SlotVec>>,
    level: usize,
    domain: Domain,
}

struct PtWire {
    terms: Option<Vec<Lc>>,
    lo: BigInt,
    hi: BigInt,
}

struct Lowering<'a> {
    ctx: &'a CompileContext,
    b: Builder,
    trace: Option<&'a Trace>,
    n: usize,
    moduli: Vec<u64>,
    fwd: Vec<Vec<Vec<u64>>>,
    inv: Vec<Vec<Vec<u64>>>,
}

fn negacyclic(poly: &[u64], q: u64) -> Vec<Vec<u64>> {
    let n = poly.len();
    (0..n).map(|j| (0..n).map(|k| if j >= k { poly[j - k] } else { (q - poly[n + j - k]) % q }).collect()).collect()
}

fn mat_mul(a: &[Vec<u64>], b: &[Vec<u64>], q: u64) -> Vec<Vec<u64>> {
    let n = b[0].len();
    a.iter()
        .map(|row| {
            (0..n)
                .map(|k| {
                    let s: u128 = row.iter().zip(b).map(|(&x, r)| x as u128 * r[k] as u128 % q as u128).sum();
                    (s % q as u128) as u64
                })
                .collect()
        })
        .collect()
}

fn lower(
    circuit: &FheCircuit,
    ctx: &CompileContext,
    schedule: Schedule,
    mode: BuildMode,
    trace: Option<&Trace>,
) -> Result<BuildOutput> {
    let params = &ctx.params;
    let shapes = circuit.shapes(params)?;
    let top = params.ring().clone();
    let n = params.degree();
    let materialize = mode != BuildMode::Count;
    let (fwd, inv) = if materialize {
        (
            (0..top.limbs()).map(|i| forward_matrix(&top, i)).collect(),
            (0..top.limbs()).map(|i| inverse_matrix(&top, i)).collect(),
        )
    } else {
        (Vec::new(), Vec::new())
    };
    let mut lw = Lowering {
        ctx,
        b: Builder::new(ctx.field.clone(), schedule, mode),
        trace,
        n,
        moduli: top.moduli().to_vec(),
        fwd,
        inv,
    };
    lw.run(circuit, &shapes)?;
    Ok(lw.b.finish())
}

impl Lowering<'_> {
    fn limbs_at(&self, level: usize) -> usize {
        self.moduli.len() - level
    }

    fn run(&mut self, circuit: &FheCircuit, shapes: &[CtShape]) -> Result<()> {
        let params = self.ctx.params.clone();
        let out_shape = shapes[circuit.output];

        // Public inputs.
        let mut layout = Vec::new();
        for s in shapes[..circuit.ct_inputs].iter().chain([&out_shape]) {
            layout.push((s.parts, self.limbs_at(s.level)));
        }
        let total: usize = layout.iter().map(|(p, l)| p * l * self.n).sum();
        let values = match self.trace {
            Some(tr) => {
                if tr.pts.len() != circuit.pt_inputs {
                    return Err(Error::TraceMismatch("server input count".into()));
                }
                Some(public_inputs(circuit, &params, &tr.inputs, &tr.output)?)
            }
            None => None,
        };
        let vars = self.b.alloc_public(total, values.as_deref());
        let mut cursor = 0;
        let mut publics: Vec<CtWire> = Vec::new();
        for (k, &(parts, limbs)) in layout.iter().enumerate() {
            let level = if k < circuit.ct_inputs { 0 } else { out_shape.level };
            let mut ps = Vec::new();
            for _ in 0..parts {
                let mut ls = Vec::new();
                for i in 0..limbs {
                    ls.push(self.b.public_vec(self.moduli[i], &vars[cursor..cursor + self.n]));
                    cursor += self.n;
                }
                ps.push(ls);
            }
            publics.push(CtWire { parts: ps, level, domain: Domain::Slot });
        }
        let output_public = publics.pop().expect("output layout");
        let mut wires = publics;

        // Server inputs and predicates.
        let pts = (0..circuit.pt_inputs).map(|j| self.server_input(j)).collect::<Result<Vec<_>>>()?;
        for (j, pred) in &circuit.predicates {
            self.predicate(&pts[*j], pred)?;
        }

        let (mut ms_idx, mut fl_idx) = (0, 0);
        for op in &circuit.ops {
            let out = match *op {
                Op::CtAdd { a, b } => self.ct_linear(&wires[a], &wires[b], false)?,
                Op::CtSub { a, b } => self.ct_linear(&wires[a], &wires[b], true)?,
                Op::CtPtAdd { ct, pt } => self.ct_pt_add(&wires[ct], &pts[pt], false)?,
                Op::CtPtSub { ct, pt } => self.ct_pt_add(&wires[ct], &pts[pt], true)?,
                Op::CtPtMul { ct, pt } => self.ct_pt_mul(&wires[ct], &pts[pt])?,
                Op::Tensor { a, b } => self.tensor(&wires[a], &wires[b])?,
                Op::Relin { ct } => self.relin(&wires[ct])?,
                Op::ModSwitch { ct } => {
                    ms_idx += 1;
                    self.mod_switch(&wires[ct], ms_idx - 1)?
                }
                Op::NoiseFlood { ct, count } => {
                    fl_idx += 1;
                    self.flood(&wires[ct], count, fl_idx - 1)?
                }
            };
            wires.push(out);
        }
        if let Some(tr) = self.trace {
            if tr.mod_switch.len() != ms_idx || tr.flood.len() != fl_idx {
                return Err(Error::TraceMismatch("operation log length".into()));
            }
        }

        // Output binding: computed wire ≡ public output, slot by slot.
        let result = self.convert_domain(&wires[circuit.output], Domain::Slot)?;
        self.b.scoped("output_binding", |b| -> Result<()> {
            for (wp, pp) in result.parts.iter().zip(&output_public.parts) {
                for (w, p) in wp.iter().zip(pp) {
                    let diff = b.sub(w, p)?;
                    b.congruent_zero(&diff)?;
                }
            }
            Ok(())
        })
    }

    fn rows<'m>(&self, m: &'m [Vec<u64>]) -> Option<&'m [Vec<u64>]> {
        (self.b.mode() != BuildMode::Count).then_some(m)
    }

    fn apply(&mut self, sv: &SlotVec, m: Option<&[Vec<u64>]>) -> Result<SlotVec> {
        let map = LinearMap { rows: m, out_len: self.n, in_len: sv.len };
        self.b.linear(sv, &map)
    }

    fn ntt(&mut self, sv: &SlotVec, limb: usize, dir: Domain) -> Result<SlotVec> {
        let m = match dir {
            Domain::Slot => self.fwd.get(limb).cloned(),
            Domain::Coeff => self.inv.get(limb).cloned(),
        };
        let rows = m.as_deref().and_then(|m| self.rows(m));
        self.apply(sv, rows)
    }

    fn convert_domain(&mut self, w: &CtWire, d: Domain) -> Result<CtWire> {
        if w.domain == d {
            return Ok(w.clone());
        }
        let mut parts = Vec::new();
        for p in &w.parts {
            let mut ls = Vec::new();
            for (i, sv) in p.iter().enumerate() {
                ls.push(self.ntt(sv, i, d)?);
            }
            parts.push(ls);
        }
        Ok(CtWire { parts, level: w.level, domain: d })
    }

    fn pt_at(&self, pt: &PtWire, q: u64) -> SlotVec {
        SlotVec { q, len: self.n, terms: pt.terms.clone(), lo: pt.lo.clone(), hi: pt.hi.clone() }
    }

    fn server_input(&mut self, j: usize) -> Result<PtWire> {
        let t = self.ctx.params.plain_modulus();
        let off = BigInt::from(t / 2);
        let n = self.n;
        let raw = match self.trace {
            Some(tr) => {
                let w = &tr.pts[j];
                if w.len() != n {
                    return Err(Error::TraceMismatch("server input length".into()));
                }
                w.clone()
            }
            None => vec![0; n],
        };
        let shifted = self.b.witness_vec(t, n, BigInt::zero(), BigInt::from(t - 1), || {
            raw.iter().map(|&x| BigInt::from(x) + &off).collect()
        });
        self.b.scoped("input_domain", |b| b.below(&shifted, &BigInt::from(t)))?;
        Ok(PtWire {
            terms: shifted.terms.map(|ts| ts.iter().map(|x| x.shifted(&-&off)).collect()),
            lo: -off.clone(),
            hi: BigInt::from(t - 1) - off,
        })
    }

    fn predicate(&mut self, w: &PtWire, pred: &Predicate) -> Result<()> {
        match pred {
            Predicate::RangeBound(bound) => {
                let bb = BigInt::from(*bound);
                let sv = SlotVec {
                    q: self.ctx.params.plain_modulus(),
                    len: self.n,
                    terms: w.terms.as_ref().map(|ts| ts.iter().map(|x| x.shifted(&bb)).collect()),
                    lo: &w.lo + &bb,
                    hi: &w.hi + &bb,
                };
                self.b.scoped("predicate_range", |b| b.below(&sv, &(2 * bb.clone() + 1)))
            }
            Predicate::CommitmentMatch(digest) => {
                let mimc = Mimc::new(&self.ctx.field)?;
                mimc.enforce_hash(&mut self.b, "predicate_commitment", w.terms.as_deref(), self.n, digest);
                Ok(())
            }
        }
    }

    fn ct_linear(&mut self, a: &CtWire, b: &CtWire, subtract: bool) -> Result<CtWire> {
        let d = if a.domain == b.domain { a.domain } else { Domain::Coeff };
        let (a, b) = (self.convert_domain(a, d)?, self.convert_domain(b, d)?);
        let mut parts = Vec::new();
        for p in 0..a.parts.len().max(b.parts.len()) {
            let mut ls = Vec::new();
            for i in 0..self.limbs_at(a.level) {
                let sv = match (a.parts.get(p), b.parts.get(p)) {
                    (Some(x), Some(y)) if subtract => self.b.sub(&x[i], &y[i])?,
                    (Some(x), Some(y)) => self.b.add(&x[i], &y[i])?,
                    (Some(x), None) => x[i].clone(),
                    (None, Some(y)) if subtract => {
                        let zero = self.b.constant_vec(y[i].q, &vec![BigInt::zero(); self.n]);
                        self.b.sub(&zero, &y[i])?
                    }
                    (None, Some(y)) => y[i].clone(),
                    (None, None) => unreachable!(),
                };
                ls.push(sv);
            }
            parts.push(ls);
        }
        Ok(CtWire { parts, level: a.level, domain: d })
    }

    fn ct_pt_add(&mut self, c: &CtWire, pt: &PtWire, subtract: bool) -> Result<CtWire> {
        let mut out = c.clone();
        for i in 0..self.limbs_at(c.level) {
            let mut v = self.pt_at(pt, self.moduli[i]);
            if c.domain == Domain::Slot {
                v = self.ntt(&v, i, Domain::Slot)?;
            }
            out.parts[0][i] =
                if subtract { self.b.sub(&c.parts[0][i], &v)? } else { self.b.add(&c.parts[0][i], &v)? };
        }
        Ok(out)
    }

    fn ct_pt_mul(&mut self, c: &CtWire, pt: &PtWire) -> Result<CtWire> {
        let mut out = self.convert_domain(c, Domain::Slot)?;
        for i in 0..self.limbs_at(c.level) {
            let v = self.pt_at(pt, self.moduli[i]);
            let v = self.ntt(&v, i, Domain::Slot)?;
            for part in out.parts.iter_mut() {
                part[i] = self.b.mul(&part[i], &v)?;
            }
        }
        Ok(out)
    }

    fn tensor(&mut self, a: &CtWire, b: &CtWire) -> Result<CtWire> {
        let (a, b) = (self.convert_domain(a, Domain::Slot)?, self.convert_domain(b, Domain::Slot)?);
        let mut parts = vec![Vec::new(), Vec::new(), Vec::new()];
        for i in 0..self.limbs_at(a.level) {
            let (x0, x1, y0, y1) = (&a.parts[0][i], &a.parts[1][i], &b.parts[0][i], &b.parts[1][i]);
            let d0 = self.b.mul(x0, y0)?;
            let m01 = self.b.mul(x0, y1)?;
            let m10 = self.b.mul(y0, x1)?;
            let d2 = self.b.mul(x1, y1)?;
            let d1 = self.b.add(&m01, &m10)?;
            parts[0].push(d0);
            parts[1].push(d1);
            parts[2].push(d2);
        }
        Ok(CtWire { parts, level: a.level, domain: Domain::Slot })
    }

    /// Coefficient-domain values of `sv` reduced mod its limb, in witness mode.
    fn residues(&self, sv: &SlotVec) -> Vec<u64> {
        let q = BigInt::from(sv.q);
        sv.terms
            .as_ref()
            .expect("materialized")
            .iter()
            .map(|t| self.b.value(t).mod_floor(&q).to_u64().expect("below q"))
            .collect()
    }

    fn relin(&mut self, c: &CtWire) -> Result<CtWire> {
        let params = self.ctx.params.clone();
        let c = self.convert_domain(c, Domain::Coeff)?;
        let limbs = self.limbs_at(c.level);
        let w = params.relin_base_bits();
        let ring = params.ring_at(c.level)?.clone();
        let digits_count = (ring.modulus().bits() as usize).div_ceil(w as usize);
        let n = self.n;
        let mask = (BigUint::one() << w) - 1u32;

        let digit_values: Option<Vec<Vec<BigInt>>> = if self.b.has_values() {
            let residues: Vec<Vec<u64>> = (0..limbs).map(|i| self.residues(&c.parts[2][i])).collect();
            let ints = (0..n)
                .map(|k| crt_merge(&residues.iter().map(|r| r[k]).collect::<Vec<_>>(), ring.moduli()))
                .collect::<Result<Vec<BigUint>>>()?;
            Some(
                (0..digits_count)
                    .map(|j| ints.iter().map(|x| BigInt::from((x >> (w as usize * j)) & &mask)).collect())
                    .collect(),
            )
        } else {
            None
        };
        let digits = self.b.scoped("relin", |b| -> Result<Vec<SlotVec>> {
            let mut ds = Vec::new();
            for j in 0..digits_count {
                let vals = digit_values.as_ref().map(|d| d[j].clone());
                let d = b.witness_vec(ring.moduli()[0], n, BigInt::zero(), BigInt::from(mask.clone()), || {
                    vals.expect("values")
                });
                b.range(&d, w)?;
                ds.push(d);
            }
            Ok(ds)
        })?;
        let top = BigInt::one() << (w as usize * digits_count);
        let recomposed_terms = digits[0].terms.as_ref().map(|_| {
            (0..n)
                .map(|k| {
                    Lc::combine(
                        digits
                            .iter()
                            .enumerate()
                            .map(|(j, d)| (BigInt::one() << (w as usize * j), &d.terms.as_ref().unwrap()[k])),
                    )
                })
                .collect::<Vec<_>>()
        });
        let rk = self.ctx.rk.clone();
        if self.b.mode() != BuildMode::Count && rk.is_none() {
            return Err(Error::MissingRelinKey);
        }
        let mut parts = vec![Vec::new(), Vec::new()];
        for i in 0..limbs {
            let q = self.moduli[i];
            let recomposed = SlotVec { q, len: n, terms: recomposed_terms.clone(), lo: BigInt::zero(), hi: &top - 1 };
            self.b.scoped("relin", |b| -> Result<()> {
                let diff = b.sub(&c.parts[2][i], &recomposed)?;
                b.congruent_zero(&diff)
            })?;
            for (slot, out) in parts.iter_mut().enumerate() {
                let mut acc = c.parts[slot][i].clone();
                for (j, d) in digits.iter().enumerate() {
                    let d = SlotVec { q, ..d.clone() };
                    let m = rk.as_ref().map(|rk| {
                        let key = &rk.digits()[j];
                        let comp = if slot == 0 { &key.0 } else { &key.1 };
                        negacyclic(comp.to_form(Representation::Coefficient).limb(i), q)
                    });
                    let term = self.apply(&d, m.as_deref())?;
                    acc = self.b.add(&acc, &term)?;
                }
                out.push(acc);
            }
        }
        Ok(CtWire { parts, level: c.level, domain: Domain::Coeff })
    }

    fn mod_switch(&mut self, c: &CtWire, idx: usize) -> Result<CtWire> {
        let params = self.ctx.params.clone();
        let t = params.plain_modulus();
        if t.is_multiple_of(2) {
            return Err(Error::InvalidParams("modulus-switch gadget needs an odd plaintext modulus".into()));
        }
        let c = self.convert_domain(c, Domain::Coeff)?;
        let limbs = self.limbs_at(c.level);
        let last = limbs - 1;
        let q_last = self.moduli[last];
        let off = BigInt::from((q_last - 1) / 2);
        let n = self.n;
        let deltas = match self.trace {
            Some(tr) => {
                let d = tr
                    .mod_switch
                    .get(idx)
                    .ok_or_else(|| Error::TraceMismatch("missing modulus-switch record".into()))?;
                if d.len() != c.parts.len() || d.iter().any(|v| v.len() != n) {
                    return Err(Error::TraceMismatch("modulus-switch record shape".into()));
                }
                Some(d.clone())
            }
            None => None,
        };
        let tb = BigInt::from(t);
        let mut parts = Vec::new();
        for (p, part) in c.parts.iter().enumerate() {
            let dp = deltas.as_ref().map(|d| d[p].clone());
            let residues: Option<Vec<Vec<u64>>> =
                self.b.has_values().then(|| (0..last).map(|i| self.residues(&part[i])).collect());
            let out = self.b.scoped("mod_switch", |b| -> Result<Vec<SlotVec>> {
                let shifted = b.witness_vec(q_last, n, BigInt::zero(), BigInt::from(q_last - 1), || {
                    dp.as_ref().expect("trace").iter().map(|&d| BigInt::from(d) + &off).collect()
                });
                b.below(&shifted, &BigInt::from(q_last))?;
                let delta = SlotVec {
                    terms: shifted.terms.as_ref().map(|ts| ts.iter().map(|x| x.shifted(&-&off)).collect()),
                    lo: -off.clone(),
                    hi: off.clone(),
                    ..shifted
                };
                // Dropped limb: c_L ≡ t·δ' (mod q_L).
                let t_delta = b.scale(&delta, t)?;
                let e = b.sub(&part[last], &t_delta)?;
                b.congruent_zero(&e)?;
                let mut outs = Vec::new();
                for i in 0..last {
                    let qi = params.ring().moduli()[i];
                    let vals = residues.as_ref().map(|r| {
                        let inv = inv_mod(q_last % qi, qi).expect("coprime limbs");
                        let qb = BigInt::from(qi);
                        r[i].iter()
                            .zip(dp.as_ref().expect("trace"))
                            .map(|(&cv, &d)| {
                                let diff = (BigInt::from(cv) - &tb * d).mod_floor(&qb);
                                (diff * inv).mod_floor(&qb)
                            })
                            .collect::<Vec<_>>()
                    });
                    let cp = b.witness_vec(qi, n, BigInt::zero(), BigInt::from(qi - 1), || vals.expect("values"));
                    b.below(&cp, &BigInt::from(qi))?;
                    // c_i ≡ q_L·c'_i + t·δ' (mod q_i).
                    let delta_i = SlotVec { q: qi, ..delta.clone() };
                    let scaled_cp = b.scale(&cp, q_last % qi)?;
                    let t_delta_i = b.scale(&delta_i, t % qi)?;
                    let rhs = b.add(&scaled_cp, &t_delta_i)?;
                    let e = b.sub(&part[i], &rhs)?;
                    b.congruent_zero(&e)?;
                    outs.push(cp);
                }
                Ok(outs)
            })?;
            parts.push(out);
        }
        Ok(CtWire { parts, level: c.level + 1, domain: Domain::Coeff })
    }

    fn flood(&mut self, c: &CtWire, count: usize, idx: usize) -> Result<CtWire> {
        let params = self.ctx.params.clone();
        let t = params.plain_modulus();
        let bf = params.flood_error_bound();
        let n = self.n;
        let limbs = self.limbs_at(c.level);
        let records = match self.trace {
            Some(tr) => {
                let r = tr.flood.get(idx).ok_or_else(|| Error::TraceMismatch("missing flooding record".into()))?;
                if r.len() != count || r.iter().any(|x| x.u.len() != n || x.e0.len() != n || x.e1.len() != n) {
                    return Err(Error::TraceMismatch("flooding record shape".into()));
                }
                Some(r.clone())
            }
            None => None,
        };
        let materialize = self.b.mode() != BuildMode::Count;
        let pk = self.ctx.pk.clone();
        if materialize && pk.is_none() {
            return Err(Error::InvalidParams("flooding needs the public key".into()));
        }
        // Per-limb linear maps for `pk_j·u` and `t·e` in the wire's domain.
        let mut maps = Vec::new();
        if let Some(pk) = pk.as_ref().filter(|_| materialize) {
            let (p0, p1) = pk.components();
            for i in 0..limbs {
                let q = self.moduli[i];
                let mut a0 = negacyclic(p0.to_form(Representation::Coefficient).limb(i), q);
                let mut a1 = negacyclic(p1.to_form(Representation::Coefficient).limb(i), q);
                let mut te: Vec<Vec<u64>> =
                    (0..n).map(|j| (0..n).map(|k| if j == k { t % q } else { 0 }).collect()).collect();
                if c.domain == Domain::Slot {
                    a0 = mat_mul(&self.fwd[i], &a0, q);
                    a1 = mat_mul(&self.fwd[i], &a1, q);
                    te = mat_mul(&self.fwd[i], &te, q);
                }
                maps.push((a0, a1, te));
            }
        }
        let mut out = c.clone();
        for a in 0..count {
            let rec = records.as_ref().map(|r| r[a].clone());
            let (u, e0, e1) = self.b.scoped("zero_enc_check", |b| -> Result<_> {
                let mut alloc = |pick: fn(&crate::bgv::EncryptionRandomness) -> &Vec<i64>, bound: u64| {
                    let vals =
                        rec.as_ref().map(|r| pick(r).iter().map(|&x| BigInt::from(x) + bound).collect::<Vec<_>>());
                    let shifted = b.witness_vec(self.moduli[0], n, BigInt::zero(), BigInt::from(2 * bound), || {
                        vals.expect("trace")
                    });
                    b.below(&shifted, &BigInt::from(2 * bound + 1))?;
                    let bb = BigInt::from(bound);
                    Ok::<_, Error>(SlotVec {
                        terms: shifted.terms.as_ref().map(|ts| ts.iter().map(|x| x.shifted(&-&bb)).collect()),
                        lo: -bb.clone(),
                        hi: bb,
                        ..shifted
                    })
                };
                let u = alloc(|r| &r.u, 1)?;
                let e0 = alloc(|r| &r.e0, bf)?;
                let e1 = alloc(|r| &r.e1, bf)?;
                Ok((u, e0, e1))
            })?;
            for i in 0..limbs {
                let q = self.moduli[i];
                let m = maps.get(i);
                let ui = SlotVec { q, ..u.clone() };
                for (part, e) in [(0usize, &e0), (1, &e1)] {
                    let ei = SlotVec { q, ..e.clone() };
                    let key = m.map(|m| if part == 0 { &m.0 } else { &m.1 });
                    let ku = self.apply(&ui, key.map(|x| x.as_slice()))?;
                    let te = self.apply(&ei, m.map(|m| m.2.as_slice()))?;
                    let addend = self.b.add(&ku, &te)?;
                    out.parts[part][i] = self.b.add(&out.parts[part][i], &addend)?;
                }
            }
        }
        Ok(out)
    }
}
