//! Constraint builder with integer-bound tracking and reduction scheduling.
//!
//! Every value handled here is a vector of linear combinations (one per slot or
//! coefficient) that, on an honest assignment, evaluates to an integer inside a
//! tracked interval `[lo, hi]`. While that interval stays below the live threshold
//! the field never wraps, so integer identities can be checked modulo `p`.
//! Reductions modulo a limb prime are inserted only when an operation would push an
//! interval past the threshold (lazy) or after every operation (eager).

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::field::FieldParams;
use super::system::{Constraint, ConstraintSystem, Lc, ONE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// Reduce only when the next operation would overflow the live threshold.
    Lazy,
    /// Reduce after every operation; the baseline lazy scheduling is compared to.
    Eager,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildMode {
    /// Bounds and constraint counts only; nothing is materialized.
    Count,
    /// Materialize constraints without an assignment.
    Structure,
    /// Compute the assignment without storing constraints.
    Witness,
    /// Materialize constraints and the assignment.
    Full,
}

/// A vector of integer-valued linear combinations sharing one interval bound and one
/// limb modulus.
#[derive(Debug, Clone)]
pub struct SlotVec {
    pub q: u64,
    pub len: usize,
    /// `None` in count mode.
    pub terms: Option<Vec<Lc>>,
    pub lo: BigInt,
    pub hi: BigInt,
}

impl SlotVec {
    /// Values known to be canonical residues in `[0, q)`.
    pub fn is_canonical(&self) -> bool {
        !self.lo.is_negative() && self.hi < BigInt::from(self.q)
    }

    fn span(&self) -> BigInt {
        self.hi.clone().max(BigInt::zero()) + (-&self.lo).max(BigInt::zero())
    }

    fn map_terms(&self, f: impl Fn(&Lc) -> Lc) -> Option<Vec<Lc>> {
        self.terms.as_ref().map(|t| t.iter().map(f).collect())
    }
}

/// Dense linear map with entries in `[0, q)`. Bounds are always derived from the shape
/// (`cols·(q − 1)` per row) so counts do not depend on the concrete entries.
pub struct LinearMap<'a> {
    pub rows: Option<&'a [Vec<u64>]>,
    pub out_len: usize,
    pub in_len: usize,
}

/// Per-gadget constraint accounting.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    pub by_gadget: BTreeMap<String, u64>,
    pub total: u64,
    pub reductions: u64,
    pub reduction_bits: u64,
}

/// Analytic constraint costs of the gadgets.
pub mod cost {
    /// Bit decomposition: one booleanity constraint per bit plus recomposition.
    pub fn range(bits: u32) -> u64 {
        bits as u64 + 1
    }

    /// `0 ≤ x < bound` as two ranges of `bitlen(bound − 1)` bits.
    pub fn below(bound_bits: u32) -> u64 {
        2 * range(bound_bits)
    }

    /// Tie `x = k·q + r`, `r < q` two-sided, `k` one-sided.
    pub fn mod_reduce(q_bits: u32, k_bits: u32) -> u64 {
        1 + below(q_bits) + range(k_bits)
    }

    /// Tie `x = k·q` and a range on `k`.
    pub fn congruence(k_bits: u32) -> u64 {
        1 + range(k_bits)
    }

    pub const SLOT_MUL: u64 = 1;
}

pub fn bitlen(x: &BigInt) -> u32 {
    x.magnitude().bits() as u32
}

pub struct Builder {
    field: FieldParams,
    threshold: BigInt,
    schedule: Schedule,
    mode: BuildMode,
    constraints: Vec<Constraint>,
    values: Vec<BigUint>,
    num_public: usize,
    num_witness: usize,
    ledger: Ledger,
    emitted: u64,
    scope: Option<&'static str>,
    stream: Sha256,
    bound_violations: u64,
}

/// Result of a build.
#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub system: Option<ConstraintSystem>,
    pub public: Option<Vec<BigUint>>,
    pub witness: Option<Vec<BigUint>>,
    pub ledger: Ledger,
    /// Number of constraints actually emitted (equals `ledger.total` outside count mode).
    pub emitted: u64,
    /// SHA-256 over the stream of gadget charges; identical across modes.
    pub stream_digest: String,
    pub bound_violations: u64,
}

impl Builder {
    pub fn new(field: FieldParams, schedule: Schedule, mode: BuildMode) -> Self {
        let threshold = BigInt::from(field.live_threshold());
        Self {
            field,
            threshold,
            schedule,
            mode,
            constraints: Vec::new(),
            values: vec![BigUint::one()],
            num_public: 0,
            num_witness: 0,
            ledger: Ledger::default(),
            emitted: 0,
            scope: None,
            stream: Sha256::new(),
            bound_violations: 0,
        }
    }

    pub fn field(&self) -> &FieldParams {
        &self.field
    }

    pub fn mode(&self) -> BuildMode {
        self.mode
    }

    pub fn has_values(&self) -> bool {
        matches!(self.mode, BuildMode::Witness | BuildMode::Full)
    }

    fn has_rows(&self) -> bool {
        matches!(self.mode, BuildMode::Structure | BuildMode::Full)
    }

    fn materialize(&self) -> bool {
        self.mode != BuildMode::Count
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    /// Runs `f` with all charges attributed to `label` unless an outer scope is active.
    pub fn scoped<R>(&mut self, label: &'static str, f: impl FnOnce(&mut Self) -> R) -> R {
        let outer = self.scope;
        if outer.is_none() {
            self.scope = Some(label);
        }
        let out = f(self);
        self.scope = outer;
        out
    }

    fn charge(&mut self, label: &'static str, count: u64) {
        let name = self.scope.unwrap_or(label);
        *self.ledger.by_gadget.entry(name.to_string()).or_default() += count;
        self.ledger.total += count;
        self.stream.update(name.as_bytes());
        self.stream.update(label.as_bytes());
        self.stream.update(count.to_le_bytes());
    }

    fn note_reductions(&mut self, q: u64, count: usize) {
        self.ledger.reductions += count as u64;
        self.ledger.reduction_bits += count as u64 * (64 - q.leading_zeros()) as u64;
    }

    fn enforce(&mut self, a: &Lc, b: &Lc, c: &Lc) {
        self.emitted += 1;
        if self.has_rows() {
            self.constraints.push(Constraint {
                a: a.to_row(&self.field),
                b: b.to_row(&self.field),
                c: c.to_row(&self.field),
            });
        }
    }

    /// Allocates `n` public inputs; must precede any witness allocation.
    pub fn alloc_public(&mut self, n: usize, values: Option<&[BigUint]>) -> Vec<usize> {
        assert_eq!(self.num_witness, 0, "public inputs are allocated first");
        let start = 1 + self.num_public;
        self.num_public += n;
        if self.has_values() {
            let v = values.expect("public values in witness mode");
            assert_eq!(v.len(), n);
            self.values.extend(v.iter().map(|x| x % self.field.modulus()));
        }
        (start..start + n).collect()
    }

    fn alloc(&mut self, value: impl FnOnce() -> BigInt) -> usize {
        let index = 1 + self.num_public + self.num_witness;
        self.num_witness += 1;
        if self.has_values() {
            let v = self.field.reduce(&value());
            self.values.push(v);
        }
        index
    }

    /// Integer value of `lc` in witness mode: the signed integer whose field image is
    /// the evaluation, chosen in `(−p/2, p/2]`.
    pub fn value(&self, lc: &Lc) -> BigInt {
        let v = self.field.reduce(&lc.evaluate(&self.values));
        let p = BigInt::from(self.field.modulus().clone());
        let v = BigInt::from(v);
        if &v * 2 > p {
            v - p
        } else {
            v
        }
    }

    fn field_value(&self, lc: &Lc) -> BigUint {
        self.field.reduce(&lc.evaluate(&self.values))
    }

    /// Witness vector of `len` fresh variables with the given interval.
    pub fn witness_vec(
        &mut self,
        q: u64,
        len: usize,
        lo: BigInt,
        hi: BigInt,
        values: impl FnOnce() -> Vec<BigInt>,
    ) -> SlotVec {
        let terms = if self.materialize() {
            let vals = if self.has_values() { Some(values()) } else { None };
            Some((0..len).map(|i| Lc::var(self.alloc(|| vals.as_ref().expect("values")[i].clone()))).collect())
        } else {
            self.num_witness += len;
            None
        };
        SlotVec { q, len, terms, lo, hi }
    }

    /// Wraps already-allocated variables (public inputs) as a canonical vector mod `q`.
    pub fn public_vec(&self, q: u64, vars: &[usize]) -> SlotVec {
        SlotVec {
            q,
            len: vars.len(),
            terms: self.materialize().then(|| vars.iter().map(|&v| Lc::var(v)).collect()),
            lo: BigInt::zero(),
            hi: BigInt::from(q - 1),
        }
    }

    /// Constant vector.
    pub fn constant_vec(&self, q: u64, values: &[BigInt]) -> SlotVec {
        let lo = values.iter().min().cloned().unwrap_or_default();
        let hi = values.iter().max().cloned().unwrap_or_default();
        SlotVec {
            q,
            len: values.len(),
            terms: self.materialize().then(|| values.iter().map(|v| Lc::constant(v.clone())).collect()),
            lo,
            hi,
        }
    }

    fn is_live(&self, lo: &BigInt, hi: &BigInt, q: u64) -> bool {
        let span = hi.clone().max(BigInt::zero()) + (-lo).max(BigInt::zero());
        span + q < self.threshold
    }

    fn check_bounds(&mut self, sv: &SlotVec) {
        if !self.has_values() {
            return;
        }
        let terms = sv.terms.as_ref().expect("materialized");
        let bad = terms
            .iter()
            .filter(|t| {
                let v = self.value(t);
                v < sv.lo || v > sv.hi
            })
            .count();
        self.bound_violations += bad as u64;
    }

    // ---- range gadgets ----

    fn range_lc(&mut self, x: &Lc, bits: u32) {
        let v = if self.has_values() { self.field_value(x) } else { BigUint::zero() };
        let mut recomposed = Lc::zero();
        for i in 0..bits {
            let bit = self.alloc(|| BigInt::from(v.bit(i as u64) as u8));
            let b = Lc::var(bit);
            self.enforce(&b, &b.shifted(&BigInt::from(-1)), &Lc::zero());
            recomposed = Lc::combine([(BigInt::one(), &recomposed), (BigInt::one() << i, &b)]);
        }
        self.enforce(&recomposed.minus(x), &Lc::var(ONE), &Lc::zero());
    }

    /// `0 ≤ x < 2^bits` for every term.
    pub fn range(&mut self, sv: &SlotVec, bits: u32) -> Result<()> {
        if bits + 2 > self.field.bit_length() {
            return Err(Error::FieldTooSmall(format!("{bits}-bit range in a {}-bit field", self.field.bit_length())));
        }
        if let Some(terms) = &sv.terms {
            for t in terms.clone() {
                self.range_lc(&t, bits);
            }
        } else {
            self.num_witness += sv.len * bits as usize;
            self.emitted += sv.len as u64 * cost::range(bits);
        }
        self.charge("range", sv.len as u64 * cost::range(bits));
        Ok(())
    }

    /// `0 ≤ x < bound` for every term, as two ranges.
    pub fn below(&mut self, sv: &SlotVec, bound: &BigInt) -> Result<()> {
        let top = bound - 1;
        let bits = bitlen(&top);
        self.range(sv, bits)?;
        let flipped = SlotVec {
            terms: sv.map_terms(|t| Lc::constant(top.clone()).minus(t)),
            lo: &top - &sv.hi,
            hi: &top - &sv.lo,
            ..sv.clone()
        };
        self.range(&flipped, bits)
    }

    // ---- linear operations (free) ----

    /// Adds `K·q` so that every value is nonnegative; congruence class is unchanged.
    pub fn nonneg(&self, sv: &SlotVec) -> SlotVec {
        if !sv.lo.is_negative() {
            return sv.clone();
        }
        let q = BigInt::from(sv.q);
        let shift = (-&sv.lo).div_ceil(&q) * &q;
        SlotVec { terms: sv.map_terms(|t| t.shifted(&shift)), lo: &sv.lo + &shift, hi: &sv.hi + &shift, ..sv.clone() }
    }

    fn settle(&mut self, sv: SlotVec) -> Result<SlotVec> {
        self.check_bounds(&sv);
        match self.schedule {
            Schedule::Eager if !sv.is_canonical() => self.reduce(&sv),
            _ => Ok(sv),
        }
    }

    /// Checks that a nonnegative vector is small enough for a reduction tie not to wrap.
    fn make_live(&self, sv: &SlotVec) -> Result<SlotVec> {
        if sv.hi < self.threshold {
            Ok(sv.clone())
        } else {
            Err(Error::SchedulerOverflow("operand bound reaches the field size".into()))
        }
    }

    fn combine2(&self, a: &SlotVec, b: &SlotVec, ka: i64, kb: i64) -> SlotVec {
        let (ka_b, kb_b) = (BigInt::from(ka), BigInt::from(kb));
        let ends = |x: &SlotVec, k: &BigInt| {
            let (l, h) = (&x.lo * k, &x.hi * k);
            if l <= h {
                (l, h)
            } else {
                (h, l)
            }
        };
        let (al, ah) = ends(a, &ka_b);
        let (bl, bh) = (ends(b, &kb_b).0, ends(b, &kb_b).1);
        let terms = match (&a.terms, &b.terms) {
            (Some(x), Some(y)) => {
                Some(x.iter().zip(y).map(|(s, t)| Lc::combine([(ka_b.clone(), s), (kb_b.clone(), t)])).collect())
            }
            _ => None,
        };
        SlotVec { q: a.q, len: a.len, terms, lo: al + bl, hi: ah + bh }
    }

    fn linear2(&mut self, a: &SlotVec, b: &SlotVec, ka: i64, kb: i64) -> Result<SlotVec> {
        assert_eq!((a.q, a.len), (b.q, b.len), "operands share modulus and length");
        let (mut a, mut b) = (a.clone(), b.clone());
        loop {
            let out = self.combine2(&a, &b, ka, kb);
            if self.is_live(&out.lo, &out.hi, out.q) {
                return self.settle(out);
            }
            // Reduce the wider operand first.
            let target_a = a.span() >= b.span();
            if target_a && !a.is_canonical() {
                a = self.reduce(&a)?;
            } else if !b.is_canonical() {
                b = self.reduce(&b)?;
            } else if !a.is_canonical() {
                a = self.reduce(&a)?;
            } else {
                return Err(Error::SchedulerOverflow("operand bound reaches the field size".into()));
            }
        }
    }

    pub fn add(&mut self, a: &SlotVec, b: &SlotVec) -> Result<SlotVec> {
        self.linear2(a, b, 1, 1)
    }

    pub fn sub(&mut self, a: &SlotVec, b: &SlotVec) -> Result<SlotVec> {
        self.linear2(a, b, 1, -1)
    }

    /// Adds a public constant to every term.
    pub fn add_constants(&mut self, a: &SlotVec, c: &[BigInt]) -> Result<SlotVec> {
        let k = self.constant_vec(a.q, c);
        self.linear2(a, &k, 1, 1)
    }

    /// Multiplies every term by the nonnegative constant `k < q`.
    pub fn scale(&mut self, a: &SlotVec, k: u64) -> Result<SlotVec> {
        let zero = self.constant_vec(a.q, &vec![BigInt::zero(); a.len]);
        self.linear2(a, &zero, k as i64, 0)
    }

    /// Applies a matrix with entries in `[0, q)`.
    pub fn linear(&mut self, a: &SlotVec, map: &LinearMap<'_>) -> Result<SlotVec> {
        assert_eq!(map.in_len, a.len);
        let s = BigInt::from(map.in_len as u64) * BigInt::from(a.q - 1);
        let out_bounds = |x: &SlotVec| (&s * x.lo.clone().min(BigInt::zero()), &s * x.hi.clone().max(BigInt::zero()));
        let mut a = a.clone();
        let (mut lo, mut hi) = out_bounds(&a);
        if !self.is_live(&lo, &hi, a.q) {
            a = self.reduce(&a)?;
            (lo, hi) = out_bounds(&a);
            if !self.is_live(&lo, &hi, a.q) {
                return Err(Error::SchedulerOverflow("operand bound reaches the field size".into()));
            }
        }
        let terms = a.terms.as_ref().map(|terms| {
            let rows = map.rows.expect("matrix entries when materializing");
            rows.iter().map(|row| Lc::combine(row.iter().zip(terms).map(|(&m, t)| (BigInt::from(m), t)))).collect()
        });
        self.settle(SlotVec { q: a.q, len: map.out_len, terms, lo, hi })
    }

    // ---- multiplication ----

    /// Slot-wise product, one constraint per slot.
    pub fn mul(&mut self, a: &SlotVec, b: &SlotVec) -> Result<SlotVec> {
        assert_eq!((a.q, a.len), (b.q, b.len), "operands share modulus and length");
        let mut a = self.make_live(&self.nonneg(a))?;
        let mut b = self.make_live(&self.nonneg(b))?;
        loop {
            let hi = &a.hi * &b.hi;
            if self.is_live(&BigInt::zero(), &hi, a.q) {
                break;
            }
            let target_a = a.hi >= b.hi;
            if target_a && !a.is_canonical() {
                a = self.reduce(&a)?;
            } else if !b.is_canonical() {
                b = self.reduce(&b)?;
            } else if !a.is_canonical() {
                a = self.reduce(&a)?;
            } else {
                return Err(Error::SchedulerOverflow("operand bound reaches the field size".into()));
            }
        }
        let terms = match (&a.terms, &b.terms) {
            (Some(x), Some(y)) => {
                let mut out = Vec::with_capacity(a.len);
                for (s, t) in x.iter().zip(y) {
                    let z = self.alloc(BigInt::zero);
                    if self.has_values() {
                        let v = self.field.mul(&self.field_value(s), &self.field_value(t));
                        self.values[z] = v;
                    }
                    self.enforce(s, t, &Lc::var(z));
                    out.push(Lc::var(z));
                }
                Some(out)
            }
            _ => {
                self.num_witness += a.len;
                self.emitted += a.len as u64;
                None
            }
        };
        self.charge("slot_mul", a.len as u64 * cost::SLOT_MUL);
        let hi = &a.hi * &b.hi;
        self.settle(SlotVec { q: a.q, len: a.len, terms, lo: BigInt::zero(), hi })
    }

    // ---- reductions ----

    /// Canonical residues mod `q`; a no-op when already canonical.
    pub fn reduce(&mut self, sv: &SlotVec) -> Result<SlotVec> {
        if sv.is_canonical() {
            return Ok(sv.clone());
        }
        self.reduce_forced(sv)
    }

    /// Reduction gadget regardless of the current interval.
    pub fn reduce_forced(&mut self, sv: &SlotVec) -> Result<SlotVec> {
        let x = self.make_live(&self.nonneg(sv))?;
        let q = BigInt::from(x.q);
        let k_max = &x.hi / &q;
        let k_bits = bitlen(&k_max);
        let q_top = BigInt::from(x.q - 1);
        self.scoped("mod_reduce", |b| -> Result<SlotVec> {
            let (ks, rs) = match &x.terms {
                Some(terms) => {
                    let mut ks = Vec::with_capacity(x.len);
                    let mut rs = Vec::with_capacity(x.len);
                    for t in terms {
                        let v = if b.has_values() { b.value(t) } else { BigInt::zero() };
                        let (kv, rv) = v.div_mod_floor(&q);
                        let k = b.alloc(|| kv);
                        let r = b.alloc(|| rv);
                        let tie = t.minus(&Lc::combine([(q.clone(), &Lc::var(k)), (BigInt::one(), &Lc::var(r))]));
                        b.enforce(&tie, &Lc::var(ONE), &Lc::zero());
                        ks.push(Lc::var(k));
                        rs.push(Lc::var(r));
                    }
                    (Some(ks), Some(rs))
                }
                None => {
                    b.num_witness += 2 * x.len;
                    b.emitted += x.len as u64;
                    (None, None)
                }
            };
            b.charge("tie", x.len as u64);
            let r = SlotVec { q: x.q, len: x.len, terms: rs, lo: BigInt::zero(), hi: q_top.clone() };
            b.below(&r, &q)?;
            let k = SlotVec { q: x.q, len: x.len, terms: ks, lo: BigInt::zero(), hi: k_max.clone() };
            b.range(&k, k_bits)?;
            b.note_reductions(x.q, x.len);
            b.check_bounds(&r);
            Ok(r)
        })
    }

    /// Enforces `x ≡ 0 (mod q)` for every term.
    pub fn congruent_zero(&mut self, sv: &SlotVec) -> Result<()> {
        let x = self.make_live(&self.nonneg(sv))?;
        let q = BigInt::from(x.q);
        let k_max = &x.hi / &q;
        let k_bits = bitlen(&k_max);
        self.scoped("congruence", |b| -> Result<()> {
            let ks = match &x.terms {
                Some(terms) => {
                    let mut ks = Vec::with_capacity(x.len);
                    for t in terms {
                        let v = if b.has_values() { b.value(t) } else { BigInt::zero() };
                        let k = b.alloc(|| v.div_floor(&q));
                        b.enforce(&t.minus(&Lc::var(k).scaled(&q)), &Lc::var(ONE), &Lc::zero());
                        ks.push(Lc::var(k));
                    }
                    Some(ks)
                }
                None => {
                    b.num_witness += x.len;
                    b.emitted += x.len as u64;
                    None
                }
            };
            b.charge("tie", x.len as u64);
            let k = SlotVec { q: x.q, len: x.len, terms: ks, lo: BigInt::zero(), hi: k_max };
            b.range(&k, k_bits)?;
            b.note_reductions(x.q, x.len);
            Ok(())
        })
    }

    // ---- raw field gadgets (used by hashing) ----

    /// Allocates `x·y` as a new variable; one constraint.
    pub fn product_lc(&mut self, label: &'static str, x: &Lc, y: &Lc) -> Lc {
        let z = self.alloc(BigInt::zero);
        if self.has_values() {
            self.values[z] = self.field.mul(&self.field_value(x), &self.field_value(y));
        }
        self.enforce(x, y, &Lc::var(z));
        self.charge(label, 1);
        Lc::var(z)
    }

    /// `x = c` in the field; one constraint.
    pub fn equal_constant(&mut self, label: &'static str, x: &Lc, c: &BigUint) {
        let diff = x.minus(&Lc::constant(BigInt::from_biguint(Sign::Plus, c.clone())));
        self.enforce(&diff, &Lc::var(ONE), &Lc::zero());
        self.charge(label, 1);
    }

    /// Count-mode stand-in for field gadgets applied `n` times.
    pub fn charge_uniform(&mut self, label: &'static str, per_item: u64, vars_per_item: usize, n: usize) {
        self.num_witness += vars_per_item * n;
        self.emitted += per_item * n as u64;
        self.charge(label, per_item * n as u64);
    }

    pub fn finish(self) -> BuildOutput {
        let stream_digest = hex::encode(self.stream.clone().finalize());
        let (public, witness) = if self.has_values() {
            (Some(self.values[1..1 + self.num_public].to_vec()), Some(self.values[1 + self.num_public..].to_vec()))
        } else {
            (None, None)
        };
        let system = self.has_rows().then(|| ConstraintSystem {
            field: self.field.clone(),
            num_public: self.num_public,
            num_witness: self.num_witness,
            constraints: self.constraints,
        });
        BuildOutput {
            system,
            public,
            witness,
            ledger: self.ledger,
            emitted: self.emitted,
            stream_digest,
            bound_violations: self.bound_violations,
        }
    }
}
