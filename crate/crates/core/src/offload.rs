//! Outsourced tensoring checked by evaluating both sides at a random scalar.
//!
//! The untrusted side computes `ct″ = ct ⊗ ct′`. The trusted side picks `a` from the
//! constants `{0, …, q_1 − 1}` and compares `(ct0 + a·ct1)(ct0′ + a·ct1′)` with
//! `ct0″ + a·(ct1″ + a·ct2″)`, slot-wise. A wrong `ct″` makes the difference a nonzero
//! polynomial of degree at most 2 in `a`, so at most 2 of the `q_1` points accept.

use std::ops::Add;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bgv::{tensor, BgvParams, Ciphertext};
use crate::error::{Error, Result};
use crate::ring::modarith::{add_mod, is_prime, mul_mod};
use crate::ring::{derive_rng, sample_poly, Distribution, Representation, RingElement, RingParams};

/// Ring operation counts: `A×R` scalings, `R+R` additions, `R×R` products.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpLedger {
    pub a_times_r: u64,
    pub r_plus_r: u64,
    pub r_times_r: u64,
}

impl OpLedger {
    pub fn new(a_times_r: u64, r_plus_r: u64, r_times_r: u64) -> Self {
        Self { a_times_r, r_plus_r, r_times_r }
    }

    /// Cost of checking `k` tensorings in one batch.
    pub fn batch_formula(k: u64) -> Self {
        Self::new(4 * k, (6 * k).saturating_sub(2), k)
    }

    /// Cost of recomputing `k` tensorings.
    pub fn recompute_formula(k: u64) -> Self {
        Self::new(0, k, 4 * k)
    }
}

impl Add for OpLedger {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::new(self.a_times_r + o.a_times_r, self.r_plus_r + o.r_plus_r, self.r_times_r + o.r_times_r)
    }
}

impl std::iter::Sum for OpLedger {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Constants `{0, …, q − 1}` of `R_q` for a prime limb `q`; all nonzero differences are units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExceptionalSet {
    q: u64,
}

impl ExceptionalSet {
    pub fn new(q: u64) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::InvalidParams(format!("exceptional set needs a prime limb, got {q}")));
        }
        Ok(Self { q })
    }

    pub fn size(&self) -> u64 {
        self.q
    }

    pub fn contains(&self, a: u64) -> bool {
        a < self.q
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u64 {
        rng.gen_range(0..self.q)
    }

    pub fn soundness_bits(&self) -> f64 {
        (self.q as f64).log2()
    }
}

/// Which limbs the check evaluates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimbPolicy {
    #[default]
    First,
    /// Every limb, with an independent point per limb.
    All,
}

/// A ring element restricted to the checked limbs, in slot form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slots(pub Vec<Vec<u64>>);

/// Everything the trusted side saw and decided.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SzTranscript {
    /// One point per instance, one coordinate per checked limb.
    pub points: Vec<Vec<u64>>,
    pub lhs: Slots,
    pub rhs: Slots,
    pub accepted: bool,
    pub ledger: OpLedger,
}

/// Counting arithmetic on [`Slots`]. Each call is one ring operation whatever the limb count.
struct Meter<'a> {
    moduli: &'a [u64],
    ledger: OpLedger,
}

impl Meter<'_> {
    fn scale(&mut self, a: &[u64], x: &Slots) -> Slots {
        self.ledger.a_times_r += 1;
        Slots(self.zip(x, |q, i, v| mul_mod(a[i], v, q)))
    }

    fn add(&mut self, x: &Slots, y: &Slots) -> Slots {
        self.ledger.r_plus_r += 1;
        Slots(self.zip2(x, y, add_mod))
    }

    fn mul(&mut self, x: &Slots, y: &Slots) -> Slots {
        self.ledger.r_times_r += 1;
        Slots(self.zip2(x, y, mul_mod))
    }

    fn zip(&self, x: &Slots, f: impl Fn(u64, usize, u64) -> u64) -> Vec<Vec<u64>> {
        x.0.iter().enumerate().map(|(i, limb)| limb.iter().map(|&v| f(self.moduli[i], i, v)).collect()).collect()
    }

    fn zip2(&self, x: &Slots, y: &Slots, f: fn(u64, u64, u64) -> u64) -> Vec<Vec<u64>> {
        x.0.iter()
            .zip(&y.0)
            .enumerate()
            .map(|(i, (u, v))| u.iter().zip(v).map(|(&p, &r)| f(p, r, self.moduli[i])).collect())
            .collect()
    }
}

fn view(e: &RingElement, limbs: usize) -> Slots {
    let ntt = e.to_form(Representation::Ntt);
    Slots((0..limbs).map(|i| ntt.limb(i).to_vec()).collect())
}

fn checked_moduli(ct: &Ciphertext, point: &[u64]) -> Result<Vec<u64>> {
    let ring = ct.params().ring_at(ct.level())?;
    if point.is_empty() || point.len() > ring.limbs() {
        return Err(Error::SizeMismatch(format!("point has {} coordinates for {} limbs", point.len(), ring.limbs())));
    }
    let moduli = ring.moduli()[..point.len()].to_vec();
    if point.iter().zip(&moduli).any(|(&a, &q)| a >= q) {
        return Err(Error::OutOfRange("point outside the exceptional set".into()));
    }
    Ok(moduli)
}

fn check_shapes(ct: &Ciphertext, ct2: &Ciphertext, out: &Ciphertext) -> Result<()> {
    for (c, parts) in [(ct, 2), (ct2, 2), (out, 3)] {
        if c.part_count() != parts {
            return Err(Error::WrongDegree { expected: parts, found: c.part_count() });
        }
    }
    if ct.params() != ct2.params() || ct.params() != out.params() {
        return Err(Error::ParamMismatch);
    }
    if ct.level() != ct2.level() || ct.level() != out.level() {
        return Err(Error::LevelMismatch(ct.level(), out.level()));
    }
    Ok(())
}

/// `(f(a), g(a))` for one instance: 4 `A×R`, 4 `R+R`, 1 `R×R`.
fn evaluate_sides(ct: &Ciphertext, ct2: &Ciphertext, out: &Ciphertext, a: &[u64]) -> Result<(Slots, Slots, OpLedger)> {
    check_shapes(ct, ct2, out)?;
    let moduli = checked_moduli(ct, a)?;
    let l = a.len();
    let mut m = Meter { moduli: &moduli, ledger: OpLedger::default() };
    let (x0, x1) = (view(&ct.parts()[0], l), view(&ct.parts()[1], l));
    let (y0, y1) = (view(&ct2.parts()[0], l), view(&ct2.parts()[1], l));
    let (z0, z1, z2) = (view(&out.parts()[0], l), view(&out.parts()[1], l), view(&out.parts()[2], l));
    let ax = m.scale(a, &x1);
    let fx = m.add(&x0, &ax);
    let ay = m.scale(a, &y1);
    let fy = m.add(&y0, &ay);
    let f = m.mul(&fx, &fy);
    let az2 = m.scale(a, &z2);
    let inner = m.add(&z1, &az2);
    let a_inner = m.scale(a, &inner);
    let g = m.add(&z0, &a_inner);
    Ok((f, g, m.ledger))
}

/// Checks `out = ct ⊗ ct′` at point `a` (one coordinate per checked limb, first limb first).
pub fn sz_check_single(ct: &Ciphertext, ct2: &Ciphertext, out: &Ciphertext, a: &[u64]) -> Result<SzTranscript> {
    let (lhs, rhs, ledger) = evaluate_sides(ct, ct2, out, a)?;
    Ok(SzTranscript { points: vec![a.to_vec()], accepted: lhs == rhs, lhs, rhs, ledger })
}

/// Checks `k` tensorings at once by comparing `Σ f_i(a_i)` with `Σ g_i(a_i)`.
pub fn sz_check_batch(
    pairs: &[(Ciphertext, Ciphertext)],
    outs: &[Ciphertext],
    points: &[Vec<u64>],
) -> Result<SzTranscript> {
    if pairs.is_empty() || pairs.len() != outs.len() || pairs.len() != points.len() {
        return Err(Error::SizeMismatch("batch needs matching nonempty pairs, outputs and points".into()));
    }
    if points.iter().any(|p| p.len() != points[0].len()) {
        return Err(Error::SizeMismatch("points check different limb counts".into()));
    }
    let sides = pairs
        .par_iter()
        .zip(outs)
        .zip(points)
        .map(|(((c, c2), o), a)| evaluate_sides(c, c2, o, a))
        .collect::<Result<Vec<_>>>()?;
    let moduli = checked_moduli(&pairs[0].0, &points[0])?;
    if pairs.iter().any(|(c, _)| c.params() != pairs[0].0.params() || c.level() != pairs[0].0.level()) {
        return Err(Error::ParamMismatch);
    }
    let mut m = Meter { moduli: &moduli, ledger: sides.iter().map(|s| s.2).sum() };
    let mut iter = sides.into_iter();
    let (mut lhs, mut rhs, _) = iter.next().expect("nonempty");
    for (f, g, _) in iter {
        lhs = m.add(&lhs, &f);
        rhs = m.add(&rhs, &g);
    }
    Ok(SzTranscript { points: points.to_vec(), accepted: lhs == rhs, lhs, rhs, ledger: m.ledger })
}

/// The trusted role: owns the point generator and the limb policy.
pub struct Verifier {
    sets: Vec<ExceptionalSet>,
    rng: ChaCha20Rng,
}

impl Verifier {
    pub fn new(params: &BgvParams, level: usize, policy: LimbPolicy, seed: u64) -> Result<Self> {
        let moduli = params.ring_at(level)?.moduli();
        let used = match policy {
            LimbPolicy::First => &moduli[..1],
            LimbPolicy::All => moduli,
        };
        let sets = used.iter().map(|&q| ExceptionalSet::new(q)).collect::<Result<_>>()?;
        Ok(Self { sets, rng: derive_rng(seed, "sz-points") })
    }

    pub fn draw(&mut self) -> Vec<u64> {
        self.sets.iter().map(|s| s.sample(&mut self.rng)).collect()
    }

    /// `log2 |A|`, summed over checked limbs.
    pub fn soundness_bits(&self) -> f64 {
        self.sets.iter().map(ExceptionalSet::soundness_bits).sum()
    }

    pub fn check_single(&mut self, ct: &Ciphertext, ct2: &Ciphertext, out: &Ciphertext) -> Result<SzTranscript> {
        let a = self.draw();
        sz_check_single(ct, ct2, out, &a)
    }

    pub fn check_batch(&mut self, pairs: &[(Ciphertext, Ciphertext)], outs: &[Ciphertext]) -> Result<SzTranscript> {
        let points: Vec<_> = (0..pairs.len()).map(|_| self.draw()).collect();
        sz_check_batch(pairs, outs, &points)
    }
}

/// How the untrusted accelerator misbehaves: adds `delta·X^coeff` to one output part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tamper {
    pub part: usize,
    pub coeff: usize,
    pub delta: i64,
}

impl Tamper {
    /// A perturbation that is nonzero on every limb of `params`.
    pub fn random(params: &BgvParams, rng: &mut impl Rng) -> Self {
        let q_min = *params.ring().moduli().iter().min().expect("at least one limb") as i64;
        Self { part: rng.gen_range(0..3), coeff: rng.gen_range(0..params.degree()), delta: rng.gen_range(1..q_min) }
    }
}

/// The untrusted role: tensoring, honest or perturbed in one declared part.
pub fn tensor_untrusted(ct: &Ciphertext, ct2: &Ciphertext, tamper: Option<Tamper>) -> Result<Ciphertext> {
    let honest = tensor(ct, ct2)?;
    let Some(tp) = tamper else {
        return Ok(honest);
    };
    if tp.part >= 3 || tp.coeff >= ct.params().degree() {
        return Err(Error::OutOfRange("tamper position".into()));
    }
    let mut parts = honest.parts().to_vec();
    let ring = parts[tp.part].params().clone();
    parts[tp.part] = parts[tp.part].add(&RingElement::monomial(&ring, tp.coeff).scale(tp.delta))?;
    Ciphertext::from_parts(ct.params(), parts, honest.level(), honest.noise_bound().clone(), honest.correction())
}

/// Trusted recomputation: 4 `R×R` and 1 `R+R` per tensoring, then an equality test.
pub fn recompute_check(pairs: &[(Ciphertext, Ciphertext)], outs: &[Ciphertext]) -> Result<(bool, OpLedger)> {
    if pairs.len() != outs.len() {
        return Err(Error::SizeMismatch("pairs and outputs".into()));
    }
    let mut ok = true;
    for ((c, c2), o) in pairs.iter().zip(outs) {
        ok &= tensor(c, c2)?.parts() == o.parts();
    }
    Ok((ok, OpLedger::recompute_formula(pairs.len() as u64)))
}

/// Every `a` in `{0, …, q_1 − 1}` at which the first-limb check accepts.
pub fn accepting_points(ct: &Ciphertext, ct2: &Ciphertext, out: &Ciphertext) -> Result<Vec<u64>> {
    let q1 = ct.params().ring_at(ct.level())?.moduli()[0];
    if q1 > 1 << 20 {
        return Err(Error::InvalidParams(format!("limb {q1} too large to sweep")));
    }
    let mut hits = Vec::new();
    for a in 0..q1 {
        if sz_check_single(ct, ct2, out, &[a])?.accepted {
            hits.push(a);
        }
    }
    Ok(hits)
}

/// Uniformly random degree-1 ciphertext at the top level (its content is irrelevant here).
pub fn random_ciphertext(params: &Arc<BgvParams>, rng: &mut impl rand::RngCore) -> Ciphertext {
    let ring: &Arc<RingParams> = params.ring();
    let parts = vec![sample_poly(ring, Distribution::Uniform, rng), sample_poly(ring, Distribution::Uniform, rng)];
    Ciphertext::from_parts(params, parts, 0, ring.modulus().clone(), 1).expect("top-level parts")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OffloadTimings {
    pub untrusted: f64,
    pub verify: f64,
    pub recompute: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadReport {
    pub k: usize,
    pub degree: usize,
    pub verdict: bool,
    pub tampered: bool,
    pub ledger: OpLedger,
    pub recompute_ledger: OpLedger,
    /// Ratio of `R×R` products, recompute over verify.
    pub rxr_ratio: f64,
    pub soundness_bits: f64,
    pub timings: OffloadTimings,
}

/// Tensors `k` random pairs on the untrusted side, optionally tampering with one
/// output, then times a batched check against plain recomputation.
pub fn offload_bench(
    k: usize,
    params: &Arc<BgvParams>,
    tamper: bool,
    policy: LimbPolicy,
    seed: u64,
) -> Result<OffloadReport> {
    if k == 0 {
        return Err(Error::InvalidParams("k must be positive".into()));
    }
    let mut rng = derive_rng(seed, "offload-inputs");
    let pairs: Vec<_> =
        (0..k).map(|_| (random_ciphertext(params, &mut rng), random_ciphertext(params, &mut rng))).collect();
    let victim = tamper.then(|| rng.gen_range(0..k));
    let tp = Tamper::random(params, &mut rng);
    let start = Instant::now();
    let outs = pairs
        .iter()
        .enumerate()
        .map(|(i, (c, c2))| tensor_untrusted(c, c2, (victim == Some(i)).then_some(tp)))
        .collect::<Result<Vec<_>>>()?;
    let untrusted = start.elapsed().as_secs_f64();
    let mut verifier = Verifier::new(params, 0, policy, seed)?;
    let start = Instant::now();
    let transcript = verifier.check_batch(&pairs, &outs)?;
    let verify = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let (_, recompute_ledger) = recompute_check(&pairs, &outs)?;
    let recompute = start.elapsed().as_secs_f64();
    Ok(OffloadReport {
        k,
        degree: params.degree(),
        verdict: transcript.accepted,
        tampered: tamper,
        ledger: transcript.ledger,
        recompute_ledger,
        rxr_ratio: recompute_ledger.r_times_r as f64 / transcript.ledger.r_times_r as f64,
        soundness_bits: verifier.soundness_bits(),
        timings: OffloadTimings { untrusted, verify, recompute },
    })
}

#[cfg(test)]
mod tests;
