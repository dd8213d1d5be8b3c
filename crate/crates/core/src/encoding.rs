//! Batched RLWE encoding of `R_{q_i}` elements, linearly homomorphic up to a budget.
//!
//! An element `x` of `R_{q_i}` is read as `N` slot values and packed into the plaintext
//! `m = NTT⁻¹(x)`, so scaling and adding encodings acts on `x` coefficient-wise. The
//! encoding is `(a, b = −a·s + q_i·e + m)` over `R_Q`; decoding lifts `b + a·s` to
//! `(−Q/2, Q/2]`, reduces mod `q_i` and applies the NTT again. Slot `i` is the `i`-th
//! output of the ring NTT (bit-reversed evaluation order).

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::modarith::find_ntt_prime;
use crate::ring::{derive_rng, sample_poly, Distribution, Representation, RingElement, RingParams};

const ERROR: Distribution = Distribution::CenteredBinomial(2);
const LIMB_BITS: u32 = 50;

#[derive(Debug, PartialEq, Eq)]
pub struct EncodingParams {
    source: Arc<RingParams>,
    target: Arc<RingParams>,
    k_max: usize,
}

impl EncodingParams {
    /// Picks `Q` from 50-bit NTT primes until `k_max` fresh encodings combined with
    /// scalars in `Z_{q_i}` still decode.
    pub fn new(n: usize, q_i: u64, k_max: usize) -> Result<Arc<Self>> {
        let source = RingParams::new(n, &[q_i])?;
        let need = Self::combination_bound(q_i, k_max) * 2u32;
        let mut moduli = Vec::new();
        let mut q = BigUint::from(1u32);
        let mut skip = 0;
        while q <= need {
            let p = find_ntt_prime(LIMB_BITS, 2 * n as u64, skip)
                .ok_or_else(|| Error::InvalidParams("ran out of target primes".into()))?;
            skip += 1;
            if p != q_i {
                moduli.push(p);
                q *= p;
            }
        }
        Self::with_target(source, &moduli, k_max)
    }

    /// Uses the given limbs for `Q`; fails if they are too small for `k_max`.
    pub fn with_moduli(n: usize, q_i: u64, target_moduli: &[u64], k_max: usize) -> Result<Arc<Self>> {
        Self::with_target(RingParams::new(n, &[q_i])?, target_moduli, k_max)
    }

    fn with_target(source: Arc<RingParams>, target_moduli: &[u64], k_max: usize) -> Result<Arc<Self>> {
        let q_i = source.moduli()[0];
        if k_max == 0 {
            return Err(Error::InvalidParams("linearity budget must be positive".into()));
        }
        if target_moduli.iter().any(|&p| p % q_i == 0) {
            return Err(Error::InvalidParams("target limbs must be coprime to the source modulus".into()));
        }
        let target = RingParams::new(source.degree(), target_moduli)?;
        if Self::combination_bound(q_i, k_max) * 2u32 >= *target.modulus() {
            return Err(Error::InvalidParams(format!("target modulus too small for budget {k_max}")));
        }
        Ok(Arc::new(Self { source, target, k_max }))
    }

    /// `q_i·B_e + q_i − 1`: the phase of a fresh encoding.
    pub fn fresh_bound(q_i: u64) -> BigUint {
        BigUint::from(q_i) * ERROR.bound().expect("bounded") + (q_i - 1)
    }

    /// Phase bound after combining `k` fresh encodings with centered scalars.
    pub fn combination_bound(q_i: u64, k: usize) -> BigUint {
        Self::fresh_bound(q_i) * (q_i / 2) * k
    }

    pub fn degree(&self) -> usize {
        self.source.degree()
    }

    pub fn source_modulus(&self) -> u64 {
        self.source.moduli()[0]
    }

    pub fn target(&self) -> &Arc<RingParams> {
        &self.target
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Decoding succeeds while the phase stays below this.
    pub fn threshold(&self) -> BigUint {
        self.target.modulus() / 2u32
    }
}

pub struct EncodingKey {
    params: Arc<EncodingParams>,
    s: RingElement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoding {
    params: Arc<EncodingParams>,
    a: RingElement,
    b: RingElement,
    consumed: usize,
    noise_bound: BigUint,
}

impl Encoding {
    /// Fresh encodings folded into this one, counted against the budget.
    pub fn consumed(&self) -> usize {
        self.consumed
    }

    pub fn noise_bound(&self) -> &BigUint {
        &self.noise_bound
    }

    /// Bits of a packed `R_Q²` pair.
    pub fn packed_bits(&self) -> u64 {
        pair_bits(&self.params)
    }
}

fn pair_bits(p: &EncodingParams) -> u64 {
    let per_coeff: u64 = p.target.moduli().iter().map(|q| 64 - q.leading_zeros() as u64).sum();
    2 * p.degree() as u64 * per_coeff
}

impl EncodingKey {
    pub fn generate(params: &Arc<EncodingParams>, seed: u64) -> Self {
        let mut rng = derive_rng(seed, "encoding-key");
        Self { params: params.clone(), s: sample_poly(&params.target, Distribution::Ternary, &mut rng) }
    }

    pub fn params(&self) -> &Arc<EncodingParams> {
        &self.params
    }

    /// Encodes the slot values `x` (each below `q_i`).
    pub fn encode(&self, x: &[u64], seed: u64) -> Result<Encoding> {
        let p = &self.params;
        let q_i = p.source_modulus();
        if x.len() != p.degree() {
            return Err(Error::SizeMismatch(format!("{} values for {} slots", x.len(), p.degree())));
        }
        if x.iter().any(|&v| v >= q_i) {
            return Err(Error::OutOfRange("slot value not reduced".into()));
        }
        let m = RingElement::from_limbs(&p.source, vec![x.to_vec()], Representation::Ntt)?
            .to_form(Representation::Coefficient);
        let m_coeffs: Vec<i64> = m.limb(0).iter().map(|&c| c as i64).collect();
        let mut rng = derive_rng(seed, "encode");
        let a = sample_poly(&p.target, Distribution::Uniform, &mut rng);
        let e = sample_poly(&p.target, ERROR, &mut rng).scale(q_i as i64);
        let b = a.mul(&self.s)?.neg().add(&e)?.add(&RingElement::from_signed(&p.target, &m_coeffs))?;
        Ok(Encoding { params: p.clone(), a, b, consumed: 1, noise_bound: EncodingParams::fresh_bound(q_i) })
    }

    fn phase(&self, e: &Encoding) -> Result<Vec<BigInt>> {
        if e.params != self.params {
            return Err(Error::ParamMismatch);
        }
        Ok(e.b.add(&e.a.mul(&self.s)?)?.to_form(Representation::Coefficient).coeffs_centered())
    }

    pub fn decode(&self, e: &Encoding) -> Result<Vec<u64>> {
        let q_i = BigInt::from(self.params.source_modulus());
        let m: Vec<u64> = self.phase(e)?.iter().map(|v| v.mod_floor(&q_i).to_u64().expect("below q_i")).collect();
        let m = RingElement::from_limbs(&self.params.source, vec![m], Representation::Coefficient)?;
        Ok(m.to_form(Representation::Ntt).limb(0).to_vec())
    }

    /// Largest phase coefficient, measured with the key.
    pub fn exact_noise(&self, e: &Encoding) -> Result<BigUint> {
        Ok(self.phase(e)?.iter().map(|v| v.abs().to_biguint().expect("nonnegative")).max().unwrap_or_default())
    }
}

/// `Σ c_j·e_j` with scalars in `Z_{q_i}`. Checks the budget before computing.
pub fn linear_combine(encodings: &[&Encoding], scalars: &[u64]) -> Result<Encoding> {
    let first = encodings.first().ok_or_else(|| Error::SizeMismatch("no encodings".into()))?;
    if encodings.len() != scalars.len() {
        return Err(Error::SizeMismatch(format!("{} encodings, {} scalars", encodings.len(), scalars.len())));
    }
    let p = &first.params;
    if encodings.iter().any(|e| e.params != *p) {
        return Err(Error::ParamMismatch);
    }
    let q_i = p.source_modulus();
    let centered: Vec<i64> =
        scalars.iter().map(|&c| if c > q_i / 2 { c as i64 - q_i as i64 } else { c as i64 }).collect();
    let used: usize = encodings.iter().map(|e| e.consumed).sum();
    let noise_bound: BigUint = encodings.iter().zip(&centered).map(|(e, &c)| &e.noise_bound * c.unsigned_abs()).sum();
    if used > p.k_max || noise_bound >= p.threshold() {
        return Err(Error::BudgetExceeded { used, max: p.k_max });
    }
    let mut a = RingElement::zero(&p.target, Representation::Coefficient);
    let mut b = a.clone();
    for (e, &c) in encodings.iter().zip(&centered) {
        a = a.add(&e.a.scale(c))?;
        b = b.add(&e.b.scale(c))?;
    }
    Ok(Encoding { params: p.clone(), a, b, consumed: used, noise_bound })
}

/// `l·log_q(Q)` given bit sizes.
pub fn analytic_expansion(l: u32, log2_q: f64, log2_big_q: f64) -> f64 {
    l as f64 * log2_big_q / log2_q
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub degree: usize,
    pub log2_source: f64,
    pub log2_target: f64,
    /// `l·log_q(Q)`, counting one `R_Q` element per component.
    pub analytic: f64,
    /// Packed bits of one `R_Q` element over packed bits of the source element.
    pub measured_single: f64,
    /// Same for the `R_Q²` pair an encoding actually is.
    pub measured_pair: f64,
    /// `measured_pair / measured_single`: the pair costs twice what the formula counts.
    pub pair_gap: f64,
    /// Scalar LWE encoding with dimension `n = N`: `n·log_q(Q)`.
    pub scalar_regev: f64,
    pub improvement: f64,
}

pub fn expansion_factor(params: &EncodingParams) -> ExpansionReport {
    let log2_source = (params.source_modulus() as f64).log2();
    let log2_target = params.target.moduli().iter().map(|&q| (q as f64).log2()).sum::<f64>();
    let analytic = analytic_expansion(1, log2_source, log2_target);
    let source_bits = params.degree() as u64 * (64 - params.source_modulus().leading_zeros() as u64);
    let measured_pair = pair_bits(params) as f64 / source_bits as f64;
    let measured_single = measured_pair / 2.0;
    let scalar_regev = params.degree() as f64 * analytic;
    ExpansionReport {
        degree: params.degree(),
        log2_source,
        log2_target,
        analytic,
        measured_single,
        measured_pair,
        pair_gap: measured_pair / measured_single,
        scalar_regev,
        improvement: scalar_regev / analytic,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeBench {
    pub k_max: usize,
    pub encode_seconds: f64,
    pub combine_seconds: f64,
    pub decode_seconds: f64,
    pub correct: bool,
    pub expansion: ExpansionReport,
}

/// Encodes `k_max` random elements, combines all of them once and decodes.
pub fn encode_bench(params: &Arc<EncodingParams>, seed: u64) -> Result<EncodeBench> {
    let key = EncodingKey::generate(params, seed);
    let q = params.source_modulus();
    let n = params.degree();
    let mut rng = derive_rng(seed, "encode-bench");
    let xs: Vec<Vec<u64>> = (0..params.k_max).map(|_| (0..n).map(|_| rng.gen_range(0..q)).collect()).collect();
    let cs: Vec<u64> = (0..params.k_max).map(|_| rng.gen_range(0..q)).collect();
    let start = std::time::Instant::now();
    let encs = xs.iter().map(|x| key.encode(x, rng.gen())).collect::<Result<Vec<_>>>()?;
    let encode_seconds = start.elapsed().as_secs_f64();
    let start = std::time::Instant::now();
    let refs: Vec<&Encoding> = encs.iter().collect();
    let combined = linear_combine(&refs, &cs)?;
    let combine_seconds = start.elapsed().as_secs_f64();
    let start = std::time::Instant::now();
    let got = key.decode(&combined)?;
    let decode_seconds = start.elapsed().as_secs_f64();
    let want: Vec<u64> = (0..n)
        .map(|i| xs.iter().zip(&cs).fold(0u128, |acc, (x, &c)| (acc + x[i] as u128 * c as u128) % q as u128) as u64)
        .collect();
    Ok(EncodeBench {
        k_max: params.k_max,
        encode_seconds,
        combine_seconds,
        decode_seconds,
        correct: got == want,
        expansion: expansion_factor(params),
    })
}
