//! Homomorphic operations with analytic noise tracking.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use super::ciphertext::{encrypt_zero_with, Ciphertext, EncryptionRandomness, Plaintext};
use super::keys::{PublicKey, RelinKey};
use crate::error::{Error, Result};
use crate::ring::modarith::{from_signed, inv_mod, mul_mod, sub_mod, to_centered};
use crate::ring::sample::{sample_signed, sample_uniform_bounded};
use crate::ring::{derive_rng, Distribution, Representation, RingElement};

fn check_pair(a: &Ciphertext, b: &Ciphertext) -> Result<()> {
    if a.params != b.params {
        return Err(Error::ParamMismatch);
    }
    if a.level != b.level {
        return Err(Error::LevelMismatch(a.level, b.level));
    }
    if a.correction != b.correction {
        return Err(Error::InvalidParams(format!(
            "plaintext correction factors differ ({} vs {})",
            a.correction, b.correction
        )));
    }
    Ok(())
}

fn zip_parts(a: &Ciphertext, b: &Ciphertext, sub: bool) -> Result<Vec<RingElement>> {
    let ring = a.parts[0].params().clone();
    let len = a.parts.len().max(b.parts.len());
    let zero = RingElement::zero(&ring, Representation::Coefficient);
    (0..len)
        .map(|i| {
            let x = a.parts.get(i).unwrap_or(&zero);
            let y = b.parts.get(i).unwrap_or(&zero);
            if sub {
                x.sub(y)
            } else {
                x.add(y)
            }
        })
        .collect()
}

pub fn eval_add(a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    check_pair(a, b)?;
    Ok(Ciphertext { parts: zip_parts(a, b, false)?, noise_bound: &a.noise_bound + &b.noise_bound, ..a.clone() })
}

pub fn eval_sub(a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    check_pair(a, b)?;
    Ok(Ciphertext { parts: zip_parts(a, b, true)?, noise_bound: &a.noise_bound + &b.noise_bound, ..a.clone() })
}

/// The plaintext polynomial that must enter `c0` so that decryption yields `m`.
fn scaled_plaintext(c: &Ciphertext, m: &Plaintext) -> Result<Vec<i64>> {
    let t = c.params.plain_modulus();
    if m.modulus() != t || m.coeffs().len() != c.params.degree() {
        return Err(Error::OutOfRange("plaintext does not match parameters".into()));
    }
    let inv = inv_mod(c.correction, t).expect("correction is a unit mod t");
    Ok(m.coeffs().iter().map(|&x| to_centered(mul_mod(x, inv, t), t)).collect())
}

fn add_to_c0(c: &Ciphertext, coeffs: &[i64], negate: bool, extra: BigUint) -> Result<Ciphertext> {
    let ring = c.parts[0].params();
    let mut poly = RingElement::from_signed(ring, coeffs);
    if negate {
        poly = poly.neg();
    }
    let mut out = c.clone();
    out.parts[0] = out.parts[0].add(&poly)?;
    out.noise_bound += extra;
    Ok(out)
}

pub fn eval_add_pt(c: &Ciphertext, m: &Plaintext) -> Result<Ciphertext> {
    let coeffs = scaled_plaintext(c, m)?;
    add_to_c0(c, &coeffs, false, BigUint::from(c.params.plain_modulus() / 2))
}

pub fn eval_sub_pt(c: &Ciphertext, m: &Plaintext) -> Result<Ciphertext> {
    let coeffs = scaled_plaintext(c, m)?;
    add_to_c0(c, &coeffs, true, BigUint::from(c.params.plain_modulus() / 2))
}

/// Adds an arbitrary integer polynomial to `c0` with no domain check. This is what a
/// malicious evaluator can do when nothing constrains its inputs.
pub fn eval_add_raw(c: &Ciphertext, coeffs: &[i64]) -> Result<Ciphertext> {
    let extra = coeffs.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0);
    add_to_c0(c, coeffs, false, BigUint::from(extra))
}

/// Multiplies by a plaintext; bound grows by `‖m‖₁` (≤ `N·‖m‖∞`).
pub fn eval_mul_pt(c: &Ciphertext, m: &Plaintext) -> Result<Ciphertext> {
    if m.modulus() != c.params.plain_modulus() || m.coeffs().len() != c.params.degree() {
        return Err(Error::OutOfRange("plaintext does not match parameters".into()));
    }
    eval_mul_raw(c, &m.centered())
}

/// Multiplies by an arbitrary integer polynomial with no domain check.
pub fn eval_mul_raw(c: &Ciphertext, coeffs: &[i64]) -> Result<Ciphertext> {
    if coeffs.len() != c.params.degree() {
        return Err(Error::OutOfRange("polynomial has the wrong degree".into()));
    }
    let ring = c.parts[0].params();
    let poly = RingElement::from_signed(ring, coeffs);
    let parts = c.parts.iter().map(|p| p.mul(&poly)).collect::<Result<Vec<_>>>()?;
    let l1: u64 = coeffs.iter().map(|x| x.unsigned_abs()).sum();
    Ok(Ciphertext { parts, noise_bound: &c.noise_bound * l1, ..c.clone() })
}

/// `(c0·c0', c0·c1' + c0'·c1, c1·c1')`.
pub fn tensor(a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    if a.parts.len() != 2 {
        return Err(Error::WrongDegree { expected: 2, found: a.parts.len() });
    }
    if b.parts.len() != 2 {
        return Err(Error::WrongDegree { expected: 2, found: b.parts.len() });
    }
    if a.params != b.params {
        return Err(Error::ParamMismatch);
    }
    if a.level != b.level {
        return Err(Error::LevelMismatch(a.level, b.level));
    }
    let (x0, x1) = (a.parts[0].to_form(Representation::Ntt), a.parts[1].to_form(Representation::Ntt));
    let (y0, y1) = (b.parts[0].to_form(Representation::Ntt), b.parts[1].to_form(Representation::Ntt));
    let d0 = x0.mul(&y0)?;
    let d1 = x0.mul(&y1)?.add(&y0.mul(&x1)?)?;
    let d2 = x1.mul(&y1)?;
    let n = a.params.degree() as u64;
    let t = a.params.plain_modulus();
    Ok(Ciphertext {
        params: a.params.clone(),
        parts: [d0, d1, d2].iter().map(|p| p.to_form(Representation::Coefficient)).collect(),
        level: a.level,
        noise_bound: &a.noise_bound * &b.noise_bound * n,
        correction: mul_mod(a.correction, b.correction, t),
    })
}

/// Base-`2^w` digits of each coefficient of `x`, one coefficient-form vector per digit.
pub fn digit_decompose(x: &RingElement, base_bits: u32, count: usize) -> Vec<Vec<u64>> {
    let coeffs = x.coeffs_biguint();
    let mask = (BigUint::one() << base_bits) - 1u32;
    (0..count)
        .map(|j| {
            coeffs.iter().map(|c| ((c >> (base_bits as usize * j)) & &mask).to_u64().expect("digit fits")).collect()
        })
        .collect()
}

/// Number of digits needed at `level`.
pub fn relin_digits_at(c: &Ciphertext) -> usize {
    let bits = c.params.ring_at(c.level).expect("valid").modulus().bits() as usize;
    bits.div_ceil(c.params.relin_base_bits() as usize)
}

/// Analytic noise added by relinearization: `D·N·(2^w − 1)·t·B_e`.
pub fn relin_noise_term(c: &Ciphertext) -> BigUint {
    let p = &c.params;
    let d = relin_digits_at(c) as u64;
    let n = p.degree() as u64;
    let dn = BigUint::from(d * n);
    ((&dn << p.relin_base_bits() as usize) - dn) * p.plain_modulus() * p.error_bound()
}

pub fn relinearize(c: &Ciphertext, rk: Option<&RelinKey>) -> Result<Ciphertext> {
    let rk = rk.ok_or(Error::MissingRelinKey)?;
    if c.parts.len() != 3 {
        return Err(Error::WrongDegree { expected: 3, found: c.parts.len() });
    }
    if rk.params != c.params {
        return Err(Error::ParamMismatch);
    }
    let ring = c.params.ring_at(c.level)?.clone();
    let count = relin_digits_at(c);
    let digits = digit_decompose(&c.parts[2], c.params.relin_base_bits(), count);
    let mut c0 = c.parts[0].clone();
    let mut c1 = c.parts[1].clone();
    for (j, d) in digits.iter().enumerate() {
        let signed: Vec<i64> = d.iter().map(|&v| v as i64).collect();
        let dj = RingElement::from_signed(&ring, &signed);
        let (rk0, rk1) = &rk.digits[j];
        c0 = c0.add(&dj.mul(&rk0.truncate_limbs(&ring))?)?;
        c1 = c1.add(&dj.mul(&rk1.truncate_limbs(&ring))?)?;
    }
    Ok(Ciphertext { parts: vec![c0, c1], noise_bound: &c.noise_bound + relin_noise_term(c), ..c.clone() })
}

/// Largest `|δ|` used when dropping limb `q_L`: `(q_L − 1)/2 + q_L·⌊t/2⌋`.
pub fn mod_switch_delta_bound(q_last: u64, t: u64) -> u64 {
    (q_last - 1) / 2 + q_last * (t / 2)
}

/// Drops the last limb. Returns the switched ciphertext and, per part and
/// coefficient, `δ' = δ / t` where `c = q_L·c' + δ` as integers.
pub fn mod_switch(c: &Ciphertext) -> Result<(Ciphertext, Vec<Vec<i64>>)> {
    let params = &c.params;
    if c.level >= params.max_level() {
        return Err(Error::NoRemainingLevels);
    }
    let from = params.ring_at(c.level)?;
    let to = params.ring_at(c.level + 1)?.clone();
    let limbs = from.limbs();
    let q_last = from.moduli()[limbs - 1];
    let t = params.plain_modulus();
    let n = params.degree();
    let inv_t_last = inv_mod(q_last % t, t).expect("coprime");

    let mut parts = Vec::with_capacity(c.parts.len());
    let mut deltas = Vec::with_capacity(c.parts.len());
    for part in &c.parts {
        let mut new_limbs = vec![vec![0u64; n]; limbs - 1];
        let mut dprime = vec![0i64; n];
        for k in 0..n {
            let cl = to_centered(part.limb(limbs - 1)[k], q_last) as i128;
            // k_fac ≡ −c_L · q_L^{-1} (mod t), centered
            let neg = from_signed(-(cl as i64), t);
            let kfac = to_centered(mul_mod(neg, inv_t_last, t), t) as i128;
            let delta = cl + q_last as i128 * kfac;
            debug_assert_eq!(delta.rem_euclid(t as i128), 0);
            dprime[k] = (delta / t as i128) as i64;
            for (i, &qi) in from.moduli()[..limbs - 1].iter().enumerate() {
                let d = delta.rem_euclid(qi as i128) as u64;
                let inv = inv_mod(q_last % qi, qi).expect("coprime limbs");
                new_limbs[i][k] = mul_mod(sub_mod(part.limb(i)[k], d, qi), inv, qi);
            }
        }
        parts.push(RingElement::from_limbs(&to, new_limbs, Representation::Coefficient)?);
        deltas.push(dprime);
    }

    let nn = BigUint::from(n as u64);
    let mut powers_sum = BigUint::zero();
    let mut pw = BigUint::one();
    for _ in 0..c.parts.len() {
        powers_sum += &pw;
        pw *= &nn;
    }
    let rounding = BigUint::from(mod_switch_delta_bound(q_last, t)) * powers_sum;
    let bound = (&c.noise_bound + rounding) / q_last + 1u32;
    Ok((
        Ciphertext {
            params: params.clone(),
            parts,
            level: c.level + 1,
            noise_bound: bound,
            correction: mul_mod(c.correction, q_last % t, t),
        },
        deltas,
    ))
}

/// Adds `count` fresh encryptions of zero with amplified error and returns their randomness.
pub fn noise_flood(
    c: &Ciphertext,
    pk: &PublicKey,
    count: usize,
    seed: u64,
) -> Result<(Ciphertext, Vec<EncryptionRandomness>)> {
    let params = &c.params;
    if pk.params() != params {
        return Err(Error::ParamMismatch);
    }
    let total = &c.noise_bound + params.flood_addend_bound() * count;
    let limit = params.half_modulus(c.level)?;
    if total >= limit {
        return Err(Error::InsufficientHeadroom { bound: total.to_string(), limit: limit.to_string() });
    }
    let mut rng = derive_rng(seed, "bgv-flood");
    let n = params.degree();
    let bf = params.flood_error_bound();
    let mut out = c.clone();
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let r = EncryptionRandomness {
            u: sample_signed(n, Distribution::Ternary, &mut rng),
            e0: sample_uniform_bounded(n, bf, &mut rng),
            e1: sample_uniform_bounded(n, bf, &mut rng),
        };
        let z = encrypt_zero_with(pk, c.level, &r)?;
        out.parts[0] = out.parts[0].add(&z.parts[0])?;
        out.parts[1] = out.parts[1].add(&z.parts[1])?;
        records.push(r);
    }
    out.noise_bound = total;
    Ok((out, records))
}

/// Adds explicit zero-encryption addends; used to replay recorded flooding.
pub fn apply_flood(c: &Ciphertext, pk: &PublicKey, addends: &[EncryptionRandomness]) -> Result<Ciphertext> {
    let mut out = c.clone();
    for r in addends {
        let z = encrypt_zero_with(pk, c.level, r)?;
        out.parts[0] = out.parts[0].add(&z.parts[0])?;
        out.parts[1] = out.parts[1].add(&z.parts[1])?;
    }
    out.noise_bound += c.params.flood_addend_bound() * addends.len();
    Ok(out)
}

/// Random plaintext with uniform coefficients.
pub fn random_plaintext(n: usize, t: u64, rng: &mut impl Rng) -> Plaintext {
    Plaintext::new((0..n).map(|_| rng.gen_range(0..t)).collect(), t).expect("in range")
}
