use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::ToPrimitive;
use rand::RngCore;

use super::keys::{PublicKey, SecretKey};
use super::params::BgvParams;
use crate::error::{Error, Result};
use crate::ring::modarith::{mul_mod, to_centered};
use crate::ring::sample::sample_signed;
use crate::ring::{derive_rng, Distribution, RingElement};

/// Polynomial over `Z_t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Plaintext {
    coeffs: Vec<u64>,
    t: u64,
}

impl Plaintext {
    pub fn new(coeffs: Vec<u64>, t: u64) -> Result<Self> {
        if let Some(c) = coeffs.iter().find(|&&c| c >= t) {
            return Err(Error::OutOfRange(format!("plaintext coefficient {c} not below {t}")));
        }
        Ok(Self { coeffs, t })
    }

    /// Reduces arbitrary signed coefficients mod `t`.
    pub fn from_signed(coeffs: &[i64], t: u64) -> Self {
        Self { coeffs: coeffs.iter().map(|&c| c.rem_euclid(t as i64) as u64).collect(), t }
    }

    pub fn constant(value: u64, n: usize, t: u64) -> Self {
        let mut coeffs = vec![0; n];
        coeffs[0] = value % t;
        Self { coeffs, t }
    }

    pub fn zero(n: usize, t: u64) -> Self {
        Self::constant(0, n, t)
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn modulus(&self) -> u64 {
        self.t
    }

    /// Coefficients in `[-t/2, t/2)`.
    pub fn centered(&self) -> Vec<i64> {
        self.coeffs.iter().map(|&c| to_centered(c, self.t)).collect()
    }

    /// Negacyclic product in `Z_t[X]/(X^N+1)` (schoolbook; N is small wherever this is used).
    pub fn mul(&self, other: &Self) -> Self {
        let n = self.coeffs.len();
        let t = self.t;
        let mut out = vec![0u64; n];
        for i in 0..n {
            for j in 0..n {
                let p = mul_mod(self.coeffs[i], other.coeffs[j], t);
                let k = i + j;
                if k < n {
                    out[k] = (out[k] + p) % t;
                } else {
                    out[k - n] = (out[k - n] + t - p) % t;
                }
            }
        }
        Self { coeffs: out, t }
    }

    pub fn add(&self, other: &Self) -> Self {
        let t = self.t;
        Self { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a + b) % t).collect(), t }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let t = self.t;
        Self { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a + t - b) % t).collect(), t }
    }

    /// `Σ |centered coefficient|`.
    pub fn l1_norm(&self) -> u64 {
        self.centered().iter().map(|c| c.unsigned_abs()).sum()
    }
}

/// BGV ciphertext, stored in coefficient form.
///
/// `correction` is the public factor by which the decrypted residue must be multiplied
/// to recover the plaintext; it starts at 1 and absorbs `q_L mod t` at each modulus switch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub(crate) params: Arc<BgvParams>,
    pub(crate) parts: Vec<RingElement>,
    pub(crate) level: usize,
    pub(crate) noise_bound: BigUint,
    pub(crate) correction: u64,
}

impl Ciphertext {
    /// Assembles a ciphertext from raw parts; no well-formedness is implied.
    pub fn from_parts(
        params: &Arc<BgvParams>,
        parts: Vec<RingElement>,
        level: usize,
        noise_bound: BigUint,
        correction: u64,
    ) -> Result<Self> {
        let ring = params.ring_at(level)?;
        if parts.is_empty() {
            return Err(Error::WrongDegree { expected: 2, found: 0 });
        }
        let parts = parts
            .into_iter()
            .map(|p| {
                if p.params() != ring {
                    Err(Error::ParamMismatch)
                } else {
                    Ok(p.to_form(crate::ring::Representation::Coefficient))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { params: params.clone(), parts, level, noise_bound, correction: correction % params.plain_modulus() })
    }

    /// The trivial pair `(0, 1)` at the top level.
    pub fn trivial_key_probe(params: &Arc<BgvParams>) -> Self {
        let ring = params.ring();
        Self {
            params: params.clone(),
            parts: vec![
                RingElement::zero(ring, crate::ring::Representation::Coefficient),
                RingElement::constant(ring, 1),
            ],
            level: 0,
            noise_bound: ring.modulus().clone(),
            correction: 1,
        }
    }

    pub fn params(&self) -> &Arc<BgvParams> {
        &self.params
    }

    pub fn parts(&self) -> &[RingElement] {
        &self.parts
    }

    pub fn part_count(&self) -> usize {
        self.parts.len()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn noise_bound(&self) -> &BigUint {
        &self.noise_bound
    }

    pub fn correction(&self) -> u64 {
        self.correction
    }

    /// Whether the analytic bound still guarantees correct decryption.
    pub fn has_headroom(&self) -> bool {
        let half = self.params.half_modulus(self.level).expect("valid level");
        self.noise_bound < half
    }
}

/// Randomness behind one public-key encryption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptionRandomness {
    pub u: Vec<i64>,
    pub e0: Vec<i64>,
    pub e1: Vec<i64>,
}

pub fn encrypt(pk: &PublicKey, m: &Plaintext, seed: u64) -> Result<Ciphertext> {
    let mut rng = derive_rng(seed, "bgv-encrypt");
    encrypt_with_rng(pk, m, &mut rng).map(|(c, _)| c)
}

pub(crate) fn encrypt_with_rng(
    pk: &PublicKey,
    m: &Plaintext,
    rng: &mut impl RngCore,
) -> Result<(Ciphertext, EncryptionRandomness)> {
    let params = pk.params();
    let n = params.degree();
    if m.modulus() != params.plain_modulus() || m.coeffs().len() != n {
        return Err(Error::OutOfRange("plaintext does not match parameters".into()));
    }
    let randomness = EncryptionRandomness {
        u: sample_signed(n, Distribution::Ternary, rng),
        e0: sample_signed(n, params.error_dist(), rng),
        e1: sample_signed(n, params.error_dist(), rng),
    };
    let mut ct = encrypt_zero_with(pk, 0, &randomness)?;
    let msg = RingElement::from_signed(params.ring(), &m.centered());
    ct.parts[0] = ct.parts[0].add(&msg)?;
    ct.noise_bound = params.fresh_noise_bound();
    Ok((ct, randomness))
}

/// `(p0·u + t·e0, p1·u + t·e1)` at `level` for explicit randomness.
pub fn encrypt_zero_with(pk: &PublicKey, level: usize, r: &EncryptionRandomness) -> Result<Ciphertext> {
    let params = pk.params();
    let ring = params.ring_at(level)?;
    let t = params.plain_modulus() as i64;
    let (p0, p1) = pk.at_level(level)?;
    let u = RingElement::from_signed(ring, &r.u);
    let e0 = RingElement::from_signed(ring, &r.e0).scale(t);
    let e1 = RingElement::from_signed(ring, &r.e1).scale(t);
    let c0 = p0.mul(&u)?.add(&e0)?;
    let c1 = p1.mul(&u)?.add(&e1)?;
    let bound = zero_encryption_bound(params, r);
    Ok(Ciphertext { params: params.clone(), parts: vec![c0, c1], level, noise_bound: bound, correction: 1 })
}

fn zero_encryption_bound(params: &BgvParams, r: &EncryptionRandomness) -> BigUint {
    let n = params.degree() as u64;
    let max = |v: &[i64]| v.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0);
    let u1: u64 = r.u.iter().map(|x| x.unsigned_abs()).sum();
    let inner = params.error_bound() * u1 + max(&r.e0) + max(&r.e1) * n;
    BigUint::from(params.plain_modulus()) * inner
}

/// `Σ c_i · s^i` over the ciphertext's ring, centered.
pub fn phase(sk: &SecretKey, c: &Ciphertext) -> Result<Vec<BigInt>> {
    let powers = sk.powers(c.level, c.parts.len())?;
    let mut acc = RingElement::zero(c.parts[0].params(), crate::ring::Representation::Coefficient);
    for (part, pw) in c.parts.iter().zip(&powers) {
        if part.params() != pw.params() {
            return Err(Error::ParamMismatch);
        }
        acc = acc.add(&part.mul(pw)?)?;
    }
    Ok(acc.coeffs_centered())
}

/// Never rejects: malformed or noise-overflowed input yields whatever the phase encodes.
pub fn decrypt(sk: &SecretKey, c: &Ciphertext) -> Plaintext {
    let t = sk.params().plain_modulus();
    let v = phase(sk, c).expect("ciphertext at a level of the key's parameters");
    let tb = BigInt::from(t);
    let coeffs = v
        .iter()
        .map(|x| {
            let r = x.mod_floor(&tb).to_u64().expect("below t");
            mul_mod(r, c.correction, t)
        })
        .collect();
    Plaintext { coeffs, t }
}

/// Exact `‖phase‖∞`, available to whoever holds `s`.
pub fn exact_noise(sk: &SecretKey, c: &Ciphertext) -> BigUint {
    phase(sk, c).expect("compatible").into_iter().map(|x| x.magnitude().clone()).max().unwrap_or_default()
}
