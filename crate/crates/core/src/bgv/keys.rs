use std::sync::Arc;

use rand::RngCore;

use super::params::BgvParams;
use crate::error::Result;
use crate::ring::sample::sample_signed;
use crate::ring::{derive_rng, sample_poly, Distribution, RingElement};

/// Ternary secret key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    params: Arc<BgvParams>,
    coeffs: Vec<i64>,
}

impl SecretKey {
    /// Wraps explicit signed coefficients; used to rebuild recovered keys.
    pub fn from_coeffs(params: &Arc<BgvParams>, coeffs: Vec<i64>) -> Self {
        assert_eq!(coeffs.len(), params.degree());
        Self { params: params.clone(), coeffs }
    }

    pub fn params(&self) -> &Arc<BgvParams> {
        &self.params
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    /// `s` as a coefficient-form element at `level`.
    pub fn at_level(&self, level: usize) -> Result<RingElement> {
        Ok(RingElement::from_signed(self.params.ring_at(level)?, &self.coeffs))
    }

    /// Powers `1, s, s^2, ...` up to `count` terms at `level`.
    pub fn powers(&self, level: usize, count: usize) -> Result<Vec<RingElement>> {
        let s = self.at_level(level)?;
        let mut out = vec![RingElement::constant(s.params(), 1)];
        for i in 1..count {
            out.push(out[i - 1].mul(&s)?);
        }
        Ok(out)
    }
}

/// Public key `(p0, p1) = ([a·s + t·e]_q, -a)`, so `p0 + p1·s = t·e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub(crate) params: Arc<BgvParams>,
    pub(crate) p0: RingElement,
    pub(crate) p1: RingElement,
}

impl PublicKey {
    pub fn params(&self) -> &Arc<BgvParams> {
        &self.params
    }

    /// Components reduced to the ring at `level`.
    pub fn at_level(&self, level: usize) -> Result<(RingElement, RingElement)> {
        let ring = self.params.ring_at(level)?;
        Ok((self.p0.truncate_limbs(ring), self.p1.truncate_limbs(ring)))
    }

    pub fn components(&self) -> (&RingElement, &RingElement) {
        (&self.p0, &self.p1)
    }
}

/// One `(rk0, rk1)` pair per base-`2^w` digit: `rk0_j + rk1_j·s = t·e_j + 2^{wj}·s^2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelinKey {
    pub(crate) params: Arc<BgvParams>,
    pub(crate) digits: Vec<(RingElement, RingElement)>,
}

impl RelinKey {
    pub fn digits(&self) -> &[(RingElement, RingElement)] {
        &self.digits
    }

    pub fn params(&self) -> &Arc<BgvParams> {
        &self.params
    }
}

fn small(params: &BgvParams, dist: Distribution, rng: &mut impl RngCore) -> RingElement {
    RingElement::from_signed(params.ring(), &sample_signed(params.degree(), dist, rng))
}

/// Generates a consistent `(sk, pk, rk)` triple from `seed`.
pub fn keygen(params: &Arc<BgvParams>, seed: u64) -> (SecretKey, PublicKey, RelinKey) {
    let mut rng = derive_rng(seed, "bgv-keygen");
    let coeffs = sample_signed(params.degree(), Distribution::Ternary, &mut rng);
    let sk = SecretKey::from_coeffs(params, coeffs);
    let pk = public_key_from(&sk, &mut rng);
    let rk = relin_key_from(&sk, &mut rng);
    (sk, pk, rk)
}

pub(crate) fn public_key_from(sk: &SecretKey, rng: &mut impl RngCore) -> PublicKey {
    let params = sk.params();
    let ring = params.ring();
    let t = params.plain_modulus() as i64;
    let s = sk.at_level(0).expect("top level");
    let a = sample_poly(ring, Distribution::Uniform, rng);
    let e = small(params, params.error_dist(), rng);
    let p0 = a.mul(&s).expect("same ring").add(&e.scale(t)).expect("same ring");
    PublicKey { params: params.clone(), p0, p1: a.neg() }
}

pub(crate) fn relin_key_from(sk: &SecretKey, rng: &mut impl RngCore) -> RelinKey {
    let params = sk.params();
    let ring = params.ring();
    let t = params.plain_modulus() as i64;
    let s = sk.at_level(0).expect("top level");
    let s2 = s.mul(&s).expect("same ring");
    let w = params.relin_base_bits();
    let digits = (0..params.relin_digits())
        .map(|j| {
            let a = sample_poly(ring, Distribution::Uniform, rng);
            let e = small(params, params.error_dist(), rng);
            let shift = scale_pow2(&s2, w as usize * j);
            let rk0 = a.mul(&s).unwrap().add(&e.scale(t)).unwrap().add(&shift).unwrap();
            (rk0, a.neg())
        })
        .collect();
    RelinKey { params: params.clone(), digits }
}

/// `x · 2^bits` computed limb-wise.
pub(crate) fn scale_pow2(x: &RingElement, bits: usize) -> RingElement {
    use crate::ring::modarith::{mul_mod, pow_mod};
    let limbs = x
        .limbs()
        .iter()
        .zip(x.params().moduli())
        .map(|(l, &q)| {
            let f = pow_mod(2, bits as u64, q);
            l.iter().map(|&v| mul_mod(v, f, q)).collect()
        })
        .collect();
    RingElement::from_limbs(x.params(), limbs, x.form()).expect("reduced")
}
