//! MiMC-7 in Miyaguchi–Preneel mode, used to commit to server inputs.
//!
//! `x ↦ x^7` is a permutation whenever `gcd(7, p − 1) = 1`; round constants are
//! SHA-256 outputs reduced mod `p`, with the first constant fixed to zero.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use sha2::{Digest, Sha256};

use super::builder::Builder;
use super::field::FieldParams;
use super::system::Lc;
use crate::error::{Error, Result};

/// Constraints per round: `s², s⁴, s⁶, s⁷`.
pub const CONSTRAINTS_PER_ROUND: u64 = 4;

pub struct Mimc {
    field: FieldParams,
    constants: Vec<BigUint>,
}

impl Mimc {
    pub fn new(field: &FieldParams) -> Result<Self> {
        let p = field.modulus();
        if ((p - 1u32) % 7u32).is_zero() {
            return Err(Error::InvalidParams("x^7 is not a permutation of this field".into()));
        }
        // ⌈bits / log2(7)⌉
        let rounds = (field.bit_length() as f64 / 7f64.log2()).ceil() as usize;
        let constants = (0..rounds)
            .map(|i| {
                if i == 0 {
                    return BigUint::zero();
                }
                let mut h = Sha256::new();
                h.update(b"vfhe-mimc7");
                h.update((i as u64).to_le_bytes());
                BigUint::from_bytes_be(&h.finalize()) % p
            })
            .collect();
        Ok(Self { field: field.clone(), constants })
    }

    pub fn rounds(&self) -> usize {
        self.constants.len()
    }

    fn encrypt(&self, key: &BigUint, x: &BigUint) -> BigUint {
        let f = &self.field;
        let mut x = x.clone();
        for c in &self.constants {
            let s = f.add(&f.add(&x, key), c);
            x = f.pow(&s, 7);
        }
        f.add(&x, key)
    }

    /// `h_{i+1} = E_{h_i}(m_i) + h_i + m_i`, `h_0 = 0`.
    pub fn hash(&self, msg: &[BigUint]) -> BigUint {
        let f = &self.field;
        msg.iter().fold(BigUint::zero(), |h, m| {
            let m = m % f.modulus();
            f.add(&f.add(&self.encrypt(&h, &m), &h), &m)
        })
    }

    /// Hash of signed integers mapped into the field.
    pub fn hash_signed(&self, msg: &[i64]) -> BigUint {
        let v: Vec<BigUint> = msg.iter().map(|&x| self.field.reduce(&BigInt::from(x))).collect();
        self.hash(&v)
    }

    /// Constraints enforcing `hash(msg) = digest`, labeled `label`.
    pub fn enforce_hash(&self, b: &mut Builder, label: &'static str, msg: Option<&[Lc]>, len: usize, digest: &BigUint) {
        let Some(msg) = msg else {
            let per = CONSTRAINTS_PER_ROUND * self.rounds() as u64;
            b.charge_uniform(label, per, 4 * self.rounds(), len);
            b.charge_uniform(label, 1, 0, 1);
            return;
        };
        let mut h = Lc::zero();
        for m in msg {
            let mut x = m.clone();
            for c in &self.constants {
                let s = x.plus(&h).shifted(&BigInt::from(c.clone()));
                let s2 = b.product_lc(label, &s, &s);
                let s4 = b.product_lc(label, &s2, &s2);
                let s6 = b.product_lc(label, &s4, &s2);
                x = b.product_lc(label, &s6, &s);
            }
            h = Lc::combine([(BigInt::one(), &x), (BigInt::from(2), &h), (BigInt::one(), m)]);
        }
        b.equal_constant(label, &h, digest);
    }
}
