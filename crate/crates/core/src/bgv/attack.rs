//! Key-recovery and failure-oracle attacks against an unprotected decryptor.

use std::sync::Arc;

use num_traits::ToPrimitive;
use rand::Rng;

use super::ciphertext::{decrypt, Ciphertext, Plaintext};
use super::eval::{eval_add_raw, eval_mul_pt};
use super::keys::{RelinKey, SecretKey};
use super::params::BgvParams;
use crate::error::Result;
use crate::ring::modarith::to_centered;

/// Anything that answers decryption queries, possibly refusing with `None` (⊥).
pub trait DecryptionOracle {
    fn query(&mut self, ct: &Ciphertext) -> Option<Plaintext>;
}

/// Decrypts every query. The "no integrity" baseline.
pub struct UncheckedOracle<'a> {
    sk: &'a SecretKey,
    pub queries: usize,
}

impl<'a> UncheckedOracle<'a> {
    pub fn new(sk: &'a SecretKey) -> Self {
        Self { sk, queries: 0 }
    }
}

impl DecryptionOracle for UncheckedOracle<'_> {
    fn query(&mut self, ct: &Ciphertext) -> Option<Plaintext> {
        self.queries += 1;
        Some(decrypt(self.sk, ct))
    }
}

/// Submits `(0, 1)`; the answer is `[s]_t`, which is `s` itself for ternary `s` and `t ≥ 3`.
pub fn attack_trivial_ct<O: DecryptionOracle>(oracle: &mut O, params: &Arc<BgvParams>) -> Option<Vec<i64>> {
    let probe = Ciphertext::trivial_key_probe(params);
    oracle.query(&probe).map(|pt| pt.centered())
}

/// Submits the first relinearization-key digit as a ciphertext; the answer is `[s^2]_t`.
pub fn attack_relin_key<O: DecryptionOracle>(oracle: &mut O, rk: &RelinKey) -> Option<Plaintext> {
    let (rk0, rk1) = &rk.digits()[0];
    let params = rk.params();
    let ct = Ciphertext::from_parts(params, vec![rk0.clone(), rk1.clone()], 0, params.ring().modulus().clone(), 1)
        .expect("key components live at the top level");
    oracle.query(&ct)
}

/// `s^2 mod t` computed directly from the key, as the ground truth for the relin attack.
pub fn squared_key_mod_t(sk: &SecretKey) -> Plaintext {
    let t = sk.params().plain_modulus();
    let s = sk.at_level(0).expect("top level");
    let sq = s.mul(&s).expect("same ring");
    let coeffs: Vec<i64> = sq.coeffs_centered().iter().map(|c| c.to_i64().expect("small")).collect();
    Plaintext::from_signed(&coeffs, t)
}

/// Client that decrypts a result and reacts (aborts) when it falls outside the
/// application's valid output set `[0, valid_below)` coefficient-wise.
pub struct ReactionClient<'a> {
    pub sk: &'a SecretKey,
    pub valid_below: u64,
}

impl ReactionClient<'_> {
    /// The bit a malicious server observes: `true` when the client rejects the output.
    pub fn failure_bit(&self, ct: &Ciphertext) -> bool {
        decrypt(self.sk, ct).coeffs().iter().any(|&c| c >= self.valid_below)
    }
}

/// `f(x, w1, w2) = x·w1 + w2` evaluated with no check on `w2`.
pub fn biased_affine_unchecked(x: &Ciphertext, w1: &Plaintext, w2_raw: &[i64]) -> Result<Ciphertext> {
    eval_add_raw(&eval_mul_pt(x, w1)?, w2_raw)
}

/// An additive term `m + t·K` whose `t·K` part pushes every coefficient past `q/2`
/// while staying below `q`, so decryption wraps.
pub fn oversized_w2(params: &BgvParams, level: usize, message: &Plaintext, slack: u64, rng: &mut impl Rng) -> Vec<i64> {
    let q = params.ring_at(level).expect("level").modulus().to_u64().expect("desk modulus fits u64");
    let t = params.plain_modulus();
    let lo = (q / 2 + slack + t) / t;
    let hi = (q - slack - t) / t;
    message
        .centered()
        .iter()
        .map(|&m| {
            let k = rng.gen_range(lo..hi.max(lo + 1)) as i64;
            let sign = if rng.gen::<bool>() { 1 } else { -1 };
            m + sign * k * t as i64
        })
        .collect()
}

/// Runs one probe: returns the failure bit leaked to the server.
pub fn attack_overflow_probe(client: &ReactionClient<'_>, client_ct: &Ciphertext, w2_raw: &[i64]) -> Result<bool> {
    let n = client_ct.params().degree();
    let t = client_ct.params().plain_modulus();
    let out = biased_affine_unchecked(client_ct, &Plaintext::zero(n, t), w2_raw)?;
    Ok(client.failure_bit(&out))
}

/// Recovered key coefficients interpreted as a secret key.
pub fn key_from_recovered(params: &Arc<BgvParams>, coeffs: &[i64]) -> SecretKey {
    let t = params.plain_modulus();
    let c = coeffs.iter().map(|&v| to_centered(v.rem_euclid(t as i64) as u64, t)).collect();
    SecretKey::from_coeffs(params, c)
}
