//! Verify-then-decrypt oracle and an IND-CCA1 game harness around it.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{dec, enc, eval_identity, verify, EvalKey, EvalTag, InputTag, VerifyKey, VfheKeys};
use crate::bgv::{attack_trivial_ct, Ciphertext, DecryptionOracle, Plaintext, PublicKey};
use crate::error::{Error, Result};
use crate::ring::derive_rng;

/// Client-side decryption service. It only decrypts outputs whose tag verifies
/// against an input tag this client issued.
#[derive(Debug)]
pub struct VfheOracle {
    vk: VerifyKey,
    issued: HashSet<[u8; 32]>,
    queries: u64,
    refused: u64,
}

impl VfheOracle {
    pub fn new(vk: VerifyKey) -> Self {
        Self { vk, issued: HashSet::new(), queries: 0, refused: 0 }
    }

    /// Oracle that remembers input tags issued in earlier sessions.
    pub fn with_issued(vk: VerifyKey, issued: impl IntoIterator<Item = [u8; 32]>) -> Self {
        Self { vk, issued: issued.into_iter().collect(), queries: 0, refused: 0 }
    }

    /// Encrypts through the client, recording `τ_x` as issued.
    pub fn encrypt(&mut self, pk: &PublicKey, xs: &[Plaintext], seed: u64) -> Result<(Vec<Ciphertext>, InputTag)> {
        let (cts, tag) = enc(pk, xs, seed)?;
        self.issued.insert(tag.digest());
        Ok((cts, tag))
    }

    /// `None` stands for ⊥.
    pub fn oracle_dec(&mut self, c: &Ciphertext, tau_x: &InputTag, tau_y: &EvalTag) -> Option<Plaintext> {
        self.queries += 1;
        if !self.issued.contains(&tau_x.digest()) || !verify(&self.vk, c, tau_x, tau_y) {
            self.refused += 1;
            return None;
        }
        Some(dec(self.vk.secret_key(), c))
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn refused(&self) -> u64 {
        self.refused
    }

    /// Adapter for attacks that only hold a ciphertext: each query is wrapped in an
    /// identity-circuit tag with the ciphertext as its own input tag.
    pub fn tagging<'a>(&'a mut self, ek: &'a EvalKey) -> IdentityTagging<'a> {
        IdentityTagging { oracle: self, ek }
    }
}

pub struct IdentityTagging<'a> {
    oracle: &'a mut VfheOracle,
    ek: &'a EvalKey,
}

impl DecryptionOracle for IdentityTagging<'_> {
    fn query(&mut self, ct: &Ciphertext) -> Option<Plaintext> {
        let tag = eval_identity(self.ek, ct).ok()?;
        self.oracle.oracle_dec(ct, &InputTag(vec![ct.clone()]), &tag)
    }
}

/// Adversary for the IND-CCA1 game: decryption access only before the challenge.
pub trait CcaAdversary {
    fn choose(&mut self, ek: &EvalKey, oracle: &mut VfheOracle) -> (Plaintext, Plaintext);
    fn guess(&mut self, ek: &EvalKey, challenge: &Ciphertext) -> bool;
}

/// Runs one game and reports whether the adversary guessed the hidden bit. This wires
/// the oracles; it does not estimate an advantage.
pub fn ind_cca1_game<A: CcaAdversary>(keys: &VfheKeys, adversary: &mut A, seed: u64) -> Result<bool> {
    let mut rng = derive_rng(seed, "ind-cca1");
    let bit: bool = rng.gen();
    let mut oracle = VfheOracle::new(keys.verify.clone());
    let (m0, m1) = adversary.choose(&keys.eval, &mut oracle);
    if m0.coeffs().len() != m1.coeffs().len() {
        return Err(Error::OutOfRange("challenge messages differ in length".into()));
    }
    let m = if bit { m1 } else { m0 };
    let (cts, _) = enc(keys.eval.public_key(), &[m], rng.gen())?;
    Ok(adversary.guess(&keys.eval, &cts[0]) == bit)
}

/// Tries the trivial-ciphertext key recovery in the first phase and guesses at random
/// unless it obtained the key.
pub struct GuessingAdversary {
    rng: ChaCha20Rng,
    pub recovered: Option<Vec<i64>>,
}

impl GuessingAdversary {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha20Rng::seed_from_u64(seed), recovered: None }
    }
}

impl CcaAdversary for GuessingAdversary {
    fn choose(&mut self, ek: &EvalKey, oracle: &mut VfheOracle) -> (Plaintext, Plaintext) {
        self.recovered = attack_trivial_ct(&mut oracle.tagging(ek), ek.params());
        let n = ek.params().degree();
        let t = ek.params().plain_modulus();
        (Plaintext::zero(n, t), Plaintext::constant(1, n, t))
    }

    fn guess(&mut self, ek: &EvalKey, challenge: &Ciphertext) -> bool {
        match &self.recovered {
            Some(s) => {
                let sk = crate::bgv::attack::key_from_recovered(ek.params(), s);
                dec(&sk, challenge).coeffs()[0] == 1
            }
            None => self.rng.gen(),
        }
    }
}
