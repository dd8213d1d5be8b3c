use std::sync::Arc;

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::ring::{Distribution, RingParams};

/// Scheme parameters: a ring with its modulus chain, plaintext modulus and noise knobs.
#[derive(Debug)]
pub struct BgvParams {
    levels: Vec<Arc<RingParams>>,
    t: u64,
    error: Distribution,
    relin_base_bits: u32,
    flood_bits: u32,
}

impl PartialEq for BgvParams {
    fn eq(&self, other: &Self) -> bool {
        self.levels[0] == other.levels[0]
            && self.t == other.t
            && self.error == other.error
            && self.relin_base_bits == other.relin_base_bits
            && self.flood_bits == other.flood_bits
    }
}
impl Eq for BgvParams {}

#[derive(Debug, Clone, Copy)]
pub struct BgvConfig {
    pub error: Distribution,
    /// Relinearization digit width `w` (base `2^w`).
    pub relin_base_bits: u32,
    /// Flooding errors are uniform in `±2^flood_bits · B_e`.
    pub flood_bits: u32,
}

impl Default for BgvConfig {
    fn default() -> Self {
        Self { error: Distribution::CenteredBinomial(2), relin_base_bits: 16, flood_bits: 4 }
    }
}

impl BgvParams {
    pub fn new(ring: Arc<RingParams>, t: u64, config: BgvConfig) -> Result<Arc<Self>> {
        if t < 2 {
            return Err(Error::InvalidParams(format!("plaintext modulus {t} too small")));
        }
        if ring.moduli().iter().any(|&q| q % t == 0 || q <= t) {
            return Err(Error::InvalidParams("plaintext modulus must be below and coprime to every limb".into()));
        }
        if config.error.bound().is_none() {
            return Err(Error::InvalidParams("error distribution must be bounded".into()));
        }
        if config.relin_base_bits == 0 || config.relin_base_bits > 62 {
            return Err(Error::InvalidParams("relinearization digit width out of range".into()));
        }
        let mut levels = vec![ring.clone()];
        for drop in 1..ring.limbs() {
            levels.push(ring.truncated(drop)?);
        }
        Ok(Arc::new(Self {
            levels,
            t,
            error: config.error,
            relin_base_bits: config.relin_base_bits,
            flood_bits: config.flood_bits,
        }))
    }

    pub fn with_defaults(ring: Arc<RingParams>, t: u64) -> Result<Arc<Self>> {
        Self::new(ring, t, BgvConfig::default())
    }

    pub fn ring(&self) -> &Arc<RingParams> {
        &self.levels[0]
    }

    /// Ring at `level` (number of limbs dropped so far).
    pub fn ring_at(&self, level: usize) -> Result<&Arc<RingParams>> {
        self.levels.get(level).ok_or(Error::NoRemainingLevels)
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn degree(&self) -> usize {
        self.levels[0].degree()
    }

    pub fn plain_modulus(&self) -> u64 {
        self.t
    }

    pub fn error_dist(&self) -> Distribution {
        self.error
    }

    /// `B_e`, the largest fresh error coefficient.
    pub fn error_bound(&self) -> u64 {
        self.error.bound().expect("validated")
    }

    pub fn flood_error_bound(&self) -> u64 {
        self.error_bound() << self.flood_bits
    }

    pub fn flood_bits(&self) -> u32 {
        self.flood_bits
    }

    pub fn relin_base_bits(&self) -> u32 {
        self.relin_base_bits
    }

    /// Number of base-`2^w` digits covering the top-level modulus.
    pub fn relin_digits(&self) -> usize {
        let bits = self.ring().modulus().bits() as usize;
        bits.div_ceil(self.relin_base_bits as usize)
    }

    /// Decryption threshold `q/2` at `level`.
    pub fn half_modulus(&self, level: usize) -> Result<BigUint> {
        Ok(self.ring_at(level)?.modulus() / 2u32)
    }

    /// Analytic bound on a fresh ciphertext: `t·B_e·(2N+1) + ⌊t/2⌋`.
    pub fn fresh_noise_bound(&self) -> BigUint {
        let n = self.degree() as u64;
        BigUint::from(self.t) * self.error_bound() * (2 * n + 1) + self.t / 2
    }

    /// Analytic noise added by one flooding addend: `t·(B_e·N + B_f·(N+1))`.
    pub fn flood_addend_bound(&self) -> BigUint {
        let n = self.degree() as u64;
        BigUint::from(self.t) * (self.error_bound() * n + self.flood_error_bound() * (n + 1))
    }
}
