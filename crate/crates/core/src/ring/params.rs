use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::One;

use super::modarith::{self, MAX_MODULUS_BITS};
use super::ntt::NttTable;
use crate::error::{Error, Result};

/// Parameters of `Z_q[X]/(X^N + 1)` with `q` split into NTT-friendly prime limbs.
#[derive(Debug)]
pub struct RingParams {
    n: usize,
    moduli: Vec<u64>,
    modulus: BigUint,
    tables: Vec<NttTable>,
}

impl PartialEq for RingParams {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.moduli == other.moduli
    }
}
impl Eq for RingParams {}

impl RingParams {
    pub fn new(n: usize, moduli: &[u64]) -> Result<Arc<Self>> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidParams(format!("N = {n} must be a power of two >= 4")));
        }
        if moduli.is_empty() {
            return Err(Error::InvalidParams("empty modulus chain".into()));
        }
        let two_n = 2 * n as u64;
        for (i, &q) in moduli.iter().enumerate() {
            if q >= 1u64 << MAX_MODULUS_BITS {
                return Err(Error::InvalidParams(format!("modulus {q} exceeds 2^62")));
            }
            if !modarith::is_prime(q) {
                return Err(Error::InvalidParams(format!("modulus {q} is not prime")));
            }
            if q % two_n != 1 {
                return Err(Error::InvalidParams(format!("modulus {q} is not 1 mod 2N")));
            }
            if moduli[..i].contains(&q) {
                return Err(Error::InvalidParams(format!("modulus {q} repeated")));
            }
        }
        let tables = moduli.iter().map(|&q| NttTable::new(n, q)).collect::<Result<Vec<_>>>()?;
        let modulus = moduli.iter().fold(BigUint::one(), |acc, &q| acc * q);
        Ok(Arc::new(Self { n, moduli: moduli.to_vec(), modulus, tables }))
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    pub fn limbs(&self) -> usize {
        self.moduli.len()
    }

    /// Product of all limb moduli.
    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub(crate) fn table(&self, limb: usize) -> &NttTable {
        &self.tables[limb]
    }

    /// Parameters with the last `drop` limbs removed.
    pub fn truncated(&self, drop: usize) -> Result<Arc<Self>> {
        if drop >= self.moduli.len() {
            return Err(Error::NoRemainingLevels);
        }
        Self::new(self.n, &self.moduli[..self.moduli.len() - drop])
    }

    /// Toy ring used throughout unit tests: N = 8, q = 257.
    pub fn toy_single() -> Arc<Self> {
        Self::new(8, &[257]).expect("static parameters")
    }

    /// Toy ring N = 8, q = 257 * 241.
    pub fn toy_pair() -> Arc<Self> {
        Self::new(8, &[257, 241]).expect("static parameters")
    }
}
