use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Scalar field of a constraint system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldParams {
    p: BigUint,
}

/// Scalar field of the BN254 curve, the usual 254-bit SNARK field.
pub const BN254_FR: &str = "21888242871839275222246405745257275088548364400416034343698204186575808495617";

/// A 31-bit prime for fast tests.
pub const TEST_P31: u64 = 2147483629;

impl FieldParams {
    pub fn new(p: BigUint) -> Result<Self> {
        if p.bits() < 8 || !is_probable_prime(&p) {
            return Err(Error::InvalidParams(format!("field modulus {p} is not a usable prime")));
        }
        Ok(Self { p })
    }

    pub fn bn254() -> Self {
        Self { p: BN254_FR.parse().expect("constant") }
    }

    pub fn test31() -> Self {
        Self { p: BigUint::from(TEST_P31) }
    }

    pub fn modulus(&self) -> &BigUint {
        &self.p
    }

    pub fn bit_length(&self) -> u32 {
        self.p.bits() as u32
    }

    /// Largest magnitude a live integer wire may reach. Two bits below `p` so that a
    /// reduction tie `k·q + r` with a range-checked `k` cannot wrap.
    pub fn live_threshold(&self) -> BigUint {
        BigUint::one() << (self.bit_length() as usize - 2)
    }

    pub fn reduce(&self, x: &BigInt) -> BigUint {
        let p = BigInt::from_biguint(Sign::Plus, self.p.clone());
        let r = ((x % &p) + &p) % &p;
        r.to_biguint().expect("nonnegative")
    }

    pub fn add(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a + b) % &self.p
    }

    pub fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.p
    }

    pub fn pow(&self, a: &BigUint, e: u32) -> BigUint {
        a.modpow(&BigUint::from(e), &self.p)
    }
}

fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for small in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let s = BigUint::from(small);
        if *n == s {
            return true;
        }
        if (n % &s).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let n1 = n - &one;
    let r = n1.trailing_zeros().expect("n > 1");
    let d = &n1 >> r;
    'witness: for a in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x == one || x == n1 {
            continue;
        }
        for _ in 1..r {
            x = x.modpow(&two, n);
            if x == n1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
