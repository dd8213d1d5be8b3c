//! Conversion between big-integer residues mod `q` and their RNS limbs.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use super::modarith::{inv_mod, mul_mod};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrtDirection {
    Split,
    Merge,
}

/// Splits `x ∈ [0, q)` into residues modulo each limb.
pub fn crt_split(x: &BigUint, moduli: &[u64]) -> Result<Vec<u64>> {
    let q: BigUint = moduli.iter().map(|&m| BigUint::from(m)).product();
    if x >= &q {
        return Err(Error::OutOfRange(format!("{x} is not below {q}")));
    }
    Ok(moduli.iter().map(|&m| (x % m).to_u64().expect("residue fits")).collect())
}

/// Recombines consistent limb residues into the unique value in `[0, q)`.
pub fn crt_merge(limbs: &[u64], moduli: &[u64]) -> Result<BigUint> {
    if limbs.len() != moduli.len() {
        return Err(Error::SizeMismatch(format!("{} limbs for {} moduli", limbs.len(), moduli.len())));
    }
    let q: BigUint = moduli.iter().map(|&m| BigUint::from(m)).product();
    let mut acc = BigUint::zero();
    for (&r, &m) in limbs.iter().zip(moduli) {
        if r >= m {
            return Err(Error::OutOfRange(format!("residue {r} not below {m}")));
        }
        let hat = &q / m;
        let hat_mod = (&hat % m).to_u64().expect("fits");
        let coef = mul_mod(r, inv_mod(hat_mod, m).expect("coprime moduli"), m);
        acc += hat * coef;
    }
    Ok(acc % q)
}
