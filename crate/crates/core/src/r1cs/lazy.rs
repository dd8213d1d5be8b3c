//! Sequential-multiplication experiments for the reduction scheduler.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::builder::{BuildMode, Builder, Schedule};
use super::field::FieldParams;
use crate::error::{Error, Result};

/// Outcome of multiplying `k + 1` public inputs in sequence, once per RNS limb.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainReport {
    pub multiplications: usize,
    /// Most factors an accumulator held before a reduction was forced (0 if none was).
    pub capacity: usize,
    pub reductions: u64,
    pub reduction_bits: u64,
    pub constraints: u64,
    pub emitted: u64,
}

/// Runs `acc ← acc·x_i` for `k` steps over every limb in `moduli`, then reduces the result.
pub fn chain_experiment(field: &FieldParams, moduli: &[u64], k: usize, schedule: Schedule) -> Result<ChainReport> {
    if moduli.is_empty() {
        return Err(Error::InvalidParams("no moduli".into()));
    }
    let mut b = Builder::new(field.clone(), schedule, BuildMode::Count);
    let vars = b.alloc_public(moduli.len() * (k + 1), None::<&[BigUint]>);
    let mut capacity = 0;
    for (i, &q) in moduli.iter().enumerate() {
        let base = i * (k + 1);
        let mut acc = b.public_vec(q, &vars[base..base + 1]);
        let mut factors = 1;
        for j in 1..=k {
            let x = b.public_vec(q, &vars[base + j..base + j + 1]);
            let before = b.ledger().reductions;
            acc = b.mul(&acc, &x)?;
            if b.ledger().reductions > before && schedule == Schedule::Lazy {
                capacity = capacity.max(factors);
                factors = 2;
            } else {
                factors += 1;
            }
        }
        b.reduce(&acc)?;
    }
    let out = b.finish();
    Ok(ChainReport {
        multiplications: k,
        capacity,
        reductions: out.ledger.reductions,
        reduction_bits: out.ledger.reduction_bits,
        constraints: out.ledger.total,
        emitted: out.emitted,
    })
}

/// Factors of `bits`-bit residues that fit below the scheduler threshold.
pub fn capacity_for(field: &FieldParams, q_bits: u32) -> u32 {
    (field.bit_length() - 2) / q_bits
}

/// Cost-model ratio of reduction bit-cost: an eager schedule on one `q_bits` limb
/// against a lazy schedule on `limbs` limbs of `limb_bits` each.
pub fn reduction_cost_ratio(field: &FieldParams, q_bits: u32, limb_bits: u32, limbs: u32) -> f64 {
    let eager = q_bits as f64;
    let lazy = limbs as f64 * limb_bits as f64 / capacity_for(field, limb_bits) as f64;
    eager / lazy
}
