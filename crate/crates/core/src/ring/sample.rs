use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::element::RingElement;
use super::params::RingParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    /// Coefficients uniform in `{-1, 0, 1}`.
    Ternary,
    /// Difference of two sums of `k` fair bits; support `[-k, k]`.
    CenteredBinomial(u32),
    /// Each limb residue uniform in `[0, q_i)`.
    Uniform,
}

impl Distribution {
    /// Largest absolute centered coefficient the distribution can produce, if bounded.
    pub fn bound(self) -> Option<u64> {
        match self {
            Distribution::Ternary => Some(1),
            Distribution::CenteredBinomial(k) => Some(k as u64),
            Distribution::Uniform => None,
        }
    }
}

/// Deterministic RNG derived from a root seed and a role label.
pub fn derive_rng(seed: u64, label: &str) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(b"vfhe-seed");
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha20Rng::from_seed(digest)
}

/// Small signed coefficients drawn from a bounded distribution.
pub fn sample_signed<R: RngCore>(n: usize, dist: Distribution, rng: &mut R) -> Vec<i64> {
    match dist {
        Distribution::Ternary => (0..n).map(|_| rng.gen_range(-1..=1)).collect(),
        Distribution::CenteredBinomial(k) => (0..n)
            .map(|_| {
                let mut acc = 0i64;
                for _ in 0..k {
                    acc += (rng.next_u32() & 1) as i64;
                    acc -= (rng.next_u32() & 1) as i64;
                }
                acc
            })
            .collect(),
        Distribution::Uniform => panic!("uniform sampling has no signed small form"),
    }
}

/// Uniform signed coefficients in `[-bound, bound]`.
pub fn sample_uniform_bounded<R: RngCore>(n: usize, bound: u64, rng: &mut R) -> Vec<i64> {
    let b = bound as i64;
    (0..n).map(|_| rng.gen_range(-b..=b)).collect()
}

/// Samples a coefficient-form ring element.
pub fn sample_poly<R: RngCore>(params: &Arc<RingParams>, dist: Distribution, rng: &mut R) -> RingElement {
    match dist {
        Distribution::Uniform => {
            let limbs =
                params.moduli().iter().map(|&q| (0..params.degree()).map(|_| rng.gen_range(0..q)).collect()).collect();
            RingElement::from_limbs(params, limbs, super::Representation::Coefficient)
                .expect("uniform residues are reduced")
        }
        _ => RingElement::from_signed(params, &sample_signed(params.degree(), dist, rng)),
    }
}

/// Seeded variant of [`sample_poly`].
pub fn sample_poly_seeded(params: &Arc<RingParams>, dist: Distribution, seed: u64) -> RingElement {
    sample_poly(params, dist, &mut derive_rng(seed, "sample_poly"))
}
