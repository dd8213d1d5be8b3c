//! Arithmetic in `Z_q[X]/(X^N + 1)` with negacyclic NTT and RNS limbs.

pub mod crt;
mod element;
pub mod modarith;
mod ntt;
mod params;
pub mod sample;
pub mod serial;

pub use crt::{crt_merge, crt_split, CrtDirection};
pub use element::{ntt_transform, ring_add, ring_mul, NttDirection, Representation, RingElement};
pub use params::RingParams;
pub use sample::{derive_rng, sample_poly, sample_poly_seeded, Distribution};

/// Dense forward-NTT matrix of limb `limb`: `slot[j] = Σ_k M[j][k]·coeff[k] mod q_limb`.
pub fn forward_matrix(params: &RingParams, limb: usize) -> Vec<Vec<u64>> {
    params.table(limb).forward_matrix()
}

/// Dense inverse-NTT matrix of limb `limb`: `coeff[k] = Σ_j M[k][j]·slot[j] mod q_limb`.
pub fn inverse_matrix(params: &RingParams, limb: usize) -> Vec<Vec<u64>> {
    params.table(limb).inverse_matrix()
}
