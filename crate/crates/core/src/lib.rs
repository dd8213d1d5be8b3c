//! Verifiable evaluation of BGV ciphertexts.
//!
//! The crate is split by layer:
//!
//! * [`ring`]: exact arithmetic in `Z_q[X]/(X^N+1)` with NTT and RNS limbs.
//! * [`bgv`]: a leveled BGV scheme with analytic noise tracking, plus key-recovery
//!   attack demonstrations against an unprotected decryption oracle.
//! * [`r1cs`]: lowering of BGV evaluation circuits to rank-1 constraint systems
//!   with lazy modular-reduction scheduling.
//! * [`protocol`]: the five-algorithm verifiable scheme built from the two above.
//! * [`offload`]: randomized identity checks for outsourced tensoring.
//! * [`encoding`]: a batched RLWE linearly-homomorphic encoding of ring elements.
//! * [`workload`]: the toy/small/medium workloads, reports and attack demos.
//!
//! All parameters shipped here are toy-sized and offer no security.

pub mod bgv;
pub mod encoding;
mod error;
pub mod offload;
pub mod protocol;
pub mod r1cs;
pub mod ring;
pub mod workload;

pub use error::{Error, Result};
