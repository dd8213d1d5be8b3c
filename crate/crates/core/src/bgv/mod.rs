//! Leveled BGV with the error placed at `t·e`, analytic noise tracking and the
//! decryption-oracle attacks that an unprotected client is exposed to.

pub mod attack;
mod ciphertext;
pub mod eval;
mod keys;
mod params;
mod serial;

pub use attack::{
    attack_overflow_probe, attack_relin_key, attack_trivial_ct, DecryptionOracle, ReactionClient, UncheckedOracle,
};
pub use ciphertext::{
    decrypt, encrypt, encrypt_zero_with, exact_noise, phase, Ciphertext, EncryptionRandomness, Plaintext,
};
pub use eval::{
    eval_add, eval_add_pt, eval_mul_pt, eval_sub, eval_sub_pt, mod_switch, noise_flood, relinearize, tensor,
};
pub use keys::{keygen, PublicKey, RelinKey, SecretKey};
pub use params::{BgvConfig, BgvParams};
