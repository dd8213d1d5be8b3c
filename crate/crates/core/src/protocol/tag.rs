//! Evaluation tags and their `VTAG1` byte format.
//!
//! Layout: magic, 32-byte system id, 32-byte digest of the public inputs, witness
//! count (u32 LE), then each witness value as a length byte and little-endian bytes.

use num_bigint::BigUint;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ring::serial::Reader;

pub const TAG_MAGIC: &[u8; 5] = b"VTAG1";

/// `τ_y` under the satisfaction backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalTag {
    pub system_id: [u8; 32],
    pub io_digest: [u8; 32],
    pub witness: Vec<BigUint>,
}

/// Digest binding a tag to one public-input vector.
pub fn io_digest(public: &[BigUint]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((public.len() as u64).to_le_bytes());
    for v in public {
        let bytes = v.to_bytes_le();
        h.update([bytes.len() as u8]);
        h.update(&bytes);
    }
    h.finalize().into()
}

impl EvalTag {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(73 + self.witness.len() * 33);
        out.extend_from_slice(TAG_MAGIC);
        out.extend_from_slice(&self.system_id);
        out.extend_from_slice(&self.io_digest);
        out.extend_from_slice(&(self.witness.len() as u32).to_le_bytes());
        for v in &self.witness {
            let bytes = v.to_bytes_le();
            out.push(bytes.len() as u8);
            out.extend_from_slice(&bytes);
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        if r.take(TAG_MAGIC.len())? != TAG_MAGIC {
            return Err(Error::Format("not a VTAG1 tag".into()));
        }
        let system_id = r.take(32)?.try_into().expect("32 bytes");
        let io_digest = r.take(32)?.try_into().expect("32 bytes");
        let count = r.u32()? as usize;
        if count > buf.len() {
            return Err(Error::Format("witness count exceeds tag size".into()));
        }
        let mut witness = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u8()? as usize;
            witness.push(BigUint::from_bytes_le(r.take(len)?));
        }
        r.finish()?;
        Ok(Self { system_id, io_digest, witness })
    }
}
