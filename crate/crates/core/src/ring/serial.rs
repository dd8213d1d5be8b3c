//! Binary envelope shared by ring elements, keys and ciphertexts.
//!
//! Layout: `"VFHE"`, version byte, type tag byte, `N` (u32 LE), limb count (u8),
//! moduli (u64 LE each), then a type-specific body. Ring elements in a body are a
//! form flag byte (0 = coefficient, 1 = NTT) followed by every residue as u64 LE,
//! limb-major.

use std::sync::Arc;

use super::element::{Representation, RingElement};
use super::params::RingParams;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VFHE";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum TypeTag {
    RingElement = 1,
    SecretKey = 2,
    PublicKey = 3,
    RelinKey = 4,
    Ciphertext = 5,
    Plaintext = 6,
}

impl TypeTag {
    fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            1 => TypeTag::RingElement,
            2 => TypeTag::SecretKey,
            3 => TypeTag::PublicKey,
            4 => TypeTag::RelinKey,
            5 => TypeTag::Ciphertext,
            6 => TypeTag::Plaintext,
            _ => return Err(Error::Format(format!("unknown type tag {b}"))),
        })
    }
}

pub fn write_header(out: &mut Vec<u8>, tag: TypeTag, params: &RingParams) {
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.push(tag as u8);
    out.extend_from_slice(&(params.degree() as u32).to_le_bytes());
    out.push(params.limbs() as u8);
    for &q in params.moduli() {
        out.extend_from_slice(&q.to_le_bytes());
    }
}

pub fn write_element_body(out: &mut Vec<u8>, el: &RingElement) {
    out.push(match el.form() {
        Representation::Coefficient => 0,
        Representation::Ntt => 1,
    });
    for limb in el.limbs() {
        for &v in limb {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

/// Cursor over an envelope body.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format("truncated input".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format("trailing bytes".into()));
        }
        Ok(())
    }

    /// Reads and validates the envelope header.
    pub fn header(&mut self, expected: TypeTag) -> Result<Arc<RingParams>> {
        if self.take(4)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = self.u8()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let tag = TypeTag::from_byte(self.u8()?)?;
        if tag != expected {
            return Err(Error::Format(format!("expected {expected:?}, found {tag:?}")));
        }
        let n = self.u32()? as usize;
        let l = self.u8()? as usize;
        let moduli = (0..l).map(|_| self.u64()).collect::<Result<Vec<_>>>()?;
        RingParams::new(n, &moduli)
    }

    pub fn element(&mut self, params: &Arc<RingParams>) -> Result<RingElement> {
        let form = match self.u8()? {
            0 => Representation::Coefficient,
            1 => Representation::Ntt,
            f => return Err(Error::Format(format!("bad form flag {f}"))),
        };
        let limbs = (0..params.limbs())
            .map(|_| (0..params.degree()).map(|_| self.u64()).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        RingElement::from_limbs(params, limbs, form)
    }
}

impl RingElement {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_header(&mut out, TypeTag::RingElement, self.params());
        write_element_body(&mut out, self);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let params = r.header(TypeTag::RingElement)?;
        let el = r.element(&params)?;
        r.finish()?;
        Ok(el)
    }
}
