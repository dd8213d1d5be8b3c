//! Key and ciphertext files: the ring envelope with a type tag and a scheme block
//! (`t` u64, error kind u8, error parameter u32, relin digit bits u8, flood bits u8).

use std::sync::Arc;

use num_bigint::BigUint;

use super::ciphertext::Ciphertext;
use super::keys::{PublicKey, RelinKey, SecretKey};
use super::params::{BgvConfig, BgvParams};
use crate::error::{Error, Result};
use crate::ring::serial::{write_element_body, write_header, Reader, TypeTag};
use crate::ring::{Distribution, RingElement};

fn write_scheme(out: &mut Vec<u8>, p: &BgvParams) {
    out.extend_from_slice(&p.plain_modulus().to_le_bytes());
    let (kind, k) = match p.error_dist() {
        Distribution::Ternary => (0u8, 0u32),
        Distribution::CenteredBinomial(k) => (1, k),
        Distribution::Uniform => (2, 0),
    };
    out.push(kind);
    out.extend_from_slice(&k.to_le_bytes());
    out.push(p.relin_base_bits() as u8);
    out.push(p.flood_bits() as u8);
}

fn read_params(r: &mut Reader<'_>, tag: TypeTag) -> Result<Arc<BgvParams>> {
    let ring = r.header(tag)?;
    let t = r.u64()?;
    let kind = r.u8()?;
    let k = r.u32()?;
    let error = match kind {
        0 => Distribution::Ternary,
        1 => Distribution::CenteredBinomial(k),
        _ => return Err(Error::Format(format!("unsupported error distribution {kind}"))),
    };
    let relin_base_bits = r.u8()? as u32;
    let flood_bits = r.u8()? as u32;
    BgvParams::new(ring, t, BgvConfig { error, relin_base_bits, flood_bits })
}

fn envelope(tag: TypeTag, p: &BgvParams) -> Vec<u8> {
    let mut out = Vec::new();
    write_header(&mut out, tag, p.ring());
    write_scheme(&mut out, p);
    out
}

impl SecretKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = envelope(TypeTag::SecretKey, self.params());
        write_element_body(&mut out, &self.at_level(0).expect("top level"));
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let params = read_params(&mut r, TypeTag::SecretKey)?;
        let s = r.element(params.ring())?;
        r.finish()?;
        let coeffs = s
            .coeffs_centered()
            .into_iter()
            .map(|c| i64::try_from(c).map_err(|_| Error::Format("secret coefficient too large".into())))
            .collect::<Result<Vec<_>>>()?;
        Ok(SecretKey::from_coeffs(&params, coeffs))
    }
}

impl PublicKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = envelope(TypeTag::PublicKey, &self.params);
        write_element_body(&mut out, &self.p0);
        write_element_body(&mut out, &self.p1);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let params = read_params(&mut r, TypeTag::PublicKey)?;
        let p0 = r.element(params.ring())?;
        let p1 = r.element(params.ring())?;
        r.finish()?;
        Ok(PublicKey { params, p0, p1 })
    }
}

impl RelinKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = envelope(TypeTag::RelinKey, &self.params);
        out.extend_from_slice(&(self.digits.len() as u32).to_le_bytes());
        for (a, b) in &self.digits {
            write_element_body(&mut out, a);
            write_element_body(&mut out, b);
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let params = read_params(&mut r, TypeTag::RelinKey)?;
        let count = r.u32()? as usize;
        if count != params.relin_digits() {
            return Err(Error::Format(format!("{count} relinearization digits, expected {}", params.relin_digits())));
        }
        let digits = (0..count)
            .map(|_| Ok((r.element(params.ring())?, r.element(params.ring())?)))
            .collect::<Result<Vec<(RingElement, RingElement)>>>()?;
        r.finish()?;
        Ok(RelinKey { params, digits })
    }
}

impl Ciphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = envelope(TypeTag::Ciphertext, &self.params);
        out.extend_from_slice(&(self.level as u32).to_le_bytes());
        out.extend_from_slice(&self.correction.to_le_bytes());
        let nb = self.noise_bound.to_bytes_le();
        out.extend_from_slice(&(nb.len() as u32).to_le_bytes());
        out.extend_from_slice(&nb);
        out.push(self.parts.len() as u8);
        for p in &self.parts {
            write_element_body(&mut out, p);
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let params = read_params(&mut r, TypeTag::Ciphertext)?;
        let level = r.u32()? as usize;
        let correction = r.u64()?;
        let len = r.u32()? as usize;
        let noise_bound = BigUint::from_bytes_le(r.take(len)?);
        let count = r.u8()? as usize;
        let ring = params.ring_at(level)?.clone();
        let parts = (0..count).map(|_| r.element(&ring)).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Ciphertext::from_parts(&params, parts, level, noise_bound, correction)
    }
}
