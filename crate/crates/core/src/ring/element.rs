use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};

use super::crt::{crt_merge, crt_split};
use super::modarith::{add_mod, from_signed, mul_mod, neg_mod, sub_mod};
use super::params::RingParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Representation {
    Coefficient,
    Ntt,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Coefficient => "coefficient",
            Representation::Ntt => "ntt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NttDirection {
    Forward,
    Inverse,
}

/// An element of `R_q` stored as one residue vector per RNS limb.
#[derive(Clone, PartialEq, Eq)]
pub struct RingElement {
    params: Arc<RingParams>,
    limbs: Vec<Vec<u64>>,
    form: Representation,
}

impl fmt::Debug for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RingElement")
            .field("moduli", &self.params.moduli())
            .field("form", &self.form)
            .field("limbs", &self.limbs)
            .finish()
    }
}

impl RingElement {
    pub fn zero(params: &Arc<RingParams>, form: Representation) -> Self {
        Self { params: params.clone(), limbs: vec![vec![0; params.degree()]; params.limbs()], form }
    }

    /// The constant polynomial `c`.
    pub fn constant(params: &Arc<RingParams>, c: i64) -> Self {
        let mut coeffs = vec![0i64; params.degree()];
        coeffs[0] = c;
        Self::from_signed(params, &coeffs)
    }

    /// The monomial `X^k` for `k < N`.
    pub fn monomial(params: &Arc<RingParams>, k: usize) -> Self {
        let mut coeffs = vec![0i64; params.degree()];
        coeffs[k] = 1;
        Self::from_signed(params, &coeffs)
    }

    /// Builds from signed integer coefficients (coefficient form).
    pub fn from_signed(params: &Arc<RingParams>, coeffs: &[i64]) -> Self {
        assert_eq!(coeffs.len(), params.degree(), "coefficient count");
        let limbs = params.moduli().iter().map(|&q| coeffs.iter().map(|&c| from_signed(c, q)).collect()).collect();
        Self { params: params.clone(), limbs, form: Representation::Coefficient }
    }

    /// Builds from raw limb residues; every residue must be fully reduced.
    pub fn from_limbs(params: &Arc<RingParams>, limbs: Vec<Vec<u64>>, form: Representation) -> Result<Self> {
        if limbs.len() != params.limbs() || limbs.iter().any(|l| l.len() != params.degree()) {
            return Err(Error::SizeMismatch("limb shape does not match parameters".into()));
        }
        let el = Self { params: params.clone(), limbs, form };
        el.validate()?;
        Ok(el)
    }

    /// Builds from big-integer coefficients in `[0, q)`.
    pub fn from_biguint_coeffs(params: &Arc<RingParams>, coeffs: &[BigUint]) -> Result<Self> {
        let n = params.degree();
        if coeffs.len() != n {
            return Err(Error::SizeMismatch(format!("{} coefficients, expected {n}", coeffs.len())));
        }
        let mut limbs = vec![vec![0; n]; params.limbs()];
        for (k, c) in coeffs.iter().enumerate() {
            for (i, r) in crt_split(c, params.moduli())?.into_iter().enumerate() {
                limbs[i][k] = r;
            }
        }
        Ok(Self { params: params.clone(), limbs, form: Representation::Coefficient })
    }

    pub fn params(&self) -> &Arc<RingParams> {
        &self.params
    }

    pub fn form(&self) -> Representation {
        self.form
    }

    pub fn limbs(&self) -> &[Vec<u64>] {
        &self.limbs
    }

    pub fn limb(&self, i: usize) -> &[u64] {
        &self.limbs[i]
    }

    /// Checks that every residue is fully reduced.
    pub fn validate(&self) -> Result<()> {
        for (limb, &q) in self.limbs.iter().zip(self.params.moduli()) {
            if let Some(v) = limb.iter().find(|&&v| v >= q) {
                return Err(Error::OutOfRange(format!("residue {v} not below {q}")));
            }
        }
        Ok(())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.params != other.params {
            return Err(Error::ParamMismatch);
        }
        if self.form != other.form {
            return Err(Error::FormMismatch { expected: self.form.name(), found: other.form.name() });
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(u64, u64, u64) -> u64) -> Self {
        let limbs = self
            .limbs
            .iter()
            .zip(&other.limbs)
            .zip(self.params.moduli())
            .map(|((a, b), &q)| a.iter().zip(b).map(|(&x, &y)| f(x, y, q)).collect())
            .collect();
        Self { params: self.params.clone(), limbs, form: self.form }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.zip_with(other, add_mod))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.zip_with(other, sub_mod))
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for (limb, &q) in out.limbs.iter_mut().zip(self.params.moduli()) {
            limb.iter_mut().for_each(|v| *v = neg_mod(*v, q));
        }
        out
    }

    /// Multiplies every residue by the integer `c`.
    pub fn scale(&self, c: i64) -> Self {
        let mut out = self.clone();
        for (limb, &q) in out.limbs.iter_mut().zip(self.params.moduli()) {
            let cm = from_signed(c, q);
            limb.iter_mut().for_each(|v| *v = mul_mod(*v, cm, q));
        }
        out
    }

    /// Ring product. Coefficient-form inputs go through the NTT and come back in
    /// coefficient form; NTT-form inputs multiply slot-wise.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.params != other.params {
            return Err(Error::ParamMismatch);
        }
        match (self.form, other.form) {
            (Representation::Ntt, Representation::Ntt) => Ok(self.zip_with(other, mul_mod)),
            (Representation::Coefficient, Representation::Coefficient) => {
                let a = self.ntt_transform(NttDirection::Forward)?;
                let b = other.ntt_transform(NttDirection::Forward)?;
                a.zip_with(&b, mul_mod).ntt_transform(NttDirection::Inverse)
            }
            _ => Err(Error::FormMismatch { expected: self.form.name(), found: other.form.name() }),
        }
    }

    pub fn ntt_transform(&self, direction: NttDirection) -> Result<Self> {
        let (expected, target) = match direction {
            NttDirection::Forward => (Representation::Coefficient, Representation::Ntt),
            NttDirection::Inverse => (Representation::Ntt, Representation::Coefficient),
        };
        if self.form != expected {
            return Err(Error::FormMismatch { expected: expected.name(), found: self.form.name() });
        }
        let mut out = self.clone();
        for (i, limb) in out.limbs.iter_mut().enumerate() {
            let table = self.params.table(i);
            match direction {
                NttDirection::Forward => table.forward(limb),
                NttDirection::Inverse => table.inverse(limb),
            }
        }
        out.form = target;
        Ok(out)
    }

    /// Returns this element in the requested representation.
    pub fn to_form(&self, form: Representation) -> Self {
        match (self.form, form) {
            (a, b) if a == b => Ok(self.clone()),
            (_, Representation::Ntt) => self.ntt_transform(NttDirection::Forward),
            (_, Representation::Coefficient) => self.ntt_transform(NttDirection::Inverse),
        }
        .expect("form checked")
    }

    /// Coefficients as integers in `[0, q)`.
    pub fn coeffs_biguint(&self) -> Vec<BigUint> {
        let c = self.to_form(Representation::Coefficient);
        let n = self.params.degree();
        (0..n)
            .map(|k| {
                let limbs: Vec<u64> = c.limbs.iter().map(|l| l[k]).collect();
                crt_merge(&limbs, self.params.moduli()).expect("reduced residues")
            })
            .collect()
    }

    /// Coefficients lifted to the centered range `[-q/2, q/2)`.
    pub fn coeffs_centered(&self) -> Vec<BigInt> {
        let q = BigInt::from(self.params.modulus().clone());
        let half = (&q + 1u32) / 2u32;
        self.coeffs_biguint()
            .into_iter()
            .map(|c| {
                let c = BigInt::from(c);
                if c >= half {
                    c - &q
                } else {
                    c
                }
            })
            .collect()
    }

    /// Infinity norm of the centered coefficients.
    pub fn inf_norm(&self) -> BigUint {
        self.coeffs_centered().into_iter().map(|c| c.magnitude().clone()).max().unwrap_or_default()
    }

    /// Moves an element onto a ring with the same degree, re-reducing each centered
    /// coefficient. Only meaningful for small-norm elements.
    pub fn lift_small(&self, target: &Arc<RingParams>) -> Result<Self> {
        let coeffs: Vec<i64> = self
            .coeffs_centered()
            .into_iter()
            .map(|c| i64::try_from(c).map_err(|_| Error::OutOfRange("coefficient too large".into())))
            .collect::<Result<_>>()?;
        Ok(Self::from_signed(target, &coeffs).to_form(self.form))
    }

    /// Keeps only the first `limbs` residues, reinterpreted under `target`.
    pub(crate) fn truncate_limbs(&self, target: &Arc<RingParams>) -> Self {
        Self { params: target.clone(), limbs: self.limbs[..target.limbs()].to_vec(), form: self.form }
    }
}

/// Free-function spellings of the core ring operations.
pub fn ring_add(a: &RingElement, b: &RingElement) -> Result<RingElement> {
    a.add(b)
}

pub fn ring_mul(a: &RingElement, b: &RingElement) -> Result<RingElement> {
    a.mul(b)
}

pub fn ntt_transform(x: &RingElement, direction: NttDirection) -> Result<RingElement> {
    x.ntt_transform(direction)
}
