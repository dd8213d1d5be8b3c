use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::field::FieldParams;
use crate::error::{Error, Result};

/// Index of the constant-one variable.
pub const ONE: usize = 0;

/// Linear combination with signed integer coefficients. Variable 0 is the constant one,
/// kept separately in `constant`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lc {
    terms: Vec<(usize, BigInt)>,
    constant: BigInt,
}

impl Lc {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn var(index: usize) -> Self {
        Self { terms: vec![(index, BigInt::from(1))], constant: BigInt::zero() }
    }

    pub fn constant(c: impl Into<BigInt>) -> Self {
        Self { terms: Vec::new(), constant: c.into() }
    }

    pub fn terms(&self) -> &[(usize, BigInt)] {
        &self.terms
    }

    pub fn constant_term(&self) -> &BigInt {
        &self.constant
    }

    /// `Σ coeff_i · lc_i`, with like terms merged.
    pub fn combine<'a>(parts: impl IntoIterator<Item = (BigInt, &'a Lc)>) -> Self {
        let mut acc: BTreeMap<usize, BigInt> = BTreeMap::new();
        let mut constant = BigInt::zero();
        for (k, lc) in parts {
            if k.is_zero() {
                continue;
            }
            for (v, c) in &lc.terms {
                *acc.entry(*v).or_default() += &k * c;
            }
            constant += &k * &lc.constant;
        }
        Self { terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(), constant }
    }

    pub fn plus(&self, other: &Lc) -> Self {
        Self::combine([(BigInt::from(1), self), (BigInt::from(1), other)])
    }

    pub fn minus(&self, other: &Lc) -> Self {
        Self::combine([(BigInt::from(1), self), (BigInt::from(-1), other)])
    }

    pub fn scaled(&self, k: &BigInt) -> Self {
        Self::combine([(k.clone(), self)])
    }

    pub fn shifted(&self, c: &BigInt) -> Self {
        let mut out = self.clone();
        out.constant += c;
        out
    }

    /// Integer value under an assignment of nonnegative variable values.
    pub fn evaluate(&self, values: &[BigUint]) -> BigInt {
        let mut acc = self.constant.clone();
        for (v, c) in &self.terms {
            acc += c * BigInt::from(values[*v].clone());
        }
        acc
    }

    pub(crate) fn to_row(&self, field: &FieldParams) -> Row {
        let mut row = Vec::with_capacity(self.terms.len() + 1);
        if !self.constant.is_zero() {
            row.push((ONE as u32, field.reduce(&self.constant)));
        }
        for (v, c) in &self.terms {
            let r = field.reduce(c);
            if !r.is_zero() {
                row.push((*v as u32, r));
            }
        }
        row
    }
}

/// Sparse row of field coefficients, sorted by variable index.
pub type Row = Vec<(u32, BigUint)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub a: Row,
    pub b: Row,
    pub c: Row,
}

/// R1CS instance. Variables are laid out as `[1, public..., witness...]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSystem {
    pub field: FieldParams,
    pub num_public: usize,
    pub num_witness: usize,
    pub constraints: Vec<Constraint>,
}

const MAGIC: &str = "VR1CS1";

fn dot(row: &Row, z: &[BigUint], p: &BigUint) -> BigUint {
    let mut acc = BigUint::zero();
    for (v, c) in row {
        acc += c * &z[*v as usize];
    }
    acc % p
}

impl ConstraintSystem {
    pub fn num_variables(&self) -> usize {
        1 + self.num_public + self.num_witness
    }

    /// True iff `A·z ∘ B·z = C·z` for `z = (1, public, witness)`.
    pub fn is_satisfied(&self, public: &[BigUint], witness: &[BigUint]) -> Result<bool> {
        if public.len() != self.num_public || witness.len() != self.num_witness {
            return Err(Error::SizeMismatch(format!("assignment lengths {} and {}", public.len(), witness.len())));
        }
        let p = self.field.modulus();
        if public.iter().chain(witness).any(|x| x >= p) {
            return Ok(false);
        }
        let mut z = Vec::with_capacity(self.num_variables());
        z.push(BigUint::from(1u32));
        z.extend_from_slice(public);
        z.extend_from_slice(witness);
        Ok(self.constraints.par_iter().all(|k| (dot(&k.a, &z, p) * dot(&k.b, &z, p)) % p == dot(&k.c, &z, p)))
    }

    /// Indices of unsatisfied constraints (sequential; for diagnostics).
    pub fn unsatisfied(&self, public: &[BigUint], witness: &[BigUint]) -> Vec<usize> {
        let p = self.field.modulus();
        let mut z = vec![BigUint::from(1u32)];
        z.extend_from_slice(public);
        z.extend_from_slice(witness);
        self.constraints
            .iter()
            .enumerate()
            .filter(|(_, k)| (dot(&k.a, &z, p) * dot(&k.b, &z, p)) % p != dot(&k.c, &z, p))
            .map(|(i, _)| i)
            .collect()
    }

    /// Variables that appear in at least one constraint.
    pub fn constrained_variables(&self) -> Vec<bool> {
        let mut used = vec![false; self.num_variables()];
        for k in &self.constraints {
            for (v, _) in k.a.iter().chain(&k.b).chain(&k.c) {
                used[*v as usize] = true;
            }
        }
        used
    }

    /// Text serialization: magic, `p`, counts, then `(constraint, variable, coefficient)`
    /// triples for the A, B and C sections.
    pub fn to_text(&self) -> String {
        let section = |pick: fn(&Constraint) -> &Row| {
            let mut body = String::new();
            let mut count = 0usize;
            for (i, k) in self.constraints.iter().enumerate() {
                for (v, c) in pick(k) {
                    writeln!(body, "{i} {v} {c}").expect("string write");
                    count += 1;
                }
            }
            (count, body)
        };
        let (na, a) = section(|k| &k.a);
        let (nb, b) = section(|k| &k.b);
        let (nc, c) = section(|k| &k.c);
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "p {}", self.field.modulus()).unwrap();
        writeln!(out, "counts {} {} {} {na} {nb} {nc}", self.num_public, self.num_witness, self.constraints.len())
            .unwrap();
        for (name, body) in [("A", a), ("B", b), ("C", c)] {
            writeln!(out, "{name}").unwrap();
            out.push_str(&body);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("r1cs: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("missing magic"));
        }
        let p: BigUint = lines
            .next()
            .and_then(|l| l.strip_prefix("p "))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("missing field modulus"))?;
        let field = FieldParams::new(p)?;
        let counts: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix("counts "))
            .ok_or_else(|| bad("missing counts"))?
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| bad("bad count")))
            .collect::<Result<_>>()?;
        let [num_public, num_witness, m, na, nb, nc] = counts[..] else {
            return Err(bad("wrong number of counts"));
        };
        let nvars = 1 + num_public + num_witness;
        let mut constraints = vec![Constraint { a: Vec::new(), b: Vec::new(), c: Vec::new() }; m];
        for (name, n, pick) in [
            ("A", na, (|k: &mut Constraint| &mut k.a) as fn(&mut Constraint) -> &mut Row),
            ("B", nb, |k| &mut k.b),
            ("C", nc, |k| &mut k.c),
        ] {
            if lines.next() != Some(name) {
                return Err(bad("missing section header"));
            }
            for _ in 0..n {
                let line = lines.next().ok_or_else(|| bad("truncated section"))?;
                let mut it = line.split_whitespace();
                let i: u32 = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad index"))?;
                let v: u32 = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad variable"))?;
                let c: BigUint = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad coefficient"))?;
                if it.next().is_some() || i as usize >= m || v as usize >= nvars || &c >= field.modulus() {
                    return Err(bad("entry out of range"));
                }
                pick(&mut constraints[i as usize]).push((v, c));
            }
        }
        if lines.next().is_some() {
            return Err(bad("trailing data"));
        }
        Ok(Self { field, num_public, num_witness, constraints })
    }

    pub fn export(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn import(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the text serialization, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}
