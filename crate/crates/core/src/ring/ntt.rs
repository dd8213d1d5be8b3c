//! Negacyclic NTT over a single prime limb.
//!
//! Forward output is in bit-reversed slot order: slot `j` holds the evaluation at
//! `psi^(2 * brv(j) + 1)` where `psi` is a primitive `2N`-th root of unity.

use super::modarith::{add_mod, inv_mod, mul_mod, pow_mod, sub_mod};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct NttTable {
    n: usize,
    q: u64,
    psi: u64,
    psi_brv: Vec<u64>,
    psi_inv_brv: Vec<u64>,
    n_inv: u64,
}

pub(crate) fn bit_reverse(mut x: usize, bits: u32) -> usize {
    let mut r = 0;
    for _ in 0..bits {
        r = (r << 1) | (x & 1);
        x >>= 1;
    }
    r
}

impl NttTable {
    pub fn new(n: usize, q: u64) -> Result<Self> {
        let two_n = 2 * n as u64;
        if !(q - 1).is_multiple_of(two_n) {
            return Err(Error::InvalidParams(format!("{q} has no 2N-th roots")));
        }
        let exp = (q - 1) / two_n;
        let psi = (2..q)
            .map(|g| pow_mod(g, exp, q))
            .find(|&c| pow_mod(c, n as u64, q) == q - 1)
            .ok_or_else(|| Error::InvalidParams(format!("no primitive 2N-th root mod {q}")))?;
        let psi_inv = inv_mod(psi, q).expect("psi is a unit");
        let bits = n.trailing_zeros();
        let mut psi_brv = vec![0; n];
        let mut psi_inv_brv = vec![0; n];
        for i in 0..n {
            let r = bit_reverse(i, bits) as u64;
            psi_brv[i] = pow_mod(psi, r, q);
            psi_inv_brv[i] = pow_mod(psi_inv, r, q);
        }
        Ok(Self { n, q, psi, psi_brv, psi_inv_brv, n_inv: inv_mod(n as u64 % q, q).expect("N invertible") })
    }

    #[cfg(test)]
    pub fn psi(&self) -> u64 {
        self.psi
    }

    /// Exponent `e` such that slot `j` evaluates at `psi^e`.
    pub fn slot_exponent(&self, j: usize) -> u64 {
        2 * bit_reverse(j, self.n.trailing_zeros()) as u64 + 1
    }

    pub fn forward(&self, a: &mut [u64]) {
        let q = self.q;
        let mut t = self.n;
        let mut m = 1;
        while m < self.n {
            t >>= 1;
            for i in 0..m {
                let j1 = 2 * i * t;
                let s = self.psi_brv[m + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = mul_mod(a[j + t], s, q);
                    a[j] = add_mod(u, v, q);
                    a[j + t] = sub_mod(u, v, q);
                }
            }
            m <<= 1;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        let q = self.q;
        let mut t = 1;
        let mut m = self.n;
        while m > 1 {
            let h = m >> 1;
            let mut j1 = 0;
            for i in 0..h {
                let s = self.psi_inv_brv[h + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = a[j + t];
                    a[j] = add_mod(u, v, q);
                    a[j + t] = mul_mod(sub_mod(u, v, q), s, q);
                }
                j1 += 2 * t;
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = mul_mod(*x, self.n_inv, q);
        }
    }

    /// Dense matrix of the forward map: `slot[j] = sum_k M[j][k] * coeff[k]`.
    pub fn forward_matrix(&self) -> Vec<Vec<u64>> {
        (0..self.n)
            .map(|j| {
                let root = pow_mod(self.psi, self.slot_exponent(j), self.q);
                (0..self.n).map(|k| pow_mod(root, k as u64, self.q)).collect()
            })
            .collect()
    }

    /// Dense matrix of the inverse map: `coeff[k] = sum_j M[k][j] * slot[j]`.
    pub fn inverse_matrix(&self) -> Vec<Vec<u64>> {
        let psi_inv = inv_mod(self.psi, self.q).expect("unit");
        (0..self.n)
            .map(|k| {
                (0..self.n)
                    .map(|j| {
                        let e = (self.slot_exponent(j) * k as u64) % (2 * self.n as u64);
                        mul_mod(pow_mod(psi_inv, e, self.q), self.n_inv, self.q)
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_at(coeffs: &[u64], x: u64, q: u64) -> u64 {
        coeffs.iter().rev().fold(0, |acc, &c| add_mod(mul_mod(acc, x, q), c, q))
    }

    #[test]
    fn forward_is_evaluation_at_odd_roots() {
        let table = NttTable::new(8, 257).unwrap();
        let coeffs: Vec<u64> = (0..8).map(|i| (i * 37 + 5) % 257).collect();
        let mut slots = coeffs.clone();
        table.forward(&mut slots);
        for (j, &s) in slots.iter().enumerate() {
            let root = pow_mod(table.psi(), table.slot_exponent(j), 257);
            assert_eq!(s, eval_at(&coeffs, root, 257));
        }
    }

    #[test]
    fn matrices_agree_with_fast_transform() {
        let table = NttTable::new(16, 97).unwrap();
        let coeffs: Vec<u64> = (0..16).map(|i| (i * i + 3) % 97).collect();
        let mut fast = coeffs.clone();
        table.forward(&mut fast);
        let fwd = table.forward_matrix();
        for j in 0..16 {
            let dot = (0..16).fold(0, |acc, k| add_mod(acc, mul_mod(fwd[j][k], coeffs[k], 97), 97));
            assert_eq!(dot, fast[j]);
        }
        let inv = table.inverse_matrix();
        for k in 0..16 {
            let dot = (0..16).fold(0, |acc, j| add_mod(acc, mul_mod(inv[k][j], fast[j], 97), 97));
            assert_eq!(dot, coeffs[k]);
        }
    }
}
