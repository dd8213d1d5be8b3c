//! Word-sized modular arithmetic for moduli below 2^62.

/// Largest modulus accepted by the ring layer.
pub const MAX_MODULUS_BITS: u32 = 62;

#[inline]
pub fn add_mod(a: u64, b: u64, q: u64) -> u64 {
    let s = a + b;
    if s >= q {
        s - q
    } else {
        s
    }
}

#[inline]
pub fn sub_mod(a: u64, b: u64, q: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + q - b
    }
}

#[inline]
pub fn neg_mod(a: u64, q: u64) -> u64 {
    if a == 0 {
        0
    } else {
        q - a
    }
}

#[inline]
pub fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, q: u64) -> u64 {
    let mut acc = 1 % q;
    base %= q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, q);
        }
        base = mul_mod(base, base, q);
        exp >>= 1;
    }
    acc
}

/// Inverse modulo a prime via Fermat.
pub fn inv_mod(a: u64, q: u64) -> Option<u64> {
    if a.is_multiple_of(q) {
        None
    } else {
        Some(pow_mod(a, q - 2, q))
    }
}

/// Maps a signed integer into `[0, q)`.
#[inline]
pub fn from_signed(v: i64, q: u64) -> u64 {
    let r = (v as i128).rem_euclid(q as i128);
    r as u64
}

/// Centered representative in `[-q/2, q/2)`.
#[inline]
pub fn to_centered(v: u64, q: u64) -> i64 {
    if v >= q.div_ceil(2) {
        v as i64 - q as i64
    } else {
        v as i64
    }
}

/// Deterministic Miller-Rabin, exact for every `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in SMALL {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    'witness: for a in SMALL {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Largest primes with exactly `bits` bits and `q ≡ 1 (mod step)`, skipping `skip` of them.
pub fn find_ntt_prime(bits: u32, step: u64, skip: usize) -> Option<u64> {
    if !(2..=MAX_MODULUS_BITS).contains(&bits) {
        return None;
    }
    let top = 1u64 << bits;
    let low = 1u64 << (bits - 1);
    let mut q = (top - 1) / step * step + 1;
    if q >= top {
        q = q.checked_sub(step)?;
    }
    let mut seen = 0;
    while q > low {
        if is_prime(q) {
            if seen == skip {
                return Some(q);
            }
            seen += 1;
        }
        q = q.checked_sub(step)?;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality_matches_known_values() {
        for p in [2u64, 3, 17, 241, 257, 12289, 65537, 2147483629, 1152921504606846577] {
            assert!(is_prime(p), "{p}");
        }
        for c in [1u64, 4, 255, 61937, 2147483647 * 3, 1 << 40] {
            assert!(!is_prime(c), "{c}");
        }
    }

    #[test]
    fn paper_scale_primes() {
        assert_eq!(find_ntt_prime(45, 16384, 0), Some(35184371613697));
        assert_eq!(find_ntt_prime(46, 16384, 0), Some(70368743669761));
        assert_eq!(find_ntt_prime(46, 16384, 1), Some(70368743587841));
    }

    #[test]
    fn centered_roundtrip() {
        for q in [17u64, 257] {
            for v in 0..q {
                let c = to_centered(v, q);
                assert!(c >= -(q as i64) / 2 - 1 && c <= q as i64 / 2);
                assert_eq!(from_signed(c, q), v);
            }
        }
    }
}
