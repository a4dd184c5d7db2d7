//! Small exact number theory over machine integers.

use num_bigint::BigUint;

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut b: u64, mut e: u128, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut r = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Inverse of `a` modulo `m`, if `gcd(a, m) = 1`.
pub fn inv_mod(a: u128, m: u128) -> Option<u128> {
    if m == 1 {
        return Some(0);
    }
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return None;
    }
    Some(t0.rem_euclid(m as i128) as u128)
}

/// p-adic valuation; `v_p(0)` is reported as `u32::MAX`.
pub fn vp(mut n: u128, p: u64) -> u32 {
    if n == 0 {
        return u32::MAX;
    }
    let p = p as u128;
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

/// Legendre's formula: the exponent of `p` in `j!`.
pub fn legendre(j: u64, p: u64) -> u32 {
    let mut s = 0u64;
    let mut q = p;
    while q <= j {
        s += j / q;
        match q.checked_mul(p) {
            Some(nq) => q = nq,
            None => break,
        }
    }
    s as u32
}

pub fn pow_u128(p: u64, e: u32) -> Option<u128> {
    (p as u128).checked_pow(e)
}

pub fn big_pow(p: u64, e: u32) -> BigUint {
    BigUint::from(p).pow(e)
}

/// Reduce a big integer modulo a machine modulus.
pub fn big_mod(x: &BigUint, m: u128) -> u128 {
    let r = x % BigUint::from(m);
    r.iter_u64_digits()
        .enumerate()
        .fold(0u128, |acc, (i, d)| acc | ((d as u128) << (64 * i)))
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut r = BigUint::from(1u32);
    for i in 0..k {
        r *= n - i;
        r /= i + 1;
    }
    r
}

pub fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Multiplicative order of `a` modulo `m` (`a` a unit), by trial over divisors of `phi`.
pub fn mult_order(a: u64, m: u64, phi: u64) -> u64 {
    let mut best = phi;
    let mut d = 1u64;
    while d * d <= phi {
        if phi % d == 0 {
            for c in [d, phi / d] {
                if c < best && pow_mod(a, c as u128, m) == 1 {
                    best = c;
                }
            }
        }
        d += 1;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_matches_direct_count() {
        for p in [3u64, 5, 7, 13] {
            for j in 0..200u64 {
                let direct: u32 = (1..=j).map(|i| vp(i as u128, p)).sum();
                assert_eq!(legendre(j, p), direct, "j={j} p={p}");
            }
        }
        assert_eq!(legendre(49, 7), 8);
        assert_eq!(legendre(7, 7), 1);
    }

    #[test]
    fn inverse_by_search() {
        for m in [7u128, 49, 343, 169] {
            for a in 0..m {
                let brute = (0..m).find(|x| a * x % m == 1);
                assert_eq!(inv_mod(a, m), brute);
            }
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(7, 3), BigUint::from(35u32));
        assert_eq!(binomial(49, 7), BigUint::from(85900584u64));
        assert_eq!(big_mod(&binomial(169, 13), 1 << 100), {
            let mut r = 1u128;
            for i in 0..13u128 {
                r = r * (169 - i) / (i + 1);
            }
            r
        });
    }

    #[test]
    fn order_of_units() {
        assert_eq!(mult_order(3, 7, 6), 6);
        assert_eq!(mult_order(2, 7, 6), 3);
        assert_eq!(mult_order(31, 49, 42), 6);
    }
}
