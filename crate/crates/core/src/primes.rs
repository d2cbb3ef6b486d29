//! Small-integer number theory helpers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

pub fn lcm(a: u64, b: u64) -> u64 {
    a.lcm(&b)
}

/// Prime factorization of a positive `u64` as `(p, e)` pairs in increasing order.
pub fn factor_u64(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn totient(n: u64) -> u64 {
    factor_u64(n)
        .iter()
        .fold(n, |acc, &(p, _)| acc / p * (p - 1))
}

pub fn mobius(n: u64) -> i64 {
    let f = factor_u64(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn divisors(n: u64) -> Vec<u64> {
    let mut out: Vec<u64> = (1..=n).take_while(|d| d * d <= n).filter(|d| n % d == 0).collect();
    let mut hi: Vec<u64> = out.iter().rev().map(|d| n / d).filter(|&e| e * e != n).collect();
    out.append(&mut hi);
    out
}

pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    // deterministic Miller-Rabin for 64-bit inputs
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut r = 1u64;
        b %= n;
        while e > 0 {
            if e & 1 == 1 {
                r = mulmod(r, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        r
    };
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'outer: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

const TRIAL_LIMIT: u64 = 1 << 20;

/// Factor `|n|` for nonzero `n`. Cofactors beyond the trial-division range must
/// fit in 64 bits (where primality is decided exactly), otherwise an overflow
/// error is returned.
pub fn factor_bigint(n: &BigInt) -> Result<Vec<(BigInt, u32)>> {
    if n.is_zero() {
        return Err(Error::InvalidInput("cannot factor zero".into()));
    }
    let mut m = n.abs();
    let mut out = Vec::new();
    let mut p = 2u64;
    while p <= TRIAL_LIMIT {
        let pb = BigInt::from(p);
        if &pb * &pb > m {
            break;
        }
        let mut e = 0;
        loop {
            let (q, r) = m.div_rem(&pb);
            if !r.is_zero() {
                break;
            }
            m = q;
            e += 1;
        }
        if e > 0 {
            out.push((pb, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if m.is_one() {
        return Ok(out);
    }
    match m.to_u64() {
        Some(v) if is_prime_u64(v) || v < TRIAL_LIMIT * TRIAL_LIMIT => {
            out.push((m, 1));
            Ok(out)
        }
        Some(v) => {
            // composite with both factors above the trial limit
            let mut rest: Vec<(BigInt, u32)> = pollard_split(v)
                .into_iter()
                .map(|(q, e)| (BigInt::from(q), e))
                .collect();
            out.append(&mut rest);
            out.sort();
            Ok(out)
        }
        None => Err(Error::overflow("integer factorization beyond 64-bit cofactors", 64)),
    }
}

fn pollard_split(n: u64) -> Vec<(u64, u32)> {
    if n == 1 {
        return Vec::new();
    }
    if is_prime_u64(n) {
        return vec![(n, 1)];
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let mut c = 1u64;
    let d = loop {
        let f = |x: u64| (mulmod(x, x) + c) % n;
        let (mut x, mut y, mut d) = (2u64, 2u64, 1u64);
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = gcd(x.abs_diff(y), n);
        }
        if d != n {
            break d;
        }
        c += 1;
    };
    let mut merged: Vec<(u64, u32)> = Vec::new();
    for (p, e) in pollard_split(d).into_iter().chain(pollard_split(n / d)) {
        match merged.iter_mut().find(|(q, _)| *q == p) {
            Some(entry) => entry.1 += e,
            None => merged.push((p, e)),
        }
    }
    merged.sort();
    merged
}

/// Exponent of `p` in the nonzero integer `n`.
pub fn valuation(n: &BigInt, p: &BigInt) -> u32 {
    let mut m = n.clone();
    let mut e = 0;
    loop {
        let (q, r) = m.div_rem(p);
        if !r.is_zero() || m.is_zero() {
            return e;
        }
        m = q;
        e += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_functions() {
        assert_eq!(totient(12), 4);
        assert_eq!(totient(1), 1);
        assert_eq!(mobius(30), -1);
        assert_eq!(mobius(12), 0);
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(factor_u64(360), vec![(2, 3), (3, 2), (5, 1)]);
    }

    #[test]
    fn big_factorization() {
        let n = BigInt::from(1_000_003u64) * BigInt::from(1_000_033u64) * 8;
        let f = factor_bigint(&n).unwrap();
        assert_eq!(
            f,
            vec![(BigInt::from(2), 3), (BigInt::from(1_000_003u64), 1), (BigInt::from(1_000_033u64), 1)]
        );
        assert!(is_prime_u64(1_000_000_007));
        assert!(!is_prime_u64(1_000_000_007 * 3));
    }
}
