//! Dense univariate polynomials over Q, coefficients stored low degree first.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub type QPoly = Vec<BigRational>;

pub fn trim(p: &mut QPoly) {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

pub fn from_ints(c: &[BigInt]) -> QPoly {
    let mut p: QPoly = c.iter().map(|x| BigRational::from_integer(x.clone())).collect();
    trim(&mut p);
    p
}

/// Degree, with `None` for the zero polynomial.
pub fn degree(p: &QPoly) -> Option<usize> {
    p.iter().rposition(|c| !c.is_zero())
}

pub fn sub(a: &QPoly, b: &QPoly) -> QPoly {
    let n = a.len().max(b.len());
    let zero = BigRational::zero();
    let mut out: QPoly = (0..n)
        .map(|i| a.get(i).unwrap_or(&zero) - b.get(i).unwrap_or(&zero))
        .collect();
    trim(&mut out);
    out
}

pub fn mul(a: &QPoly, b: &QPoly) -> QPoly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(&mut out);
    out
}

/// Quotient and remainder; `b` must be non-zero.
pub fn divrem(a: &QPoly, b: &QPoly) -> (QPoly, QPoly) {
    let db = degree(b).expect("division by the zero polynomial");
    let lb = b[db].clone();
    let mut r = a.clone();
    trim(&mut r);
    if r.len() <= db {
        return (Vec::new(), r);
    }
    let mut q = vec![BigRational::zero(); r.len() - db];
    while let Some(dr) = degree(&r) {
        if dr < db {
            break;
        }
        let c = &r[dr] / &lb;
        let shift = dr - db;
        for (j, bj) in b.iter().enumerate().take(db + 1) {
            if !bj.is_zero() {
                r[shift + j] -= &c * bj;
            }
        }
        q[shift] = c;
        trim(&mut r);
    }
    trim(&mut q);
    (q, r)
}

/// Extended Euclid: returns `(g, s, t)` with `s*a + t*b = g = gcd(a, b)`.
pub fn ext_gcd(a: &QPoly, b: &QPoly) -> (QPoly, QPoly, QPoly) {
    let one: QPoly = vec![BigRational::one()];
    let (mut r0, mut r1) = (a.clone(), b.clone());
    trim(&mut r0);
    trim(&mut r1);
    let (mut s0, mut s1): (QPoly, QPoly) = (one.clone(), Vec::new());
    let (mut t0, mut t1): (QPoly, QPoly) = (Vec::new(), one);
    while degree(&r1).is_some() {
        let (q, r) = divrem(&r0, &r1);
        let s2 = sub(&s0, &mul(&q, &s1));
        let t2 = sub(&t0, &mul(&q, &t1));
        r0 = std::mem::replace(&mut r1, r);
        s0 = std::mem::replace(&mut s1, s2);
        t0 = std::mem::replace(&mut t1, t2);
    }
    (r0, s0, t0)
}

/// Resultant `Res(a, b)` by the Euclidean recursion.
pub fn resultant(a: &QPoly, b: &QPoly) -> BigRational {
    let (Some(m), Some(n)) = (degree(a), degree(b)) else {
        return BigRational::zero();
    };
    if n == 0 {
        return num_traits::pow(b[0].clone(), m);
    }
    if m == 0 {
        return num_traits::pow(a[0].clone(), n);
    }
    // Res(a, b) = (-1)^{mn} Res(b, a) and Res(b, a) = lc(b)^{m - deg r} Res(b, r)
    let sign = if (m * n) % 2 == 1 { -BigRational::one() } else { BigRational::one() };
    let (_, r) = divrem(a, b);
    let Some(dr) = degree(&r) else {
        return BigRational::zero();
    };
    let lc = b[n].clone();
    sign * num_traits::pow(lc, m - dr) * resultant(b, &r)
}

pub fn eval(p: &QPoly, x: &BigRational) -> BigRational {
    p.iter().rev().fold(BigRational::zero(), |acc, c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[i64]) -> QPoly {
        from_ints(&c.iter().map(|&x| BigInt::from(x)).collect::<Vec<_>>())
    }

    #[test]
    fn resultant_matches_product_of_values() {
        // Res(x - 2, x^2 + 1) = 2^2 + 1
        let r = resultant(&p(&[-2, 1]), &p(&[1, 0, 1]));
        assert_eq!(r, BigRational::from_integer(5.into()));
        // Res(x^2 + 1, 1 + x) = (1 + i)(1 - i) = 2
        assert_eq!(resultant(&p(&[1, 0, 1]), &p(&[1, 1])), BigRational::from_integer(2.into()));
        // common root
        assert!(resultant(&p(&[-1, 0, 1]), &p(&[-1, 1])).is_zero());
    }

    #[test]
    fn ext_gcd_identity() {
        let a = p(&[1, 2, 0, 1]);
        let b = p(&[1, 1, 1]);
        let (g, s, t) = ext_gcd(&a, &b);
        let lhs = sub(&mul(&s, &a), &mul(&t, &b).iter().map(|c| -c).collect());
        assert_eq!(lhs, g);
        assert_eq!(degree(&g), Some(0));
    }

    #[test]
    fn division_roundtrip() {
        let a = p(&[3, -1, 4, 1, 5]);
        let b = p(&[2, 0, 7]);
        let (q, r) = divrem(&a, &b);
        let back = sub(&mul(&q, &b), &r.iter().map(|c| -c).collect());
        assert_eq!(back, a);
        assert!(degree(&r).unwrap_or(0) < 2);
    }
}
