//! Exact arithmetic in cyclotomic fields Q(ζ_n).
//!
//! Elements are stored in the power basis `1, ζ, …, ζ^{φ(n)-1}` modulo the
//! n-th cyclotomic polynomial. Elements of different orders are combined in
//! the compositum Q(ζ_lcm). Equality is equality of numbers, so `ζ_4^2 == -1`
//! even though the two sides carry different orders.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::ball::{unit_root_table, Ball, ComplexBall};
use crate::error::{Error, Result};
use crate::primes;
use crate::upoly::{self, QPoly};

/// Precomputed data for one cyclotomic field.
pub(crate) struct FieldData {
    pub phi: usize,
    pub poly: Vec<BigInt>,
    /// `reduce[m]` is the power-basis vector of ζ^m for `0 <= m < n`.
    pub reduce: Vec<Vec<BigInt>>,
    pub units: Vec<u64>,
    /// Normalized trace `(1/φ(n)) Tr(ζ^j)`, a Ramanujan sum ratio.
    pub trace: Vec<BigRational>,
}

fn int_poly_mul(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Exact division by a monic integer polynomial.
fn int_poly_div_monic(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let db = b.len() - 1;
    let mut r = a.to_vec();
    let mut q = vec![BigInt::zero(); a.len() - db];
    for i in (0..q.len()).rev() {
        let c = r[i + db].clone();
        if c.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            r[i + j] -= &c * bj;
        }
        q[i] = c;
    }
    debug_assert!(r.iter().all(|c| c.is_zero()));
    q
}

/// Coefficients of the n-th cyclotomic polynomial, low degree first.
pub fn cyclotomic_polynomial(n: u64) -> Vec<BigInt> {
    assert!(n >= 1);
    // Φ_n = Π_{d | n} (x^d - 1)^{μ(n/d)}
    let mut num = vec![BigInt::one()];
    let mut den = vec![BigInt::one()];
    for d in primes::divisors(n) {
        let mu = primes::mobius(n / d);
        if mu == 0 {
            continue;
        }
        let mut f = vec![BigInt::zero(); d as usize + 1];
        f[0] = BigInt::from(-1);
        f[d as usize] = BigInt::one();
        if mu == 1 {
            num = int_poly_mul(&num, &f);
        } else {
            den = int_poly_mul(&den, &f);
        }
    }
    int_poly_div_monic(&num, &den)
}

impl FieldData {
    fn build(n: u64) -> Self {
        let poly = cyclotomic_polynomial(n);
        let phi = poly.len() - 1;
        let mut reduce = Vec::with_capacity(n as usize);
        let mut cur = vec![BigInt::zero(); phi];
        cur[0] = BigInt::one();
        for _ in 0..n {
            reduce.push(cur.clone());
            // multiply by x and reduce the x^phi term
            let top = cur[phi - 1].clone();
            let mut next = vec![BigInt::zero(); phi];
            for i in (1..phi).rev() {
                next[i] = cur[i - 1].clone();
            }
            if !top.is_zero() {
                for (i, item) in next.iter_mut().enumerate() {
                    *item -= &top * &poly[i];
                }
            }
            cur = next;
        }
        let units = if n == 1 {
            vec![0]
        } else {
            (1..n).filter(|&k| primes::gcd(k, n) == 1).collect()
        };
        let trace = (0..phi as u64)
            .map(|j| {
                let g = primes::gcd(j, n);
                let m = n / g;
                BigRational::new(
                    BigInt::from(primes::mobius(m)),
                    BigInt::from(primes::totient(m)),
                )
            })
            .collect();
        FieldData {
            phi,
            poly,
            reduce,
            units,
            trace,
        }
    }

    pub fn poly_q(&self) -> QPoly {
        upoly::from_ints(&self.poly)
    }
}

pub(crate) fn field(n: u64) -> Arc<FieldData> {
    static CACHE: OnceLock<RwLock<HashMap<u64, Arc<FieldData>>>> = OnceLock::new();
    let map = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(f) = map.read().unwrap().get(&n) {
        return f.clone();
    }
    let f = Arc::new(FieldData::build(n));
    map.write().unwrap().entry(n).or_insert(f).clone()
}

/// Euler's totient of the field order, i.e. the degree [Q(ζ_n):Q].
pub fn field_degree(n: u64) -> usize {
    field(n).phi
}

/// Residues `k` modulo `n` coprime to `n`, in increasing order (`[0]` for n = 1).
pub fn galois_units(n: u64) -> Vec<u64> {
    field(n).units.clone()
}

/// Element of Q(ζ_n) in the power basis.
#[derive(Clone, Debug)]
pub struct Cyclotomic {
    order: u64,
    coeffs: Vec<BigRational>,
}

impl Cyclotomic {
    pub fn from_rational(q: BigRational) -> Self {
        Cyclotomic {
            order: 1,
            coeffs: vec![q],
        }
    }

    pub fn from_int(v: i64) -> Self {
        Cyclotomic::from_rational(BigRational::from_integer(v.into()))
    }

    /// The generator ζ_n.
    pub fn zeta(n: u64) -> Self {
        Cyclotomic::zeta_pow(n, 1)
    }

    /// ζ_n^j for any integer `j`.
    pub fn zeta_pow(n: u64, j: i64) -> Self {
        assert!(n >= 1, "cyclotomic order must be positive");
        let m = j.rem_euclid(n as i64) as usize;
        let f = field(n);
        Cyclotomic {
            order: n,
            coeffs: f.reduce[m].iter().map(|c| BigRational::from_integer(c.clone())).collect(),
        }
    }

    /// Build `Σ c_j ζ_n^{e_j}` from arbitrary exponents.
    pub fn from_terms(n: u64, terms: impl IntoIterator<Item = (i64, BigRational)>) -> Self {
        let f = field(n);
        let mut coeffs = vec![BigRational::zero(); f.phi];
        for (e, c) in terms {
            if c.is_zero() {
                continue;
            }
            let m = e.rem_euclid(n as i64) as usize;
            for (i, r) in f.reduce[m].iter().enumerate() {
                if !r.is_zero() {
                    coeffs[i] += &c * BigRational::from_integer(r.clone());
                }
            }
        }
        Cyclotomic { order: n, coeffs }
    }

    /// Power-basis coefficients; the length is φ(order).
    pub fn from_coeffs(n: u64, coeffs: Vec<BigRational>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("cyclotomic order must be positive".into()));
        }
        let phi = field_degree(n);
        if coeffs.len() > phi {
            // accept longer vectors as polynomials in ζ
            return Ok(Cyclotomic::from_terms(
                n,
                coeffs.into_iter().enumerate().map(|(j, c)| (j as i64, c)),
            ));
        }
        let mut coeffs = coeffs;
        coeffs.resize(phi, BigRational::zero());
        Ok(Cyclotomic { order: n, coeffs })
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_rational(&self) -> bool {
        self.coeffs.iter().skip(1).all(|c| c.is_zero())
    }

    pub fn to_rational(&self) -> Option<BigRational> {
        if self.is_rational() {
            Some(self.coeffs[0].clone())
        } else {
            None
        }
    }

    pub fn is_zero_elem(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Same number viewed in Q(ζ_m); `m` must be a multiple of the order.
    pub fn promote(&self, m: u64) -> Cyclotomic {
        if m == self.order {
            return self.clone();
        }
        assert!(m % self.order == 0, "order {} does not divide {}", self.order, m);
        if self.is_rational() {
            let mut coeffs = vec![BigRational::zero(); field_degree(m)];
            coeffs[0] = self.coeffs[0].clone();
            return Cyclotomic { order: m, coeffs };
        }
        let step = (m / self.order) as i64;
        Cyclotomic::from_terms(
            m,
            self.coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(j, c)| (j as i64 * step, c.clone())),
        )
    }

    fn common(&self, other: &Cyclotomic) -> (u64, Cyclotomic, Cyclotomic) {
        let m = primes::lcm(self.order, other.order);
        (m, self.promote(m), other.promote(m))
    }

    fn zip_with(&self, other: &Cyclotomic, f: impl Fn(&BigRational, &BigRational) -> BigRational) -> Cyclotomic {
        if self.order == other.order {
            return Cyclotomic {
                order: self.order,
                coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| f(a, b)).collect(),
            };
        }
        let (m, a, b) = self.common(other);
        Cyclotomic {
            order: m,
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| f(x, y)).collect(),
        }
    }

    pub fn add_ref(&self, other: &Cyclotomic) -> Cyclotomic {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub_ref(&self, other: &Cyclotomic) -> Cyclotomic {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, q: &BigRational) -> Cyclotomic {
        Cyclotomic {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * q).collect(),
        }
    }

    pub fn mul_ref(&self, other: &Cyclotomic) -> Cyclotomic {
        if let Some(q) = other.to_rational() {
            return self.scale(&q);
        }
        if let Some(q) = self.to_rational() {
            return other.scale(&q);
        }
        let (m, a, b) = if self.order == other.order {
            (self.order, self.clone(), other.clone())
        } else {
            self.common(other)
        };
        let f = field(m);
        let mut conv = vec![BigRational::zero(); m as usize];
        for (i, x) in a.coeffs.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.coeffs.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                conv[(i + j) % m as usize] += x * y;
            }
        }
        let mut coeffs = vec![BigRational::zero(); f.phi];
        for (e, c) in conv.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if e < f.phi {
                coeffs[e] += c;
                continue;
            }
            for (i, r) in f.reduce[e].iter().enumerate() {
                if !r.is_zero() {
                    coeffs[i] += c * BigRational::from_integer(r.clone());
                }
            }
        }
        Cyclotomic { order: m, coeffs }
    }

    pub fn pow(&self, mut e: u32) -> Cyclotomic {
        let mut base = self.clone();
        let mut acc = Cyclotomic::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_ref(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_ref(&base);
            }
        }
        acc
    }

    fn as_qpoly(&self) -> QPoly {
        let mut p = self.coeffs.clone();
        upoly::trim(&mut p);
        p
    }

    pub fn inv(&self) -> Result<Cyclotomic> {
        if self.is_zero_elem() {
            return Err(Error::DivisionByZero);
        }
        if let Some(q) = self.to_rational() {
            return Ok(Cyclotomic::from_rational(q.recip()));
        }
        let f = field(self.order);
        let (g, s, _) = upoly::ext_gcd(&self.as_qpoly(), &f.poly_q());
        debug_assert_eq!(upoly::degree(&g), Some(0));
        let g0 = g[0].clone();
        let coeffs = s.iter().map(|c| c / &g0).collect();
        Cyclotomic::from_coeffs(self.order, coeffs)
    }

    pub fn div_ref(&self, other: &Cyclotomic) -> Result<Cyclotomic> {
        Ok(self.mul_ref(&other.inv()?))
    }

    /// Image under ζ ↦ ζ^k.
    pub fn conjugate(&self, k: u64) -> Result<Cyclotomic> {
        let n = self.order;
        if n == 1 {
            return Ok(self.clone());
        }
        let k = k % n;
        if primes::gcd(k, n) != 1 {
            return Err(Error::NotCoprime { k, n });
        }
        if self.is_rational() {
            return Ok(self.clone());
        }
        Ok(Cyclotomic::from_terms(
            n,
            self.coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(j, c)| ((j as u64 * k % n) as i64, c.clone())),
        ))
    }

    /// Enclosure of the image under ζ ↦ exp(2πik/n).
    pub fn embed(&self, k: u64, prec: u32) -> Result<ComplexBall> {
        let n = self.order;
        if n > 1 && primes::gcd(k % n, n) != 1 {
            return Err(Error::NotCoprime { k: k % n, n });
        }
        if let Some(q) = self.to_rational() {
            return Ok(ComplexBall::from_real(Ball::from_rational(&q, prec)));
        }
        let table = unit_root_table(n, prec);
        let mut acc = ComplexBall::zero(prec);
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let root = &table[(j as u64 * k % n) as usize];
            acc = acc.add(&root.scale(&Ball::from_rational(c, prec)));
        }
        Ok(acc)
    }

    /// Embedding of this element viewed inside Q(ζ_m), for the unit `k` mod `m`.
    pub fn embed_in(&self, m: u64, k: u64, prec: u32) -> Result<ComplexBall> {
        if m % self.order != 0 {
            return Err(Error::InvalidInput(format!(
                "element of order {} does not lie in the field of order {}",
                self.order, m
            )));
        }
        self.embed(k % self.order.max(1), prec)
    }

    pub fn is_algebraic_integer(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_integer())
    }

    /// Least positive integer `t` with `t * self` integral.
    pub fn denominator(&self) -> BigInt {
        self.coeffs
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
    }

    /// Norm from Q(ζ_n) to Q where n is the element's order.
    pub fn field_norm(&self) -> BigRational {
        if let Some(q) = self.to_rational() {
            return num_traits::pow(q, field_degree(self.order));
        }
        let f = field(self.order);
        upoly::resultant(&f.poly_q(), &self.as_qpoly())
    }

    /// Norm from Q(ζ_m) to Q.
    pub fn field_norm_in(&self, m: u64) -> BigRational {
        self.promote(m).field_norm()
    }

    /// If the element is a root of unity, returns `(sign, j)` with value
    /// `sign * ζ_n^j` in its own field.
    pub fn root_of_unity_index(&self) -> Option<(i8, u64)> {
        if !self.is_algebraic_integer() {
            return None;
        }
        let f = field(self.order);
        for (j, r) in f.reduce.iter().enumerate() {
            let pos = r.iter().zip(&self.coeffs).all(|(a, b)| b.numer() == a && b.is_integer());
            if pos {
                return Some((1, j as u64));
            }
            let neg = r.iter().zip(&self.coeffs).all(|(a, b)| *b.numer() == -a && b.is_integer());
            if neg {
                return Some((-1, j as u64));
            }
        }
        None
    }

    pub fn is_root_of_unity(&self) -> bool {
        self.root_of_unity_index().is_some()
    }

    /// Multiplicative order if the element is a root of unity.
    pub fn root_of_unity_order(&self) -> Option<u64> {
        let (sign, j) = self.root_of_unity_index()?;
        let n = self.order;
        let base = n / primes::gcd(j, n);
        Some(if sign > 0 {
            base
        } else {
            // -ζ_n^j = ζ_{2n}^{2j+n}
            let m = 2 * n;
            let e = (2 * j + n) % m;
            m / primes::gcd(e, m)
        })
    }

    /// `(1/[K:Q]) Tr_{K/Q}(x)`, independent of the field used to represent x.
    pub fn normalized_trace(&self) -> BigRational {
        let f = field(self.order);
        self.coeffs
            .iter()
            .zip(&f.trace)
            .filter(|(c, _)| !c.is_zero())
            .fold(BigRational::zero(), |acc, (c, t)| acc + c * t)
    }

    pub fn max_abs_coeff(&self) -> BigRational {
        self.coeffs.iter().map(|c| c.abs()).max().unwrap_or_else(BigRational::zero)
    }

    /// Smallest order in which the element can be written, chosen among the
    /// divisors of the current order.
    pub fn minimal_order(&self) -> Cyclotomic {
        if self.is_rational() {
            return Cyclotomic::from_rational(self.coeffs[0].clone());
        }
        let n = self.order;
        for d in primes::divisors(n) {
            if d == n {
                break;
            }
            // an element lies in Q(ζ_d) iff it is fixed by every k ≡ 1 mod d
            let fixed = field(n)
                .units
                .iter()
                .filter(|&&k| k % d == 1 % d)
                .all(|&k| self.conjugate(k).map(|c| c.coeffs == self.coeffs).unwrap_or(false));
            if !fixed {
                continue;
            }
            // recover coordinates in Q(ζ_d): ζ_d = ζ_n^{n/d}; solve by trying
            // the power-basis image of each ζ_d^j
            if let Some(c) = self.express_in(d) {
                return c;
            }
        }
        self.clone()
    }

    fn express_in(&self, d: u64) -> Option<Cyclotomic> {
        let fd = field(d);
        let step = self.order / d;
        // columns: images of ζ_d^j in Q(ζ_n), j < φ(d)
        let cols: Vec<Cyclotomic> = (0..fd.phi as i64)
            .map(|j| Cyclotomic::zeta_pow(self.order, j * step as i64))
            .collect();
        let rows = self.coeffs.len();
        // solve Σ y_j col_j = self by elimination over Q
        let mut m: Vec<Vec<BigRational>> = (0..rows)
            .map(|r| {
                let mut row: Vec<BigRational> = cols.iter().map(|c| c.coeffs[r].clone()).collect();
                row.push(self.coeffs[r].clone());
                row
            })
            .collect();
        let ncols = fd.phi;
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..ncols {
            let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
                continue;
            };
            m.swap(r, p);
            let inv = m[r][c].recip();
            for x in m[r].iter_mut() {
                *x *= &inv;
            }
            for i in 0..rows {
                if i != r && !m[i][c].is_zero() {
                    let f = m[i][c].clone();
                    let pivot_row = m[r].clone();
                    for (x, y) in m[i].iter_mut().zip(pivot_row.iter()) {
                        *x -= &f * y;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        if m[r..].iter().any(|row| !row[ncols].is_zero()) {
            return None;
        }
        let mut y = vec![BigRational::zero(); ncols];
        for (i, &c) in pivots.iter().enumerate() {
            y[c] = m[i][ncols].clone();
        }
        Some(Cyclotomic { order: d, coeffs: y })
    }
}

impl PartialEq for Cyclotomic {
    fn eq(&self, other: &Self) -> bool {
        if self.order == other.order {
            return self.coeffs == other.coeffs;
        }
        let (_, a, b) = self.common(other);
        a.coeffs == b.coeffs
    }
}

impl Eq for Cyclotomic {}

impl Hash for Cyclotomic {
    fn hash<H: Hasher>(&self, state: &mut H) {
        // consistent with the order-independent equality above
        let t = self.normalized_trace();
        t.numer().hash(state);
        t.denom().hash(state);
    }
}

impl PartialOrd for Cyclotomic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cyclotomic {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.order == other.order {
            return self.coeffs.cmp(&other.coeffs);
        }
        let (_, a, b) = self.common(other);
        a.coeffs.cmp(&b.coeffs)
    }
}

impl Zero for Cyclotomic {
    fn zero() -> Self {
        Cyclotomic::from_int(0)
    }
    fn is_zero(&self) -> bool {
        self.is_zero_elem()
    }
}

impl One for Cyclotomic {
    fn one() -> Self {
        Cyclotomic::from_int(1)
    }
}

impl Add for Cyclotomic {
    type Output = Cyclotomic;
    fn add(self, rhs: Self) -> Cyclotomic {
        self.add_ref(&rhs)
    }
}

impl Sub for Cyclotomic {
    type Output = Cyclotomic;
    fn sub(self, rhs: Self) -> Cyclotomic {
        self.sub_ref(&rhs)
    }
}

impl Mul for Cyclotomic {
    type Output = Cyclotomic;
    fn mul(self, rhs: Self) -> Cyclotomic {
        self.mul_ref(&rhs)
    }
}

impl Div for Cyclotomic {
    type Output = Cyclotomic;
    /// Panics on division by zero; use [`Cyclotomic::div_ref`] for a `Result`.
    fn div(self, rhs: Self) -> Cyclotomic {
        self.div_ref(&rhs).expect("division by zero")
    }
}

impl Neg for Cyclotomic {
    type Output = Cyclotomic;
    fn neg(self) -> Cyclotomic {
        Cyclotomic {
            order: self.order,
            coeffs: self.coeffs.into_iter().map(|c| -c).collect(),
        }
    }
}

impl From<BigRational> for Cyclotomic {
    fn from(q: BigRational) -> Self {
        Cyclotomic::from_rational(q)
    }
}

impl From<i64> for Cyclotomic {
    fn from(v: i64) -> Self {
        Cyclotomic::from_int(v)
    }
}

pub(crate) fn fmt_rational_coeff(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("({}/{})", q.numer(), q.denom())
    }
}

impl fmt::Display for Cyclotomic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(q) = self.to_rational() {
            return if q.is_integer() {
                write!(f, "{}", q.numer())
            } else {
                write!(f, "{}/{}", q.numer(), q.denom())
            };
        }
        let mut first = true;
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let a = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            let sym = match j {
                0 => String::new(),
                1 => format!("z{}", self.order),
                _ => format!("z{}^{}", self.order, j),
            };
            if j == 0 {
                write!(f, "{}", fmt_rational_coeff(&a))?;
            } else if a.is_one() {
                write!(f, "{}", sym)?;
            } else {
                write!(f, "{}*{}", fmt_rational_coeff(&a), sym)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn phi_polynomials() {
        let p = |n| cyclotomic_polynomial(n).iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        assert_eq!(p(1), "-1,1");
        assert_eq!(p(4), "1,0,1");
        assert_eq!(p(6), "1,-1,1");
        assert_eq!(p(12), "1,0,-1,0,1");
        assert_eq!(cyclotomic_polynomial(105).len() - 1, 48);
    }

    #[test]
    fn basic_identities() {
        let i = Cyclotomic::zeta(4);
        assert_eq!(i.mul_ref(&i), Cyclotomic::from_int(-1));
        let w = Cyclotomic::zeta(3);
        assert_eq!(w.add_ref(&w.pow(2)), Cyclotomic::from_int(-1));
        let half = Cyclotomic::from_int(1).div_ref(&Cyclotomic::from_int(2)).unwrap();
        assert_eq!(half, Cyclotomic::from_rational(q(1, 2)));
        assert!(Cyclotomic::zero().inv().is_err());
    }

    #[test]
    fn mixed_orders_meet_in_compositum() {
        let a = Cyclotomic::zeta(3).add_ref(&Cyclotomic::zeta(4));
        assert_eq!(a.order(), 12);
        // ζ_12^4 = ζ_3
        assert_eq!(Cyclotomic::zeta_pow(12, 4), Cyclotomic::zeta(3));
        assert_eq!(Cyclotomic::zeta(6).pow(2), Cyclotomic::zeta(3));
    }

    #[test]
    fn conjugation() {
        let z5 = Cyclotomic::zeta(5);
        assert_eq!(z5.conjugate(2).unwrap(), z5.pow(2));
        let r = Cyclotomic::from_rational(q(3, 2));
        assert_eq!(r.conjugate(3).unwrap(), r);
        let x = z5.add_ref(&z5.pow(4));
        assert_eq!(x.conjugate(2).unwrap(), z5.pow(2).add_ref(&z5.pow(3)));
        assert!(z5.add_ref(&Cyclotomic::zeta(10)).conjugate(5).is_err());
    }

    #[test]
    fn embeddings() {
        let z = Cyclotomic::zeta(8).embed(1, 128).unwrap();
        assert!((z.re.to_f64() - 0.70710678118654752).abs() < 1e-15);
        assert!((z.im.to_f64() - 0.70710678118654752).abs() < 1e-15);
        let one = Cyclotomic::one().embed(0, 64).unwrap();
        assert!(one.re.is_exact() && one.im.is_exact());
        let z5 = Cyclotomic::zeta(5);
        let g = z5.add_ref(&z5.pow(4)).embed(1, 128).unwrap();
        let oracle = 2.0 * (2.0 * std::f64::consts::PI / 5.0).cos();
        assert!((g.re.to_f64() - oracle).abs() < 1e-15);
        assert!(g.im.contains_rational(&q(0, 1)));
    }

    #[test]
    fn norms_and_integrality() {
        assert_eq!(Cyclotomic::from_int(2).field_norm_in(4), q(4, 1));
        let one_plus_i = Cyclotomic::one().add_ref(&Cyclotomic::zeta(4));
        assert_eq!(one_plus_i.field_norm(), q(2, 1));
        assert_eq!(Cyclotomic::one().field_norm(), q(1, 1));
        assert!(Cyclotomic::zeta(12).is_algebraic_integer());
        assert!(!Cyclotomic::from_rational(q(1, 2)).is_algebraic_integer());
        let c = Cyclotomic::zeta(4).scale(&q(1, 3)).add_ref(&Cyclotomic::from_rational(q(1, 6)));
        assert_eq!(c.denominator(), BigInt::from(6));
    }

    #[test]
    fn roots_of_unity() {
        assert_eq!(Cyclotomic::zeta(12).pow(5).root_of_unity_order(), Some(12));
        assert_eq!((-Cyclotomic::zeta(3)).root_of_unity_order(), Some(6));
        assert_eq!(Cyclotomic::from_int(-1).root_of_unity_order(), Some(2));
        assert!(!Cyclotomic::from_int(2).is_root_of_unity());
        let z5 = Cyclotomic::zeta(5);
        assert!(!z5.add_ref(&z5.pow(4)).is_root_of_unity());
    }

    #[test]
    fn display_format() {
        let x = Cyclotomic::from_terms(5, vec![(0, q(-1, 1)), (1, q(2, 1)), (3, q(1, 2))]);
        assert_eq!(x.to_string(), "-1 + 2*z5 + (1/2)*z5^3");
        assert_eq!(Cyclotomic::from_rational(q(-3, 4)).to_string(), "-3/4");
    }

    #[test]
    fn minimal_order_recovers_subfield() {
        let x = Cyclotomic::zeta(3).promote(12);
        let m = x.minimal_order();
        assert_eq!(m.order(), 3);
        assert_eq!(m, x);
        assert_eq!(Cyclotomic::zeta(4).pow(2).minimal_order().order(), 1);
    }

    #[test]
    fn hash_agrees_with_equality() {
        use std::collections::HashSet;
        let mut s = HashSet::new();
        s.insert(Cyclotomic::zeta(3));
        assert!(s.contains(&Cyclotomic::zeta_pow(12, 4)));
        assert!(s.contains(&Cyclotomic::zeta(6).pow(2)));
    }
}
