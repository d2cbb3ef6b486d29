//! Sparse multivariate polynomials.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed};

use crate::cyclotomic::fmt_rational_coeff;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Exponent vector, one entry per variable.
pub type Monomial = Vec<u32>;

/// Polynomial as a map from exponent vectors to nonzero coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiPoly<C> {
    nvars: usize,
    terms: BTreeMap<Monomial, C>,
}

pub fn monomial_degree(m: &[u32]) -> u32 {
    m.iter().sum()
}

/// All exponent vectors in `nvars` variables of total degree exactly `d`, in
/// lexicographic order.
pub fn monomials_of_degree(nvars: usize, d: u32) -> Vec<Monomial> {
    fn rec(nvars: usize, d: u32, prefix: &mut Vec<u32>, out: &mut Vec<Monomial>) {
        if prefix.len() + 1 == nvars {
            prefix.push(d);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=d).rev() {
            prefix.push(e);
            rec(nvars, d - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if nvars == 0 {
        if d == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(nvars, d, &mut Vec::new(), &mut out);
    out
}

impl<C: Scalar> MultiPoly<C> {
    pub fn zero(nvars: usize) -> Self {
        MultiPoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: C) -> Self {
        MultiPoly::monomial(nvars, vec![0; nvars], c)
    }

    pub fn one(nvars: usize) -> Self {
        MultiPoly::constant(nvars, C::one())
    }

    /// The variable `X_{i+1}` (zero-based index `i`).
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        MultiPoly::monomial(nvars, e, C::one())
    }

    pub fn monomial(nvars: usize, exps: Monomial, c: C) -> Self {
        assert_eq!(exps.len(), nvars);
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(exps, c);
        }
        MultiPoly { nvars, terms }
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Monomial, C)>) -> Self {
        let mut p = MultiPoly::zero(nvars);
        for (m, c) in terms {
            assert_eq!(m.len(), nvars);
            p.add_term(m, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &[u32]) -> C {
        self.terms.get(m).cloned().unwrap_or_else(C::zero)
    }

    pub fn coefficients(&self) -> impl Iterator<Item = &C> {
        self.terms.values()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, m: Monomial, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().add_ref(&c);
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| monomial_degree(m)).max()
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut it = self.terms.keys().map(|m| monomial_degree(m));
        match it.next() {
            None => true,
            Some(d) => it.all(|e| e == d),
        }
    }

    pub fn constant_term(&self) -> C {
        self.coeff(&vec![0; self.nvars])
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        MultiPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn scale(&self, k: &C) -> Self {
        if k.is_zero() {
            return MultiPoly::zero(self.nvars);
        }
        MultiPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c.mul_ref(k))).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = MultiPoly::zero(self.nvars);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let m: Monomial = m1.iter().zip(m2).map(|(a, b)| a + b).collect();
                out.add_term(m, c1.mul_ref(c2));
            }
        }
        out
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = MultiPoly::one(self.nvars);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Multiply by a monomial.
    pub fn shift(&self, m: &[u32]) -> Self {
        MultiPoly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.iter().zip(m).map(|(a, b)| a + b).collect(), c.clone()))
                .collect(),
        }
    }

    pub fn eval(&self, x: &[C]) -> Result<C> {
        if x.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                found: x.len(),
            });
        }
        // cache powers per variable
        let maxdeg: Vec<u32> = (0..self.nvars)
            .map(|i| self.terms.keys().map(|m| m[i]).max().unwrap_or(0))
            .collect();
        let powers: Vec<Vec<C>> = x
            .iter()
            .zip(&maxdeg)
            .map(|(xi, &d)| {
                let mut v = Vec::with_capacity(d as usize + 1);
                v.push(C::one());
                for k in 1..=d as usize {
                    let next = v[k - 1].mul_ref(xi);
                    v.push(next);
                }
                v
            })
            .collect();
        let mut acc = C::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.iter().enumerate() {
                if e > 0 {
                    t = t.mul_ref(&powers[i][e as usize]);
                }
            }
            acc = acc.add_ref(&t);
        }
        Ok(acc)
    }

    /// Substitute polynomial `subs[i]` for variable `i`; all `subs` share a
    /// common variable count.
    pub fn compose(&self, subs: &[MultiPoly<C>]) -> Result<Self> {
        if subs.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                found: subs.len(),
            });
        }
        let nv = subs.first().map(|s| s.nvars).unwrap_or(0);
        let maxdeg: Vec<u32> = (0..self.nvars)
            .map(|i| self.terms.keys().map(|m| m[i]).max().unwrap_or(0))
            .collect();
        let powers: Vec<Vec<MultiPoly<C>>> = subs
            .iter()
            .zip(&maxdeg)
            .map(|(s, &d)| {
                let mut v = vec![MultiPoly::one(nv)];
                for k in 1..=d as usize {
                    let next = v[k - 1].mul(s);
                    v.push(next);
                }
                v
            })
            .collect();
        let mut acc = MultiPoly::zero(nv);
        for (m, c) in &self.terms {
            let mut t = MultiPoly::constant(nv, c.clone());
            for (i, &e) in m.iter().enumerate() {
                if e > 0 {
                    t = t.mul(&powers[i][e as usize]);
                }
            }
            acc = acc.add(&t);
        }
        Ok(acc)
    }

    /// Homogenize to degree `d` with a new last variable.
    pub fn homogenize(&self, d: u32) -> Self {
        MultiPoly {
            nvars: self.nvars + 1,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| {
                    let mut e = m.clone();
                    e.push(d - monomial_degree(m));
                    (e, c.clone())
                })
                .collect(),
        }
    }

    /// Set the last variable to 1.
    pub fn dehomogenize(&self) -> Self {
        let mut out = MultiPoly::zero(self.nvars - 1);
        for (m, c) in &self.terms {
            out.add_term(m[..self.nvars - 1].to_vec(), c.clone());
        }
        out
    }

    pub fn map_coeffs<D: Scalar>(&self, f: impl Fn(&C) -> D) -> MultiPoly<D> {
        let mut out = MultiPoly::zero(self.nvars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    pub fn try_map_coeffs<D: Scalar>(&self, f: impl Fn(&C) -> Result<D>) -> Result<MultiPoly<D>> {
        let mut out = MultiPoly::zero(self.nvars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c)?);
        }
        Ok(out)
    }

    pub fn conjugate(&self, k: u64) -> Result<Self> {
        self.try_map_coeffs(|c| c.conjugate(k))
    }

    pub fn convert<D: Scalar>(&self) -> Option<MultiPoly<D>> {
        let mut out = MultiPoly::zero(self.nvars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), D::from_cyclotomic(&c.to_cyclotomic())?);
        }
        Some(out)
    }
}

fn fmt_monomial(m: &[u32]) -> String {
    m.iter()
        .enumerate()
        .filter(|(_, &e)| e > 0)
        .map(|(i, &e)| {
            if e == 1 {
                format!("X{}", i + 1)
            } else {
                format!("X{}^{}", i + 1, e)
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

/// Render a coefficient for use inside a polynomial; returns the sign
/// separately when the coefficient is a negative rational.
fn fmt_coeff<C: Scalar>(c: &C) -> (bool, String, bool) {
    if let Some(q) = c.to_rational() {
        let neg = q.is_negative();
        let a = q.abs();
        return (neg, fmt_rational_coeff(&a), a.is_one());
    }
    let s = c.to_string();
    let single = !s.contains(" + ") && !s.contains(" - ");
    if single {
        if let Some(rest) = s.strip_prefix('-') {
            return (true, rest.to_string(), false);
        }
        return (false, s, false);
    }
    (false, format!("({})", s), false)
}

impl<C: Scalar> fmt::Display for MultiPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // highest degree first reads naturally
        let mut terms: Vec<(&Monomial, &C)> = self.terms.iter().collect();
        terms.sort_by(|a, b| monomial_degree(b.0).cmp(&monomial_degree(a.0)).then(b.0.cmp(a.0)));
        for (i, (m, c)) in terms.into_iter().enumerate() {
            let (neg, body, unit) = fmt_coeff(c);
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            let mono = fmt_monomial(m);
            match (mono.is_empty(), unit) {
                (true, _) => write!(f, "{}", body)?,
                (false, true) => write!(f, "{}", mono)?,
                (false, false) => write!(f, "{}*{}", body, mono)?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclotomic::Cyclotomic;
    use num_rational::BigRational;

    type P = MultiPoly<BigRational>;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn monomial_enumeration() {
        let ms = monomials_of_degree(3, 2);
        assert_eq!(ms.len(), 6);
        assert_eq!(ms[0], vec![2, 0, 0]);
        assert_eq!(monomials_of_degree(1, 4), vec![vec![4]]);
    }

    #[test]
    fn evaluation() {
        let x = P::var(2, 0);
        let y = P::var(2, 1);
        let f = x.pow(2).add(&y.pow(2));
        assert_eq!(f.eval(&[q(1), q(2)]).unwrap(), q(5));
        assert!(f.eval(&[q(1)]).is_err());
    }

    #[test]
    fn composition_and_homogenization() {
        let x = P::var(1, 0);
        let f = x.pow(2).sub(&P::one(1));
        let ff = f.compose(&[f.clone()]).unwrap();
        assert_eq!(ff.to_string(), "X1^4 - 2*X1^2");
        let h = f.homogenize(2);
        assert_eq!(h.to_string(), "X1^2 - X2^2");
        assert_eq!(h.dehomogenize(), f);
    }

    #[test]
    fn display_with_cyclotomic_coefficients() {
        let x = MultiPoly::<Cyclotomic>::var(1, 0);
        let c = Cyclotomic::zeta(3).add_ref(&Cyclotomic::one());
        let f = x.pow(2).scale(&c).add(&MultiPoly::constant(1, -Cyclotomic::zeta(3)));
        assert_eq!(f.to_string(), "(1 + z3)*X1^2 - z3");
    }
}
