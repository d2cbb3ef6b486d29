//! Polynomial self-maps of affine space and their projective lifts.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::point::AffinePoint;
use crate::poly::{monomial_degree, MultiPoly};
use crate::scalar::Scalar;

/// Polynomial map `A^N -> A^N`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AffineMorphism<C> {
    comps: Vec<MultiPoly<C>>,
}

impl<C: Scalar> AffineMorphism<C> {
    pub fn new(comps: Vec<MultiPoly<C>>) -> Result<Self> {
        let n = comps.len();
        if n == 0 {
            return Err(Error::InvalidInput("a morphism needs at least one component".into()));
        }
        if let Some(bad) = comps.iter().find(|p| p.nvars() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.nvars(),
            });
        }
        Ok(AffineMorphism { comps })
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn components(&self) -> &[MultiPoly<C>] {
        &self.comps
    }

    /// Maximum total degree of the components (0 for the zero map).
    pub fn degree(&self) -> u32 {
        self.comps.iter().filter_map(|p| p.total_degree()).max().unwrap_or(0)
    }

    pub fn evaluate(&self, p: &AffinePoint<C>) -> Result<AffinePoint<C>> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.dim(),
            });
        }
        let coords = self
            .comps
            .iter()
            .map(|f| f.eval(p.coords()))
            .collect::<Result<Vec<C>>>()?;
        AffinePoint::new(coords)
    }

    /// `self ∘ g`.
    pub fn compose(&self, g: &AffineMorphism<C>) -> Result<AffineMorphism<C>> {
        if g.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: g.dim(),
            });
        }
        let comps = self
            .comps
            .iter()
            .map(|f| f.compose(&g.comps))
            .collect::<Result<Vec<_>>>()?;
        AffineMorphism::new(comps)
    }

    /// Homogenize each component to the map's degree and append `X_{N+1}^d`.
    pub fn lift(&self) -> ProjectiveLift<C> {
        let d = self.degree();
        let n = self.dim();
        let mut comps: Vec<MultiPoly<C>> = self.comps.iter().map(|f| f.homogenize(d)).collect();
        let mut last = vec![0; n + 1];
        last[n] = d;
        comps.push(MultiPoly::monomial(n + 1, last, C::one()));
        ProjectiveLift { comps, degree: d }
    }

    pub fn conjugate(&self, k: u64) -> Result<AffineMorphism<C>> {
        Ok(AffineMorphism {
            comps: self.comps.iter().map(|f| f.conjugate(k)).collect::<Result<_>>()?,
        })
    }

    pub fn coefficients(&self) -> impl Iterator<Item = &C> {
        self.comps.iter().flat_map(|p| p.coefficients())
    }

    /// Least common multiple of the coefficient orders.
    pub fn order(&self) -> u64 {
        self.coefficients().fold(1, |acc, c| crate::primes::lcm(acc, c.order()))
    }

    pub fn convert<D: Scalar>(&self) -> Option<AffineMorphism<D>> {
        Some(AffineMorphism {
            comps: self.comps.iter().map(|p| p.convert()).collect::<Option<_>>()?,
        })
    }

    /// Number of non-constant terms of each `f_i ∘ q`, maximized over `i`.
    pub fn nonconstant_term_count(&self, q: &LaurentTuple<C>) -> Result<usize> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: q.len(),
            });
        }
        let mut best = 0;
        for f in &self.comps {
            let mut acc = LaurentPoly::zero();
            for (m, c) in f.terms() {
                let mut t = LaurentPoly::constant(c.clone());
                for (i, &e) in m.iter().enumerate() {
                    if e > 0 {
                        t = t.mul(&q[i].pow(e));
                    }
                }
                acc = acc.add(&t);
            }
            best = best.max(acc.nonconstant_terms());
        }
        Ok(best)
    }

    /// Decompose as `D ∘ S ∘ (X ↦ X^d)` with `D` diagonal of roots of unity and
    /// `S` a coordinate permutation, when the map has that shape.
    pub fn unitary_monomial_form(&self) -> Option<UnitaryMonomialForm<C>> {
        let n = self.dim();
        let d = self.degree();
        let mut perm = Vec::with_capacity(n);
        let mut diag = Vec::with_capacity(n);
        for f in &self.comps {
            if f.num_terms() != 1 {
                return None;
            }
            let (m, c) = f.terms().next().unwrap();
            let nz: Vec<usize> = (0..n).filter(|&i| m[i] > 0).collect();
            if nz.len() != 1 || m[nz[0]] != d || monomial_degree(m) != d {
                return None;
            }
            if !c.to_cyclotomic().is_root_of_unity() {
                return None;
            }
            perm.push(nz[0]);
            diag.push(c.clone());
        }
        let mut seen = vec![false; n];
        for &p in &perm {
            if seen[p] {
                return None;
            }
            seen[p] = true;
        }
        let form = UnitaryMonomialForm {
            perm,
            diag,
            exponent: d,
        };
        // the decomposition must reproduce the map exactly
        if form.recompose().ok()? != *self {
            return None;
        }
        Some(form)
    }
}

impl<C: Scalar> fmt::Display for AffineMorphism<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.comps.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", p)?;
        }
        write!(f, ")")
    }
}

/// `x ↦ D · S(x)^d`: component `i` is `diag[i] * X_{perm[i]}^exponent`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitaryMonomialForm<C> {
    /// Zero-based source variable of each component.
    pub perm: Vec<usize>,
    pub diag: Vec<C>,
    pub exponent: u32,
}

impl<C: Scalar> UnitaryMonomialForm<C> {
    pub fn recompose(&self) -> Result<AffineMorphism<C>> {
        let n = self.perm.len();
        let comps = self
            .perm
            .iter()
            .zip(&self.diag)
            .map(|(&p, c)| {
                let mut m = vec![0; n];
                m[p] = self.exponent;
                MultiPoly::monomial(n, m, c.clone())
            })
            .collect();
        AffineMorphism::new(comps)
    }
}

/// Homogeneous lift `(f̃_1, …, f̃_N, X_{N+1}^d)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjectiveLift<C> {
    comps: Vec<MultiPoly<C>>,
    degree: u32,
}

impl<C: Scalar> ProjectiveLift<C> {
    /// Build from arbitrary homogeneous forms of a common degree.
    pub fn from_forms(comps: Vec<MultiPoly<C>>) -> Result<Self> {
        let n = comps.len();
        if n < 2 {
            return Err(Error::InvalidInput("a lift needs at least two forms".into()));
        }
        let mut degree = None;
        for p in &comps {
            if p.nvars() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: p.nvars(),
                });
            }
            if !p.is_homogeneous() {
                return Err(Error::InvalidInput(format!("form {p} is not homogeneous")));
            }
            if let Some(d) = p.total_degree() {
                if *degree.get_or_insert(d) != d {
                    return Err(Error::InvalidInput("forms have different degrees".into()));
                }
            }
        }
        let degree = degree.ok_or_else(|| Error::InvalidInput("all forms are zero".into()))?;
        Ok(ProjectiveLift { comps, degree })
    }

    pub fn components(&self) -> &[MultiPoly<C>] {
        &self.comps
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Number of homogeneous variables, `N + 1`.
    pub fn nvars(&self) -> usize {
        self.comps.len()
    }

    pub fn evaluate(&self, x: &[C]) -> Result<Vec<C>> {
        self.comps.iter().map(|f| f.eval(x)).collect()
    }

    pub fn max_terms(&self) -> usize {
        self.comps.iter().map(|p| p.num_terms()).max().unwrap_or(0)
    }

    pub fn coefficients(&self) -> impl Iterator<Item = &C> {
        self.comps.iter().flat_map(|p| p.coefficients())
    }
}

impl<C: Scalar> fmt::Display for ProjectiveLift<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.comps.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", p)?;
        }
        write!(f, ")")
    }
}

/// Univariate Laurent polynomial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaurentPoly<C> {
    terms: BTreeMap<i64, C>,
}

pub type LaurentTuple<C> = Vec<LaurentPoly<C>>;

impl<C: Scalar> LaurentPoly<C> {
    pub fn zero() -> Self {
        LaurentPoly {
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: C) -> Self {
        LaurentPoly::from_terms([(0, c)])
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (i64, C)>) -> Self {
        let mut p = LaurentPoly::zero();
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    fn add_term(&mut self, e: i64, c: C) {
        if c.is_zero() {
            return;
        }
        let s = match self.terms.get(&e) {
            Some(old) => old.add_ref(&c),
            None => c,
        };
        if s.is_zero() {
            self.terms.remove(&e);
        } else {
            self.terms.insert(e, s);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(*e, c.clone());
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = LaurentPoly::zero();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                out.add_term(e1 + e2, c1.mul_ref(c2));
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = LaurentPoly::constant(C::one());
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn terms(&self) -> impl Iterator<Item = (&i64, &C)> {
        self.terms.iter()
    }

    pub fn nonconstant_terms(&self) -> usize {
        self.terms.keys().filter(|&&e| e != 0).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;
    use crate::cyclotomic::Cyclotomic;
    use crate::parse::{parse_poly, Context};

    fn map(comps: &[&str], n: usize, order: u64) -> AffineMorphism<Cyclotomic> {
        let ctx = Context { nvars: n, order };
        AffineMorphism::new(comps.iter().map(|s| parse_poly(s, ctx).unwrap()).collect()).unwrap()
    }

    #[test]
    fn evaluation_and_composition() {
        let f = map(&["X1^2 - 1"], 1, 1);
        let p = AffinePoint::from_ints(&[0]);
        assert_eq!(f.evaluate(&p).unwrap(), AffinePoint::from_ints(&[-1]));
        let g = map(&["X1^2 + X2^2", "X2^2"], 2, 1);
        assert_eq!(g.evaluate(&AffinePoint::from_ints(&[1, 2])).unwrap(), AffinePoint::from_ints(&[5, 4]));
        let ff = f.compose(&f).unwrap();
        assert_eq!(ff, map(&["X1^4 - 2*X1^2"], 1, 1));
        let sq = map(&["X1^2"], 1, 1);
        let cu = map(&["X1^3"], 1, 1);
        assert_eq!(sq.compose(&cu).unwrap(), map(&["X1^6"], 1, 1));
        assert_eq!(sq.compose(&cu).unwrap().degree(), 6);
    }

    #[test]
    fn lifts() {
        let f = map(&["X1^2 - 1"], 1, 1);
        assert_eq!(f.lift().to_string(), "(X1^2 - X2^2, X2^2)");
        let g = map(&["X1^2", "X2^2"], 2, 1);
        assert_eq!(g.lift().to_string(), "(X1^2, X2^2, X3^2)");
        let h = map(&["X1^2 + 1/2"], 1, 1);
        assert_eq!(h.lift().to_string(), "(X1^2 + (1/2)*X2^2, X2^2)");
    }

    #[test]
    fn conjugate_maps() {
        let f = map(&["z3*X1^2"], 1, 3);
        assert_eq!(f.conjugate(2).unwrap(), map(&["z3^2*X1^2"], 1, 3));
        let r = map(&["X1^2 - 1"], 1, 3);
        assert_eq!(r.conjugate(2).unwrap(), r);
    }

    #[test]
    fn laurent_term_counts() {
        let t = LaurentPoly::<Cyclotomic>::from_terms([(1, Cyclotomic::one())]);
        let f = map(&["X1^3"], 1, 1);
        assert_eq!(f.nonconstant_term_count(&vec![t.clone()]).unwrap(), 1);
        let g = map(&["X1^2 - 1"], 1, 1);
        let q = LaurentPoly::from_terms([(1, Cyclotomic::one()), (-1, Cyclotomic::one())]);
        assert_eq!(g.nonconstant_term_count(&vec![q]).unwrap(), 2);
        let c = LaurentPoly::constant(Cyclotomic::from_int(5));
        assert_eq!(g.nonconstant_term_count(&vec![c]).unwrap(), 0);
    }

    #[test]
    fn monomial_forms() {
        let f = map(&["z3*X2^2", "X1^2"], 2, 3);
        let form = f.unitary_monomial_form().unwrap();
        assert_eq!(form.perm, vec![1, 0]);
        assert_eq!(form.diag, vec![Cyclotomic::zeta(3), Cyclotomic::one()]);
        assert_eq!(form.exponent, 2);
        assert_eq!(form.recompose().unwrap(), f);
        assert!(map(&["X1^2 - 1"], 1, 1).unitary_monomial_form().is_none());
        assert!(map(&["2*X2^2", "X1^2"], 2, 1).unitary_monomial_form().is_none());
        assert!(map(&["X1^2", "X1^2"], 2, 1).unitary_monomial_form().is_none());
    }
}
