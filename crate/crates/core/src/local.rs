//! Arithmetic at a single place of a number field: real balls, complex balls
//! under one embedding, and p-adic numbers of bounded relative precision.
//! Used to compute local contributions to canonical heights.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::ball::{Ball, ComplexBall, Dyadic, Mag};
use crate::error::{Error, Result};
use crate::heights::log_rational;
use crate::morphism::AffineMorphism;
use crate::poly::MultiPoly;
use crate::primes;
use crate::scalar::Scalar;

/// Data for the escape rule of one-variable systems: for `|y|_v >= R`
/// every generator satisfies `log|g_j(y)| - d_j log|y| = log|a_j| + ε`
/// with `|ε| <= K_j / |y|`.
#[derive(Clone, Debug)]
pub(crate) struct EscapeData {
    pub ln_lead: Vec<Ball>,
    pub k: Vec<Ball>,
    pub radius: Radius,
}

#[derive(Clone, Debug)]
pub(crate) enum Radius {
    /// `|y| >= R` with `R` given as an upper bound.
    Arch(Dyadic),
    /// `|y|_p > p^r`.
    PAdic(i64),
}

pub(crate) trait Arith: Send + Sync {
    type E: Clone + Send + Sync;

    fn zero(&self) -> Self::E;
    fn one(&self) -> Self::E;
    fn add(&self, a: &Self::E, b: &Self::E) -> Self::E;
    fn mul(&self, a: &Self::E, b: &Self::E) -> Self::E;
    fn coeff<C: Scalar>(&self, c: &C) -> Result<Self::E>;
    /// `ln max(1, max_i |y_i|_v)`.
    fn log_size(&self, y: &[Self::E]) -> Result<Ball>;
    /// Certified `max_i |y_i|_v <= 1`.
    fn in_unit_box(&self, y: &[Self::E]) -> bool;
    /// Whether every generator maps the unit box into itself.
    fn unit_box_invariant<C: Scalar>(&self, maps: &[AffineMorphism<C>]) -> Result<bool>;
    fn escape_data<C: Scalar>(&self, maps: &[AffineMorphism<C>]) -> Result<Option<EscapeData>>;
    /// Upper bound for `1/|y|` when `y` lies in the escape region.
    fn escape_inverse(&self, r: &Radius, y: &[Self::E]) -> Option<Mag>;
}

/// A polynomial map with coefficients moved to one place.
#[derive(Clone, Debug)]
pub(crate) struct LocalMap<E> {
    comps: Vec<Vec<(Vec<u32>, E)>>,
    max_exp: Vec<u32>,
}

impl<E: Clone> LocalMap<E> {
    pub fn new<A: Arith<E = E>, C: Scalar>(a: &A, f: &AffineMorphism<C>) -> Result<Self> {
        let n = f.dim();
        let mut max_exp = vec![0u32; n];
        let mut comps = Vec::with_capacity(n);
        for p in f.components() {
            let mut terms = Vec::new();
            for (m, c) in p.terms() {
                for (i, &e) in m.iter().enumerate() {
                    max_exp[i] = max_exp[i].max(e);
                }
                terms.push((m.clone(), a.coeff(c)?));
            }
            comps.push(terms);
        }
        Ok(LocalMap { comps, max_exp })
    }

    pub fn apply<A: Arith<E = E>>(&self, a: &A, y: &[E]) -> Vec<E> {
        let powers: Vec<Vec<E>> = y
            .iter()
            .zip(&self.max_exp)
            .map(|(v, &m)| {
                let mut p = vec![a.one()];
                for i in 0..m as usize {
                    let next = a.mul(&p[i], v);
                    p.push(next);
                }
                p
            })
            .collect();
        self.comps
            .iter()
            .map(|terms| {
                let mut acc = a.zero();
                for (m, c) in terms {
                    let mut t = c.clone();
                    for (i, &e) in m.iter().enumerate() {
                        if e > 0 {
                            t = a.mul(&t, &powers[i][e as usize]);
                        }
                    }
                    acc = a.add(&acc, &t);
                }
                acc
            })
            .collect()
    }
}

fn one_var_parts<C: Scalar>(f: &AffineMorphism<C>) -> Option<(C, Vec<C>)> {
    if f.dim() != 1 {
        return None;
    }
    let p = &f.components()[0];
    let d = p.total_degree()?;
    let mut lead = None;
    let mut rest = Vec::new();
    for (m, c) in p.terms() {
        if m[0] == d {
            lead = Some(c.clone());
        } else {
            rest.push(c.clone());
        }
    }
    Some((lead?, rest))
}

/// Archimedean escape data from coefficient magnitudes.
fn arch_escape(leads: Vec<Ball>, rests: Vec<Ball>, prec: u32) -> Result<Option<EscapeData>> {
    let one = Ball::one(prec);
    let mut r = one.clone();
    let mut ln_lead = Vec::new();
    let mut ks = Vec::new();
    for (a, b) in leads.iter().zip(&rests) {
        if !a.is_positive() {
            return Ok(None);
        }
        let r1 = one.add(b).div(a)?;
        let k = b.mul_int(2).div(a)?;
        r = r.max(&r1).max(&k);
        ln_lead.push(a.ln()?);
        ks.push(k);
    }
    Ok(Some(EscapeData {
        ln_lead,
        k: ks,
        radius: Radius::Arch(r.upper()),
    }))
}

/// Real place of Q.
#[derive(Clone, Debug)]
pub(crate) struct RealCtx {
    pub prec: u32,
}

impl RealCtx {
    fn rational<C: Scalar>(c: &C) -> Result<BigRational> {
        c.to_rational()
            .ok_or_else(|| Error::InvalidInput("the real place needs rational coefficients".into()))
    }
}

impl Arith for RealCtx {
    type E = Ball;

    fn zero(&self) -> Ball {
        Ball::zero(self.prec)
    }

    fn one(&self) -> Ball {
        Ball::one(self.prec)
    }

    fn add(&self, a: &Ball, b: &Ball) -> Ball {
        a.add(b)
    }

    fn mul(&self, a: &Ball, b: &Ball) -> Ball {
        a.mul(b)
    }

    fn coeff<C: Scalar>(&self, c: &C) -> Result<Ball> {
        Ok(Ball::from_rational(&Self::rational(c)?, self.prec))
    }

    fn log_size(&self, y: &[Ball]) -> Result<Ball> {
        let m = y.iter().fold(Ball::one(self.prec), |acc, v| acc.max(&v.abs()));
        if m.upper() <= Dyadic::from_int(1) {
            return Ok(Ball::zero(self.prec));
        }
        m.ln()
    }

    fn in_unit_box(&self, y: &[Ball]) -> bool {
        let one = Dyadic::from_int(1);
        y.iter().all(|v| v.upper() <= one && v.lower() >= one.neg())
    }

    fn unit_box_invariant<C: Scalar>(&self, maps: &[AffineMorphism<C>]) -> Result<bool> {
        for f in maps {
            let ok = if f.dim() == 1 {
                let p = f.components()[0].try_map_coeffs(|c| Self::rational(c))?;
                interval_maps_unit_into_unit(&p)
            } else {
                f.components().iter().all(|p| {
                    let s: Option<BigRational> = p.coefficients().map(|c| c.to_rational().map(|q| q.abs())).sum();
                    s.is_some_and(|s| s <= BigRational::one())
                })
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn escape_data<C: Scalar>(&self, maps: &[AffineMorphism<C>]) -> Result<Option<EscapeData>> {
        let mut leads = Vec::new();
        let mut rests = Vec::new();
        for f in maps {
            let Some((a, rest)) = one_var_parts(f) else {
                return Ok(None);
            };
            leads.push(Ball::from_rational(&Self::rational(&a)?.abs(), self.prec));
            let b: BigRational = rest
                .iter()
                .map(|c| Self::rational(c).map(|q| q.abs()))
                .sum::<Result<BigRational>>()?;
            rests.push(Ball::from_rational(&b, self.prec));
        }
        arch_escape(leads, rests, self.prec)
    }

    fn escape_inverse(&self, r: &Radius, y: &[Ball]) -> Option<Mag> {
        let Radius::Arch(r) = r else { return None };
        let a = y[0].abs();
        let lo = a.lower();
        if lo.is_zero() || lo.is_negative() || lo < *r {
            return None;
        }
        Some(Mag::from_dyadic_up(&Dyadic::from_int(1)).div(Mag::from_dyadic_down(&lo)))
    }
}

/// Exact rational interval image of `[-1, 1]` under a one-variable
/// polynomial, on a subdivision, tested for inclusion in `[-1, 1]`.
fn interval_maps_unit_into_unit(p: &MultiPoly<BigRational>) -> bool {
    const PIECES: i64 = 16;
    let one = BigRational::one();
    for i in 0..PIECES {
        let lo = BigRational::new((2 * i - PIECES).into(), PIECES.into());
        let hi = BigRational::new((2 * i + 2 - PIECES).into(), PIECES.into());
        let (mut a, mut b) = (BigRational::zero(), BigRational::zero());
        for (m, c) in p.terms() {
            let e = m[0] as usize;
            let (pl, ph) = (num_traits::pow(lo.clone(), e), num_traits::pow(hi.clone(), e));
            let (ml, mh) = if e % 2 == 0 && lo.is_negative() && hi.is_positive() {
                (BigRational::zero(), pl.max(ph))
            } else if pl <= ph {
                (pl, ph)
            } else {
                (ph, pl)
            };
            let (tl, th) = if c.is_negative() { (c * &mh, c * &ml) } else { (c * &ml, c * &mh) };
            a += tl;
            b += th;
        }
        if a < -one.clone() || b > one {
            return false;
        }
    }
    true
}

/// Complex place given by the embedding `ζ ↦ exp(2πik/n)`.
#[derive(Clone, Debug)]
pub(crate) struct ComplexCtx {
    pub k: u64,
    pub prec: u32,
}

impl ComplexCtx {
    fn abs(&self, c: &impl Scalar) -> Result<Ball> {
        Ok(self.coeff(c)?.norm_sqr().sqrt())
    }
}

impl Arith for ComplexCtx {
    type E = ComplexBall;

    fn zero(&self) -> ComplexBall {
        ComplexBall::zero(self.prec)
    }

    fn one(&self) -> ComplexBall {
        ComplexBall::one(self.prec)
    }

    fn add(&self, a: &ComplexBall, b: &ComplexBall) -> ComplexBall {
        a.add(b)
    }

    fn mul(&self, a: &ComplexBall, b: &ComplexBall) -> ComplexBall {
        a.mul(b)
    }

    fn coeff<C: Scalar>(&self, c: &C) -> Result<ComplexBall> {
        if let Some(q) = c.to_rational() {
            return Ok(ComplexBall::from_real(Ball::from_rational(&q, self.prec)));
        }
        let cy = c.to_cyclotomic();
        cy.embed(self.k % cy.order(), self.prec)
    }

    fn log_size(&self, y: &[ComplexBall]) -> Result<Ball> {
        let m = y.iter().fold(Ball::one(self.prec), |acc, v| acc.max(&v.norm_sqr()));
        if m.upper() <= Dyadic::from_int(1) {
            return Ok(Ball::zero(self.prec));
        }
        Ok(m.ln()?.mul_2exp(-1))
    }

    fn in_unit_box(&self, y: &[ComplexBall]) -> bool {
        let one = Dyadic::from_int(1);
        y.iter().all(|v| v.norm_sqr().upper() <= one)
    }

    fn unit_box_invariant<C: Scalar>(&self, maps: &[AffineMorphism<C>]) -> Result<bool> {
        let one = Dyadic::from_int(1);
        for f in maps {
            for p in f.components() {
                let mut s = Ball::zero(self.prec);
                for c in p.coefficients() {
                    s = s.add(&self.abs(c)?);
                }
                if s.upper() > one {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn escape_data<C: Scalar>(&self, maps: &[AffineMorphism<C>]) -> Result<Option<EscapeData>> {
        let mut leads = Vec::new();
        let mut rests = Vec::new();
        for f in maps {
            let Some((a, rest)) = one_var_parts(f) else {
                return Ok(None);
            };
            leads.push(self.abs(&a)?);
            let mut b = Ball::zero(self.prec);
            for c in &rest {
                b = b.add(&self.abs(c)?);
            }
            rests.push(b);
        }
        arch_escape(leads, rests, self.prec)
    }

    fn escape_inverse(&self, r: &Radius, y: &[ComplexBall]) -> Option<Mag> {
        let Radius::Arch(r) = r else { return None };
        let n2 = y[0].norm_sqr();
        let lo = n2.lower();
        if lo.is_zero() || lo.is_negative() || lo < r.mul(r) {
            return None;
        }
        // 1/|y| <= 1/sqrt(lo) <= 1/r' for the exact square root bound below
        let s = Ball::exact(lo, self.prec).sqrt().lower();
        if s.is_zero() || s.is_negative() {
            return None;
        }
        Some(Mag::from_dyadic_up(&Dyadic::from_int(1)).div(Mag::from_dyadic_down(&s)))
    }
}

/// Value known modulo a power of `p`.
#[derive(Clone, Debug)]
pub(crate) enum PAdic {
    /// Divisible by `p^abs` and otherwise unknown; `abs >= EXACT` means exactly zero.
    Zero { abs: i64 },
    /// `p^val · unit + O(p^(val + prec))` with `p ∤ unit`, `0 < unit < p^prec`.
    Unit { val: i64, unit: BigInt, prec: u32 },
}

const EXACT: i64 = i64::MAX / 4;

fn sat(a: i64, b: i64) -> i64 {
    if a >= EXACT || b >= EXACT {
        EXACT
    } else {
        a.saturating_add(b).min(EXACT)
    }
}

/// Place of Q over the prime `p`, with `k` digits of relative precision.
#[derive(Clone, Debug)]
pub(crate) struct PadicCtx {
    pub p: u64,
    pub prec: u32,
    k: u32,
    pb: BigInt,
    pows: Vec<BigInt>,
}

impl PadicCtx {
    /// Enough digits for `bits` bits of relative precision.
    pub fn new(p: u64, bits: u32) -> Self {
        let lg = (p as f64).log2();
        let k = ((bits as f64 + 64.0) / lg).ceil() as u32;
        let pb = BigInt::from(p);
        let mut pows = vec![BigInt::one()];
        for i in 0..k as usize {
            let next = &pows[i] * &pb;
            pows.push(next);
        }
        PadicCtx {
            p,
            prec: bits,
            k,
            pb,
            pows,
        }
    }

    pub fn from_rational(&self, q: &BigRational) -> PAdic {
        if q.is_zero() {
            return PAdic::Zero { abs: EXACT };
        }
        let a = primes::valuation(q.numer(), &self.pb);
        let b = primes::valuation(q.denom(), &self.pb);
        let num = q.numer() / num_traits::pow(self.pb.clone(), a as usize);
        let den = q.denom() / num_traits::pow(self.pb.clone(), b as usize);
        let m = &self.pows[self.k as usize];
        let inv = den.extended_gcd(m).x;
        let unit = (num * inv).mod_floor(m);
        PAdic::Unit {
            val: a as i64 - b as i64,
            unit,
            prec: self.k,
        }
    }

    /// Size exponent `max(0, -min_i v(y_i))`, i.e. `log_p max(1, |y|_p)`.
    pub fn size_exponent(&self, y: &[PAdic]) -> Result<i64> {
        let mut e = 0i64;
        for v in y {
            match v {
                PAdic::Unit { val, .. } => e = e.max(-val),
                PAdic::Zero { abs } => {
                    if *abs < 0 {
                        return Err(Error::Precision(format!(
                            "{}-adic cancellation left the size of an orbit point undetermined",
                            self.p
                        )));
                    }
                }
            }
        }
        Ok(e)
    }

    fn truncate(&self, val: i64, s: BigInt, r: i64) -> PAdic {
        // s is taken mod p^r, relative to p^val
        if r <= 0 {
            return PAdic::Zero { abs: val + r.max(0) };
        }
        let m = &self.pows[r as usize];
        let s = s.mod_floor(m);
        if s.is_zero() {
            return PAdic::Zero { abs: val + r };
        }
        let w = primes::valuation(&s, &self.pb) as i64;
        PAdic::Unit {
            val: val + w,
            unit: s / &self.pows[w as usize],
            prec: (r - w) as u32,
        }
    }
}

impl Arith for PadicCtx {
    type E = PAdic;

    fn zero(&self) -> PAdic {
        PAdic::Zero { abs: EXACT }
    }

    fn one(&self) -> PAdic {
        PAdic::Unit {
            val: 0,
            unit: BigInt::one(),
            prec: self.k,
        }
    }

    fn add(&self, a: &PAdic, b: &PAdic) -> PAdic {
        match (a, b) {
            (PAdic::Zero { abs: x }, PAdic::Zero { abs: y }) => PAdic::Zero { abs: (*x).min(*y) },
            (PAdic::Zero { abs: z }, PAdic::Unit { val, unit, prec })
            | (PAdic::Unit { val, unit, prec }, PAdic::Zero { abs: z }) => {
                let top = (*z).min(val + *prec as i64);
                self.truncate(*val, unit.clone(), top - val)
            }
            (
                PAdic::Unit {
                    val: v1,
                    unit: u1,
                    prec: k1,
                },
                PAdic::Unit {
                    val: v2,
                    unit: u2,
                    prec: k2,
                },
            ) => {
                let v = (*v1).min(*v2);
                let top = (v1 + *k1 as i64).min(v2 + *k2 as i64);
                let r = top - v;
                if r <= 0 {
                    return PAdic::Zero { abs: top };
                }
                let mut s = BigInt::zero();
                for (vi, ui) in [(v1, u1), (v2, u2)] {
                    let shift = vi - v;
                    if shift < r {
                        s += ui * &self.pows[shift as usize];
                    }
                }
                self.truncate(v, s, r)
            }
        }
    }

    fn mul(&self, a: &PAdic, b: &PAdic) -> PAdic {
        match (a, b) {
            (PAdic::Zero { abs: x }, PAdic::Zero { abs: y }) => PAdic::Zero { abs: sat(*x, *y) },
            (PAdic::Zero { abs: z }, PAdic::Unit { val, .. }) | (PAdic::Unit { val, .. }, PAdic::Zero { abs: z }) => {
                PAdic::Zero { abs: sat(*z, *val) }
            }
            (
                PAdic::Unit {
                    val: v1,
                    unit: u1,
                    prec: k1,
                },
                PAdic::Unit {
                    val: v2,
                    unit: u2,
                    prec: k2,
                },
            ) => {
                let k = (*k1).min(*k2);
                PAdic::Unit {
                    val: v1 + v2,
                    unit: (u1 * u2).mod_floor(&self.pows[k as usize]),
                    prec: k,
                }
            }
        }
    }

    fn coeff<C: Scalar>(&self, c: &C) -> Result<PAdic> {
        let q = c
            .to_rational()
            .ok_or_else(|| Error::InvalidInput("p-adic places need rational coefficients".into()))?;
        Ok(self.from_rational(&q))
    }

    fn log_size(&self, y: &[PAdic]) -> Result<Ball> {
        let e = self.size_exponent(y)?;
        if e == 0 {
            return Ok(Ball::zero(self.prec));
        }
        Ok(log_rational(&BigRational::from_integer(self.pb.clone()), self.prec).mul_int(e))
    }

    fn in_unit_box(&self, y: &[PAdic]) -> bool {
        matches!(self.size_exponent(y), Ok(0))
    }

    fn unit_box_invariant<C: Scalar>(&self, maps: &[AffineMorphism<C>]) -> Result<bool> {
        for f in maps {
            for c in f.coefficients() {
                let q = c.to_rational().ok_or_else(|| Error::InvalidInput("rational coefficients expected".into()))?;
                if primes::valuation(q.denom(), &self.pb) > 0 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn escape_data<C: Scalar>(&self, maps: &[AffineMorphism<C>]) -> Result<Option<EscapeData>> {
        // |y|_p > p^r with r >= 0, r >= -v(a_j), r >= v(a_j)... ensures exact leading behaviour
        let ln_p = log_rational(&BigRational::from_integer(self.pb.clone()), self.prec);
        let mut r = 0i64;
        let mut ln_lead = Vec::new();
        for f in maps {
            let Some((a, rest)) = one_var_parts(f) else {
                return Ok(None);
            };
            let a = a.to_rational().ok_or_else(|| Error::InvalidInput("rational coefficients expected".into()))?;
            let va = padic_val(&a, &self.pb);
            // |a|^{-1} <= p^r
            r = r.max(va);
            for c in rest {
                let c = c.to_rational().ok_or_else(|| Error::InvalidInput("rational coefficients expected".into()))?;
                if !c.is_zero() {
                    // |c / a|_p <= p^r
                    r = r.max(va - padic_val(&c, &self.pb));
                }
            }
            ln_lead.push(ln_p.mul_int(-va));
        }
        let n = ln_lead.len();
        Ok(Some(EscapeData {
            ln_lead,
            k: vec![Ball::zero(self.prec); n],
            radius: Radius::PAdic(r),
        }))
    }

    fn escape_inverse(&self, r: &Radius, y: &[PAdic]) -> Option<Mag> {
        let Radius::PAdic(r) = r else { return None };
        match self.size_exponent(y) {
            Ok(e) if e > *r => Some(Mag::zero()),
            _ => None,
        }
    }
}

pub(crate) fn padic_val(q: &BigRational, p: &BigInt) -> i64 {
    primes::valuation(q.numer(), p) as i64 - primes::valuation(q.denom(), p) as i64
}

/// Primes dividing some denominator.
pub(crate) fn denominator_primes<'a>(qs: impl Iterator<Item = &'a BigRational>) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for q in qs {
        if q.denom().is_one() {
            continue;
        }
        for (p, _) in primes::factor_bigint(q.denom())? {
            out.push(p.to_u64().ok_or_else(|| Error::overflow("prime factor size", u64::MAX))?);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}
