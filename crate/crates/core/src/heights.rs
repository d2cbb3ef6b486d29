//! Weil heights, houses, coefficient norms and rational place values.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};

use crate::ball::{Ball, Mag};
use crate::cyclotomic::{galois_units, Cyclotomic};
use crate::error::{Error, Result};
use crate::lattice::ideal_norm;
use crate::point::AffinePoint;
use crate::poly::MultiPoly;
use crate::primes;
use crate::scalar::Scalar;

/// A real number known to lie in `[value - error, value + error]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeightEstimate {
    ball: Ball,
}

impl HeightEstimate {
    pub fn from_ball(ball: Ball) -> Self {
        HeightEstimate { ball }
    }

    pub fn exact_zero(prec: u32) -> Self {
        HeightEstimate {
            ball: Ball::zero(prec),
        }
    }

    pub fn ball(&self) -> &Ball {
        &self.ball
    }

    pub fn into_ball(self) -> Ball {
        self.ball
    }

    pub fn value(&self) -> f64 {
        self.ball.to_f64()
    }

    /// Radius of the enclosure around the exact midpoint.
    pub fn error(&self) -> f64 {
        self.ball.rad().to_f64_up()
    }

    /// Rigorous bound on `|true value - self.value()|`, including the rounding
    /// of the midpoint to `f64`.
    pub fn f64_error(&self) -> f64 {
        self.ball.error_f64()
    }

    pub fn is_exact(&self) -> bool {
        self.ball.is_exact()
    }

    /// Midpoint rendered with `digits` significant decimal digits.
    pub fn value_string(&self, digits: usize) -> String {
        self.ball.mid().to_decimal(digits, false)
    }

    /// Radius rendered upward with three significant digits, or "exact".
    pub fn error_string(&self) -> String {
        if self.ball.is_exact() {
            "exact".into()
        } else {
            self.ball.rad().to_decimal_up(3)
        }
    }

    pub fn lower(&self) -> f64 {
        self.ball.lower_f64()
    }

    pub fn upper(&self) -> f64 {
        self.ball.upper_f64()
    }

    pub fn add_error(self, err: Mag) -> Self {
        HeightEstimate {
            ball: self.ball.add_error(err),
        }
    }
}

impl fmt::Display for HeightEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} +/- {}", self.value_string(20), self.error_string())
    }
}

impl Serialize for HeightEstimate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("HeightEstimate", 2)?;
        st.serialize_field("value", &self.value_string(40))?;
        st.serialize_field("error", &self.error_string())?;
        st.end()
    }
}

/// Height of the projective point with the given homogeneous coordinates.
pub fn projective_height<C: Scalar>(coords: &[C], prec: u32) -> Result<HeightEstimate> {
    if coords.iter().all(|c| c.is_zero()) {
        return Err(Error::InvalidInput("projective point with all coordinates zero".into()));
    }
    if let Some(qs) = coords.iter().map(|c| c.to_rational()).collect::<Option<Vec<_>>>() {
        return Ok(rational_projective_height(&qs, prec));
    }
    let cyc: Vec<Cyclotomic> = coords.iter().map(|c| c.to_cyclotomic()).collect();
    cyclotomic_projective_height(&cyc, prec)
}

fn rational_projective_height(qs: &[BigRational], prec: u32) -> HeightEstimate {
    let t = qs.iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
    let ints: Vec<BigInt> = qs.iter().map(|q| (q * BigRational::from_integer(t.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, a| acc.gcd(a));
    let m = ints.iter().map(|a| a.abs()).max().unwrap();
    let ratio = BigRational::new(m, g);
    HeightEstimate::from_ball(log_rational(&ratio, prec))
}

/// Logarithm of a positive rational; exact zero for 1.
pub fn log_rational(q: &BigRational, prec: u32) -> Ball {
    if q.is_one() {
        return Ball::zero(prec);
    }
    let num = Ball::from_bigint(q.numer(), prec).ln().expect("positive");
    if q.denom().is_one() {
        return num;
    }
    num.sub(&Ball::from_bigint(q.denom(), prec).ln().expect("positive"))
}

fn cyclotomic_projective_height(coords: &[Cyclotomic], prec: u32) -> Result<HeightEstimate> {
    let order = coords.iter().fold(1u64, |acc, c| primes::lcm(acc, c.order()));
    let wp = prec + 32;
    let t = coords.iter().fold(BigInt::one(), |acc, c| acc.lcm(&c.denominator()));
    let tq = BigRational::from_integer(t);
    let scaled: Vec<Cyclotomic> = coords.iter().map(|c| c.scale(&tq).promote(order)).collect();
    let units = galois_units(order);
    let phi = units.len() as i64;
    let mut sum = Ball::zero(wp);
    for &k in &units {
        // complex-conjugate embeddings have equal absolute values
        let partner = (order - k) % order;
        if order > 2 && partner < k {
            continue;
        }
        let weight = if order > 2 { 2 } else { 1 };
        let mut best: Option<Ball> = None;
        for x in &scaled {
            if x.is_zero_elem() {
                continue;
            }
            let v = x.embed(k, wp)?.norm_sqr();
            best = Some(match best {
                None => v,
                Some(b) => b.max(&v),
            });
        }
        let best = best.expect("nonzero coordinate");
        // 1/2 log |.|^2, doubled for a conjugate pair
        let l = best.ln()?;
        sum = sum.add(&if weight == 2 { l } else { l.mul_2exp(-1) });
    }
    let norm = ideal_norm(&scaled, order)?;
    let sum = sum.sub(&Ball::from_bigint(&norm, wp).ln()?);
    Ok(HeightEstimate::from_ball(sum.div_int(phi).with_precision(prec)))
}

/// Weil height of the affine point, i.e. of `(1 : x_1 : … : x_N)`.
pub fn weil_height<C: Scalar>(p: &AffinePoint<C>, prec: u32) -> Result<HeightEstimate> {
    let mut coords = Vec::with_capacity(p.dim() + 1);
    coords.push(C::one());
    coords.extend(p.coords().iter().cloned());
    projective_height(&coords, prec)
}

/// Maximum over embeddings `σ` and coordinates of `|σ(x_i)|`.
pub fn house<C: Scalar>(p: &AffinePoint<C>, prec: u32) -> Result<HeightEstimate> {
    Ok(HeightEstimate::from_ball(max_abs_over_embeddings(p.coords(), prec)?))
}

/// `max_{σ, i} |σ(x_i)|` as a ball (zero for an empty or all-zero list).
pub fn max_abs_over_embeddings<C: Scalar>(xs: &[C], prec: u32) -> Result<Ball> {
    if let Some(qs) = xs.iter().map(|c| c.to_rational()).collect::<Option<Vec<_>>>() {
        let m = qs.iter().map(|q| q.abs()).max().unwrap_or_else(BigRational::zero);
        return Ok(Ball::from_rational(&m, prec));
    }
    let order = xs.iter().fold(1u64, |acc, c| primes::lcm(acc, c.order()));
    let cyc: Vec<Cyclotomic> = xs.iter().map(|c| c.to_cyclotomic().promote(order)).collect();
    let mut best = Ball::zero(prec + 16);
    for k in galois_units(order) {
        for x in &cyc {
            if x.is_zero_elem() {
                continue;
            }
            best = best.max(&x.embed(k, prec + 16)?.norm_sqr());
        }
    }
    Ok(best.sqrt().with_precision(prec))
}

/// Maximum modulus of `σ_k` applied to every coefficient of every polynomial.
pub fn poly_sup_norm<C: Scalar>(polys: &[MultiPoly<C>], k: u64, prec: u32) -> Result<Ball> {
    let coeffs: Vec<C> = polys.iter().flat_map(|p| p.coefficients().cloned()).collect();
    sup_norm_of_coeffs(&coeffs, k, prec)
}

/// `max |σ_k(c)|` over the given coefficients.
pub fn sup_norm_of_coeffs<C: Scalar>(coeffs: &[C], k: u64, prec: u32) -> Result<Ball> {
    let mut best = Ball::zero(prec + 16);
    for c in coeffs {
        if let Some(q) = c.to_rational() {
            best = best.max(&Ball::from_rational(&q.abs(), prec + 16));
            continue;
        }
        let cy = c.to_cyclotomic();
        let v = cy.embed(k % cy.order(), prec + 16)?.norm_sqr().sqrt();
        best = best.max(&v);
    }
    Ok(best.with_precision(prec))
}

/// Least positive integer `D` such that `D * c` is integral for every coefficient.
pub fn integrality_scaler<C: Scalar>(polys: &[MultiPoly<C>]) -> BigInt {
    polys
        .iter()
        .flat_map(|p| p.coefficients())
        .fold(BigInt::one(), |acc, c| acc.lcm(&c.denominator()))
}

/// A place of Q.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RationalPlace {
    Finite(u64),
    Archimedean,
}

impl RationalPlace {
    pub fn finite(p: u64) -> Result<Self> {
        if !primes::is_prime_u64(p) {
            return Err(Error::InvalidInput(format!("{p} is not prime")));
        }
        Ok(RationalPlace::Finite(p))
    }

    /// Parse `inf`, `oo` or a prime.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        match t {
            "inf" | "oo" | "infinity" | "archimedean" => Ok(RationalPlace::Archimedean),
            _ => {
                let p: u64 = t
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("unknown place '{t}'")))?;
                RationalPlace::finite(p)
            }
        }
    }
}

impl fmt::Display for RationalPlace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RationalPlace::Finite(p) => write!(f, "{p}"),
            RationalPlace::Archimedean => write!(f, "inf"),
        }
    }
}

/// Exact value of `|x|_v`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AbsValue {
    Zero,
    /// `p^exp`.
    PAdic { p: u64, exp: i64 },
    Archimedean(BigRational),
}

impl AbsValue {
    /// The value as an exact rational.
    pub fn to_rational(&self) -> BigRational {
        match self {
            AbsValue::Zero => BigRational::zero(),
            AbsValue::PAdic { p, exp } => {
                let base = BigRational::from_integer(BigInt::from(*p));
                if *exp >= 0 {
                    num_traits::pow(base, *exp as usize)
                } else {
                    num_traits::pow(base.recip(), (-*exp) as usize)
                }
            }
            AbsValue::Archimedean(q) => q.clone(),
        }
    }

    /// Natural logarithm; `None` for zero.
    pub fn ln(&self, prec: u32) -> Option<Ball> {
        match self {
            AbsValue::Zero => None,
            AbsValue::PAdic { p, exp } => Some(
                Ball::from_int(*p as i64, prec)
                    .ln()
                    .expect("prime is positive")
                    .mul_int(*exp),
            ),
            AbsValue::Archimedean(q) => Some(log_rational(q, prec)),
        }
    }
}

pub fn rational_abs(x: &BigRational, v: RationalPlace) -> AbsValue {
    if x.is_zero() {
        return AbsValue::Zero;
    }
    match v {
        RationalPlace::Archimedean => AbsValue::Archimedean(x.abs()),
        RationalPlace::Finite(p) => {
            let pb = BigInt::from(p);
            let e = primes::valuation(x.numer(), &pb) as i64 - primes::valuation(x.denom(), &pb) as i64;
            AbsValue::PAdic { p, exp: -e }
        }
    }
}

/// `max_i |x_i|_v` for a rational point, or zero.
pub fn rational_point_abs(xs: &[BigRational], v: RationalPlace) -> AbsValue {
    xs.iter()
        .map(|x| rational_abs(x, v))
        .max_by(|a, b| a.to_rational().cmp(&b.to_rational()))
        .unwrap_or(AbsValue::Zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::MultiPoly;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn cpt(v: Vec<Cyclotomic>) -> AffinePoint<Cyclotomic> {
        AffinePoint::new(v).unwrap()
    }

    #[test]
    fn rational_heights() {
        let p = AffinePoint::new(vec![q(3, 2), q(5, 1)]).unwrap();
        let h = weil_height(&p, 128).unwrap();
        assert!((h.value() - 10f64.ln()).abs() < 1e-15);
        assert!(h.error() < 1e-30);
        let one = AffinePoint::<BigRational>::from_ints(&[1, 1]);
        assert!(weil_height(&one, 64).unwrap().is_exact());
    }

    #[test]
    fn roots_of_unity_have_height_zero() {
        let h = weil_height(&cpt(vec![Cyclotomic::zeta(5)]), 128).unwrap();
        assert!(h.ball().contains_rational(&q(0, 1)));
        assert!(h.error() < 1e-30);
    }

    #[test]
    fn cyclotomic_height_equals_rational_height() {
        // 3/2 written in Q(ζ_7) must have the same height as over Q
        let x = Cyclotomic::from_rational(q(3, 2)).promote(7);
        let h = weil_height(&cpt(vec![x]), 128).unwrap();
        assert!((h.value() - 3f64.ln()).abs() < 1e-15);
        // 1 + i has height (1/2) log 2
        let y = Cyclotomic::one().add_ref(&Cyclotomic::zeta(4));
        let h = weil_height(&cpt(vec![y]), 128).unwrap();
        assert!((h.value() - 0.5 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn houses() {
        let h = house(&cpt(vec![Cyclotomic::zeta(8)]), 128).unwrap();
        assert!(h.ball().contains_rational(&q(1, 1)));
        let h = house(&cpt(vec![Cyclotomic::zeta(3), Cyclotomic::from_int(2)]), 128).unwrap();
        assert!(h.ball().contains_rational(&q(2, 1)));
        let z5 = Cyclotomic::zeta(5);
        let h = house(&cpt(vec![z5.add_ref(&z5.pow(4))]), 128).unwrap();
        assert!((h.value() - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn sup_norms_and_scalers() {
        let x = MultiPoly::<Cyclotomic>::var(2, 0);
        let y = MultiPoly::<Cyclotomic>::var(2, 1);
        let f1 = x.pow(2).add(&y.scale(&Cyclotomic::from_int(3)));
        let f2 = y.pow(2);
        let n = poly_sup_norm(&[f1, f2.clone()], 1, 64).unwrap();
        assert!(n.contains_rational(&q(3, 1)));
        let g1 = x.pow(2).scale(&Cyclotomic::zeta(3).scale(&q(1, 2)));
        let n = poly_sup_norm(&[g1, f2], 1, 64).unwrap();
        assert!(n.contains_rational(&q(1, 1)));
        let c = MultiPoly::constant(1, Cyclotomic::zeta(4).scale(&q(1, 3)))
            .add(&MultiPoly::var(1, 0).scale(&Cyclotomic::from_rational(q(1, 6))));
        assert_eq!(integrality_scaler(&[c]), BigInt::from(6));
    }

    #[test]
    fn place_values() {
        let two = RationalPlace::finite(2).unwrap();
        assert_eq!(rational_abs(&q(3, 2), two).to_rational(), q(2, 1));
        assert_eq!(rational_abs(&q(5, 1), RationalPlace::Finite(5)).to_rational(), q(1, 5));
        assert_eq!(rational_abs(&q(-7, 4), RationalPlace::Archimedean).to_rational(), q(7, 4));
        assert_eq!(rational_abs(&q(0, 1), two), AbsValue::Zero);
        assert!(RationalPlace::finite(9).is_err());
    }
}
