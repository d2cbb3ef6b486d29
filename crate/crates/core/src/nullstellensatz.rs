//! Certificates `Σ_j g_ij f̃_j = X_i^e` for lifts without common zeros, and the
//! explicit constants of the two-sided size inequality they imply.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use serde::Serialize;
use serde_json::{json, Value};

use crate::ball::Ball;
use crate::cyclotomic::galois_units;
use crate::error::{Error, Result};
use crate::heights::{rational_abs, rational_point_abs, sup_norm_of_coeffs, AbsValue, HeightEstimate, RationalPlace};
use crate::linalg::solve_multi;
use crate::morphism::ProjectiveLift;
use crate::parse::parse_scalar;
use crate::poly::{monomials_of_degree, Monomial, MultiPoly};
use crate::primes;
use crate::scalar::Scalar;

/// `g[i][j]` with `Σ_j g[i][j] * f̃_j = X_i^e` for every `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate<C> {
    pub e: u32,
    pub g: Vec<Vec<MultiPoly<C>>>,
}

/// Default cap on the certificate degree, `2 d (N + 1)`.
pub fn default_e_max(degree: u32, nvars: usize) -> u32 {
    2 * degree * nvars as u32
}

/// Search `e = d, d+1, …, e_max` for a certificate. `Ok(None)` means no
/// certificate of degree at most `e_max` exists (for instance because the
/// forms have a common zero).
pub fn find_certificate<C: Scalar>(lift: &ProjectiveLift<C>, e_max: u32) -> Result<Option<Certificate<C>>> {
    let d = lift.degree();
    if e_max < d {
        return Err(Error::InvalidInput(format!(
            "certificate degree cap {e_max} is below the map degree {d}"
        )));
    }
    for e in d..=e_max {
        if let Some(c) = certificate_at_degree(lift, e) {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

fn certificate_at_degree<C: Scalar>(lift: &ProjectiveLift<C>, e: u32) -> Option<Certificate<C>> {
    let nv = lift.nvars();
    let d = lift.degree();
    let row_monos = monomials_of_degree(nv, e);
    let row_index: HashMap<&Monomial, usize> = row_monos.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let col_monos = monomials_of_degree(nv, e - d);
    let ncols = nv * col_monos.len();
    let mut a = vec![vec![C::zero(); ncols]; row_monos.len()];
    for (j, f) in lift.components().iter().enumerate() {
        for (k, mu) in col_monos.iter().enumerate() {
            let col = j * col_monos.len() + k;
            for (nu, c) in f.terms() {
                let m: Monomial = mu.iter().zip(nu).map(|(x, y)| x + y).collect();
                a[row_index[&m]][col] = c.clone();
            }
        }
    }
    let rhs: Vec<Vec<C>> = (0..nv)
        .map(|i| {
            let mut target = vec![0; nv];
            target[i] = e;
            let mut b = vec![C::zero(); row_monos.len()];
            b[row_index[&target]] = C::one();
            b
        })
        .collect();
    let sols = solve_multi(&a, &rhs);
    let mut g = Vec::with_capacity(nv);
    for sol in sols {
        let x = sol?;
        let row: Vec<MultiPoly<C>> = (0..nv)
            .map(|j| {
                MultiPoly::from_terms(
                    nv,
                    col_monos
                        .iter()
                        .enumerate()
                        .map(|(k, mu)| (mu.clone(), x[j * col_monos.len() + k].clone())),
                )
            })
            .collect();
        g.push(row);
    }
    Some(Certificate { e, g })
}

/// Symbolic check of every identity `Σ_j g_ij f̃_j = X_i^e`.
pub fn verify_certificate<C: Scalar>(lift: &ProjectiveLift<C>, cert: &Certificate<C>) -> bool {
    let nv = lift.nvars();
    if cert.g.len() != nv || cert.g.iter().any(|r| r.len() != nv) {
        return false;
    }
    if cert.g.iter().flatten().any(|p| p.nvars() != nv) {
        return false;
    }
    (0..nv).all(|i| residual(lift, cert, i).is_zero())
}

/// `Σ_j g_ij f̃_j - X_i^e`.
pub fn residual<C: Scalar>(lift: &ProjectiveLift<C>, cert: &Certificate<C>, i: usize) -> MultiPoly<C> {
    let nv = lift.nvars();
    let mut acc = MultiPoly::zero(nv);
    for (g, f) in cert.g[i].iter().zip(lift.components()) {
        acc = acc.add(&g.mul(f));
    }
    let mut target = vec![0; nv];
    target[i] = cert.e;
    acc.sub(&MultiPoly::monomial(nv, target, C::one()))
}

impl<C: Scalar> Certificate<C> {
    pub fn max_terms(&self) -> usize {
        self.g.iter().flatten().map(|p| p.num_terms()).max().unwrap_or(0)
    }

    pub fn coefficients(&self) -> impl Iterator<Item = &C> {
        self.g.iter().flatten().flat_map(|p| p.coefficients())
    }

    pub fn polys(&self) -> Vec<MultiPoly<C>> {
        self.g.iter().flatten().cloned().collect()
    }

    pub fn to_json(&self) -> Value {
        let nv = self.g.len();
        let g: Vec<Value> = self
            .g
            .iter()
            .map(|row| {
                Value::Array(
                    row.iter()
                        .map(|p| {
                            Value::Array(
                                p.terms()
                                    .map(|(m, c)| json!({"exponents": m, "coeff": c.to_string()}))
                                    .collect(),
                            )
                        })
                        .collect(),
                )
            })
            .collect();
        json!({"e": self.e, "nvars": nv, "g": g})
    }

    /// Read a certificate written by [`Certificate::to_json`]; coefficient
    /// symbols must lie in the cyclotomic field of order `order`.
    pub fn from_json(v: &Value, order: u64) -> Result<Self> {
        let bad = |m: &str| Error::InvalidInput(format!("certificate JSON: {m}"));
        let e = v.get("e").and_then(Value::as_u64).ok_or_else(|| bad("missing 'e'"))? as u32;
        let nv = v.get("nvars").and_then(Value::as_u64).ok_or_else(|| bad("missing 'nvars'"))? as usize;
        let rows = v.get("g").and_then(Value::as_array).ok_or_else(|| bad("missing 'g'"))?;
        let mut g = Vec::with_capacity(rows.len());
        for row in rows {
            let row = row.as_array().ok_or_else(|| bad("row is not an array"))?;
            let mut out = Vec::with_capacity(row.len());
            for poly in row {
                let terms = poly.as_array().ok_or_else(|| bad("entry is not an array"))?;
                let mut p = MultiPoly::zero(nv);
                for t in terms {
                    let m: Monomial = t
                        .get("exponents")
                        .and_then(Value::as_array)
                        .ok_or_else(|| bad("missing exponents"))?
                        .iter()
                        .map(|x| x.as_u64().map(|x| x as u32).ok_or_else(|| bad("bad exponent")))
                        .collect::<Result<_>>()?;
                    if m.len() != nv {
                        return Err(bad("exponent vector length"));
                    }
                    let s = t.get("coeff").and_then(Value::as_str).ok_or_else(|| bad("missing coeff"))?;
                    let c = parse_scalar(s, order)?;
                    let c = C::from_cyclotomic(&c).ok_or_else(|| bad("coefficient outside the field"))?;
                    p.add_term(m, c);
                }
                out.push(p);
            }
            g.push(out);
        }
        Ok(Certificate { e, g })
    }
}

/// Explicit constants for
/// `C |G|_v^{-1} |P|_v^d <= |F(P)|_v <= D |F|_v |P|_v^d` (archimedean `v`;
/// `C` and `D` are replaced by 1 at finite places), where sizes are taken on
/// the homogeneous coordinates `(x_1, …, x_N, 1)`.
#[derive(Clone, Debug)]
pub struct EffectiveConstants {
    /// `1 / ((N + 1) max_{i,j} #terms(g_ij))`.
    pub c_lower: BigRational,
    /// `max_i #terms(f̃_i)`.
    pub d_upper: BigRational,
    pub f_terms: usize,
    pub g_terms: usize,
    /// Cyclotomic order that indexes the embeddings below.
    pub order: u64,
    pub embeddings: Vec<u64>,
    /// `|σ_k(F̃)|` for each `k` in `embeddings`.
    pub f_norms: Vec<Ball>,
    /// `|σ_k(G)|` for each `k` in `embeddings`.
    pub g_norms: Vec<Ball>,
    f_rational: Option<Vec<BigRational>>,
    g_rational: Option<Vec<BigRational>>,
}

pub fn effective_constants<C: Scalar>(
    lift: &ProjectiveLift<C>,
    cert: &Certificate<C>,
    prec: u32,
) -> Result<EffectiveConstants> {
    let nv = lift.nvars();
    let f_terms = lift.max_terms();
    let g_terms = cert.max_terms().max(1);
    let fc: Vec<C> = lift.coefficients().cloned().collect();
    let gc: Vec<C> = cert.coefficients().cloned().collect();
    let order = fc.iter().chain(&gc).fold(1u64, |acc, c| primes::lcm(acc, c.order()));
    let embeddings = galois_units(order);
    let f_norms = embeddings
        .iter()
        .map(|&k| sup_norm_of_coeffs(&fc, k, prec))
        .collect::<Result<Vec<_>>>()?;
    let g_norms = embeddings
        .iter()
        .map(|&k| sup_norm_of_coeffs(&gc, k, prec))
        .collect::<Result<Vec<_>>>()?;
    let to_q = |v: &[C]| v.iter().map(|c| c.to_rational()).collect::<Option<Vec<_>>>();
    Ok(EffectiveConstants {
        c_lower: BigRational::new(BigInt::from(1), BigInt::from((nv * g_terms) as u64)),
        d_upper: BigRational::from_integer(BigInt::from(f_terms as u64)),
        f_terms,
        g_terms,
        order,
        embeddings,
        f_norms,
        g_norms,
        f_rational: to_q(&fc),
        g_rational: to_q(&gc),
    })
}

impl EffectiveConstants {
    fn index(&self, k: u64) -> usize {
        let k = if self.order == 1 { 0 } else { k % self.order };
        self.embeddings.iter().position(|&u| u == k).expect("k coprime to the order")
    }

    /// `|σ(F̃)|` for the embedding `ζ ↦ ζ^k` of any field containing the coefficients.
    pub fn f_norm(&self, k: u64) -> &Ball {
        &self.f_norms[self.index(k)]
    }

    pub fn g_norm(&self, k: u64) -> &Ball {
        &self.g_norms[self.index(k)]
    }

    pub fn max_f_norm(&self) -> Ball {
        self.f_norms.iter().skip(1).fold(self.f_norms[0].clone(), |a, b| a.max(b))
    }

    pub fn max_g_norm(&self) -> Ball {
        self.g_norms.iter().skip(1).fold(self.g_norms[0].clone(), |a, b| a.max(b))
    }

    /// `|F̃|_p` for rational coefficients.
    pub fn f_norm_padic(&self, p: u64) -> Option<AbsValue> {
        padic_max(self.f_rational.as_ref()?, p)
    }

    /// `|G|_p` for rational coefficients.
    pub fn g_norm_padic(&self, p: u64) -> Option<AbsValue> {
        padic_max(self.g_rational.as_ref()?, p)
    }

    /// `max |c|` over the lift coefficients, when they are all rational.
    pub fn f_norm_rational(&self) -> Option<BigRational> {
        self.f_rational.as_ref().map(|v| max_abs(v))
    }

    /// `max |c|` over the certificate coefficients, when they are all rational.
    pub fn g_norm_rational(&self) -> Option<BigRational> {
        self.g_rational.as_ref().map(|v| max_abs(v))
    }

    /// Whether every coefficient of the lift and certificate is rational.
    pub fn is_rational(&self) -> bool {
        self.f_rational.is_some() && self.g_rational.is_some()
    }

    /// Primes dividing some denominator or numerator of the lift or certificate
    /// coefficients (rational case).
    pub fn bad_primes(&self) -> Vec<u64> {
        let mut out = Vec::new();
        for q in self.f_rational.iter().chain(self.g_rational.iter()).flatten() {
            for n in [q.numer(), q.denom()] {
                if let Ok(f) = primes::factor_bigint(n) {
                    for (p, _) in f {
                        if let Some(p) = num_traits::ToPrimitive::to_u64(&p) {
                            out.push(p);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Where to test the two-sided size inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizePlace {
    /// The embedding `ζ ↦ ζ^k`.
    Embedding(u64),
    /// The p-adic place of Q (rational data only).
    Prime(u64),
}

impl fmt::Display for SizePlace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SizePlace::Embedding(k) => write!(f, "sigma_{k}"),
            SizePlace::Prime(p) => write!(f, "{p}"),
        }
    }
}

/// `lower <= value <= upper` for one point at one place, with sizes taken on
/// `(x_1, …, x_N, 1)`.
#[derive(Clone, Debug, Serialize)]
pub struct SizeCheck {
    #[serde(serialize_with = "crate::orbits::ser_display")]
    pub place: SizePlace,
    pub lower: HeightEstimate,
    pub value: HeightEstimate,
    pub upper: HeightEstimate,
    /// False only when the enclosures prove a violation (exact at primes).
    pub holds: bool,
}

fn homogeneous<C: Scalar>(x: &[C]) -> Vec<C> {
    let mut v = x.to_vec();
    v.push(C::one());
    v
}

pub fn size_inequality<C: Scalar>(
    lift: &ProjectiveLift<C>,
    k: &EffectiveConstants,
    x: &[C],
    place: SizePlace,
    prec: u32,
) -> Result<SizeCheck> {
    if x.len() + 1 != lift.nvars() {
        return Err(Error::DimensionMismatch {
            expected: lift.nvars() - 1,
            found: x.len(),
        });
    }
    let d = lift.degree();
    let hx = homogeneous(x);
    let fx = lift.evaluate(&hx)?;
    match place {
        SizePlace::Embedding(e) => {
            let wp = prec + 32;
            let px = sup_norm_of_coeffs(&hx, e, wp)?.pow(d);
            let value = sup_norm_of_coeffs(&fx, e, wp)?;
            let c = Ball::from_rational(&k.c_lower, wp);
            let lower = c.mul(&px).div(k.g_norm(e))?;
            let upper = Ball::from_rational(&k.d_upper, wp).mul(k.f_norm(e)).mul(&px);
            let holds = !value.lt(&lower) && !upper.lt(&value);
            Ok(SizeCheck {
                place,
                lower: HeightEstimate::from_ball(lower.with_precision(prec)),
                value: HeightEstimate::from_ball(value.with_precision(prec)),
                upper: HeightEstimate::from_ball(upper.with_precision(prec)),
                holds,
            })
        }
        SizePlace::Prime(p) => {
            let v = RationalPlace::finite(p)?;
            let to_q = |xs: &[C]| {
                xs.iter()
                    .map(|c| c.to_rational())
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| Error::InvalidInput("p-adic size checks need rational data".into()))
            };
            let px = num_traits::pow(rational_point_abs(&to_q(&hx)?, v).to_rational(), d as usize);
            let value = rational_point_abs(&to_q(&fx)?, v).to_rational();
            let g = k
                .g_norm_padic(p)
                .ok_or_else(|| Error::InvalidInput("p-adic size checks need rational data".into()))?;
            let f = k
                .f_norm_padic(p)
                .ok_or_else(|| Error::InvalidInput("p-adic size checks need rational data".into()))?;
            let lower = px.clone() / g.to_rational();
            let upper = f.to_rational() * px;
            let holds = lower <= value && value <= upper;
            let est = |q: &BigRational| HeightEstimate::from_ball(Ball::from_rational(q, prec));
            Ok(SizeCheck {
                place,
                lower: est(&lower),
                value: est(&value),
                upper: est(&upper),
                holds,
            })
        }
    }
}

fn max_abs(v: &[BigRational]) -> BigRational {
    v.iter().map(|q| q.abs()).max().unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)))
}

fn padic_max(coeffs: &[BigRational], p: u64) -> Option<AbsValue> {
    coeffs
        .iter()
        .map(|c| rational_abs(c, RationalPlace::Finite(p)))
        .max_by(|a, b| a.to_rational().cmp(&b.to_rational()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;
    use crate::cyclotomic::Cyclotomic;
    use crate::morphism::AffineMorphism;
    use crate::parse::{parse_poly, Context};

    fn lift_of(comps: &[&str], n: usize, order: u64) -> ProjectiveLift<Cyclotomic> {
        let ctx = Context { nvars: n, order };
        AffineMorphism::new(comps.iter().map(|s| parse_poly(s, ctx).unwrap()).collect())
            .unwrap()
            .lift()
    }

    #[test]
    fn power_map_certificate() {
        let l = lift_of(&["X1^2"], 1, 1);
        let c = find_certificate(&l, 8).unwrap().unwrap();
        assert_eq!(c.e, 2);
        assert!(verify_certificate(&l, &c));
        assert_eq!(c.g[0][0].to_string(), "1");
        assert!(c.g[0][1].is_zero());
    }

    #[test]
    fn quadratic_minus_one() {
        let l = lift_of(&["X1^2 - 1"], 1, 1);
        let c = find_certificate(&l, 8).unwrap().unwrap();
        assert_eq!(c.e, 2);
        // X1^2 = f1 + f2 and X2^2 = f2
        assert_eq!(c.g[0][0].to_string(), "1");
        assert_eq!(c.g[0][1].to_string(), "1");
        assert!(c.g[1][0].is_zero());
        assert_eq!(c.g[1][1].to_string(), "1");
        let k = effective_constants(&l, &c, 64).unwrap();
        assert_eq!(k.d_upper, BigRational::from_integer(2.into()));
        assert_eq!(k.c_lower, BigRational::new(1.into(), 2.into()));
    }

    #[test]
    fn common_zero_has_no_certificate() {
        let ctx = Context { nvars: 2, order: 1 };
        let forms = vec![parse_poly("X1*X2", ctx).unwrap(), parse_poly("X1^2", ctx).unwrap()];
        let l = ProjectiveLift::from_forms(forms).unwrap();
        assert!(find_certificate(&l, 8).unwrap().is_none());
    }

    #[test]
    fn tampering_is_detected() {
        let l = lift_of(&["X1^2 + X2", "X2^2"], 2, 1);
        let c = find_certificate(&l, 8).unwrap().unwrap();
        assert!(verify_certificate(&l, &c));
        let mut bad = c.clone();
        let p = &bad.g[0][0];
        let bumped = p.add(&MultiPoly::monomial(3, vec![0, 0, c.e - 2], Cyclotomic::one()));
        bad.g[0][0] = bumped;
        assert!(!verify_certificate(&l, &bad));
    }

    #[test]
    fn size_inequality_on_samples() {
        let l = lift_of(&["X1^2 - 1"], 1, 1);
        let c = find_certificate(&l, 4).unwrap().unwrap();
        let k = effective_constants(&l, &c, 128).unwrap();
        for x in ["0", "1", "-3/2", "7/12", "1000"] {
            let x = vec![parse_scalar(x, 1).unwrap()];
            let a = size_inequality(&l, &k, &x, SizePlace::Embedding(1), 128).unwrap();
            assert!(a.holds, "{a:?}");
            for p in [2, 3, 5] {
                assert!(size_inequality(&l, &k, &x, SizePlace::Prime(p), 128).unwrap().holds);
            }
        }
        let l = lift_of(&["X1^2 + z5*X1 - z5^2"], 1, 5);
        let c = find_certificate(&l, 4).unwrap().unwrap();
        let k = effective_constants(&l, &c, 128).unwrap();
        let x = vec![parse_scalar("z5^3 - 2", 5).unwrap()];
        for e in [1, 2, 3, 4] {
            assert!(size_inequality(&l, &k, &x, SizePlace::Embedding(e), 128).unwrap().holds);
        }
        assert!(size_inequality(&l, &k, &x, SizePlace::Prime(2), 128).is_err());
    }

    #[test]
    fn json_round_trip() {
        let l = lift_of(&["z3*X1^2 + z3^2"], 1, 3);
        let c = find_certificate(&l, 8).unwrap().unwrap();
        let back = Certificate::<Cyclotomic>::from_json(&c.to_json(), 3).unwrap();
        assert_eq!(back, c);
        assert!(verify_certificate(&l, &back));
    }
}
