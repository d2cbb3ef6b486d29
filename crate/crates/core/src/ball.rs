//! Outward-rounded ball arithmetic over arbitrary-precision dyadic numbers.
//!
//! A [`Ball`] is a midpoint `m * 2^e` with a small upper-rounded radius. Every
//! operation returns a ball that contains all results of the operation applied
//! to points of the inputs, so a claim read off a ball is a claim about the
//! true value.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub const DEFAULT_PRECISION: u32 = 256;

const MAG_BITS: u32 = 30;
const GUARD_BITS: u32 = 16;

/// Exact binary floating-point number `man * 2^exp`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    man: BigInt,
    exp: i64,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic {
            man: BigInt::zero(),
            exp: 0,
        }
    }

    pub fn new(man: BigInt, exp: i64) -> Self {
        let mut d = Dyadic { man, exp };
        d.normalize();
        d
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic::new(BigInt::from(v), 0)
    }

    pub fn from_bigint(v: BigInt) -> Self {
        Dyadic::new(v, 0)
    }

    fn normalize(&mut self) {
        if self.man.is_zero() {
            self.exp = 0;
            return;
        }
        let tz = self.man.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.man >>= tz as usize;
            self.exp += tz as i64;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.man.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.man.is_negative()
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.man
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    /// Number of significant bits of the mantissa.
    pub fn bits(&self) -> u64 {
        self.man.bits()
    }

    /// Exponent of the leading bit: `2^(top-1) <= |x| < 2^top`.
    pub fn top(&self) -> i64 {
        self.exp + self.man.bits() as i64
    }

    pub fn abs(&self) -> Dyadic {
        Dyadic {
            man: self.man.abs(),
            exp: self.exp,
        }
    }

    pub fn neg(&self) -> Dyadic {
        Dyadic {
            man: -&self.man,
            exp: self.exp,
        }
    }

    pub fn add(&self, other: &Dyadic) -> Dyadic {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let e = self.exp.min(other.exp);
        let a = &self.man << ((self.exp - e) as usize);
        let b = &other.man << ((other.exp - e) as usize);
        Dyadic::new(a + b, e)
    }

    pub fn sub(&self, other: &Dyadic) -> Dyadic {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Dyadic) -> Dyadic {
        Dyadic::new(&self.man * &other.man, self.exp + other.exp)
    }

    pub fn mul_2exp(&self, k: i64) -> Dyadic {
        if self.is_zero() {
            return Dyadic::zero();
        }
        Dyadic {
            man: self.man.clone(),
            exp: self.exp + k,
        }
    }

    /// Round toward zero to at most `prec` significant bits; returns the rounded
    /// value and an upper bound on the discarded magnitude.
    pub fn truncate(&self, prec: u32) -> (Dyadic, Mag) {
        let bits = self.man.bits();
        if bits <= prec as u64 {
            return (self.clone(), Mag::zero());
        }
        let shift = bits - prec as u64;
        let sign = self.man.sign();
        let mag = self.man.magnitude() >> (shift as usize);
        let man = BigInt::from_biguint(if mag.is_zero() { Sign::NoSign } else { sign }, mag);
        let rounded = Dyadic::new(man, self.exp + shift as i64);
        (rounded, Mag::pow2(self.exp + shift as i64))
    }

    pub fn to_rational(&self) -> BigRational {
        if self.exp >= 0 {
            BigRational::from_integer(&self.man << (self.exp as usize))
        } else {
            BigRational::new(self.man.clone(), BigInt::one() << ((-self.exp) as usize))
        }
    }

    /// Closest-ish f64 (truncated to 64 mantissa bits before conversion).
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.man.bits();
        let (m, e) = if bits > 64 {
            let shift = bits - 64;
            ((self.man.magnitude() >> (shift as usize)), self.exp + shift as i64)
        } else {
            (self.man.magnitude().clone(), self.exp)
        };
        let mf = m.to_f64().unwrap_or(f64::INFINITY);
        let v = scale_f64(mf, e);
        if self.is_negative() {
            -v
        } else {
            v
        }
    }

    pub fn to_f64_up(&self) -> f64 {
        let v = self.to_f64();
        next_toward(v, true)
    }

    pub fn to_f64_down(&self) -> f64 {
        let v = self.to_f64();
        next_toward(v, false)
    }

    /// Decimal rendering with `sig` significant digits, rounded to nearest
    /// (or upward in absolute value when `up`).
    pub fn to_decimal(&self, sig: usize, up: bool) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let q = self.to_rational();
        rational_to_decimal(&q, sig, up)
    }
}

fn scale_f64(m: f64, e: i64) -> f64 {
    if e > 2000 {
        return f64::INFINITY;
    }
    if e < -2200 {
        return 0.0;
    }
    let mut v = m;
    let mut e = e;
    while e > 0 {
        let step = e.min(1000);
        v *= 2f64.powi(step as i32);
        e -= step;
    }
    while e < 0 {
        let step = (-e).min(1000);
        v *= 2f64.powi(-(step as i32));
        e += step;
    }
    v
}

/// Step one representable value away in the given direction (two steps absorb
/// the truncation in [`Dyadic::to_f64`]).
fn next_toward(v: f64, up: bool) -> f64 {
    if v.is_infinite() {
        return if up == (v > 0.0) { v } else { f64::MAX.copysign(v) };
    }
    let step = |x: f64| if up { x.next_up() } else { x.next_down() };
    step(step(v))
}

pub(crate) fn rational_to_decimal(q: &BigRational, sig: usize, up: bool) -> String {
    if q.is_zero() {
        return "0".to_string();
    }
    let neg = q.is_negative();
    let q = q.abs();
    let sig = sig.max(1);
    // estimate decimal exponent
    let nb = q.numer().bits() as f64;
    let db = q.denom().bits() as f64;
    let mut e10 = ((nb - db) * std::f64::consts::LOG10_2).floor() as i64;
    let ten = BigInt::from(10);
    let scaled = |e10: i64| -> (BigInt, bool) {
        let shift = sig as i64 - 1 - e10;
        let (num, den) = if shift >= 0 {
            (q.numer() * num_traits::pow(ten.clone(), shift as usize), q.denom().clone())
        } else {
            (
                q.numer().clone(),
                q.denom() * num_traits::pow(ten.clone(), (-shift) as usize),
            )
        };
        let (d, r) = num.div_rem(&den);
        let inexact = !r.is_zero();
        let d = if up {
            if inexact {
                d + 1
            } else {
                d
            }
        } else if &r * 2 >= den {
            d + 1
        } else {
            d
        };
        (d, inexact)
    };
    let lower = num_traits::pow(ten.clone(), sig - 1);
    let upper = num_traits::pow(ten.clone(), sig);
    let digits;
    loop {
        let (d, _) = scaled(e10);
        if d >= upper {
            e10 += 1;
            continue;
        }
        if d < lower {
            e10 -= 1;
            continue;
        }
        digits = d;
        break;
    }
    let s = digits.to_string();
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if (0..24).contains(&e10) && (e10 as usize) < sig {
        let (int_part, frac) = s.split_at(e10 as usize + 1);
        out.push_str(int_part);
        let frac = frac.trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
    } else if (-6..0).contains(&e10) {
        out.push_str("0.");
        for _ in 0..(-e10 - 1) {
            out.push('0');
        }
        out.push_str(s.trim_end_matches('0'));
    } else {
        let (first, rest) = s.split_at(1);
        out.push_str(first);
        let rest = rest.trim_end_matches('0');
        if !rest.is_empty() {
            out.push('.');
            out.push_str(rest);
        }
        out.push_str(&format!("e{}", e10));
    }
    out
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let d = self.sub(other);
        match d.man.sign() {
            Sign::Minus => Ordering::Less,
            Sign::NoSign => Ordering::Equal,
            Sign::Plus => Ordering::Greater,
        }
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal(20, false))
    }
}

/// Non-negative magnitude with a short mantissa, rounded upward by every operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Mag {
    man: u64,
    exp: i64,
}

impl Mag {
    pub fn zero() -> Self {
        Mag { man: 0, exp: 0 }
    }

    pub fn pow2(e: i64) -> Self {
        Mag { man: 1, exp: e }
    }

    pub fn is_zero(&self) -> bool {
        self.man == 0
    }

    fn from_u128_up(man: u128, exp: i64) -> Self {
        if man == 0 {
            return Mag::zero();
        }
        let bits = 128 - man.leading_zeros();
        if bits <= MAG_BITS {
            return Mag {
                man: man as u64,
                exp,
            };
        }
        let shift = bits - MAG_BITS;
        let mut m = man >> shift;
        if m << shift != man {
            m += 1;
        }
        Mag {
            man: m as u64,
            exp: exp + shift as i64,
        }
        .renorm()
    }

    fn renorm(self) -> Self {
        if self.man >> MAG_BITS != 0 {
            Mag {
                man: self.man.div_ceil(2),
                exp: self.exp + 1,
            }
        } else {
            self
        }
    }

    /// Upper bound for `|d|`.
    pub fn from_dyadic_up(d: &Dyadic) -> Self {
        if d.is_zero() {
            return Mag::zero();
        }
        let bits = d.man.bits();
        let mag = d.man.magnitude();
        if bits <= MAG_BITS as u64 {
            return Mag {
                man: mag.to_u64().unwrap(),
                exp: d.exp,
            };
        }
        let shift = bits - MAG_BITS as u64;
        let top = mag >> (shift as usize);
        let exact = (&top << (shift as usize)) == *mag;
        let mut m = top.to_u64().unwrap();
        if !exact {
            m += 1;
        }
        Mag {
            man: m,
            exp: d.exp + shift as i64,
        }
        .renorm()
    }

    /// Lower bound for `|d|`.
    pub fn from_dyadic_down(d: &Dyadic) -> Self {
        if d.is_zero() {
            return Mag::zero();
        }
        let bits = d.man.bits();
        let mag = d.man.magnitude();
        if bits <= MAG_BITS as u64 {
            return Mag {
                man: mag.to_u64().unwrap(),
                exp: d.exp,
            };
        }
        let shift = bits - MAG_BITS as u64;
        Mag {
            man: (mag >> (shift as usize)).to_u64().unwrap(),
            exp: d.exp + shift as i64,
        }
    }

    pub fn from_f64_up(v: f64) -> Self {
        assert!(v >= 0.0 && v.is_finite());
        if v == 0.0 {
            return Mag::zero();
        }
        let q = BigRational::from_float(v).unwrap();
        let (d, err) = rational_to_dyadic(&q, MAG_BITS + 2);
        Mag::from_dyadic_up(&d).add(err)
    }

    pub fn to_dyadic(&self) -> Dyadic {
        Dyadic::new(BigInt::from(self.man), self.exp)
    }

    pub fn add(self, other: Mag) -> Mag {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (big, small) = if self.exp >= other.exp {
            (self, other)
        } else {
            (other, self)
        };
        let diff = big.exp - small.exp;
        if diff > 90 {
            // small is below the last mantissa bit of big; bump by one ulp
            return Mag::from_u128_up(big.man as u128 + 1, big.exp);
        }
        let m = ((big.man as u128) << diff) + small.man as u128;
        Mag::from_u128_up(m, small.exp)
    }

    pub fn mul(self, other: Mag) -> Mag {
        if self.is_zero() || other.is_zero() {
            return Mag::zero();
        }
        Mag::from_u128_up(self.man as u128 * other.man as u128, self.exp + other.exp)
    }

    pub fn mul_2exp(self, k: i64) -> Mag {
        if self.is_zero() {
            return self;
        }
        Mag {
            man: self.man,
            exp: self.exp + k,
        }
    }

    /// Upper bound for `self / other`; `other` must be non-zero.
    pub fn div(self, other: Mag) -> Mag {
        assert!(!other.is_zero(), "Mag division by zero");
        if self.is_zero() {
            return self;
        }
        let num = (self.man as u128) << 64;
        let q = num.div_ceil(other.man as u128);
        Mag::from_u128_up(q, self.exp - other.exp - 64)
    }

    pub fn max(self, other: Mag) -> Mag {
        if self.cmp_mag(&other) == Ordering::Less {
            other
        } else {
            self
        }
    }

    pub fn cmp_mag(&self, other: &Mag) -> Ordering {
        self.to_dyadic().cmp(&other.to_dyadic())
    }

    pub fn to_f64_up(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let v = self.to_dyadic().to_f64_up();
        if v == 0.0 {
            f64::from_bits(1)
        } else {
            v
        }
    }

    pub fn to_decimal_up(&self, sig: usize) -> String {
        self.to_dyadic().to_decimal(sig, true)
    }
}

/// Round `q` to a dyadic with `prec` significant bits; returns the value and an
/// error bound.
pub fn rational_to_dyadic(q: &BigRational, prec: u32) -> (Dyadic, Mag) {
    if q.is_zero() {
        return (Dyadic::zero(), Mag::zero());
    }
    let den = q.denom();
    if den.is_one() {
        let d = Dyadic::from_bigint(q.numer().clone());
        return d.truncate(prec);
    }
    // power-of-two denominator is exact
    if den.magnitude().count_ones() == 1 {
        let k = den.bits() - 1;
        let d = Dyadic::new(q.numer().clone(), -(k as i64));
        return d.truncate(prec);
    }
    let nb = q.numer().bits() as i64;
    let db = den.bits() as i64;
    // shift so that the quotient has about prec + 1 bits
    let shift = prec as i64 + 1 - (nb - db);
    let (num, den_s) = if shift >= 0 {
        (q.numer() << (shift as usize), den.clone())
    } else {
        (q.numer().clone(), den << ((-shift) as usize))
    };
    let quo = num.magnitude() / den_s.magnitude();
    let signed = BigInt::from_biguint(
        if quo.is_zero() {
            Sign::NoSign
        } else {
            q.numer().sign()
        },
        quo,
    );
    let d = Dyadic::new(signed, -shift);
    let (t, err) = d.truncate(prec);
    (t, err.add(Mag::pow2(-shift)))
}

/// Real ball `[mid - rad, mid + rad]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ball {
    mid: Dyadic,
    rad: Mag,
    prec: u32,
}

impl Ball {
    pub fn exact(d: Dyadic, prec: u32) -> Self {
        Ball {
            mid: d,
            rad: Mag::zero(),
            prec,
        }
        .rounded()
    }

    pub fn zero(prec: u32) -> Self {
        Ball::exact(Dyadic::zero(), prec)
    }

    pub fn one(prec: u32) -> Self {
        Ball::from_int(1, prec)
    }

    pub fn from_int(v: i64, prec: u32) -> Self {
        Ball::exact(Dyadic::from_int(v), prec)
    }

    pub fn from_bigint(v: &BigInt, prec: u32) -> Self {
        Ball::exact(Dyadic::from_bigint(v.clone()), prec)
    }

    pub fn from_rational(q: &BigRational, prec: u32) -> Self {
        let (d, err) = rational_to_dyadic(q, prec);
        Ball {
            mid: d,
            rad: err,
            prec,
        }
    }

    pub fn with_radius(mid: Dyadic, rad: Mag, prec: u32) -> Self {
        Ball { mid, rad, prec }.rounded()
    }

    /// Smallest ball around `[lo, hi]`; requires `lo <= hi`.
    pub fn from_bounds(lo: &Dyadic, hi: &Dyadic, prec: u32) -> Self {
        debug_assert!(lo <= hi);
        let mid = lo.add(hi).mul_2exp(-1);
        let rad = Mag::from_dyadic_up(&hi.sub(lo).mul_2exp(-1));
        Ball { mid, rad, prec }.rounded()
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn with_precision(mut self, prec: u32) -> Self {
        self.prec = prec;
        self.rounded()
    }

    fn rounded(mut self) -> Self {
        let (m, err) = self.mid.truncate(self.prec);
        if !err.is_zero() {
            self.mid = m;
            self.rad = self.rad.add(err);
        }
        self
    }

    pub fn mid(&self) -> &Dyadic {
        &self.mid
    }

    pub fn rad(&self) -> Mag {
        self.rad
    }

    pub fn is_exact(&self) -> bool {
        self.rad.is_zero()
    }

    pub fn lower(&self) -> Dyadic {
        self.mid.sub(&self.rad.to_dyadic())
    }

    pub fn upper(&self) -> Dyadic {
        self.mid.add(&self.rad.to_dyadic())
    }

    pub fn add_error(mut self, err: Mag) -> Self {
        self.rad = self.rad.add(err);
        self
    }

    pub fn add(&self, other: &Ball) -> Ball {
        Ball {
            mid: self.mid.add(&other.mid),
            rad: self.rad.add(other.rad),
            prec: self.prec.max(other.prec),
        }
        .rounded()
    }

    pub fn sub(&self, other: &Ball) -> Ball {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Ball {
        Ball {
            mid: self.mid.neg(),
            rad: self.rad,
            prec: self.prec,
        }
    }

    pub fn mul(&self, other: &Ball) -> Ball {
        let am = Mag::from_dyadic_up(&self.mid);
        let bm = Mag::from_dyadic_up(&other.mid);
        let rad = am
            .mul(other.rad)
            .add(bm.mul(self.rad))
            .add(self.rad.mul(other.rad));
        Ball {
            mid: self.mid.mul(&other.mid),
            rad,
            prec: self.prec.max(other.prec),
        }
        .rounded()
    }

    pub fn sqr(&self) -> Ball {
        self.mul(self)
    }

    pub fn mul_2exp(&self, k: i64) -> Ball {
        Ball {
            mid: self.mid.mul_2exp(k),
            rad: self.rad.mul_2exp(k),
            prec: self.prec,
        }
    }

    pub fn mul_int(&self, k: i64) -> Ball {
        self.mul(&Ball::from_int(k, self.prec))
    }

    pub fn pow(&self, mut e: u32) -> Ball {
        let mut base = self.clone();
        let mut acc = Ball::one(self.prec);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.sqr();
            }
        }
        acc
    }

    /// True when every point of the ball is strictly positive.
    pub fn is_positive(&self) -> bool {
        self.lower() > Dyadic::zero()
    }

    pub fn is_negative(&self) -> bool {
        self.upper() < Dyadic::zero()
    }

    pub fn contains_zero(&self) -> bool {
        !self.is_positive() && !self.is_negative()
    }

    pub fn contains_rational(&self, q: &BigRational) -> bool {
        let lo = self.lower().to_rational();
        let hi = self.upper().to_rational();
        &lo <= q && q <= &hi
    }

    pub fn overlaps(&self, other: &Ball) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }

    /// Certainly `self < other`.
    pub fn lt(&self, other: &Ball) -> bool {
        self.upper() < other.lower()
    }

    /// Certainly `self <= other`.
    pub fn le(&self, other: &Ball) -> bool {
        self.upper() <= other.lower()
    }

    pub fn div(&self, other: &Ball) -> Result<Ball> {
        if other.contains_zero() {
            return Err(Error::DivisionByZero);
        }
        let prec = self.prec.max(other.prec);
        let bm = other.mid.abs();
        let bm_lo = Mag::from_dyadic_down(&bm.sub(&other.rad.to_dyadic()));
        let bm_mag_lo = Mag::from_dyadic_down(&bm);
        if bm_lo.is_zero() || bm_mag_lo.is_zero() {
            return Err(Error::Precision("divisor enclosure touches zero".into()));
        }
        let (qd, qerr) = dyadic_quotient(&self.mid, &other.mid, prec + GUARD_BITS);
        let am = Mag::from_dyadic_up(&self.mid);
        let bmu = Mag::from_dyadic_up(&other.mid);
        let num = self.rad.mul(bmu).add(am.mul(other.rad));
        let den = bm_mag_lo.mul_down_approx(bm_lo);
        let rad = num.div(den).add(qerr);
        Ok(Ball { mid: qd, rad, prec }.rounded())
    }

    pub fn div_int(&self, k: i64) -> Ball {
        self.div(&Ball::from_int(k, self.prec))
            .expect("division by a nonzero integer")
    }

    pub fn abs(&self) -> Ball {
        if self.mid.is_negative() {
            self.neg()
        } else {
            self.clone()
        }
    }

    /// Rigorous maximum of two balls.
    pub fn max(&self, other: &Ball) -> Ball {
        let lo = std::cmp::max(self.lower(), other.lower());
        let hi = std::cmp::max(self.upper(), other.upper());
        Ball::from_bounds(&lo, &hi, self.prec.max(other.prec))
    }

    /// Clamp the lower end at zero (for quantities known to be non-negative).
    pub fn clamp_nonneg(&self) -> Ball {
        if self.lower() >= Dyadic::zero() {
            return self.clone();
        }
        let hi = std::cmp::max(self.upper(), Dyadic::zero());
        Ball::from_bounds(&Dyadic::zero(), &hi, self.prec)
    }

    /// Square root of a ball whose points are known to be non-negative.
    pub fn sqrt(&self) -> Ball {
        let lo = std::cmp::max(self.lower(), Dyadic::zero());
        let hi = std::cmp::max(self.upper(), Dyadic::zero());
        let prec = self.prec + GUARD_BITS;
        let slo = sqrt_dyadic(&lo, prec, false);
        let shi = sqrt_dyadic(&hi, prec, true);
        Ball::from_bounds(&slo, &shi, self.prec)
    }

    /// Natural logarithm; every point of the ball must be positive.
    pub fn ln(&self) -> Result<Ball> {
        if !self.is_positive() {
            return Err(Error::Precision(
                "logarithm of an enclosure that is not strictly positive".into(),
            ));
        }
        let wp = self.prec + GUARD_BITS;
        let core = ln_dyadic(&self.mid, wp);
        let lo = Mag::from_dyadic_down(&self.lower());
        let err = self.rad.div(lo);
        Ok(core.add_error(err).with_precision(self.prec))
    }

    pub fn to_f64(&self) -> f64 {
        self.mid.to_f64()
    }

    pub fn upper_f64(&self) -> f64 {
        self.upper().to_f64_up()
    }

    pub fn lower_f64(&self) -> f64 {
        self.lower().to_f64_down()
    }

    /// Upper bound for the distance from the true value to `self.to_f64()`.
    pub fn error_f64(&self) -> f64 {
        let f = self.to_f64();
        let fd = if f.is_finite() {
            Dyadic::from_rational_exact(&BigRational::from_float(f).unwrap())
        } else {
            return f64::INFINITY;
        };
        let drift = Mag::from_dyadic_up(&self.mid.sub(&fd));
        self.rad.add(drift).to_f64_up()
    }
}

impl Dyadic {
    /// Exact conversion for rationals with power-of-two denominators.
    pub fn from_rational_exact(q: &BigRational) -> Dyadic {
        let den = q.denom();
        assert!(den.magnitude().count_ones() == 1, "not a dyadic rational");
        Dyadic::new(q.numer().clone(), -((den.bits() - 1) as i64))
    }
}

impl Mag {
    /// Lower-rounded product, used only for denominators of upper bounds.
    fn mul_down_approx(self, other: Mag) -> Mag {
        let m = self.man as u128 * other.man as u128;
        if m == 0 {
            return Mag::zero();
        }
        let bits = 128 - m.leading_zeros();
        let shift = bits.saturating_sub(MAG_BITS);
        Mag {
            man: (m >> shift) as u64,
            exp: self.exp + other.exp + shift as i64,
        }
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{} +/- {}]",
            self.mid.to_decimal(20, false),
            self.rad.to_decimal_up(3)
        )
    }
}

fn sqrt_dyadic(x: &Dyadic, prec: u32, up: bool) -> Dyadic {
    if x.is_zero() {
        return Dyadic::zero();
    }
    assert!(!x.is_negative());
    // x = man * 2^exp; choose s with exp - s even and man * 2^s having ~2*prec bits
    let bits = x.man.bits() as i64;
    let mut s = 2 * prec as i64 + 2 - bits;
    if (x.exp - s).rem_euclid(2) != 0 {
        s += 1;
    }
    let scaled: BigUint = if s >= 0 {
        x.man.magnitude() << (s as usize)
    } else {
        x.man.magnitude() >> ((-s) as usize)
    };
    let exact_shift = s >= 0 || (&scaled << ((-s) as usize)) == *x.man.magnitude();
    let r = scaled.sqrt();
    let exact = exact_shift && &r * &r == scaled;
    let r = if up && !exact { r + 1u32 } else { r };
    Dyadic::new(BigInt::from(r), (x.exp - s) / 2)
}

/// Truncated quotient `a / b` with about `prec` significant bits and its error.
fn dyadic_quotient(a: &Dyadic, b: &Dyadic, prec: u32) -> (Dyadic, Mag) {
    if a.is_zero() {
        return (Dyadic::zero(), Mag::zero());
    }
    let s = (prec as i64 + b.man.bits() as i64 - a.man.bits() as i64).max(0);
    let num = &a.man << (s as usize);
    let (q, r) = num.div_rem(&b.man);
    let exp = a.exp - b.exp - s;
    let err = if r.is_zero() { Mag::zero() } else { Mag::pow2(exp) };
    (Dyadic::new(q, exp), err)
}

fn atanh_series(t: &Ball, wp: u32) -> Ball {
    // sum_{j>=0} t^(2j+1)/(2j+1); requires |t| <= 1/3
    let t2 = t.sqr();
    let mut power = t.clone();
    let mut sum = Ball::zero(wp);
    let tol = Dyadic::new(BigInt::one(), -(wp as i64) - 4);
    let mut j: i64 = 0;
    loop {
        let term = power.div_int(2 * j + 1);
        sum = sum.add(&term);
        power = power.mul(&t2);
        if power.abs().upper() < tol {
            break;
        }
        j += 1;
    }
    // geometric tail with ratio <= 1/9 is bounded by 2 * |next power|
    sum.add_error(Mag::from_dyadic_up(&power.abs().upper()).mul_2exp(1))
}

type ConstCache = OnceLock<RwLock<HashMap<u32, Ball>>>;

fn cached_const(cache: &'static ConstCache, wp: u32, f: impl FnOnce(u32) -> Ball) -> Ball {
    let map = cache.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(v) = map.read().unwrap().get(&wp) {
        return v.clone();
    }
    let v = f(wp);
    map.write().unwrap().insert(wp, v.clone());
    v
}

/// ln 2 at working precision `wp`.
pub fn ln2(wp: u32) -> Ball {
    static CACHE: ConstCache = OnceLock::new();
    cached_const(&CACHE, wp, |wp| {
        let third = Ball::one(wp + GUARD_BITS).div_int(3);
        atanh_series(&third, wp + GUARD_BITS)
            .mul_2exp(1)
            .with_precision(wp)
    })
}

fn atan_inv(m: i64, wp: u32) -> Ball {
    // atan(1/m) = sum (-1)^j / ((2j+1) m^(2j+1))
    let inv = Ball::one(wp).div_int(m);
    let inv2 = inv.sqr();
    let mut power = inv.clone();
    let mut sum = Ball::zero(wp);
    let tol = Dyadic::new(BigInt::one(), -(wp as i64) - 4);
    let mut j: i64 = 0;
    loop {
        let term = power.div_int(2 * j + 1);
        sum = if j % 2 == 0 { sum.add(&term) } else { sum.sub(&term) };
        power = power.mul(&inv2);
        if power.abs().upper() < tol {
            break;
        }
        j += 1;
    }
    sum.add_error(Mag::from_dyadic_up(&power.abs().upper()))
}

pub fn pi(wp: u32) -> Ball {
    static CACHE: ConstCache = OnceLock::new();
    cached_const(&CACHE, wp, |wp| {
        let w = wp + GUARD_BITS;
        let a = atan_inv(5, w).mul_int(16);
        let b = atan_inv(239, w).mul_int(4);
        a.sub(&b).with_precision(wp)
    })
}

fn ln_dyadic(x: &Dyadic, wp: u32) -> Ball {
    assert!(!x.is_negative() && !x.is_zero());
    let bits = x.man.bits() as i64;
    // x = y * 2^k with y in [1, 2)
    let mut k = x.exp + bits - 1;
    let mut y = Dyadic::new(x.man.clone(), -(bits - 1));
    // move y into [0.75, 1.5)
    if y >= Dyadic::new(BigInt::from(3), -1) {
        y = y.mul_2exp(-1);
        k += 1;
    }
    let one = Dyadic::from_int(1);
    let yb = Ball::exact(y.clone(), wp);
    let num = Ball::exact(y.sub(&one), wp);
    let den = yb.add(&Ball::one(wp));
    let t = num.div(&den).expect("y + 1 > 0");
    let lny = atanh_series(&t, wp).mul_2exp(1);
    if k == 0 {
        lny
    } else {
        ln2(wp).mul_int(k).add(&lny)
    }
}

/// `cos(2*pi*q)` and `sin(2*pi*q)` for `q in [0, 1/8]`.
fn cos_sin_small(q: &BigRational, wp: u32) -> (Ball, Ball) {
    if q.is_zero() {
        return (Ball::one(wp), Ball::zero(wp));
    }
    let theta = pi(wp).mul_2exp(1).mul(&Ball::from_rational(q, wp));
    let t2 = theta.sqr();
    let tol = Dyadic::new(BigInt::one(), -(wp as i64) - 4);
    // sin
    let mut term = theta.clone();
    let mut sin = Ball::zero(wp);
    let mut j: i64 = 1;
    loop {
        sin = sin.add(&term);
        term = term.mul(&t2).div_int((2 * j) * (2 * j + 1)).neg();
        if term.abs().upper() < tol {
            break;
        }
        j += 1;
    }
    let sin = sin.add_error(Mag::from_dyadic_up(&term.abs().upper()));
    // cos
    let mut term = Ball::one(wp);
    let mut cos = Ball::zero(wp);
    let mut j: i64 = 1;
    loop {
        cos = cos.add(&term);
        term = term.mul(&t2).div_int((2 * j - 1) * (2 * j)).neg();
        if term.abs().upper() < tol {
            break;
        }
        j += 1;
    }
    let cos = cos.add_error(Mag::from_dyadic_up(&term.abs().upper()));
    (cos, sin)
}

/// Enclosure of `exp(2*pi*i*m/n)`; exact at the quarter turns.
pub fn unit_root(m: i64, n: u64, prec: u32) -> ComplexBall {
    let n_i = n as i64;
    let m = m.rem_euclid(n_i);
    let q = BigRational::new(BigInt::from(m), BigInt::from(n_i));
    let quarter = |num: i64| BigRational::new(BigInt::from(num), BigInt::from(4));
    if q.is_zero() {
        return ComplexBall::one(prec);
    }
    if q == quarter(1) {
        return ComplexBall::new(Ball::zero(prec), Ball::one(prec));
    }
    if q == quarter(2) {
        return ComplexBall::new(Ball::from_int(-1, prec), Ball::zero(prec));
    }
    if q == quarter(3) {
        return ComplexBall::new(Ball::zero(prec), Ball::from_int(-1, prec));
    }
    let wp = prec + GUARD_BITS;
    let one = BigRational::one();
    let half = BigRational::new(1.into(), 2.into());
    let eighth = BigRational::new(1.into(), 8.into());
    let mut q = q;
    let mut sin_sign = false;
    let mut cos_sign = false;
    let mut swap = false;
    if q > half {
        q = &one - &q;
        sin_sign = true;
    }
    if q > quarter(1) {
        q = &half - &q;
        cos_sign = true;
    }
    if q > eighth {
        q = quarter(1) - &q;
        swap = true;
    }
    let (mut c, mut s) = cos_sin_small(&q, wp);
    if swap {
        std::mem::swap(&mut c, &mut s);
    }
    if cos_sign {
        c = c.neg();
    }
    if sin_sign {
        s = s.neg();
    }
    ComplexBall::new(c.with_precision(prec), s.with_precision(prec))
}

/// Table of `exp(2*pi*i*m/n)` for `m = 0..n`, cached per `(n, prec)`.
pub fn unit_root_table(n: u64, prec: u32) -> Arc<Vec<ComplexBall>> {
    static CACHE: OnceLock<RwLock<HashMap<(u64, u32), Arc<Vec<ComplexBall>>>>> = OnceLock::new();
    let map = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(t) = map.read().unwrap().get(&(n, prec)) {
        return t.clone();
    }
    let table: Vec<ComplexBall> = (0..n as i64).map(|m| unit_root(m, n, prec)).collect();
    let table = Arc::new(table);
    map.write().unwrap().insert((n, prec), table.clone());
    table
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComplexBall {
    pub re: Ball,
    pub im: Ball,
}

impl ComplexBall {
    pub fn new(re: Ball, im: Ball) -> Self {
        ComplexBall { re, im }
    }

    pub fn zero(prec: u32) -> Self {
        ComplexBall::new(Ball::zero(prec), Ball::zero(prec))
    }

    pub fn one(prec: u32) -> Self {
        ComplexBall::new(Ball::one(prec), Ball::zero(prec))
    }

    pub fn from_real(re: Ball) -> Self {
        let prec = re.precision();
        ComplexBall::new(re, Ball::zero(prec))
    }

    pub fn precision(&self) -> u32 {
        self.re.precision().max(self.im.precision())
    }

    pub fn add(&self, o: &ComplexBall) -> ComplexBall {
        ComplexBall::new(self.re.add(&o.re), self.im.add(&o.im))
    }

    pub fn sub(&self, o: &ComplexBall) -> ComplexBall {
        ComplexBall::new(self.re.sub(&o.re), self.im.sub(&o.im))
    }

    pub fn neg(&self) -> ComplexBall {
        ComplexBall::new(self.re.neg(), self.im.neg())
    }

    pub fn mul(&self, o: &ComplexBall) -> ComplexBall {
        if self.im.mid().is_zero() && self.im.is_exact() {
            return ComplexBall::new(self.re.mul(&o.re), self.re.mul(&o.im));
        }
        if o.im.mid().is_zero() && o.im.is_exact() {
            return ComplexBall::new(self.re.mul(&o.re), self.im.mul(&o.re));
        }
        let re = self.re.mul(&o.re).sub(&self.im.mul(&o.im));
        let im = self.re.mul(&o.im).add(&self.im.mul(&o.re));
        ComplexBall::new(re, im)
    }

    pub fn scale(&self, r: &Ball) -> ComplexBall {
        ComplexBall::new(self.re.mul(r), self.im.mul(r))
    }

    /// `|z|^2`, clamped to be non-negative.
    pub fn norm_sqr(&self) -> Ball {
        self.re.sqr().add(&self.im.sqr()).clamp_nonneg()
    }

    pub fn abs(&self) -> Ball {
        self.norm_sqr().sqrt()
    }

    pub fn contains_rational(&self, re: &BigRational, im: &BigRational) -> bool {
        self.re.contains_rational(re) && self.im.contains_rational(im)
    }

    pub fn overlaps(&self, o: &ComplexBall) -> bool {
        self.re.overlaps(&o.re) && self.im.overlaps(&o.im)
    }
}

impl fmt::Display for ComplexBall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}i", self.re, self.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn rational_rounding_encloses() {
        let b = Ball::from_rational(&q(1, 3), 64);
        assert!(b.contains_rational(&q(1, 3)));
        assert!(!b.is_exact());
        let b = Ball::from_rational(&q(3, 8), 64);
        assert!(b.is_exact());
    }

    #[test]
    fn ln2_digits() {
        let l = ln2(128);
        assert!((l.to_f64() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(l.rad().to_f64_up() < 1e-35);
    }

    #[test]
    fn pi_digits() {
        let p = pi(200);
        assert!((p.to_f64() - std::f64::consts::PI).abs() < 1e-15);
        assert!(p.to_decimal_prefix().starts_with("3.14159265358979323846264338327950288"));
    }

    impl Ball {
        fn to_decimal_prefix(&self) -> String {
            self.mid().to_decimal(40, false)
        }
    }

    #[test]
    fn ln_of_ten() {
        let l = Ball::from_int(10, 256).ln().unwrap();
        assert!(l
            .mid()
            .to_decimal(40, false)
            .starts_with("2.30258509299404568401799145468436420760"));
        assert!(l.rad().to_f64_up() < 1e-70);
    }

    #[test]
    fn ln_rejects_nonpositive() {
        assert!(Ball::zero(64).ln().is_err());
        assert!(Ball::from_int(-2, 64).ln().is_err());
    }

    #[test]
    fn eighth_root() {
        let z = unit_root(1, 8, 128);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((z.re.to_f64() - h).abs() < 1e-15);
        assert!((z.im.to_f64() - h).abs() < 1e-15);
        // |z|^2 encloses 1
        assert!(z.norm_sqr().contains_rational(&q(1, 1)));
    }

    #[test]
    fn quarter_turns_exact() {
        let z = unit_root(3, 12, 64);
        assert!(z.re.is_exact() && z.im.is_exact());
        assert!(z.im.contains_rational(&q(1, 1)));
    }

    #[test]
    fn roots_in_every_octant() {
        for n in [5u64, 7, 9, 12, 13] {
            for m in 0..n as i64 {
                let z = unit_root(m, n, 96);
                let ang = 2.0 * std::f64::consts::PI * m as f64 / n as f64;
                assert!((z.re.to_f64() - ang.cos()).abs() < 1e-14, "n={n} m={m}");
                assert!((z.im.to_f64() - ang.sin()).abs() < 1e-14, "n={n} m={m}");
            }
        }
    }

    #[test]
    fn sqrt_bounds() {
        let b = Ball::from_int(2, 128).sqrt();
        let s = b.to_f64();
        assert!((s - std::f64::consts::SQRT_2).abs() < 1e-15);
        let sq = b.sqr();
        assert!(sq.contains_rational(&q(2, 1)));
    }

    #[test]
    fn division_encloses() {
        let a = Ball::from_rational(&q(22, 7), 80);
        let b = Ball::from_rational(&q(-3, 11), 80);
        let c = a.div(&b).unwrap();
        assert!(c.contains_rational(&(q(22, 7) / q(-3, 11))));
    }

    #[test]
    fn decimal_rendering() {
        let d = Dyadic::new(BigInt::from(5), -1);
        assert_eq!(d.to_decimal(10, false), "2.5");
        assert_eq!(rational_to_decimal(&q(-1, 3), 5, false), "-0.33333");
        assert_eq!(rational_to_decimal(&q(1, 3), 3, true), "0.334");
        assert_eq!(rational_to_decimal(&q(12345678, 1), 3, false), "1.23e7");
    }

    #[test]
    fn mag_rounds_up() {
        let a = Mag::from_dyadic_up(&Dyadic::from_int((1 << 40) + 1));
        assert!(a.to_dyadic() >= Dyadic::from_int((1 << 40) + 1));
        let s = Mag::pow2(0).add(Mag::pow2(-200));
        assert!(s.to_dyadic() > Dyadic::from_int(1));
    }
}
