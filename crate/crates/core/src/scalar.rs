//! Coefficient fields usable by the generic polynomial and dynamics code.

use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::cyclotomic::Cyclotomic;
use crate::error::{Error, Result};

/// An exact subfield of the cyclotomic closure of Q.
///
/// Implemented by [`BigRational`] (the fast path over Q) and by [`Cyclotomic`].
pub trait Scalar:
    Clone
    + Debug
    + Display
    + Eq
    + Hash
    + Ord
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn add_ref(&self, other: &Self) -> Self;
    fn sub_ref(&self, other: &Self) -> Self;
    fn mul_ref(&self, other: &Self) -> Self;
    fn inv(&self) -> Result<Self>;

    fn from_rational(q: BigRational) -> Self;
    fn to_rational(&self) -> Option<BigRational>;
    fn to_cyclotomic(&self) -> Cyclotomic;
    /// `None` when the value does not lie in this field.
    fn from_cyclotomic(c: &Cyclotomic) -> Option<Self>;

    /// Galois image under ζ ↦ ζ^k; rationals are fixed.
    fn conjugate(&self, k: u64) -> Result<Self>;
    /// Least positive integer clearing the power-basis denominators.
    fn denominator(&self) -> BigInt;
    fn is_algebraic_integer(&self) -> bool {
        self.denominator() == BigInt::from(1)
    }
    /// Cyclotomic order of the field the value is stored in (1 for Q).
    fn order(&self) -> u64;

    fn from_int(v: i64) -> Self {
        Self::from_rational(BigRational::from_integer(v.into()))
    }

    fn checked_div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul_ref(&other.inv()?))
    }

    fn pow(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
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
}

impl Scalar for BigRational {
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            Err(Error::DivisionByZero)
        } else {
            Ok(self.recip())
        }
    }
    fn from_rational(q: BigRational) -> Self {
        q
    }
    fn to_rational(&self) -> Option<BigRational> {
        Some(self.clone())
    }
    fn to_cyclotomic(&self) -> Cyclotomic {
        Cyclotomic::from_rational(self.clone())
    }
    fn from_cyclotomic(c: &Cyclotomic) -> Option<Self> {
        c.to_rational()
    }
    fn conjugate(&self, _k: u64) -> Result<Self> {
        Ok(self.clone())
    }
    fn denominator(&self) -> BigInt {
        self.denom().clone()
    }
    fn order(&self) -> u64 {
        1
    }
}

impl Scalar for Cyclotomic {
    fn add_ref(&self, other: &Self) -> Self {
        Cyclotomic::add_ref(self, other)
    }
    fn sub_ref(&self, other: &Self) -> Self {
        Cyclotomic::sub_ref(self, other)
    }
    fn mul_ref(&self, other: &Self) -> Self {
        Cyclotomic::mul_ref(self, other)
    }
    fn inv(&self) -> Result<Self> {
        Cyclotomic::inv(self)
    }
    fn from_rational(q: BigRational) -> Self {
        Cyclotomic::from_rational(q)
    }
    fn to_rational(&self) -> Option<BigRational> {
        Cyclotomic::to_rational(self)
    }
    fn to_cyclotomic(&self) -> Cyclotomic {
        self.clone()
    }
    fn from_cyclotomic(c: &Cyclotomic) -> Option<Self> {
        Some(c.clone())
    }
    fn conjugate(&self, k: u64) -> Result<Self> {
        Cyclotomic::conjugate(self, k)
    }
    fn denominator(&self) -> BigInt {
        Cyclotomic::denominator(self)
    }
    fn is_algebraic_integer(&self) -> bool {
        Cyclotomic::is_algebraic_integer(self)
    }
    fn order(&self) -> u64 {
        Cyclotomic::order(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generic_square<C: Scalar>(x: &C) -> C {
        x.mul_ref(x)
    }

    #[test]
    fn both_fields_agree_on_rationals() {
        let q = BigRational::new(3.into(), 7.into());
        let a = generic_square(&q);
        let b = generic_square(&Cyclotomic::from_rational(q.clone()));
        assert_eq!(Scalar::to_rational(&b), Some(a));
        assert!(BigRational::from_cyclotomic(&Cyclotomic::zeta(3)).is_none());
        assert_eq!(Scalar::pow(&q, 3), BigRational::new(27.into(), 343.into()));
    }
}
