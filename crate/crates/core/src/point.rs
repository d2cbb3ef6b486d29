use std::fmt;

use crate::cyclotomic::Cyclotomic;
use crate::error::{Error, Result};
use crate::primes;
use crate::scalar::Scalar;

/// Point of affine N-space with coordinates in a cyclotomic field.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AffinePoint<C> {
    coords: Vec<C>,
}

impl<C: Scalar> AffinePoint<C> {
    pub fn new(coords: Vec<C>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("a point needs at least one coordinate".into()));
        }
        Ok(AffinePoint { coords })
    }

    pub fn from_ints(v: &[i64]) -> Self {
        AffinePoint {
            coords: v.iter().map(|&x| C::from_int(x)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[C] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<C> {
        self.coords
    }

    /// Least common multiple of the cyclotomic orders of the coordinates.
    pub fn order(&self) -> u64 {
        self.coords.iter().fold(1, |acc, c| primes::lcm(acc, c.order()))
    }

    pub fn conjugate(&self, k: u64) -> Result<Self> {
        Ok(AffinePoint {
            coords: self.coords.iter().map(|c| c.conjugate(k)).collect::<Result<_>>()?,
        })
    }

    pub fn to_cyclotomic(&self) -> AffinePoint<Cyclotomic> {
        AffinePoint {
            coords: self.coords.iter().map(|c| c.to_cyclotomic()).collect(),
        }
    }

    pub fn is_rational(&self) -> bool {
        self.coords.iter().all(|c| c.to_rational().is_some())
    }

    /// Coordinate-wise product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(AffinePoint {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a.mul_ref(b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(AffinePoint {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a.add_ref(b)).collect(),
        })
    }

    pub fn scale(&self, c: &C) -> Self {
        AffinePoint {
            coords: self.coords.iter().map(|a| a.mul_ref(c)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    pub fn convert<D: Scalar>(&self) -> Option<AffinePoint<D>> {
        let coords = self
            .coords
            .iter()
            .map(|c| D::from_cyclotomic(&c.to_cyclotomic()))
            .collect::<Option<Vec<D>>>()?;
        Some(AffinePoint { coords })
    }
}

impl<C: Scalar> fmt::Display for AffinePoint<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", c)?;
        }
        write!(f, ")")
    }
}
