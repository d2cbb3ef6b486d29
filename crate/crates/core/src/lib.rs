//! Exact arithmetic dynamics over cyclotomic fields.
//!
//! The algorithms are generic over a [`Scalar`] field: `BigRational` for
//! systems defined over Q, and [`Cyclotomic`] for Q(ζ_n). The aliases below
//! fix the scalar for the common cases.

pub mod ball;
pub mod canonical;
pub mod cyclotomic;
pub mod error;
pub mod heights;
pub mod lattice;
pub mod linalg;
pub(crate) mod local;
pub mod morphism;
pub mod nullstellensatz;
pub mod orbits;
pub mod parse;
pub mod point;
pub mod poly;
pub mod primes;
pub mod scalar;
pub mod splitform;
pub mod upoly;

pub use ball::DEFAULT_PRECISION;
pub use cyclotomic::Cyclotomic;
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Rational = num_rational::BigRational;

pub type RatPoly = poly::MultiPoly<Rational>;
pub type CycPoly = poly::MultiPoly<Cyclotomic>;
pub type RatMorphism = morphism::AffineMorphism<Rational>;
pub type CycMorphism = morphism::AffineMorphism<Cyclotomic>;
pub type RatPoint = point::AffinePoint<Rational>;
pub type CycPoint = point::AffinePoint<Cyclotomic>;
pub type RatSystem = orbits::SemigroupSystem<Rational>;
pub type CycSystem = orbits::SemigroupSystem<Cyclotomic>;
