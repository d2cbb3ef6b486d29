//! Ideal norms in Z[ζ_n] as lattice indices.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::cyclotomic::{field_degree, Cyclotomic};
use crate::error::{Error, Result};
use crate::primes;

/// Upper-triangular basis kept in Hermite form modulo a multiple `modulus`
/// of the lattice determinant.
struct ModularHnf {
    rows: Vec<Vec<BigInt>>,
    modulus: BigInt,
}

impl ModularHnf {
    fn new(dim: usize, modulus: BigInt) -> Self {
        let rows = (0..dim)
            .map(|i| {
                let mut r = vec![BigInt::zero(); dim];
                r[i] = modulus.clone();
                r
            })
            .collect();
        ModularHnf { rows, modulus }
    }

    fn insert(&mut self, mut v: Vec<BigInt>) {
        let dim = self.rows.len();
        for x in v.iter_mut() {
            *x = x.mod_floor(&self.modulus);
        }
        for i in 0..dim {
            if v[i].is_zero() {
                continue;
            }
            let h = self.rows[i][i].clone();
            let e = h.extended_gcd(&v[i]);
            let (g, a, b) = (e.gcd, e.x, e.y);
            let hi = h.div_floor(&g);
            let vi = v[i].div_floor(&g);
            let row = &self.rows[i];
            let new_row: Vec<BigInt> = row.iter().zip(&v).map(|(r, x)| &a * r + &b * x).collect();
            let new_v: Vec<BigInt> = row.iter().zip(&v).map(|(r, x)| &vi * r - &hi * x).collect();
            let mut new_row = new_row;
            new_row[i] = g.abs();
            for x in new_row.iter_mut().skip(i + 1) {
                *x = x.mod_floor(&self.modulus);
            }
            v = new_v;
            for x in v.iter_mut() {
                *x = x.mod_floor(&self.modulus);
            }
            self.rows[i] = new_row;
        }
    }

    fn determinant(&self) -> BigInt {
        self.rows
            .iter()
            .enumerate()
            .fold(BigInt::one(), |acc, (i, r)| acc * &r[i])
    }
}

/// Absolute norm of the ideal of Z[ζ_n] generated by `gens`, where `n` is the
/// least common multiple of `order` and the generators' orders.
pub fn ideal_norm(gens: &[Cyclotomic], order: u64) -> Result<BigInt> {
    let n = gens.iter().fold(order.max(1), |acc, g| primes::lcm(acc, g.order()));
    let gens: Vec<Cyclotomic> = gens.iter().map(|g| g.promote(n)).collect();
    if let Some(bad) = gens.iter().find(|g| !g.is_algebraic_integer()) {
        return Err(Error::InvalidInput(format!("ideal generator {bad} is not integral")));
    }
    let Some(first) = gens.iter().find(|g| !g.is_zero_elem()) else {
        return Err(Error::InvalidInput("ideal generated by zero".into()));
    };
    let dim = field_degree(n);
    let modulus = first.field_norm().numer().abs();
    if modulus.is_one() {
        return Ok(BigInt::one());
    }
    let mut hnf = ModularHnf::new(dim, modulus);
    let zeta = Cyclotomic::zeta(n);
    for g in gens.iter().filter(|g| !g.is_zero_elem()) {
        let mut x = g.clone();
        for _ in 0..dim {
            hnf.insert(x.coeffs().iter().map(|c| c.numer().clone()).collect());
            x = x.mul_ref(&zeta);
        }
    }
    Ok(hnf.determinant())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_ideals() {
        let one = Cyclotomic::one();
        assert_eq!(ideal_norm(&[one], 1).unwrap(), BigInt::from(1));
        let i = Cyclotomic::zeta(4);
        let g = [Cyclotomic::from_int(2), Cyclotomic::one().add_ref(&i)];
        assert_eq!(ideal_norm(&g, 4).unwrap(), BigInt::from(2));
        assert_eq!(ideal_norm(&[Cyclotomic::from_int(3)], 4).unwrap(), BigInt::from(9));
        assert_eq!(ideal_norm(&[Cyclotomic::from_int(6), Cyclotomic::from_int(4)], 1).unwrap(), BigInt::from(2));
    }

    #[test]
    fn rejects_bad_generators() {
        assert!(ideal_norm(&[Cyclotomic::zero()], 3).is_err());
        let half = Cyclotomic::from_rational(num_rational::BigRational::new(1.into(), 2.into()));
        assert!(ideal_norm(&[half], 1).is_err());
    }

    #[test]
    fn coprime_generators_give_unit_ideal() {
        let z5 = Cyclotomic::zeta(5);
        let a = Cyclotomic::one().sub_ref(&z5); // above 5
        let b = Cyclotomic::from_int(2);
        assert_eq!(ideal_norm(&[a.clone()], 5).unwrap(), BigInt::from(5));
        assert_eq!(ideal_norm(&[a, b], 5).unwrap(), BigInt::from(1));
    }
}
