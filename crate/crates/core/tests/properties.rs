use cycdyn::canonical::{
    c_bound, canonical_height_map, canonical_height_semigroup, canonical_height_word, CanonicalOptions, PeriodicWord,
    SemigroupMode,
};
use cycdyn::heights::weil_height;
use cycdyn::nullstellensatz::{find_certificate, residual};
use cycdyn::orbits::Word;
use cycdyn::poly::MultiPoly;
use cycdyn::{Cyclotomic, RatMorphism, RatPoint, RatSystem, Rational, Scalar};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn q(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn quadratic(a: i64, b: i64, c: i64) -> RatMorphism {
    let p = MultiPoly::from_terms(1, [(vec![2], q(a, 1)), (vec![1], q(b, 1)), (vec![0], q(c, 1))]);
    RatMorphism::new(vec![p]).unwrap()
}

fn point(n: i64, d: i64) -> RatPoint {
    RatPoint::new(vec![q(n, d)]).unwrap()
}

fn opts() -> CanonicalOptions {
    CanonicalOptions {
        tol: 1e-8,
        ..Default::default()
    }
}

fn cyc() -> impl Strategy<Value = Cyclotomic> {
    (prop::sample::select(vec![1u64, 3, 4, 5, 8, 12]), prop::collection::vec(-4i64..=4, 1..5)).prop_map(|(n, cs)| {
        Cyclotomic::from_terms(n, cs.into_iter().enumerate().map(|(j, c)| (j as i64, q(c, 1))))
    })
}

fn coeff() -> impl Strategy<Value = i64> {
    prop_oneof![-3i64..=-1, 1i64..=3]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn cyclotomic_field_laws(a in cyc(), b in cyc(), c in cyc()) {
        prop_assert_eq!(a.mul_ref(&b.add_ref(&c)), a.mul_ref(&b).add_ref(&a.mul_ref(&c)));
        prop_assert_eq!(a.mul_ref(&b), b.mul_ref(&a));
        if !a.is_zero_elem() {
            prop_assert!(a.mul_ref(&a.inv().unwrap()).is_one());
        }
        let n = num_integer::lcm(a.order(), b.order());
        for k in [1u64, 5, 7, 11] {
            if num_integer::gcd(k, n) == 1 {
                let lhs = a.mul_ref(&b).conjugate(k).unwrap();
                let rhs = a.conjugate(k).unwrap().mul_ref(&b.conjugate(k).unwrap());
                prop_assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn rational_height_formula(n in -10_000i64..10_000, d in 1i64..10_000) {
        let x = q(n, d);
        let want = (x.numer().clone().max(-x.numer().clone()).max(x.denom().clone()))
            .to_string().parse::<f64>().unwrap().ln();
        let h = weil_height(&RatPoint::new(vec![x]).unwrap(), 128).unwrap();
        prop_assert!((h.value() - want).abs() < 1e-12);
    }

    #[test]
    fn height_of_powers(n in 1i64..200, d in 1i64..200, e in 1u32..6) {
        let x = q(n, d);
        let h1 = weil_height(&RatPoint::new(vec![x.clone()]).unwrap(), 128).unwrap();
        let he = weil_height(&RatPoint::new(vec![Scalar::pow(&x, e)]).unwrap(), 128).unwrap();
        prop_assert!((he.value() - e as f64 * h1.value()).abs() < 1e-10);
        let hi = weil_height(&RatPoint::new(vec![x.inv().unwrap()]).unwrap(), 128).unwrap();
        prop_assert!((hi.value() - h1.value()).abs() < 1e-12);
    }

    #[test]
    fn certificates_are_exact(a in coeff(), b in -3i64..=3, c in -3i64..=3) {
        let lift = quadratic(a, b, c).lift();
        let cert = find_certificate(&lift, 4).unwrap().expect("no common zero");
        for i in 0..lift.nvars() {
            let r = residual(&lift, &cert, i);
            prop_assert!(r.is_zero());
        }
    }

    #[test]
    fn c_bound_controls_one_step(a in coeff(), b in -3i64..=3, c in -3i64..=3, n in -50i64..50, d in 1i64..50) {
        let f = quadratic(a, b, c);
        let sys = RatSystem::from_maps(vec![f.clone()]).unwrap();
        let cb = c_bound(&sys, 128).unwrap().max_upper();
        let x = point(n, d);
        let hx = weil_height(&x, 128).unwrap().value();
        let hf = weil_height(&f.evaluate(&x).unwrap(), 128).unwrap().value();
        prop_assert!((hf / 2.0 - hx).abs() <= cb + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn canonical_height_contracts(a in coeff(), b in -2i64..=2, c in -2i64..=2, n in -20i64..20, d in 1i64..6) {
        let o = opts();
        let f = quadratic(a, b, c);
        let sys = RatSystem::from_maps(vec![f.clone()]).unwrap();
        let cb = c_bound(&sys, 128).unwrap().max_upper();
        let x = point(n, d);
        let h = canonical_height_map(&f, &x, &o).unwrap();
        prop_assert!(h.estimate.error() <= o.tol);
        prop_assert!(h.estimate.upper() >= 0.0);
        let hx = weil_height(&x, 128).unwrap().value();
        prop_assert!((h.estimate.value() - hx).abs() <= 2.0 * cb + o.tol);
        let hf = canonical_height_map(&f, &f.evaluate(&x).unwrap(), &o).unwrap();
        prop_assert!((hf.estimate.value() - 2.0 * h.estimate.value()).abs() <= 3.0 * o.tol);
    }

    #[test]
    fn semigroup_identity(c in prop::sample::select(vec![-1i64, 1, 2]), n in -9i64..9, d in 1i64..4) {
        let o = opts();
        let sys = RatSystem::from_maps(vec![quadratic(1, 0, 0), quadratic(1, 0, c)]).unwrap();
        let x = point(n, d);
        let h = canonical_height_semigroup(&sys, &x, SemigroupMode::ExactSum, &o).unwrap();
        let mut sum = 0.0;
        for g in sys.maps() {
            sum += canonical_height_semigroup(&sys, &g.evaluate(&x).unwrap(), SemigroupMode::ExactSum, &o)
                .unwrap()
                .estimate
                .value();
        }
        prop_assert!((sum - 4.0 * h.estimate.value()).abs() <= 6.0 * o.tol);
        let cb = c_bound(&sys, 128).unwrap().max_upper();
        let w = canonical_height_word(&sys, &PeriodicWord(Word(vec![0, 1])), &x, &o).unwrap();
        prop_assert!((w.estimate.value() - h.estimate.value()).abs() <= 4.0 * cb + 2.0 * o.tol);
    }
}

#[test]
fn rational_and_cyclotomic_scalars_agree() {
    let o = opts();
    let f = quadratic(1, 0, -2);
    let x = point(3, 2);
    let hq = canonical_height_map(&f, &x, &o).unwrap();
    let fc = f.convert::<Cyclotomic>().unwrap();
    let xc = x.convert::<Cyclotomic>().unwrap();
    let hc = canonical_height_map(&fc, &xc, &o).unwrap();
    assert!((hq.estimate.value() - hc.estimate.value()).abs() < 1e-12);
    assert!(Rational::one() > Rational::zero());
}
