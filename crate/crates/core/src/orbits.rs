//! Semigroup orbits: level sets, collisions, preperiodicity, growth along
//! words, and the house bounds `L` and `M` with the Σ_A search.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::ball::Ball;
use crate::cyclotomic::{galois_units, Cyclotomic};
use crate::error::{Error, Result};
use crate::heights::{house, integrality_scaler, rational_abs, HeightEstimate, RationalPlace};
use crate::morphism::{AffineMorphism, ProjectiveLift};
use crate::nullstellensatz::{
    default_e_max, effective_constants, find_certificate, Certificate, EffectiveConstants,
};
use crate::point::AffinePoint;
use crate::primes;
use crate::scalar::Scalar;

/// Precision of the cached certificate constants.
const CONSTANTS_PREC: u32 = 256;

/// Lift, certificate and explicit constants of one generator.
#[derive(Clone, Debug)]
pub struct CertifiedMap<C> {
    pub lift: ProjectiveLift<C>,
    pub certificate: Certificate<C>,
    pub constants: EffectiveConstants,
}

/// Finite set of polynomial self-maps of affine N-space, each of degree ≥ 2.
#[derive(Clone, Debug)]
pub struct SemigroupSystem<C> {
    names: Vec<String>,
    maps: Vec<AffineMorphism<C>>,
    e_max: Option<u32>,
    certified: OnceLock<std::result::Result<Vec<CertifiedMap<C>>, Error>>,
}

impl<C: Scalar> SemigroupSystem<C> {
    pub fn new(names: Vec<String>, maps: Vec<AffineMorphism<C>>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidInput("a system needs at least one map".into()));
        }
        if names.len() != maps.len() {
            return Err(Error::InvalidInput("one name per map is required".into()));
        }
        let n = maps[0].dim();
        for (name, f) in names.iter().zip(&maps) {
            if f.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: f.dim(),
                });
            }
            if f.degree() < 2 {
                return Err(Error::InvalidInput(format!("map {name} has degree < 2")));
            }
        }
        Ok(SemigroupSystem {
            names,
            maps,
            e_max: None,
            certified: OnceLock::new(),
        })
    }

    /// Names `f1, f2, …`.
    pub fn from_maps(maps: Vec<AffineMorphism<C>>) -> Result<Self> {
        let names = (1..=maps.len()).map(|i| format!("f{i}")).collect();
        Self::new(names, maps)
    }

    /// Cap on the certificate degree search (default `2·d·(N+1)`).
    pub fn with_e_max(mut self, e_max: u32) -> Self {
        self.e_max = Some(e_max);
        self.certified = OnceLock::new();
        self
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn maps(&self) -> &[AffineMorphism<C>] {
        &self.maps
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dim(&self) -> usize {
        self.maps[0].dim()
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.maps.iter().map(|f| f.degree()).collect()
    }

    pub fn common_degree(&self) -> Option<u32> {
        let d = self.maps[0].degree();
        self.maps.iter().all(|f| f.degree() == d).then_some(d)
    }

    /// `D = d_1 + … + d_s`.
    pub fn total_degree(&self) -> u64 {
        self.maps.iter().map(|f| f.degree() as u64).sum()
    }

    /// Cyclotomic order containing every coefficient.
    pub fn order(&self) -> u64 {
        self.maps.iter().fold(1, |acc, f| primes::lcm(acc, f.order()))
    }

    pub fn is_rational(&self) -> bool {
        self.maps.iter().all(|f| f.coefficients().all(|c| c.to_rational().is_some()))
    }

    /// Certificates and constants for every generator, computed once.
    pub fn certified(&self) -> Result<&[CertifiedMap<C>]> {
        let r = self.certified.get_or_init(|| {
            self.maps
                .iter()
                .zip(&self.names)
                .map(|(f, name)| {
                    let lift = f.lift();
                    let e_max = self
                        .e_max
                        .unwrap_or_else(|| default_e_max(lift.degree(), lift.nvars()))
                        .max(lift.degree());
                    let cert = find_certificate(&lift, e_max)?.ok_or_else(|| {
                        Error::Hypothesis(format!(
                            "map {name} has no Nullstellensatz certificate with e <= {e_max}; \
                             its lift may have a common zero"
                        ))
                    })?;
                    let constants = effective_constants(&lift, &cert, CONSTANTS_PREC)?;
                    Ok(CertifiedMap {
                        lift,
                        certificate: cert,
                        constants,
                    })
                })
                .collect()
        });
        r.as_ref().map(|v| v.as_slice()).map_err(|e| e.clone())
    }

    fn check_point(&self, p: &AffinePoint<C>) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.dim(),
            });
        }
        Ok(())
    }
}

/// Generator indices in application order; stored zero-based, shown one-based.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&self, i: usize) -> Word {
        let mut v = self.0.clone();
        v.push(i);
        Word(v)
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }

    /// Parse `"1,2,1"` (one-based).
    pub fn parse(s: &str, s_max: usize) -> Result<Word> {
        let s = s.trim().trim_start_matches('[').trim_end_matches(']');
        if s.trim().is_empty() {
            return Ok(Word::default());
        }
        s.split(',')
            .map(|t| match t.trim().parse::<usize>() {
                Ok(i) if (1..=s_max).contains(&i) => Ok(i - 1),
                _ => Err(Error::InvalidInput(format!(
                    "word entry '{}' is not an index in 1..={s_max}",
                    t.trim()
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }

    /// `F_{i_k} ∘ … ∘ F_{i_1}(p)`.
    pub fn apply<C: Scalar>(&self, sys: &SemigroupSystem<C>, p: &AffinePoint<C>) -> Result<AffinePoint<C>> {
        let mut q = p.clone();
        for &i in &self.0 {
            let f = sys.maps.get(i).ok_or_else(|| {
                Error::InvalidInput(format!("word index {} exceeds the {} generators", i + 1, sys.len()))
            })?;
            q = f.evaluate(&q)?;
        }
        Ok(q)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.one_based().iter().map(|i| i.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

/// Resource caps for exact enumeration.
#[derive(Clone, Copy, Debug)]
pub struct OrbitCaps {
    /// Maximum number of points (or words, or sums) held at once.
    pub max_points: usize,
    /// Maximum bit size of a single point.
    pub max_bits: u64,
}

impl Default for OrbitCaps {
    fn default() -> Self {
        OrbitCaps {
            max_points: 200_000,
            max_bits: 1 << 20,
        }
    }
}

pub(crate) fn scalar_bits<C: Scalar>(c: &C) -> u64 {
    match c.to_rational() {
        Some(q) => q.numer().bits() + q.denom().bits(),
        None => c
            .to_cyclotomic()
            .coeffs()
            .iter()
            .map(|q| q.numer().bits() + q.denom().bits())
            .sum(),
    }
}

pub(crate) fn point_bits<C: Scalar>(p: &AffinePoint<C>) -> u64 {
    p.coords().iter().map(scalar_bits).sum()
}

pub(crate) fn checked_image<C: Scalar>(f: &AffineMorphism<C>, q: &AffinePoint<C>, caps: &OrbitCaps) -> Result<AffinePoint<C>> {
    let y = f.evaluate(q)?;
    if point_bits(&y) > caps.max_bits {
        return Err(Error::overflow("bit size of an orbit point", caps.max_bits));
    }
    Ok(y)
}

/// Level sets `𝓕_0(P), 𝓕_1(P), …`, each sorted, with the first word (in
/// canonical enumeration order) reaching each point.
#[derive(Clone, Debug)]
pub struct OrbitLevels<C> {
    pub levels: Vec<Vec<(AffinePoint<C>, Word)>>,
}

impl<C: Scalar> OrbitLevels<C> {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn points(&self, k: usize) -> impl Iterator<Item = &AffinePoint<C>> {
        self.levels[k].iter().map(|(p, _)| p)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.len()).collect()
    }

    /// Word reaching `p` at level `k`, if `p ∈ 𝓕_k(P)`.
    pub fn find(&self, k: usize, p: &AffinePoint<C>) -> Option<&Word> {
        let l = &self.levels[k];
        l.binary_search_by(|(q, _)| q.cmp(p)).ok().map(|i| &l[i].1)
    }
}

fn next_level<C: Scalar>(
    sys: &SemigroupSystem<C>,
    prev: &[(AffinePoint<C>, Word)],
    caps: &OrbitCaps,
) -> Result<Vec<(AffinePoint<C>, Word)>> {
    let images: Vec<Result<Vec<(AffinePoint<C>, Word)>>> = prev
        .par_iter()
        .map(|(q, w)| {
            sys.maps
                .iter()
                .enumerate()
                .map(|(i, f)| Ok((checked_image(f, q, caps)?, w.push(i))))
                .collect()
        })
        .collect();
    let mut level: BTreeMap<AffinePoint<C>, Word> = BTreeMap::new();
    for r in images {
        for (y, w) in r? {
            level.entry(y).or_insert(w);
        }
        if level.len() > caps.max_points {
            return Err(Error::overflow("points in an orbit level", caps.max_points as u64));
        }
    }
    Ok(level.into_iter().collect())
}

pub fn orbit_levels<C: Scalar>(
    sys: &SemigroupSystem<C>,
    p: &AffinePoint<C>,
    depth: usize,
    caps: &OrbitCaps,
) -> Result<OrbitLevels<C>> {
    sys.check_point(p)?;
    let mut levels = vec![vec![(p.clone(), Word::default())]];
    for _ in 0..depth {
        let next = next_level(sys, levels.last().unwrap(), caps)?;
        levels.push(next);
    }
    Ok(OrbitLevels { levels })
}

/// Whether the forward orbit of `p` is finite, decided by building levels
/// until one adds nothing new (then every later level is also old).
/// `None` when `depth_cap` levels were not enough.
pub fn orbit_closure<C: Scalar>(
    sys: &SemigroupSystem<C>,
    p: &AffinePoint<C>,
    depth_cap: usize,
    caps: &OrbitCaps,
) -> Result<Option<BTreeSet<AffinePoint<C>>>> {
    sys.check_point(p)?;
    let mut seen: BTreeSet<AffinePoint<C>> = BTreeSet::new();
    seen.insert(p.clone());
    let mut frontier = vec![(p.clone(), Word::default())];
    for _ in 0..depth_cap {
        let next = next_level(sys, &frontier, caps)?;
        let fresh: Vec<_> = next.into_iter().filter(|(q, _)| !seen.contains(q)).collect();
        if fresh.is_empty() {
            return Ok(Some(seen));
        }
        seen.extend(fresh.iter().map(|(q, _)| q.clone()));
        if seen.len() > caps.max_points {
            return Err(Error::overflow("points in an orbit", caps.max_points as u64));
        }
        frontier = fresh;
    }
    Ok(None)
}

/// `𝓕_n(P) ∩ 𝓕_m(P) ≠ ∅` with `n < m`, witnessed by the least common point.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "C: Scalar"))]
pub struct Collision<C> {
    pub n: usize,
    pub m: usize,
    #[serde(serialize_with = "ser_display")]
    pub point: AffinePoint<C>,
    pub word_n: Word,
    pub word_m: Word,
}

pub(crate) fn ser_display<T: fmt::Display, S: serde::Serializer>(
    v: &T,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

pub fn collision_search<C: Scalar>(
    sys: &SemigroupSystem<C>,
    p: &AffinePoint<C>,
    n_max: usize,
    caps: &OrbitCaps,
) -> Result<Vec<Collision<C>>> {
    if n_max == 0 {
        return Err(Error::InvalidInput("n_max must be at least 1".into()));
    }
    let lv = orbit_levels(sys, p, n_max, caps)?;
    Ok(collisions_in(&lv))
}

pub(crate) fn collisions_in<C: Scalar>(lv: &OrbitLevels<C>) -> Vec<Collision<C>> {
    let mut out = Vec::new();
    for n in 0..lv.levels.len() {
        for m in n + 1..lv.levels.len() {
            if let Some((q, wn, wm)) = first_common(&lv.levels[n], &lv.levels[m]) {
                out.push(Collision {
                    n,
                    m,
                    point: q.clone(),
                    word_n: wn.clone(),
                    word_m: wm.clone(),
                });
            }
        }
    }
    out
}

type Entry<C> = (AffinePoint<C>, Word);

fn first_common<'a, C: Scalar>(
    a: &'a [Entry<C>],
    b: &'a [Entry<C>],
) -> Option<(&'a AffinePoint<C>, &'a Word, &'a Word)> {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return Some((&a[i].0, &a[i].1, &b[j].1)),
        }
    }
    None
}

/// Witness `Q = path(P)` with `Q = ret(Q)`.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "C: Scalar"))]
pub struct PiWitness<C> {
    pub k: usize,
    pub l: usize,
    #[serde(serialize_with = "ser_display")]
    pub point: AffinePoint<C>,
    pub path: Word,
    pub ret: Word,
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "C: Scalar"))]
pub struct PiMembership<C> {
    pub found: Option<PiWitness<C>>,
    pub k_max: usize,
    pub l_max: usize,
}

/// Bounded search for a path point `Q` (path length ≤ `k_max`) lying in
/// `𝓕_l(Q)` for some `1 ≤ l ≤ l_max`.
pub fn pi_membership<C: Scalar>(
    sys: &SemigroupSystem<C>,
    p: &AffinePoint<C>,
    k_max: usize,
    l_max: usize,
    caps: &OrbitCaps,
) -> Result<PiMembership<C>> {
    let lv = orbit_levels(sys, p, k_max, caps)?;
    let mut tested: BTreeSet<&AffinePoint<C>> = BTreeSet::new();
    if l_max > 0 {
        for (k, level) in lv.levels.iter().enumerate() {
            for (q, path) in level {
                if !tested.insert(q) {
                    continue;
                }
                let own = orbit_levels(sys, q, l_max, caps)?;
                for l in 1..=l_max {
                    if let Some(ret) = own.find(l, q) {
                        return Ok(PiMembership {
                            found: Some(PiWitness {
                                k,
                                l,
                                point: q.clone(),
                                path: path.clone(),
                                ret: ret.clone(),
                            }),
                            k_max,
                            l_max,
                        });
                    }
                }
            }
        }
    }
    Ok(PiMembership {
        found: None,
        k_max,
        l_max,
    })
}

/// Sizes `max(1, |x_i|_v)` along a word, with the threshold above which
/// they must strictly increase.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    #[serde(serialize_with = "ser_display")]
    pub place: RationalPlace,
    #[serde(serialize_with = "ser_display")]
    pub threshold: BigRational,
    pub precondition_met: bool,
    #[serde(serialize_with = "ser_display_vec")]
    pub sizes: Vec<BigRational>,
    pub strictly_increasing: bool,
}

pub(crate) fn ser_display_vec<T: fmt::Display, S: serde::Serializer>(
    v: &[T],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

fn rational_size(xs: &[BigRational], v: RationalPlace) -> BigRational {
    let one = BigRational::one();
    xs.iter()
        .map(|x| rational_abs(x, v).to_rational())
        .fold(one, |a, b| a.max(b))
}

/// Threshold `max_i max(1, |G_i|_p)` at a prime, or `max_i max(1, C_i^{-1} |G_i|)`
/// at infinity, over a rational system.
pub fn growth_threshold<C: Scalar>(sys: &SemigroupSystem<C>, v: RationalPlace) -> Result<BigRational> {
    if !sys.is_rational() {
        return Err(Error::InvalidInput("growth thresholds need rational coefficients".into()));
    }
    let mut t = BigRational::one();
    for cm in sys.certified()? {
        let k = &cm.constants;
        let g = match v {
            RationalPlace::Finite(p) => k
                .g_norm_padic(p)
                .map(|a| a.to_rational())
                .unwrap_or_else(BigRational::zero),
            RationalPlace::Archimedean => {
                k.g_norm_rational().expect("rational system") / k.c_lower.clone()
            }
        };
        t = t.max(g);
    }
    Ok(t)
}

pub fn growth_check<C: Scalar>(
    sys: &SemigroupSystem<C>,
    p: &AffinePoint<C>,
    v: RationalPlace,
    word: &Word,
) -> Result<GrowthReport> {
    sys.check_point(p)?;
    let threshold = growth_threshold(sys, v)?;
    let to_q = |q: &AffinePoint<C>| -> Result<Vec<BigRational>> {
        q.coords()
            .iter()
            .map(|c| c.to_rational())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::InvalidInput("growth checks need a rational point".into()))
    };
    let mut q = p.clone();
    let mut sizes = vec![rational_size(&to_q(&q)?, v)];
    for &i in &word.0 {
        let f = sys
            .maps
            .get(i)
            .ok_or_else(|| Error::InvalidInput(format!("word index {} out of range", i + 1)))?;
        q = f.evaluate(&q)?;
        sizes.push(rational_size(&to_q(&q)?, v));
    }
    let precondition_met = sizes[0] > threshold;
    let strictly_increasing = sizes.windows(2).all(|w| w[1] > w[0]);
    Ok(GrowthReport {
        place: v,
        threshold,
        precondition_met,
        sizes,
        strictly_increasing,
    })
}

fn all_embeddings<C: Scalar>(sys: &SemigroupSystem<C>) -> Vec<u64> {
    galois_units(sys.order())
}

/// `L = max_σ max(max_i max(1, C_i^{-1}|σ(G_i)|), A)`.
pub fn house_bound_l<C: Scalar>(sys: &SemigroupSystem<C>, a: &BigRational, prec: u32) -> Result<Ball> {
    if a.is_negative() {
        return Err(Error::InvalidInput("A must be non-negative".into()));
    }
    let cert = sys.certified()?;
    let mut best = Ball::from_rational(&a.clone().max(BigRational::one()), prec);
    for k in all_embeddings(sys) {
        for cm in cert {
            let c = &cm.constants;
            let v = c.g_norm(k).div(&Ball::from_rational(&c.c_lower, prec))?;
            best = best.max(&v);
        }
    }
    Ok(best.with_precision(prec))
}

/// The constants `m` and `M` bounding the house of Σ_A points.
#[derive(Clone, Debug, Serialize)]
pub struct BoundM {
    pub degree: u32,
    pub generators: usize,
    #[serde(serialize_with = "ser_display")]
    pub a: BigRational,
    #[serde(serialize_with = "ser_display")]
    pub m: BigInt,
    pub bound: HeightEstimate,
}

pub fn house_bound_m<C: Scalar>(sys: &SemigroupSystem<C>, a: &BigRational, prec: u32) -> Result<BoundM> {
    let d = sys
        .common_degree()
        .ok_or_else(|| Error::Hypothesis("generators must share one degree d >= 3".into()))?;
    if d < 3 {
        return Err(Error::Hypothesis(format!("common degree d = {d} but d >= 3 is required")));
    }
    if *a < BigRational::one() {
        return Err(Error::Hypothesis("A >= 1 is required".into()));
    }
    let cert = sys.certified()?;
    let s = sys.len();
    // least m with C_i |σ(G_i)|^{-1} > 1/m, i.e. m > |σ(G_i)| / C_i
    let m = if sys.is_rational() {
        let r = cert
            .iter()
            .map(|cm| cm.constants.g_norm_rational().unwrap() / cm.constants.c_lower.clone())
            .max()
            .unwrap();
        r.floor().to_integer() + 1
    } else {
        let mut r = Ball::zero(prec);
        for k in all_embeddings(sys) {
            for cm in cert {
                let c = &cm.constants;
                r = r.max(&c.g_norm(k).div(&Ball::from_rational(&c.c_lower, prec))?);
            }
        }
        r.upper().to_rational().floor().to_integer() + 1
    };
    let m2a = BigRational::from_integer(BigInt::from(2 * s as u64) * &m * &m) * a;
    let first = Ball::from_rational(&m2a, prec);
    let mut best: Option<Ball> = None;
    for k in all_embeddings(sys) {
        let mut inner: Option<Ball> = None;
        for cm in cert {
            let c = &cm.constants;
            let v = Ball::from_rational(&c.d_upper, prec).mul(c.f_norm(k));
            inner = Some(match inner {
                None => v,
                Some(b) => b.max(&v),
            });
        }
        let total = first.add(&inner.unwrap());
        best = Some(match best {
            None => total,
            Some(b) => b.max(&total),
        });
    }
    Ok(BoundM {
        degree: d,
        generators: s,
        a: a.clone(),
        m,
        bound: HeightEstimate::from_ball(best.unwrap().with_precision(prec)),
    })
}

/// Finite enumerable sets of candidate points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CandidateBox {
    /// Coordinates `a/b` with `|a| <= num`, `1 <= b <= den`.
    Rational { num: u64, den: u64 },
    /// Coordinates in `Z[ζ_order]` with power-basis coefficients in `[-bound, bound]`.
    CyclotomicInteger { order: u64, coeff_bound: u64 },
}

impl CandidateBox {
    /// Distinct coordinate values, sorted.
    pub fn coordinate_values(&self) -> Result<Vec<Cyclotomic>> {
        let mut set: BTreeSet<Cyclotomic> = BTreeSet::new();
        match *self {
            CandidateBox::Rational { num, den } => {
                for b in 1..=den.max(1) {
                    for a in -(num as i64)..=(num as i64) {
                        let q = BigRational::new(a.into(), (b as i64).into());
                        set.insert(Cyclotomic::from_rational(q));
                    }
                }
            }
            CandidateBox::CyclotomicInteger { order, coeff_bound } => {
                let n = crate::cyclotomic::field_degree(order);
                let c = coeff_bound as i64;
                let width = (2 * c + 1) as u64;
                let total = width.checked_pow(n as u32).filter(|&t| t <= 10_000_000).ok_or_else(|| {
                    Error::overflow("cyclotomic box size", 10_000_000)
                })?;
                for mut idx in 0..total {
                    let mut coeffs = Vec::with_capacity(n);
                    for _ in 0..n {
                        coeffs.push(BigRational::from_integer(BigInt::from((idx % width) as i64 - c)));
                        idx /= width;
                    }
                    set.insert(Cyclotomic::from_coeffs(order, coeffs)?);
                }
            }
        }
        Ok(set.into_iter().collect())
    }

    /// All points of the box in dimension `dim`.
    pub fn points<C: Scalar>(&self, dim: usize, cap: usize) -> Result<Vec<AffinePoint<C>>> {
        let vals = self
            .coordinate_values()?
            .iter()
            .map(|c| {
                C::from_cyclotomic(c)
                    .ok_or_else(|| Error::InvalidInput(format!("box value {c} is not in the coefficient field")))
            })
            .collect::<Result<Vec<C>>>()?;
        let count = (vals.len() as u64).checked_pow(dim as u32).unwrap_or(u64::MAX);
        if count > cap as u64 {
            return Err(Error::overflow("points in the candidate box", cap as u64));
        }
        let mut out = Vec::with_capacity(count as usize);
        for mut idx in 0..count {
            let mut coords = Vec::with_capacity(dim);
            for _ in 0..dim {
                coords.push(vals[(idx % vals.len() as u64) as usize].clone());
                idx /= vals.len() as u64;
            }
            coords.reverse();
            out.push(AffinePoint::new(coords)?);
        }
        out.sort();
        Ok(out)
    }
}

/// A point of Σ_A found in the box.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "C: Scalar"))]
pub struct SigmaHit<C> {
    #[serde(serialize_with = "ser_display")]
    pub point: AffinePoint<C>,
    pub n: usize,
    /// Length-`n` word whose value lies in the combination set.
    pub word: Word,
    #[serde(serialize_with = "ser_display")]
    pub value: AffinePoint<C>,
    pub house: HeightEstimate,
    /// `house <= M`, when `M` is defined (`d >= 3`).
    pub within_m: Option<bool>,
    /// Whether `E·P` has algebraic-integer coordinates.
    pub scaled_integral: bool,
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "C: Scalar"))]
pub struct SigmaReport<C> {
    pub hits: Vec<SigmaHit<C>>,
    pub candidates: usize,
    pub n_max: usize,
    pub bound_m: Option<BoundM>,
    /// Reason `M` is unavailable.
    pub bound_m_unavailable: Option<String>,
    #[serde(serialize_with = "ser_display")]
    pub e_scaler: BigInt,
    pub empirical_max_house: Option<HeightEstimate>,
}

/// Searches the box for points `P` with `𝓕_n(P) ∩ ℒ_{n-1,A}(𝓕; P) ≠ ∅`
/// for some `1 <= n <= n_max`, where the coefficients `γ` range over the
/// members of `gammas` lying in `𝓗_{A^{d^{n-1}}}`.
pub fn sigma_a_search<C: Scalar>(
    sys: &SemigroupSystem<C>,
    a: &BigRational,
    gammas: &[AffinePoint<C>],
    candidates: &CandidateBox,
    n_max: usize,
    caps: &OrbitCaps,
    prec: u32,
) -> Result<SigmaReport<C>> {
    let d = sys
        .common_degree()
        .ok_or_else(|| Error::Hypothesis("the Σ_A search needs a common degree".into()))?;
    if a.is_negative() {
        return Err(Error::InvalidInput("A must be non-negative".into()));
    }
    for g in gammas {
        sys.check_point(g)?;
    }
    let cert = sys.certified()?;
    let mut polys = Vec::new();
    for cm in cert {
        polys.extend(cm.lift.components().iter().cloned());
        polys.extend(cm.certificate.polys());
    }
    let e_scaler = integrality_scaler(&polys);
    let (bound_m, bound_m_unavailable) = match house_bound_m(sys, a, prec) {
        Ok(b) => (Some(b), None),
        Err(Error::Hypothesis(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    // admissible γ per level n
    let mut admissible: Vec<Vec<AffinePoint<C>>> = vec![Vec::new()];
    for n in 1..=n_max {
        let e = (d as u64)
            .checked_pow((n - 1) as u32)
            .and_then(|e| u32::try_from(e).ok())
            .ok_or_else(|| Error::overflow("exponent d^(n-1)", u32::MAX as u64))?;
        let limit = num_traits::pow::pow(a.clone(), e as usize);
        let limit_ball = Ball::from_rational(&limit, prec);
        let mut ok = Vec::new();
        for g in gammas {
            if !g.coords().iter().all(|c| c.is_algebraic_integer()) {
                continue;
            }
            let h = house(g, prec)?;
            // inclusive when the enclosure cannot separate house from the limit
            if !limit_ball.lt(h.ball()) {
                ok.push(g.clone());
            }
        }
        admissible.push(ok);
    }
    let pts: Vec<AffinePoint<C>> = candidates.points(sys.dim(), caps.max_points)?;
    let results: Vec<Result<Option<SigmaHit<C>>>> = pts
        .par_iter()
        .map(|p| sigma_point(sys, p, &admissible, n_max, caps))
        .collect();
    let e_q = C::from_rational(BigRational::from_integer(e_scaler.clone()));
    let mut hits = Vec::new();
    for r in results {
        let Some(mut h) = r? else { continue };
        h.house = house(&h.point, prec)?;
        h.within_m = bound_m.as_ref().map(|m| !m.bound.ball().lt(h.house.ball()));
        h.scaled_integral = h.point.coords().iter().all(|c| c.mul_ref(&e_q).is_algebraic_integer());
        hits.push(h);
    }
    let empirical_max_house = hits
        .iter()
        .map(|h| h.house.ball().clone())
        .reduce(|a, b| a.max(&b))
        .map(HeightEstimate::from_ball);
    Ok(SigmaReport {
        hits,
        candidates: pts.len(),
        n_max,
        bound_m,
        bound_m_unavailable,
        e_scaler,
        empirical_max_house,
    })
}

fn sigma_point<C: Scalar>(
    sys: &SemigroupSystem<C>,
    p: &AffinePoint<C>,
    admissible: &[Vec<AffinePoint<C>>],
    n_max: usize,
    caps: &OrbitCaps,
) -> Result<Option<SigmaHit<C>>> {
    let dim = sys.dim();
    let zero = AffinePoint::new(vec![C::zero(); dim])?;
    // all word values by length, with multiplicity
    let mut by_len: Vec<Vec<(Word, AffinePoint<C>)>> = vec![vec![(Word::default(), p.clone())]];
    for n in 1..=n_max {
        let gam = &admissible[n];
        if n > by_len.len() - 1 {
            let prev = by_len.last().unwrap();
            if prev.len() * sys.len() > caps.max_points {
                return Err(Error::overflow("words in the Σ_A search", caps.max_points as u64));
            }
            let mut next = Vec::with_capacity(prev.len() * sys.len());
            for (w, q) in prev {
                for (i, f) in sys.maps.iter().enumerate() {
                    next.push((w.push(i), checked_image(f, q, caps)?));
                }
            }
            by_len.push(next);
        }
        if gam.is_empty() {
            continue;
        }
        let mut sums: BTreeSet<AffinePoint<C>> = BTreeSet::new();
        sums.insert(zero.clone());
        for level in &by_len[..n] {
            for (_, v) in level {
                let mut next = BTreeSet::new();
                for s in &sums {
                    for g in gam {
                        next.insert(s.add(&g.hadamard(v)?)?);
                    }
                }
                if next.len() > caps.max_points {
                    return Err(Error::overflow("combinations in the Σ_A search", caps.max_points as u64));
                }
                sums = next;
            }
        }
        for (w, v) in &by_len[n] {
            if sums.contains(v) {
                return Ok(Some(SigmaHit {
                    point: p.clone(),
                    n,
                    word: w.clone(),
                    value: v.clone(),
                    house: HeightEstimate::exact_zero(64),
                    within_m: None,
                    scaled_integral: false,
                }));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_point, parse_poly, Context};

    fn sys(maps: &[&[&str]], n: usize, order: u64) -> SemigroupSystem<Cyclotomic> {
        let ctx = Context { nvars: n, order };
        let maps = maps
            .iter()
            .map(|comps| {
                AffineMorphism::new(comps.iter().map(|c| parse_poly(c, ctx).unwrap()).collect()).unwrap()
            })
            .collect();
        SemigroupSystem::from_maps(maps).unwrap()
    }

    fn pt(s: &str, order: u64) -> AffinePoint<Cyclotomic> {
        AffinePoint::new(parse_point(s, order).unwrap()).unwrap()
    }

    fn strs(lv: &OrbitLevels<Cyclotomic>) -> Vec<Vec<String>> {
        lv.levels
            .iter()
            .map(|l| l.iter().map(|(p, _)| p.to_string()).collect())
            .collect()
    }

    #[test]
    fn levels() {
        let caps = OrbitCaps::default();
        let s = sys(&[&["X1^2 - 1"]], 1, 1);
        let lv = orbit_levels(&s, &pt("0", 1), 3, &caps).unwrap();
        assert_eq!(strs(&lv), vec![vec!["(0)"], vec!["(-1)"], vec!["(0)"], vec!["(-1)"]]);
        let s = sys(&[&["X1^2"], &["X1^2 - 1"]], 1, 1);
        let lv = orbit_levels(&s, &pt("1", 1), 2, &caps).unwrap();
        assert_eq!(lv.sizes(), vec![1, 2, 3]);
        assert_eq!(orbit_levels(&s, &pt("1", 1), 0, &caps).unwrap().sizes(), vec![1]);
    }

    #[test]
    fn collisions() {
        let caps = OrbitCaps::default();
        let s = sys(&[&["X1^2 - 1"]], 1, 1);
        let c = collision_search(&s, &pt("0", 1), 3, &caps).unwrap();
        assert!(c.iter().any(|c| c.n == 1 && c.m == 3 && c.point.to_string() == "(-1)"));
        let s = sys(&[&["X1^2"]], 1, 1);
        assert!(collision_search(&s, &pt("2", 1), 8, &caps).unwrap().is_empty());
        let s = sys(&[&["X1^2"], &["X1^3"]], 1, 3);
        let c = collision_search(&s, &pt("z3", 3), 2, &caps).unwrap();
        let c12 = c.iter().find(|c| c.n == 1 && c.m == 2).unwrap();
        assert_eq!(c12.point.to_string(), "(1)");
    }

    #[test]
    fn preperiodic_search() {
        let caps = OrbitCaps::default();
        let s = sys(&[&["X1^2 - 1"]], 1, 1);
        let r = pi_membership(&s, &pt("0", 1), 4, 4, &caps).unwrap();
        let w = r.found.unwrap();
        assert_eq!((w.k, w.l), (0, 2));
        let s = sys(&[&["X1^2"]], 1, 5);
        assert!(pi_membership(&s, &pt("z5", 5), 4, 4, &caps).unwrap().found.is_some());
        assert!(pi_membership(&s, &pt("2", 5), 8, 8, &caps).unwrap().found.is_none());
    }

    #[test]
    fn growth() {
        let s = sys(&[&["X1^2"]], 1, 1);
        let r = growth_check(&s, &pt("1/2", 1), RationalPlace::Finite(2), &Word(vec![0, 0])).unwrap();
        assert!(r.precondition_met && r.strictly_increasing);
        let sizes: Vec<String> = r.sizes.iter().map(|q| q.to_string()).collect();
        assert_eq!(sizes, vec!["2", "4", "16"]);
        let s = sys(&[&["X1^2 - 1"]], 1, 1);
        let r = growth_check(&s, &pt("3", 1), RationalPlace::Archimedean, &Word(vec![0, 0])).unwrap();
        assert_eq!(r.threshold.to_string(), "2");
        let sizes: Vec<String> = r.sizes.iter().map(|q| q.to_string()).collect();
        assert_eq!(sizes, vec!["3", "8", "63"]);
        assert!(r.precondition_met && r.strictly_increasing);
        let r = growth_check(&s, &pt("1", 1), RationalPlace::Archimedean, &Word(vec![0])).unwrap();
        assert!(!r.precondition_met);
    }

    #[test]
    fn house_bounds() {
        let one = BigRational::one();
        let l = house_bound_l(&sys(&[&["X1^2"]], 1, 1), &one, 128).unwrap();
        assert!(l.contains_rational(&BigRational::from_integer(2.into())));
        let l = house_bound_l(&sys(&[&["X1^2 - 1"]], 1, 1), &one, 128).unwrap();
        assert!(l.contains_rational(&BigRational::from_integer(2.into())));
        let big = BigRational::from_integer(7.into());
        let l = house_bound_l(&sys(&[&["X1^2"]], 1, 1), &big, 128).unwrap();
        assert!(l.contains_rational(&big));

        let m = house_bound_m(&sys(&[&["X1^3"]], 1, 1), &one, 128).unwrap();
        assert_eq!(m.m, BigInt::from(3));
        assert!(m.bound.ball().contains_rational(&BigRational::from_integer(19.into())));
        let two = BigRational::from_integer(2.into());
        let m2 = house_bound_m(&sys(&[&["X1^3"]], 1, 1), &two, 128).unwrap();
        assert!(m2.bound.ball().contains_rational(&BigRational::from_integer(37.into())));
        assert!(matches!(
            house_bound_m(&sys(&[&["X1^2"]], 1, 1), &one, 128),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn sigma_search() {
        let caps = OrbitCaps::default();
        let one = BigRational::one();
        let bx = CandidateBox::Rational { num: 3, den: 3 };
        let s = sys(&[&["X1^3"]], 1, 1);
        let r = sigma_a_search(&s, &one, &[pt("1", 1)], &bx, 1, &caps, 128).unwrap();
        let found: Vec<String> = r.hits.iter().map(|h| h.point.to_string()).collect();
        assert_eq!(found, vec!["(-1)", "(0)", "(1)"]);
        assert!(r.hits.iter().all(|h| h.within_m == Some(true) && h.scaled_integral));

        let s = sys(&[&["X1^2 - 1"]], 1, 1);
        let r = sigma_a_search(&s, &one, &[pt("0", 1)], &bx, 1, &caps, 128).unwrap();
        let found: Vec<String> = r.hits.iter().map(|h| h.point.to_string()).collect();
        assert_eq!(found, vec!["(-1)", "(1)"]);
        let r = sigma_a_search(&s, &one, &[], &bx, 2, &caps, 128).unwrap();
        assert!(r.hits.is_empty());
    }

    #[test]
    fn boxes() {
        let v = CandidateBox::Rational { num: 3, den: 3 }.coordinate_values().unwrap();
        assert_eq!(v.len(), 15);
        let v = CandidateBox::CyclotomicInteger { order: 4, coeff_bound: 1 }
            .coordinate_values()
            .unwrap();
        assert_eq!(v.len(), 9);
        let pts: Vec<AffinePoint<Cyclotomic>> =
            CandidateBox::Rational { num: 1, den: 1 }.points(2, 100).unwrap();
        assert_eq!(pts.len(), 9);
    }

    #[test]
    fn words() {
        let w = Word::parse("1,2,1", 2).unwrap();
        assert_eq!(w.0, vec![0, 1, 0]);
        assert_eq!(w.to_string(), "[1,2,1]");
        assert!(Word::parse("3", 2).is_err());
    }
}
