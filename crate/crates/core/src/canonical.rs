//! Canonical heights of single maps, of sequences of maps, and of
//! semigroups, with rigorous error bounds.
//!
//! Heights are split into local contributions. Over Q the places are the
//! real place and the primes dividing a denominator of the point or of a
//! coefficient; for integral cyclotomic data only the complex embeddings
//! contribute. At each place the limit is truncated with an explicit tail
//! bound built from the certificate constants, and two rules close branches
//! early: a one-variable escape rule (`|y|_v` large) and an invariant unit box.
//! Other inputs fall back to exact global iteration.

use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ball::{Ball, Dyadic, Mag};
use crate::cyclotomic::galois_units;
use crate::error::{Error, Result};
use crate::heights::{log_rational, projective_height, weil_height, HeightEstimate};
use crate::local::{denominator_primes, Arith, ComplexCtx, EscapeData, LocalMap, PadicCtx, RealCtx};
use crate::morphism::AffineMorphism;
use crate::orbits::{orbit_closure, pi_membership, OrbitCaps, PiMembership, SemigroupSystem, Word};
use crate::point::AffinePoint;
use crate::primes;
use crate::scalar::Scalar;

/// `ĉ(F) = (1/d) max(h(F̃) + log m_F, h(G) + log((N+1) m_G))` per generator,
/// which bounds `|h(F(P))/d - h(P)|`.
#[derive(Clone, Debug, Serialize)]
pub struct CBound {
    pub per_generator: Vec<HeightEstimate>,
    pub max: HeightEstimate,
}

impl CBound {
    /// Rigorous upper bound of the largest `ĉ`.
    pub fn max_upper(&self) -> f64 {
        self.max.upper()
    }
}

pub fn c_bound<C: Scalar>(sys: &SemigroupSystem<C>, prec: u32) -> Result<CBound> {
    let mut per = Vec::new();
    for (cm, f) in sys.certified()?.iter().zip(sys.maps()) {
        let fc: Vec<C> = cm.lift.coefficients().cloned().collect();
        let gc: Vec<C> = cm.certificate.coefficients().cloned().collect();
        let nv = cm.lift.nvars() as i64;
        let mf = cm.constants.f_terms as i64;
        let mg = cm.constants.g_terms as i64;
        let a = projective_height(&fc, prec)?
            .into_ball()
            .add(&Ball::from_int(mf, prec).ln()?);
        let b = projective_height(&gc, prec)?
            .into_ball()
            .add(&Ball::from_int(nv * mg, prec).ln()?);
        per.push(a.max(&b).div_int(f.degree() as i64));
    }
    let max = per.iter().skip(1).fold(per[0].clone(), |a, b| a.max(b));
    Ok(CBound {
        per_generator: per.into_iter().map(HeightEstimate::from_ball).collect(),
        max: HeightEstimate::from_ball(max),
    })
}

/// Tolerance, working precision and resource caps.
#[derive(Clone, Copy, Debug)]
pub struct CanonicalOptions {
    pub tol: f64,
    pub prec: u32,
    /// Caps for exact enumeration (orbit closure and the exact fallback).
    pub caps: OrbitCaps,
    /// Maximum number of word-tree nodes visited per place.
    pub max_nodes: u64,
}

impl Default for CanonicalOptions {
    fn default() -> Self {
        CanonicalOptions {
            tol: 1e-8,
            prec: 128,
            caps: OrbitCaps::default(),
            max_nodes: 2_000_000,
        }
    }
}

impl CanonicalOptions {
    fn check(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidInput("tolerance must be a positive number".into()));
        }
        Ok(())
    }
}

/// How the estimate was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// The forward orbit is finite, so the height is exactly zero.
    FiniteOrbit,
    /// Sum of local contributions.
    Local,
    /// Exact iteration of global heights.
    Global,
    /// Average over random words.
    MonteCarlo,
}

/// A canonical height estimate with the data needed to audit it.
#[derive(Clone, Debug, Serialize)]
pub struct CanonicalHeight {
    pub estimate: HeightEstimate,
    pub method: Method,
    /// Truncation depth.
    pub depth: usize,
    /// Places used by the local method, e.g. `"inf"`, `"2"`, `"sigma_3"`.
    pub places: Vec<String>,
    /// Word-tree nodes visited (local method) or words summed (global).
    pub nodes: u64,
    /// Standard error of the mean (Monte Carlo only).
    pub std_error: Option<f64>,
    pub samples: Option<usize>,
}

impl CanonicalHeight {
    fn zero(prec: u32) -> Self {
        CanonicalHeight {
            estimate: HeightEstimate::exact_zero(prec),
            method: Method::FiniteOrbit,
            depth: 0,
            places: Vec::new(),
            nodes: 0,
            std_error: None,
            samples: None,
        }
    }
}

/// Sampling mode for semigroup heights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SemigroupMode {
    ExactSum,
    MonteCarlo { seed: u64, samples: usize },
}

struct PlaceData<A: Arith> {
    arith: A,
    label: String,
    weight: BigRational,
    maps: Vec<LocalMap<A::E>>,
    /// `c_{v,j}` bounding `|log|g_j(Y)|_v - d_j log|Y|_v|`.
    c: Vec<Ball>,
    escape: Option<EscapeData>,
    trapped: bool,
    start: Vec<A::E>,
}

enum Place {
    Real(PlaceData<RealCtx>),
    Complex(PlaceData<ComplexCtx>),
    PAdic(PlaceData<PadicCtx>),
}

macro_rules! with_place {
    ($place:expr, $pd:ident => $body:expr) => {
        match $place {
            Place::Real($pd) => $body,
            Place::Complex($pd) => $body,
            Place::PAdic($pd) => $body,
        }
    };
}

impl Place {
    fn label(&self) -> &str {
        with_place!(self, pd => &pd.label)
    }

    fn weight(&self) -> &BigRational {
        with_place!(self, pd => &pd.weight)
    }

    fn c(&self) -> &[Ball] {
        with_place!(self, pd => &pd.c)
    }
}

fn place_data<A: Arith, C: Scalar>(
    arith: A,
    label: String,
    weight: BigRational,
    sys: &SemigroupSystem<C>,
    x: &AffinePoint<C>,
    c: Vec<Ball>,
) -> Result<PlaceData<A>> {
    let maps = sys
        .maps()
        .iter()
        .map(|f| LocalMap::new(&arith, f))
        .collect::<Result<Vec<_>>>()?;
    let escape = arith.escape_data(sys.maps())?;
    let trapped = arith.unit_box_invariant(sys.maps())?;
    let start = x.coords().iter().map(|v| arith.coeff(v)).collect::<Result<Vec<_>>>()?;
    Ok(PlaceData {
        arith,
        label,
        weight,
        maps,
        c,
        escape,
        trapped,
        start,
    })
}

fn ball_max0(vals: impl IntoIterator<Item = Ball>, prec: u32) -> Ball {
    vals.into_iter().fold(Ball::zero(prec), |a, b| a.max(&b))
}

/// Local places for `(sys, x)`, or `None` when only global iteration applies.
fn local_places<C: Scalar>(sys: &SemigroupSystem<C>, x: &AffinePoint<C>, prec: u32) -> Result<Option<Vec<Place>>> {
    let cert = sys.certified()?;
    if sys.is_rational() && x.is_rational() {
        let mut places = Vec::new();
        let one = BigRational::one();
        let c_inf: Vec<Ball> = cert
            .iter()
            .map(|cm| {
                let k = &cm.constants;
                let up = log_rational(&(k.d_upper.clone() * k.f_norm_rational().unwrap()), prec);
                let lo = log_rational(&(k.g_norm_rational().unwrap() / k.c_lower.clone()), prec);
                ball_max0([up, lo], prec)
            })
            .collect();
        places.push(Place::Real(place_data(RealCtx { prec }, "inf".into(), one.clone(), sys, x, c_inf)?));
        let xq: Vec<BigRational> = x.coords().iter().map(|c| c.to_rational().unwrap()).collect();
        let fq: Vec<BigRational> = sys
            .maps()
            .iter()
            .flat_map(|f| f.coefficients().map(|c| c.to_rational().unwrap()))
            .collect();
        for p in denominator_primes(xq.iter().chain(fq.iter()))? {
            let c_p: Vec<Ball> = cert
                .iter()
                .map(|cm| {
                    let k = &cm.constants;
                    let f = k.f_norm_padic(p).and_then(|a| a.ln(prec)).unwrap_or_else(|| Ball::zero(prec));
                    let g = k.g_norm_padic(p).and_then(|a| a.ln(prec)).unwrap_or_else(|| Ball::zero(prec));
                    ball_max0([f, g], prec)
                })
                .collect();
            let ctx = PadicCtx::new(p, prec);
            places.push(Place::PAdic(place_data(ctx, p.to_string(), one.clone(), sys, x, c_p)?));
        }
        return Ok(Some(places));
    }
    let integral = x.coords().iter().all(|c| c.is_algebraic_integer())
        && sys.maps().iter().all(|f| f.coefficients().all(|c| c.is_algebraic_integer()));
    if !integral {
        return Ok(None);
    }
    let order = primes::lcm(sys.order(), x.order());
    let units = galois_units(order);
    let phi = units.len() as i64;
    let mut places = Vec::new();
    for &k in &units {
        let partner = (order - k) % order;
        if order > 2 && partner < k {
            continue;
        }
        let w = if order > 2 { 2 } else { 1 };
        let c_k: Vec<Ball> = cert
            .iter()
            .map(|cm| {
                let kc = &cm.constants;
                let up = Ball::from_rational(&kc.d_upper, prec).mul(kc.f_norm(k));
                let lo = kc.g_norm(k).div(&Ball::from_rational(&kc.c_lower, prec))?;
                Ok(ball_max0([up.ln()?, lo.ln()?], prec))
            })
            .collect::<Result<Vec<_>>>()?;
        let ctx = ComplexCtx { k, prec };
        places.push(Place::Complex(place_data(
            ctx,
            format!("sigma_{k}"),
            BigRational::new(w.into(), phi.into()),
            sys,
            x,
            c_k,
        )?));
    }
    Ok(Some(places))
}

fn bigint_ball(v: &BigInt, prec: u32) -> Ball {
    Ball::from_bigint(v, prec)
}

fn mag_div_bigint(m: Mag, v: &BigInt) -> Mag {
    m.div(Mag::from_dyadic_down(&Dyadic::from_bigint(v.clone())))
}

fn weight_f64(w: &BigRational) -> f64 {
    w.to_f64().unwrap_or(1.0)
}

fn upper_f64(b: &Ball) -> f64 {
    b.upper_f64()
}

/// Per-depth accumulated values and errors (before division by `D^k`).
struct TreeAcc {
    sums: Vec<Ball>,
    errs: Vec<Mag>,
}

impl TreeAcc {
    fn new(n: usize, prec: u32) -> Self {
        TreeAcc {
            sums: vec![Ball::zero(prec); n + 1],
            errs: vec![Mag::zero(); n + 1],
        }
    }

    fn merge(&mut self, o: TreeAcc) {
        for (a, b) in self.sums.iter_mut().zip(o.sums) {
            *a = a.add(&b);
        }
        for (a, b) in self.errs.iter_mut().zip(o.errs) {
            *a = a.add(b);
        }
    }
}

struct TreeCtx<'a, A: Arith> {
    pd: &'a PlaceData<A>,
    n_gen: usize,
    /// Escape closes a node when its unweighted error is at most this.
    limits: Vec<f64>,
    /// `Σ_j ln|a_j| / (D - s)`.
    u_star: Option<Ball>,
    /// `Σ_j K_j / (D - s)`.
    k_total: Mag,
    generic_err: Mag,
    nodes: &'a AtomicU64,
    max_nodes: u64,
}

const PAR_DEPTH: usize = 4;

impl<A: Arith> TreeCtx<'_, A> {
    fn visit(&self, y: Vec<A::E>, k: usize, acc: &mut TreeAcc) -> Result<()> {
        if self.nodes.fetch_add(1, Ordering::Relaxed) >= self.max_nodes {
            return Err(Error::overflow(
                "word-tree nodes in the exact sum (try monte-carlo or a larger tolerance)",
                self.max_nodes,
            ));
        }
        let a = &self.pd.arith;
        if self.pd.trapped && a.in_unit_box(&y) {
            return Ok(());
        }
        if let (Some(esc), Some(u)) = (&self.pd.escape, &self.u_star) {
            if let Some(inv) = a.escape_inverse(&esc.radius, &y) {
                let err = self.k_total.mul(inv);
                if err.to_f64_up() <= self.limits[k] {
                    acc.sums[k] = acc.sums[k].add(&a.log_size(&y)?.add(u));
                    acc.errs[k] = acc.errs[k].add(err);
                    return Ok(());
                }
            }
        }
        if k == self.n_gen {
            acc.sums[k] = acc.sums[k].add(&a.log_size(&y)?);
            acc.errs[k] = acc.errs[k].add(self.generic_err);
            return Ok(());
        }
        let children: Vec<Vec<A::E>> = self.pd.maps.iter().map(|m| m.apply(a, &y)).collect();
        if k < PAR_DEPTH && children.len() > 1 {
            let prec = acc.sums[0].precision();
            let parts: Vec<Result<TreeAcc>> = children
                .into_par_iter()
                .map(|c| {
                    let mut sub = TreeAcc::new(self.n_gen, prec);
                    self.visit(c, k + 1, &mut sub)?;
                    Ok(sub)
                })
                .collect();
            for p in parts {
                acc.merge(p?);
            }
        } else {
            for c in children {
                self.visit(c, k + 1, acc)?;
            }
        }
        Ok(())
    }
}

/// Degrees, `s`, `D` and `D - s` of a system.
struct Shape {
    s: u64,
    d_total: u64,
    degrees: Vec<u64>,
}

impl Shape {
    fn of<C: Scalar>(sys: &SemigroupSystem<C>) -> Self {
        let degrees: Vec<u64> = sys.degrees().iter().map(|&d| d as u64).collect();
        Shape {
            s: degrees.len() as u64,
            d_total: degrees.iter().sum(),
            degrees,
        }
    }

    fn gap(&self) -> u64 {
        self.d_total - self.s
    }
}

/// Smallest `n` with `c · (s/D)^n <= target` (`c` already divided by `D - s`).
fn depth_for(c: f64, s: u64, d: u64, target: f64) -> usize {
    let mut n = 0usize;
    let mut t = c;
    let r = s as f64 / d as f64;
    while t > target && n < 400 {
        t *= r;
        n += 1;
    }
    n
}

fn local_semigroup(places: &[Place], shape: &Shape, opts: &CanonicalOptions) -> Result<CanonicalHeight> {
    let prec = opts.prec;
    let gap = shape.gap();
    // tail weights Σ_v w_v Σ_j c_{v,j} / (D - s)
    let mut tail = 0f64;
    for p in places {
        let sum_c: f64 = p.c().iter().map(upper_f64).sum();
        tail += weight_f64(p.weight()) * sum_c / gap as f64;
    }
    let n_gen = depth_for(tail, shape.s, shape.d_total, opts.tol / 2.0);
    let nplaces = places.len().max(1) as f64;
    let limits: Vec<f64> = (0..=n_gen)
        .map(|k| {
            let ratio = (shape.d_total as f64 / shape.s as f64).powi(k as i32);
            opts.tol / 4.0 / nplaces / (n_gen as f64 + 1.0) * ratio
        })
        .collect();
    let mut total = Ball::zero(prec);
    let mut nodes_total = 0u64;
    for place in places {
        let (val, err, nodes) = with_place!(place, pd => run_tree(pd, shape, n_gen, &limits, opts)?);
        let w = Ball::from_rational(place.weight(), prec);
        total = total.add(&val.mul(&w).add_error(err.mul(Mag::from_dyadic_up(&Dyadic::from_rational_exact(place.weight())))));
        nodes_total += nodes;
    }
    Ok(CanonicalHeight {
        estimate: HeightEstimate::from_ball(total),
        method: Method::Local,
        depth: n_gen,
        places: places.iter().map(|p| p.label().to_string()).collect(),
        nodes: nodes_total,
        std_error: None,
        samples: None,
    })
}

fn run_tree<A: Arith>(
    pd: &PlaceData<A>,
    shape: &Shape,
    n_gen: usize,
    limits: &[f64],
    opts: &CanonicalOptions,
) -> Result<(Ball, Mag, u64)> {
    let prec = opts.prec;
    let gap = shape.gap() as i64;
    let u_star = pd.escape.as_ref().map(|e| {
        e.ln_lead
            .iter()
            .fold(Ball::zero(prec), |a, b| a.add(b))
            .div_int(gap)
    });
    let k_total = pd
        .escape
        .as_ref()
        .map(|e| {
            let s = e.k.iter().fold(Ball::zero(prec), |a, b| a.add(b));
            Mag::from_dyadic_up(&s.upper()).div(Mag::from_dyadic_down(&Dyadic::from_int(gap)))
        })
        .unwrap_or_else(Mag::zero);
    let sum_c = pd.c.iter().fold(Ball::zero(prec), |a, b| a.add(b));
    let generic_err = Mag::from_dyadic_up(&sum_c.upper()).div(Mag::from_dyadic_down(&Dyadic::from_int(gap)));
    let nodes = AtomicU64::new(0);
    let ctx = TreeCtx {
        pd,
        n_gen,
        limits: limits.to_vec(),
        u_star,
        k_total,
        generic_err,
        nodes: &nodes,
        max_nodes: opts.max_nodes,
    };
    let mut acc = TreeAcc::new(n_gen, prec);
    ctx.visit(pd.start.clone(), 0, &mut acc)?;
    let d = BigInt::from(shape.d_total);
    let mut dk = BigInt::one();
    let mut val = Ball::zero(prec);
    let mut err = Mag::zero();
    for k in 0..=n_gen {
        if !acc.sums[k].is_exact() || !acc.sums[k].mid().is_zero() {
            val = val.add(&acc.sums[k].div(&bigint_ball(&dk, prec))?);
        }
        err = err.add(mag_div_bigint(acc.errs[k], &dk));
        dk *= &d;
    }
    Ok((val, err, nodes.load(Ordering::Relaxed)))
}

/// Rigorous tail of the exact global word sum at depth `n`.
fn global_tail(cb: &CBound, shape: &Shape, n: usize) -> f64 {
    let sum_c: f64 = cb
        .per_generator
        .iter()
        .zip(&shape.degrees)
        .map(|(c, &d)| c.upper() * d as f64)
        .sum();
    sum_c / shape.gap() as f64 * (shape.s as f64 / shape.d_total as f64).powi(n as i32)
}

fn global_semigroup<C: Scalar>(
    sys: &SemigroupSystem<C>,
    x: &AffinePoint<C>,
    shape: &Shape,
    opts: &CanonicalOptions,
) -> Result<CanonicalHeight> {
    let prec = opts.prec;
    let cb = c_bound(sys, prec)?;
    let mut n = 0;
    while global_tail(&cb, shape, n) > opts.tol / 2.0 {
        n += 1;
        if n > 64 {
            break;
        }
    }
    let words = (shape.s as f64).powi(n as i32);
    if words > opts.caps.max_points as f64 {
        return Err(Error::overflow(
            "words in the exact global sum (try monte-carlo or a larger tolerance)",
            opts.caps.max_points as u64,
        ));
    }
    let mut level = vec![x.clone()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(level.len() * sys.len());
        for q in &level {
            for f in sys.maps() {
                let y = f.evaluate(q)?;
                if crate::orbits::point_bits(&y) > opts.caps.max_bits {
                    return Err(Error::overflow("bit size in exact iteration", opts.caps.max_bits));
                }
                next.push(y);
            }
        }
        level = next;
    }
    let hs: Vec<Result<Ball>> = level
        .par_iter()
        .map(|q| Ok(weil_height(q, prec)?.into_ball()))
        .collect();
    let mut sum = Ball::zero(prec);
    for h in hs {
        sum = sum.add(&h?);
    }
    let dn = num_traits::pow(BigInt::from(shape.d_total), n);
    let val = sum.div(&bigint_ball(&dn, prec))?;
    let tail = Mag::from_f64_up(global_tail(&cb, shape, n));
    Ok(CanonicalHeight {
        estimate: HeightEstimate::from_ball(val.add_error(tail)),
        method: Method::Global,
        depth: n,
        places: Vec::new(),
        nodes: level.len() as u64,
        std_error: None,
        samples: None,
    })
}

fn finite_orbit<C: Scalar>(sys: &SemigroupSystem<C>, x: &AffinePoint<C>) -> Result<bool> {
    let caps = OrbitCaps {
        max_points: 256,
        max_bits: 2048,
    };
    match orbit_closure(sys, x, 64, &caps) {
        Ok(r) => Ok(r.is_some()),
        Err(Error::Overflow { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Semigroup canonical height `lim (1/D^n) Σ_{|w|=n} h(g_w(x))`.
pub fn canonical_height_semigroup<C: Scalar>(
    sys: &SemigroupSystem<C>,
    x: &AffinePoint<C>,
    mode: SemigroupMode,
    opts: &CanonicalOptions,
) -> Result<CanonicalHeight> {
    opts.check()?;
    if x.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: x.dim(),
        });
    }
    if finite_orbit(sys, x)? {
        return Ok(CanonicalHeight::zero(opts.prec));
    }
    let shape = Shape::of(sys);
    match mode {
        SemigroupMode::ExactSum => match local_places(sys, x, opts.prec)? {
            Some(places) => local_semigroup(&places, &shape, opts),
            None => global_semigroup(sys, x, &shape, opts),
        },
        SemigroupMode::MonteCarlo { seed, samples } => monte_carlo(sys, x, seed, samples, opts),
    }
}

/// Canonical height of a single map.
pub fn canonical_height_map<C: Scalar>(
    f: &AffineMorphism<C>,
    x: &AffinePoint<C>,
    opts: &CanonicalOptions,
) -> Result<CanonicalHeight> {
    let sys = SemigroupSystem::from_maps(vec![f.clone()])?;
    canonical_height_semigroup(&sys, x, SemigroupMode::ExactSum, opts)
}

/// Infinite word given by a generator index for every step.
pub trait WordStream: Sync {
    fn at(&self, step: usize) -> usize;
    /// Period, when the word is periodic from the start.
    fn period(&self) -> Option<usize> {
        None
    }
}

/// A finite word repeated forever.
#[derive(Clone, Debug)]
pub struct PeriodicWord(pub Word);

impl WordStream for PeriodicWord {
    fn at(&self, step: usize) -> usize {
        self.0 .0[step % self.0.len()]
    }

    fn period(&self) -> Option<usize> {
        Some(self.0.len())
    }
}

/// A prefix followed by the constant last letter; used for sampled words.
impl WordStream for Vec<usize> {
    fn at(&self, step: usize) -> usize {
        self[step.min(self.len() - 1)]
    }
}

fn periodic_cycle<C: Scalar>(
    sys: &SemigroupSystem<C>,
    x: &AffinePoint<C>,
    word: &dyn WordStream,
    period: usize,
) -> Result<bool> {
    let mut seen = std::collections::BTreeSet::new();
    let mut y = x.clone();
    let mut step = 0usize;
    while step < 64 * period.max(1) {
        if step % period == 0 && !seen.insert(y.clone()) {
            return Ok(true);
        }
        y = sys.maps()[word.at(step)].evaluate(&y)?;
        if crate::orbits::point_bits(&y) > 8192 {
            return Ok(false);
        }
        step += 1;
    }
    Ok(false)
}

fn place_path<A: Arith>(pd: &PlaceData<A>, word: &dyn WordStream, n: usize, shape: &Shape, prec: u32) -> Result<(Ball, Mag)> {
    let a = &pd.arith;
    let mut y = pd.start.clone();
    let mut prod = BigInt::one();
    for step in 0..n {
        if pd.trapped && a.in_unit_box(&y) {
            return Ok((Ball::zero(prec), Mag::zero()));
        }
        let j = word.at(step);
        y = pd.maps[j].apply(a, &y);
        prod *= shape.degrees[j];
    }
    if pd.trapped && a.in_unit_box(&y) {
        return Ok((Ball::zero(prec), Mag::zero()));
    }
    let val = a.log_size(&y)?.div(&bigint_ball(&prod, prec))?;
    let d_min = *shape.degrees.iter().min().unwrap();
    let c_max = pd.c.iter().fold(Ball::zero(prec), |x, y| x.max(y));
    let err = mag_div_bigint(
        Mag::from_dyadic_up(&c_max.upper()),
        &(prod * BigInt::from(d_min - 1)),
    );
    Ok((val, err))
}

/// Path length `n` with `Σ_v w_v max_j c_{v,j} / (∏ d (d_min - 1)) <= target`.
fn path_depth(word: &dyn WordStream, shape: &Shape, c_total: f64, target: f64) -> usize {
    let d_min = *shape.degrees.iter().min().unwrap() as f64;
    let mut bound = c_total / (d_min - 1.0);
    let mut n = 0;
    while bound > target && n < 400 {
        bound /= shape.degrees[word.at(n)] as f64;
        n += 1;
    }
    n
}

fn local_word(places: &[Place], word: &dyn WordStream, shape: &Shape, opts: &CanonicalOptions) -> Result<CanonicalHeight> {
    let prec = opts.prec;
    let c_total: f64 = places
        .iter()
        .map(|p| {
            let w: f64 = weight_f64(p.weight());
            w * p.c().iter().map(upper_f64).fold(0.0, f64::max)
        })
        .sum();
    let n = path_depth(word, shape, c_total, opts.tol / 2.0);
    let mut total = Ball::zero(prec);
    for place in places {
        let (v, e) = with_place!(place, pd => place_path(pd, word, n, shape, prec)?);
        let w = Ball::from_rational(place.weight(), prec);
        total = total.add(&v.mul(&w).add_error(e.mul(Mag::from_dyadic_up(&Dyadic::from_rational_exact(place.weight())))));
    }
    Ok(CanonicalHeight {
        estimate: HeightEstimate::from_ball(total),
        method: Method::Local,
        depth: n,
        places: places.iter().map(|p| p.label().to_string()).collect(),
        nodes: n as u64,
        std_error: None,
        samples: None,
    })
}

fn global_word<C: Scalar>(
    sys: &SemigroupSystem<C>,
    x: &AffinePoint<C>,
    word: &dyn WordStream,
    shape: &Shape,
    opts: &CanonicalOptions,
) -> Result<CanonicalHeight> {
    let prec = opts.prec;
    let cb = c_bound(sys, prec)?;
    let c_total = cb
        .per_generator
        .iter()
        .zip(&shape.degrees)
        .map(|(c, &d)| c.upper() * d as f64)
        .fold(0.0, f64::max);
    let n = path_depth(word, shape, c_total, opts.tol / 2.0);
    let mut y = x.clone();
    let mut prod = BigInt::one();
    for step in 0..n {
        let j = word.at(step);
        y = sys.maps()[j].evaluate(&y)?;
        if crate::orbits::point_bits(&y) > opts.caps.max_bits {
            return Err(Error::overflow("bit size in exact iteration", opts.caps.max_bits));
        }
        prod *= shape.degrees[j];
    }
    let d_min = *shape.degrees.iter().min().unwrap();
    let val = weil_height(&y, prec)?.into_ball().div(&bigint_ball(&prod, prec))?;
    let err = Mag::from_f64_up(c_total).div(Mag::from_dyadic_down(&Dyadic::from_bigint(prod * BigInt::from(d_min - 1))));
    Ok(CanonicalHeight {
        estimate: HeightEstimate::from_ball(val.add_error(err)),
        method: Method::Global,
        depth: n,
        places: Vec::new(),
        nodes: n as u64,
        std_error: None,
        samples: None,
    })
}

/// Canonical height for the sequence of generators given by `word`.
pub fn canonical_height_word<C: Scalar>(
    sys: &SemigroupSystem<C>,
    word: &dyn WordStream,
    x: &AffinePoint<C>,
    opts: &CanonicalOptions,
) -> Result<CanonicalHeight> {
    opts.check()?;
    if x.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: x.dim(),
        });
    }
    if let Some(p) = word.period() {
        if p == 0 || (0..p).any(|i| word.at(i) >= sys.len()) {
            return Err(Error::InvalidInput("word indices out of range".into()));
        }
        if periodic_cycle(sys, x, word, p)? {
            return Ok(CanonicalHeight::zero(opts.prec));
        }
    }
    let shape = Shape::of(sys);
    match local_places(sys, x, opts.prec)? {
        Some(places) => local_word(&places, word, &shape, opts),
        None => global_word(sys, x, word, &shape, opts),
    }
}

fn sample_word(shape: &Shape, seed: u64, i: usize, len: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    (0..len.max(1))
        .map(|_| {
            let mut t = rng.gen_range(0..shape.d_total);
            let mut j = 0;
            while t >= shape.degrees[j] {
                t -= shape.degrees[j];
                j += 1;
            }
            j
        })
        .collect()
}

fn monte_carlo<C: Scalar>(
    sys: &SemigroupSystem<C>,
    x: &AffinePoint<C>,
    seed: u64,
    samples: usize,
    opts: &CanonicalOptions,
) -> Result<CanonicalHeight> {
    if samples == 0 {
        return Err(Error::InvalidInput("monte-carlo needs at least one sample".into()));
    }
    let prec = opts.prec;
    let shape = Shape::of(sys);
    let places = local_places(sys, x, prec)?;
    // a common length for all samples, from the worst-case degree sequence
    let d_min = *shape.degrees.iter().min().unwrap() as f64;
    let c_total = match &places {
        Some(ps) => ps
            .iter()
            .map(|p| {
                let w: f64 = weight_f64(p.weight());
                w * p.c().iter().map(upper_f64).fold(0.0, f64::max)
            })
            .sum::<f64>(),
        None => {
            let cb = c_bound(sys, prec)?;
            cb.per_generator
                .iter()
                .zip(&shape.degrees)
                .map(|(c, &d)| c.upper() * d as f64)
                .fold(0.0, f64::max)
        }
    };
    let mut len = 0;
    let mut b = c_total / (d_min - 1.0);
    while b > opts.tol / 2.0 && len < 400 {
        b /= d_min;
        len += 1;
    }
    let inner = CanonicalOptions { tol: opts.tol, ..*opts };
    let results: Vec<Result<CanonicalHeight>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let w = sample_word(&shape, seed, i, len);
            match &places {
                Some(ps) => local_word(ps, &w, &shape, &inner),
                None => global_word(sys, x, &w, &shape, &inner),
            }
        })
        .collect();
    let mut sum = Ball::zero(prec);
    let mut mids = Vec::with_capacity(samples);
    let mut trunc = Mag::zero();
    for r in results {
        let h = r?;
        let b = h.estimate.into_ball();
        mids.push(b.to_f64());
        trunc = trunc.max(b.rad());
        sum = sum.add(&Ball::with_radius(b.mid().clone(), Mag::zero(), prec));
    }
    let mean = sum.div_int(samples as i64).add_error(trunc);
    let m = mids.iter().sum::<f64>() / samples as f64;
    let var = if samples > 1 {
        mids.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (samples as f64 - 1.0)
    } else {
        0.0
    };
    Ok(CanonicalHeight {
        estimate: HeightEstimate::from_ball(mean),
        method: Method::MonteCarlo,
        depth: len,
        places: places
            .map(|ps| ps.iter().map(|p| p.label().to_string()).collect())
            .unwrap_or_default(),
        nodes: (samples * len) as u64,
        std_error: Some((var / samples as f64).sqrt()),
        samples: Some(samples),
    })
}

/// Outcome of the height-based preperiodicity test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    PreperiodicConfirmed,
    NonpreperiodicCertified,
    Undecided,
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "C: Scalar"))]
pub struct PreperiodicReport<C> {
    pub verdict: Verdict,
    pub height: Option<CanonicalHeight>,
    /// Why no height estimate is available.
    pub height_error: Option<String>,
    pub search: Option<PiMembership<C>>,
}

/// Certify non-preperiodicity by a positive lower bound on the canonical
/// height, otherwise look for an explicit return within the caps.
pub fn preperiodic_by_height<C: Scalar>(
    sys: &SemigroupSystem<C>,
    x: &AffinePoint<C>,
    k_max: usize,
    l_max: usize,
    opts: &CanonicalOptions,
) -> Result<PreperiodicReport<C>> {
    let (height, height_error) = match canonical_height_semigroup(sys, x, SemigroupMode::ExactSum, opts) {
        Ok(h) => (Some(h), None),
        Err(e @ (Error::Overflow { .. } | Error::Precision(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    if let Some(h) = &height {
        if h.estimate.ball().is_positive() {
            return Ok(PreperiodicReport {
                verdict: Verdict::NonpreperiodicCertified,
                height,
                height_error,
                search: None,
            });
        }
    }
    let search = match pi_membership(sys, x, k_max, l_max, &opts.caps) {
        Ok(s) => Some(s),
        Err(Error::Overflow { .. }) => None,
        Err(e) => return Err(e),
    };
    let verdict = if search.as_ref().is_some_and(|s| s.found.is_some()) {
        Verdict::PreperiodicConfirmed
    } else {
        Verdict::Undecided
    };
    Ok(PreperiodicReport {
        verdict,
        height,
        height_error,
        search,
    })
}

/// One box point with a collision.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "C: Scalar"))]
pub struct CollisionRow<C> {
    #[serde(serialize_with = "crate::orbits::ser_display")]
    pub point: AffinePoint<C>,
    pub height: HeightEstimate,
    pub n: usize,
    pub m: usize,
    pub word_n: Word,
    pub word_m: Word,
    /// `2ĉ(δ_n + δ_m)/|δ_n - δ_m|` for the degrees `δ` of the two words;
    /// `None` when the degrees agree.
    pub bound: Option<HeightEstimate>,
    pub within_bound: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "C: Scalar"))]
pub struct CollisionExperiment<C> {
    pub rows: Vec<CollisionRow<C>>,
    pub candidates: usize,
    pub n_max: usize,
    pub common_degree: Option<u32>,
    pub c_hat: HeightEstimate,
    pub max_height: Option<HeightEstimate>,
    pub max_n: Option<usize>,
    pub max_m: Option<usize>,
}

fn word_degree(shape: &Shape, w: &Word) -> BigInt {
    w.0.iter().fold(BigInt::one(), |acc, &j| acc * shape.degrees[j])
}

/// Collision search over every box point, with heights and per-collision bounds.
pub fn collision_bound_experiment<C: Scalar>(
    sys: &SemigroupSystem<C>,
    candidates: &crate::orbits::CandidateBox,
    n_max: usize,
    caps: &OrbitCaps,
    prec: u32,
) -> Result<CollisionExperiment<C>> {
    let cb = c_bound(sys, prec)?;
    let shape = Shape::of(sys);
    let pts: Vec<AffinePoint<C>> = candidates.points(sys.dim(), caps.max_points)?;
    let found: Vec<Result<Option<CollisionRow<C>>>> = pts
        .par_iter()
        .map(|p| {
            let lv = crate::orbits::orbit_levels(sys, p, n_max, caps)?;
            let cols = crate::orbits::collisions_in(&lv);
            let Some(c) = cols.into_iter().next() else {
                return Ok(None);
            };
            let height = weil_height(p, prec)?;
            let (dn, dm) = (word_degree(&shape, &c.word_n), word_degree(&shape, &c.word_m));
            let bound = if dn == dm {
                None
            } else {
                let num = Ball::from_bigint(&(&dn + &dm), prec);
                let den = Ball::from_bigint(&(&dn - &dm).magnitude().clone().into(), prec);
                Some(cb.max.ball().mul_int(2).mul(&num).div(&den)?)
            };
            let within_bound = bound.as_ref().map(|b| !b.lt(height.ball()));
            Ok(Some(CollisionRow {
                point: p.clone(),
                height,
                n: c.n,
                m: c.m,
                word_n: c.word_n,
                word_m: c.word_m,
                bound: bound.map(HeightEstimate::from_ball),
                within_bound,
            }))
        })
        .collect();
    let mut rows = Vec::new();
    for r in found {
        if let Some(row) = r? {
            rows.push(row);
        }
    }
    let max_height = rows
        .iter()
        .map(|r| r.height.ball().clone())
        .reduce(|a, b| a.max(&b))
        .map(HeightEstimate::from_ball);
    Ok(CollisionExperiment {
        max_n: rows.iter().map(|r| r.n).max(),
        max_m: rows.iter().map(|r| r.m).max(),
        rows,
        candidates: pts.len(),
        n_max,
        common_degree: sys.common_degree(),
        c_hat: cb.max,
        max_height,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclotomic::Cyclotomic;
    use crate::parse::{parse_point, parse_poly, Context};

    fn sys(maps: &[&str], order: u64) -> SemigroupSystem<Cyclotomic> {
        let ctx = Context { nvars: 1, order };
        let maps = maps
            .iter()
            .map(|c| AffineMorphism::new(vec![parse_poly(c, ctx).unwrap()]).unwrap())
            .collect();
        SemigroupSystem::from_maps(maps).unwrap()
    }

    fn pt(s: &str, order: u64) -> AffinePoint<Cyclotomic> {
        AffinePoint::new(parse_point(s, order).unwrap()).unwrap()
    }

    fn close(h: &CanonicalHeight, want: f64, tol: f64) {
        let b = h.estimate.ball();
        assert!(
            (b.to_f64() - want).abs() <= tol && b.lower_f64() <= want + 1e-12 && b.upper_f64() >= want - 1e-12,
            "got {} want {want}",
            h.estimate
        );
    }

    #[test]
    fn c_bounds() {
        let ln2 = std::f64::consts::LN_2;
        for (m, want) in [("X1^2", ln2 / 2.0), ("X1^2 - 1", ln2 / 2.0), ("2*X1^2", ln2)] {
            let c = c_bound(&sys(&[m], 1), 128).unwrap();
            assert!((c.max.value() - want).abs() < 1e-12, "{m}: {}", c.max);
        }
    }

    #[test]
    fn single_maps() {
        let o = CanonicalOptions::default();
        let ln2 = std::f64::consts::LN_2;
        let s = sys(&["X1^2"], 1);
        close(&canonical_height_map(&s.maps()[0], &pt("2", 1), &o).unwrap(), ln2, 1e-8);
        let h = canonical_height_map(&s.maps()[0], &pt("1/2", 1), &o).unwrap();
        close(&h, ln2, 1e-8);
        assert_eq!(h.places, vec!["inf", "2"]);

        let f = sys(&["X1^2 - 1"], 1);
        let z = canonical_height_map(&f.maps()[0], &pt("0", 1), &o).unwrap();
        assert_eq!(z.method, Method::FiniteOrbit);
        assert!(z.estimate.is_exact() && z.estimate.value() == 0.0);
        close(&canonical_height_map(&f.maps()[0], &pt("1/2", 1), &o).unwrap(), ln2, 1e-8);

        // log 2 + Σ log(1 - 1/y_n^2) / 2^(n+1) along y_{n+1} = y_n^2 - 1
        let mut want = ln2;
        let mut y = 2f64;
        let mut scale = 0.5;
        while y.is_finite() {
            want += (1.0 - 1.0 / (y * y)).ln() * scale;
            y = y * y - 1.0;
            scale /= 2.0;
        }
        close(&canonical_height_map(&f.maps()[0], &pt("2", 1), &o).unwrap(), want, 1e-8);
    }

    #[test]
    fn cyclotomic_points() {
        let o = CanonicalOptions::default();
        let s = sys(&["X1^2"], 4);
        let x = pt("1 + z4", 4);
        let h = canonical_height_map(&s.maps()[0], &x, &o).unwrap();
        close(&h, std::f64::consts::LN_2 / 2.0, 1e-8);
        assert_eq!(h.places, vec!["sigma_1"]);
    }

    #[test]
    fn semigroups() {
        let o = CanonicalOptions::default();
        let ln2 = std::f64::consts::LN_2;
        let s = sys(&["X1^2", "X1^3"], 1);
        close(
            &canonical_height_semigroup(&s, &pt("2", 1), SemigroupMode::ExactSum, &o).unwrap(),
            ln2,
            1e-8,
        );
        let mc = canonical_height_semigroup(&s, &pt("2", 1), SemigroupMode::MonteCarlo { seed: 7, samples: 32 }, &o)
            .unwrap();
        close(&mc, ln2, 1e-8);
        assert!(mc.std_error.unwrap() < 1e-12);

        let t = sys(&["X1^2", "X1^2 - 1"], 1);
        let z = canonical_height_semigroup(&t, &pt("0", 1), SemigroupMode::ExactSum, &o).unwrap();
        assert_eq!(z.method, Method::FiniteOrbit);
        let h = canonical_height_semigroup(&t, &pt("2", 1), SemigroupMode::ExactSum, &o).unwrap();
        assert!(h.estimate.lower() > 0.5 && h.estimate.error() <= 1e-8);
    }

    #[test]
    fn words() {
        let o = CanonicalOptions::default();
        let t = sys(&["X1^2", "X1^2 - 1"], 1);
        let w = PeriodicWord(Word(vec![1]));
        let single = canonical_height_map(&t.maps()[1], &pt("2", 1), &o).unwrap();
        let via = canonical_height_word(&t, &w, &pt("2", 1), &o).unwrap();
        assert!(via.estimate.ball().overlaps(single.estimate.ball()));
        assert!((via.estimate.value() - single.estimate.value()).abs() < 1e-8);
        let z = canonical_height_word(&t, &PeriodicWord(Word(vec![1])), &pt("-1", 1), &o).unwrap();
        assert_eq!(z.method, Method::FiniteOrbit);
    }

    #[test]
    fn verdicts() {
        let o = CanonicalOptions::default();
        let f = sys(&["X1^2 - 1"], 1);
        let r = preperiodic_by_height(&f, &pt("0", 1), 8, 8, &o).unwrap();
        assert_eq!(r.verdict, Verdict::PreperiodicConfirmed);
        let r = preperiodic_by_height(&f, &pt("2", 1), 8, 8, &o).unwrap();
        assert_eq!(r.verdict, Verdict::NonpreperiodicCertified);
    }

    #[test]
    fn collision_experiment() {
        let s = sys(&["X1^2", "X1^2 - 1"], 1);
        let b = crate::orbits::CandidateBox::Rational { num: 2, den: 1 };
        let e = collision_bound_experiment(&s, &b, 4, &OrbitCaps::default(), 128).unwrap();
        assert!(!e.rows.is_empty());
        assert!(e.rows.iter().all(|r| r.within_bound != Some(false)));
    }

    #[test]
    fn bad_tolerance() {
        let s = sys(&["X1^2"], 1);
        let o = CanonicalOptions { tol: 0.0, ..Default::default() };
        assert!(canonical_height_map(&s.maps()[0], &pt("2", 1), &o).is_err());
    }
}
