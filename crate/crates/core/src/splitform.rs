//! Multilinear forms in split variables and the search for zeros along orbits.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::ball::Ball;
use crate::canonical::c_bound;
use crate::error::{Error, Result};
use crate::heights::{weil_height, HeightEstimate};
use crate::orbits::{orbit_levels, CandidateBox, OrbitCaps, SemigroupSystem, Word};
use crate::point::AffinePoint;
use crate::scalar::Scalar;

/// `F(T_1, …, T_k) = Σ_i c_i ∏_{j ∈ J_i} T_j`, with sums and products taken
/// coordinate by coordinate and `J_1, …, J_r` a partition of `{1, …, k}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitForm<C> {
    arity: usize,
    /// Zero-based variable indices of each part.
    parts: Vec<Vec<usize>>,
    coeffs: Vec<AffinePoint<C>>,
}

impl<C: Scalar> SplitForm<C> {
    /// `parts` are zero-based.
    pub fn new(arity: usize, parts: Vec<Vec<usize>>, coeffs: Vec<AffinePoint<C>>) -> Result<Self> {
        if arity == 0 || parts.is_empty() {
            return Err(Error::InvalidInput("a split form needs at least one variable and one term".into()));
        }
        if parts.len() != coeffs.len() {
            return Err(Error::InvalidInput(format!(
                "{} parts but {} coefficients",
                parts.len(),
                coeffs.len()
            )));
        }
        let dim = coeffs[0].dim();
        if let Some(c) = coeffs.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: c.dim(),
            });
        }
        if coeffs.iter().any(|c| c.coords().iter().any(|x| x.is_zero())) {
            return Err(Error::InvalidInput("coefficients must have all coordinates nonzero".into()));
        }
        let mut seen = vec![false; arity];
        for part in &parts {
            if part.is_empty() {
                return Err(Error::InvalidInput("empty part in the partition".into()));
            }
            for &j in part {
                if j >= arity {
                    return Err(Error::InvalidInput(format!("variable T{} exceeds the arity {arity}", j + 1)));
                }
                if std::mem::replace(&mut seen[j], true) {
                    return Err(Error::InvalidInput(format!("variable T{} appears in two parts", j + 1)));
                }
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidInput(format!("variable T{} is not covered by the partition", j + 1)));
        }
        Ok(SplitForm { arity, parts, coeffs })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].dim()
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    pub fn coeffs(&self) -> &[AffinePoint<C>] {
        &self.coeffs
    }

    pub fn eval(&self, args: &[AffinePoint<C>]) -> Result<AffinePoint<C>> {
        if args.len() != self.arity {
            return Err(Error::InvalidInput(format!(
                "form has arity {} but got {} arguments",
                self.arity,
                args.len()
            )));
        }
        let mut acc: Option<AffinePoint<C>> = None;
        for (part, c) in self.parts.iter().zip(&self.coeffs) {
            let mut term = c.clone();
            for &j in part {
                term = term.hadamard(&args[j])?;
            }
            acc = Some(match acc {
                None => term,
                Some(a) => a.add(&term)?,
            });
        }
        Ok(acc.expect("at least one term"))
    }

    fn vanishes(&self, args: &[&AffinePoint<C>]) -> Result<bool> {
        let owned: Vec<AffinePoint<C>> = args.iter().map(|p| (*p).clone()).collect();
        Ok(self.eval(&owned)?.is_zero())
    }
}

impl<C: Scalar> fmt::Display for SplitForm<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (part, c)) in self.parts.iter().zip(&self.coeffs).enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            for &j in part {
                write!(f, "*T{}", j + 1)?;
            }
        }
        Ok(())
    }
}

/// Which iterates feed the form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// One sequence of generators; `T_i` is its `n_i`-th iterate.
    SingleSequence,
    /// Independent sequences for every argument.
    MultiSequence,
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "C: Scalar"))]
pub struct SplitHit<C> {
    #[serde(serialize_with = "crate::orbits::ser_display")]
    pub point: AffinePoint<C>,
    /// `n_1 > … > n_k`.
    pub ns: Vec<usize>,
    /// One word per argument; in single-sequence mode all are prefixes of the first.
    pub words: Vec<Word>,
    pub height: HeightEstimate,
    pub within_bound: bool,
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "C: Scalar"))]
pub struct SplitReport<C> {
    pub mode: SplitMode,
    /// The inequality that was checked before searching.
    pub hypothesis: String,
    pub candidates: usize,
    /// Box points skipped because a coordinate is zero.
    pub skipped_non_torus: usize,
    pub n_max: usize,
    /// `N Σ h(c_i) + log max(r - 1, 1) + 2ĉ(1 + N k)`.
    pub bound: HeightEstimate,
    pub hits: Vec<SplitHit<C>>,
}

/// Explicit height bound for zeros of `form` along orbits of `sys`.
pub fn split_bound<C: Scalar>(sys: &SemigroupSystem<C>, form: &SplitForm<C>, prec: u32) -> Result<Ball> {
    let n = form.dim() as i64;
    let mut sum = Ball::zero(prec);
    for c in form.coeffs() {
        sum = sum.add(weil_height(c, prec)?.ball());
    }
    let r = form.parts().len() as i64;
    let c_hat = c_bound(sys, prec)?.max.into_ball();
    Ok(sum
        .mul_int(n)
        .add(&Ball::from_int((r - 1).max(1), prec).ln()?)
        .add(&c_hat.mul_int(2 * (1 + n * form.arity() as i64))))
}

fn check_hypothesis<C: Scalar>(sys: &SemigroupSystem<C>, form: &SplitForm<C>, mode: SplitMode) -> Result<String> {
    let n = sys.dim();
    if form.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: form.dim(),
        });
    }
    match mode {
        SplitMode::SingleSequence => {
            if let Some(&d) = sys.degrees().iter().find(|&&d| d as usize <= n) {
                return Err(Error::Hypothesis(format!("degrees d_i > N fails: d = {d}, N = {n}")));
            }
            Ok(format!("d_i > N with N = {n}"))
        }
        SplitMode::MultiSequence => {
            let d = sys.common_degree().ok_or_else(|| {
                Error::Hypothesis("multi-sequence mode needs a common degree d".into())
            })? as usize;
            if 2 * d < 3 * n + 2 {
                return Err(Error::Hypothesis(format!(
                    "d >= (3N+2)/2 fails: d = {d}, N = {n}"
                )));
            }
            Ok(format!("common degree d = {d} >= (3N+2)/2 with N = {n}"))
        }
    }
}

/// Strictly decreasing `k`-tuples with entries in `0..=top` whose first entry is `top`.
fn tuples_from(top: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        let last = *cur.last().unwrap();
        for v in (0..last).rev() {
            cur.push(v);
            rec(cur, k, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut vec![top], k, &mut out);
    out
}

fn single_sequence<C: Scalar>(
    sys: &SemigroupSystem<C>,
    form: &SplitForm<C>,
    p: &AffinePoint<C>,
    n_max: usize,
    caps: &OrbitCaps,
) -> Result<Vec<(Vec<usize>, Vec<Word>)>> {
    let k = form.arity();
    let mut out = Vec::new();
    let mut visited = 0usize;
    // depth-first over word prefixes; tuples are scored at the prefix of length n_1
    let mut stack = vec![(vec![p.clone()], Word(Vec::new()))];
    while let Some((path, word)) = stack.pop() {
        visited += 1;
        if visited > caps.max_points {
            return Err(Error::overflow("word prefixes in the split-form search", caps.max_points as u64));
        }
        let top = word.len();
        if top + 1 >= k {
            for ns in tuples_from(top, k) {
                let args: Vec<&AffinePoint<C>> = ns.iter().map(|&i| &path[i]).collect();
                if form.vanishes(&args)? {
                    let words = ns.iter().map(|&i| Word(word.0[..i].to_vec())).collect();
                    out.push((ns, words));
                }
            }
        }
        if top < n_max {
            for j in (0..sys.len()).rev() {
                let y = crate::orbits::checked_image(&sys.maps()[j], &path[top], caps)?;
                let mut path2 = path.clone();
                path2.push(y);
                stack.push((path2, word.push(j)));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn multi_sequence<C: Scalar>(
    sys: &SemigroupSystem<C>,
    form: &SplitForm<C>,
    p: &AffinePoint<C>,
    n_max: usize,
    caps: &OrbitCaps,
) -> Result<Vec<(Vec<usize>, Vec<Word>)>> {
    let k = form.arity();
    let lv = orbit_levels(sys, p, n_max, caps)?;
    let mut out = Vec::new();
    let mut combos = 0usize;
    for top in k.saturating_sub(1)..=n_max {
        for ns in tuples_from(top, k) {
            let sizes: Vec<usize> = ns.iter().map(|&n| lv.levels[n].len()).collect();
            let mut idx = vec![0usize; k];
            'outer: loop {
                combos += 1;
                if combos > caps.max_points {
                    return Err(Error::overflow("argument tuples in the split-form search", caps.max_points as u64));
                }
                let args: Vec<&AffinePoint<C>> = (0..k).map(|i| &lv.levels[ns[i]][idx[i]].0).collect();
                if form.vanishes(&args)? {
                    let words = (0..k).map(|i| lv.levels[ns[i]][idx[i]].1.clone()).collect();
                    out.push((ns.clone(), words));
                }
                for i in (0..k).rev() {
                    idx[i] += 1;
                    if idx[i] < sizes[i] {
                        continue 'outer;
                    }
                    idx[i] = 0;
                }
                break;
            }
        }
    }
    Ok(out)
}

/// Search for `P` in the box (with all coordinates nonzero) and iterates
/// `n_1 > … > n_k <= n_max` where the form vanishes.
pub fn split_form_zero_search<C: Scalar>(
    sys: &SemigroupSystem<C>,
    form: &SplitForm<C>,
    candidates: &CandidateBox,
    n_max: usize,
    mode: SplitMode,
    caps: &OrbitCaps,
    prec: u32,
) -> Result<SplitReport<C>> {
    let hypothesis = check_hypothesis(sys, form, mode)?;
    let bound = split_bound(sys, form, prec)?;
    let pts: Vec<AffinePoint<C>> = candidates.points(sys.dim(), caps.max_points)?;
    let torus: Vec<&AffinePoint<C>> = pts.iter().filter(|p| p.coords().iter().all(|c| !c.is_zero())).collect();
    let found: Vec<Result<Vec<SplitHit<C>>>> = torus
        .par_iter()
        .map(|p| {
            let sols = match mode {
                SplitMode::SingleSequence => single_sequence(sys, form, p, n_max, caps)?,
                SplitMode::MultiSequence => multi_sequence(sys, form, p, n_max, caps)?,
            };
            if sols.is_empty() {
                return Ok(Vec::new());
            }
            let height = weil_height(p, prec)?;
            let within_bound = height.ball().le(&bound) || height.ball().overlaps(&bound);
            let mut seen = BTreeSet::new();
            Ok(sols
                .into_iter()
                .filter(|s| seen.insert(s.clone()))
                .map(|(ns, words)| SplitHit {
                    point: (*p).clone(),
                    ns,
                    words,
                    height: height.clone(),
                    within_bound,
                })
                .collect())
        })
        .collect();
    let mut hits = Vec::new();
    for f in found {
        hits.extend(f?);
    }
    Ok(SplitReport {
        mode,
        hypothesis,
        candidates: pts.len(),
        skipped_non_torus: pts.len() - torus.len(),
        n_max,
        bound: HeightEstimate::from_ball(bound),
        hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclotomic::Cyclotomic;
    use crate::morphism::AffineMorphism;
    use crate::orbits::collision_search;
    use crate::parse::{parse_poly, Context};

    type Pt = AffinePoint<Cyclotomic>;

    fn sys(maps: &[&[&str]], n: usize) -> SemigroupSystem<Cyclotomic> {
        let ctx = Context { nvars: n, order: 1 };
        let maps = maps
            .iter()
            .map(|comps| AffineMorphism::new(comps.iter().map(|c| parse_poly(c, ctx).unwrap()).collect()).unwrap())
            .collect();
        SemigroupSystem::from_maps(maps).unwrap()
    }

    fn p(v: &[i64]) -> Pt {
        AffinePoint::from_ints(v)
    }

    #[test]
    fn evaluation() {
        let f = SplitForm::new(2, vec![vec![0], vec![1]], vec![p(&[1]), p(&[-1])]).unwrap();
        assert!(f.eval(&[p(&[7]), p(&[7])]).unwrap().is_zero());
        let g = SplitForm::new(3, vec![vec![0, 1], vec![2]], vec![p(&[1]), p(&[-1])]).unwrap();
        assert!(g.eval(&[p(&[2]), p(&[3]), p(&[6])]).unwrap().is_zero());
        let h = SplitForm::new(1, vec![vec![0]], vec![p(&[2])]).unwrap();
        assert_eq!(h.eval(&[p(&[5])]).unwrap(), p(&[10]));
        assert!(h.eval(&[p(&[5]), p(&[5])]).is_err());
    }

    #[test]
    fn invalid_forms() {
        assert!(SplitForm::new(2, vec![vec![0], vec![0]], vec![p(&[1]), p(&[1])]).is_err());
        assert!(SplitForm::new(2, vec![vec![0]], vec![p(&[1])]).is_err());
        assert!(SplitForm::new(1, vec![vec![0]], vec![p(&[0])]).is_err());
        assert!(SplitForm::new(1, vec![vec![1]], vec![p(&[1])]).is_err());
    }

    #[test]
    fn tuples() {
        assert_eq!(tuples_from(2, 2), vec![vec![2, 1], vec![2, 0]]);
        assert_eq!(tuples_from(2, 3), vec![vec![2, 1, 0]]);
        assert!(tuples_from(1, 3).is_empty());
    }

    #[test]
    fn difference_form_matches_collisions() {
        let s = sys(&[&["X1^2 - 1"]], 1);
        let f = SplitForm::new(2, vec![vec![0], vec![1]], vec![p(&[1]), p(&[-1])]).unwrap();
        let b = CandidateBox::Rational { num: 3, den: 1 };
        let caps = OrbitCaps::default();
        let r = split_form_zero_search(&s, &f, &b, 4, SplitMode::SingleSequence, &caps, 128).unwrap();
        let got: BTreeSet<String> = r.hits.iter().map(|h| h.point.to_string()).collect();
        let mut want = BTreeSet::new();
        for q in b.points::<Cyclotomic>(1, 100).unwrap() {
            if !q.coords()[0].is_zero_elem() && !collision_search(&s, &q, 4, &caps).unwrap().is_empty() {
                want.insert(q.to_string());
            }
        }
        assert_eq!(got, want);
        assert_eq!(r.skipped_non_torus, 1);
    }

    #[test]
    fn binomial_equation() {
        let s = sys(&[&["X1^2"]], 1);
        let f = SplitForm::new(2, vec![vec![0], vec![1]], vec![p(&[1]), p(&[-2])]).unwrap();
        let b = CandidateBox::Rational { num: 4, den: 4 };
        let r = split_form_zero_search(&s, &f, &b, 4, SplitMode::SingleSequence, &OrbitCaps::default(), 128).unwrap();
        assert_eq!(r.hits.len(), 1);
        assert_eq!(r.hits[0].point, p(&[2]));
        assert_eq!(r.hits[0].ns, vec![1, 0]);
        assert!(r.hits[0].within_bound);
        assert!((r.bound.value() - 4.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let empty = CandidateBox::Rational { num: 0, den: 1 };
        let r = split_form_zero_search(&s, &f, &empty, 4, SplitMode::SingleSequence, &OrbitCaps::default(), 128).unwrap();
        assert!(r.hits.is_empty());
    }

    #[test]
    fn hypotheses() {
        let s = sys(&[&["X1^2", "X2^2"]], 2);
        let f = SplitForm::new(1, vec![vec![0]], vec![p(&[1, 1])]).unwrap();
        let b = CandidateBox::Rational { num: 1, den: 1 };
        let caps = OrbitCaps::default();
        for mode in [SplitMode::SingleSequence, SplitMode::MultiSequence] {
            assert!(matches!(
                split_form_zero_search(&s, &f, &b, 2, mode, &caps, 64),
                Err(Error::Hypothesis(_))
            ));
        }
        let t = sys(&[&["X1^3"], &["X1^3 - 1"]], 1);
        let g = SplitForm::new(2, vec![vec![0], vec![1]], vec![p(&[1]), p(&[-1])]).unwrap();
        let r = split_form_zero_search(&t, &g, &b, 2, SplitMode::MultiSequence, &caps, 64).unwrap();
        assert!(r.hits.iter().all(|h| h.within_bound));
        assert!(!r.hits.is_empty());
    }
}
