use cycdyn::canonical::{
    c_bound, canonical_height_map, canonical_height_semigroup, canonical_height_word, collision_bound_experiment,
    preperiodic_by_height, CanonicalOptions, PeriodicWord, SemigroupMode,
};
use cycdyn::cyclotomic::galois_units;
use cycdyn::heights::{house, weil_height, HeightEstimate, RationalPlace};
use cycdyn::nullstellensatz::{
    default_e_max, effective_constants, find_certificate, residual, size_inequality, SizePlace,
};
use cycdyn::orbits::{
    collision_search, growth_check, growth_threshold, house_bound_l, orbit_levels, pi_membership, sigma_a_search,
    house_bound_m, SemigroupSystem, Word,
};
use cycdyn::parse::{parse_point, parse_scalar};
use cycdyn::point::AffinePoint;
use cycdyn::splitform::{split_form_zero_search, SplitForm, SplitMode};
use cycdyn::{primes, Cyclotomic, Error, Rational, Result, Scalar};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::SystemConfig;
use crate::output::{CommandOutput, Table};
use crate::{exit, Command, Settings, SplitModeArg};

pub(crate) fn dispatch(cmd: &Command, cfg: Option<&SystemConfig>, s: &Settings) -> Result<CommandOutput> {
    if let Command::VerifySuite = cmd {
        return crate::suite::run(cfg, s);
    }
    if s.order == 1 {
        run::<Rational>(cmd, cfg, s)
    } else {
        run::<Cyclotomic>(cmd, cfg, s)
    }
}

fn run<C: Scalar>(cmd: &Command, cfg: Option<&SystemConfig>, s: &Settings) -> Result<CommandOutput> {
    match cmd {
        Command::Height(a) => height::<C>(&a.point, s),
        Command::House(a) => house_cmd::<C>(&a.point, s),
        Command::Orbit(a) => orbit::<C>(&system(cfg)?, &a.point, s),
        Command::Canh(a) => canh::<C>(&system(cfg)?, a, s),
        Command::CanhSemigroup(a) => canh_semigroup::<C>(&system(cfg)?, a, s),
        Command::Certify(a) => certify::<C>(&system(cfg)?, a.map.as_deref(), cfg, s),
        Command::Growth(a) => growth::<C>(&system(cfg)?, a, s),
        Command::Bounds(a) => bounds::<C>(&system(cfg)?, a, s),
        Command::SearchCollisions => search_collisions::<C>(&system(cfg)?, s),
        Command::SearchSigma(a) => search_sigma::<C>(&system(cfg)?, a, s),
        Command::SearchPi(a) => search_pi::<C>(&system(cfg)?, a, s),
        Command::SearchSplitform(a) => search_splitform::<C>(&system(cfg)?, a, s),
        Command::DetectMonomialForm(a) => detect_monomial_form::<C>(&system(cfg)?, a.map.as_deref()),
        Command::VerifySuite => unreachable!("handled by dispatch"),
    }
}

fn system<C: Scalar>(cfg: Option<&SystemConfig>) -> Result<SemigroupSystem<C>> {
    cfg.ok_or_else(|| Error::InvalidInput("this command needs --config".into()))?
        .system()
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report data serializes")
}

pub(crate) fn point<C: Scalar>(src: &str, order: u64) -> Result<AffinePoint<C>> {
    let coords = parse_point(src, order)?
        .iter()
        .map(|c| {
            C::from_cyclotomic(c).ok_or_else(|| Error::InvalidInput(format!("coordinate {c} is not in the field")))
        })
        .collect::<Result<Vec<_>>>()?;
    AffinePoint::new(coords)
}

fn rational(src: &str) -> Result<Rational> {
    parse_scalar(src, 1)?
        .to_rational()
        .ok_or_else(|| Error::InvalidInput(format!("'{src}' is not rational")))
}

pub(crate) fn canonical_options(s: &Settings) -> CanonicalOptions {
    CanonicalOptions {
        tol: s.tolerance,
        prec: s.precision,
        caps: s.orbit_caps(),
        max_nodes: s.max_nodes,
    }
}

fn map_index<C: Scalar>(sys: &SemigroupSystem<C>, name: Option<&str>) -> Result<Option<usize>> {
    match name {
        None => Ok(None),
        Some(n) => sys
            .names()
            .iter()
            .position(|m| m == n)
            .map(Some)
            .ok_or_else(|| Error::InvalidInput(format!("no map named '{n}'"))),
    }
}

fn est_row(h: &HeightEstimate) -> [String; 2] {
    [h.value_string(40), h.error_string()]
}

fn height<C: Scalar>(src: &str, s: &Settings) -> Result<CommandOutput> {
    let p = point::<C>(src, s.order)?;
    let h = weil_height(&p, s.precision)?;
    let mut t = Table::new(&["point", "value", "error"]);
    let [v, e] = est_row(&h);
    t.push(vec![p.to_string(), v, e]);
    Ok(CommandOutput::new(json!({"point": p.to_string(), "height": h})).table(t))
}

fn house_cmd<C: Scalar>(src: &str, s: &Settings) -> Result<CommandOutput> {
    let p = point::<C>(src, s.order)?;
    let h = house(&p, s.precision)?;
    let mut t = Table::new(&["point", "value", "error"]);
    let [v, e] = est_row(&h);
    t.push(vec![p.to_string(), v, e]);
    Ok(CommandOutput::new(json!({"point": p.to_string(), "house": h})).table(t))
}

fn orbit<C: Scalar>(sys: &SemigroupSystem<C>, src: &str, s: &Settings) -> Result<CommandOutput> {
    let p = point::<C>(src, s.order)?;
    let caps = s.orbit_caps();
    let lv = orbit_levels(sys, &p, s.depth, &caps)?;
    let mut t = Table::new(&["level", "point", "word"]);
    let mut levels = Vec::new();
    for (k, level) in lv.levels.iter().enumerate() {
        let mut pts = Vec::new();
        for (q, w) in level {
            t.push(vec![k.to_string(), q.to_string(), w.to_string()]);
            pts.push(json!({"point": q.to_string(), "word": w}));
        }
        levels.push(Value::Array(pts));
    }
    let collisions = if s.depth > 0 {
        collision_search(sys, &p, s.depth, &caps)?
    } else {
        Vec::new()
    };
    Ok(CommandOutput::new(json!({
        "depth": s.depth,
        "sizes": lv.sizes(),
        "levels": levels,
        "collisions": collisions,
    }))
    .table(t))
}

fn canh<C: Scalar>(sys: &SemigroupSystem<C>, a: &crate::CanhArgs, s: &Settings) -> Result<CommandOutput> {
    let x = point::<C>(&a.point, s.order)?;
    let opts = canonical_options(s);
    let cb = c_bound(sys, s.precision)?;
    let h = weil_height(&x, s.precision)?;
    let (target, est, c_hat) = match (&a.word, map_index(sys, a.map.as_deref())?) {
        (Some(_), Some(_)) => return Err(Error::InvalidInput("give either --map or --word, not both".into())),
        (Some(w), None) => {
            let word = Word::parse(w, sys.len())?;
            if word.is_empty() {
                return Err(Error::InvalidInput("--word must not be empty".into()));
            }
            let est = canonical_height_word(sys, &PeriodicWord(word.clone()), &x, &opts)?;
            (json!({"word": word}), est, cb.max.clone())
        }
        (None, idx) => {
            let i = match idx {
                Some(i) => i,
                None if sys.len() == 1 => 0,
                None => return Err(Error::InvalidInput("several maps: choose one with --map or use --word".into())),
            };
            let est = canonical_height_map(&sys.maps()[i], &x, &opts)?;
            (json!({"map": sys.names()[i]}), est, cb.per_generator[i].clone())
        }
    };
    let diff = (est.estimate.value() - h.value()).abs();
    let holds = diff <= 2.0 * c_hat.upper() + opts.tol;
    let mut t = Table::new(&["point", "value", "error", "method", "depth"]);
    let [v, e] = est_row(&est.estimate);
    t.push(vec![x.to_string(), v, e, to_value(&est.method).as_str().unwrap_or_default().to_string(), est.depth.to_string()]);
    Ok(CommandOutput::new(json!({
        "target": target,
        "point": x.to_string(),
        "canonical_height": est,
        "weil_height": h,
        "c_hat": c_hat,
    }))
    .hypotheses(json!({"difference_within_2_c_hat": holds}))
    .table(t))
}

fn canh_semigroup<C: Scalar>(
    sys: &SemigroupSystem<C>,
    a: &crate::SemigroupArgs,
    s: &Settings,
) -> Result<CommandOutput> {
    let x = point::<C>(&a.point, s.order)?;
    let opts = canonical_options(s);
    let mode = if a.monte_carlo {
        SemigroupMode::MonteCarlo {
            seed: s.seed,
            samples: a.samples.unwrap_or(s.samples),
        }
    } else {
        SemigroupMode::ExactSum
    };
    let est = canonical_height_semigroup(sys, &x, mode, &opts)?;
    let mut t = Table::new(&["point", "value", "error", "method", "std_error"]);
    let [v, e] = est_row(&est.estimate);
    t.push(vec![
        x.to_string(),
        v,
        e,
        to_value(&est.method).as_str().unwrap_or_default().to_string(),
        est.std_error.map(|x| format!("{x:e}")).unwrap_or_default(),
    ]);
    Ok(CommandOutput::new(json!({
        "point": x.to_string(),
        "mode": if a.monte_carlo { "monte-carlo" } else { "exact-sum" },
        "degrees": sys.degrees(),
        "canonical_height": est,
    }))
    .table(t))
}

fn certify<C: Scalar>(
    sys: &SemigroupSystem<C>,
    map: Option<&str>,
    cfg: Option<&SystemConfig>,
    s: &Settings,
) -> Result<CommandOutput> {
    let chosen: Vec<usize> = match map_index(sys, map)? {
        Some(i) => vec![i],
        None => (0..sys.len()).collect(),
    };
    let mut t = Table::new(&["map", "e", "residual", "C", "D"]);
    let mut out = Vec::new();
    let mut all = true;
    for i in chosen {
        let name = &sys.names()[i];
        let lift = sys.maps()[i].lift();
        let e_max = cfg
            .and_then(|c| c.caps.e_max)
            .unwrap_or_else(|| default_e_max(lift.degree(), lift.nvars()));
        match find_certificate(&lift, e_max)? {
            Some(cert) => {
                let exact = (0..lift.nvars()).all(|j| residual(&lift, &cert, j).is_zero());
                let k = effective_constants(&lift, &cert, s.precision)?;
                let res = if exact { "exact-zero" } else { "nonzero" };
                t.push(vec![name.clone(), cert.e.to_string(), res.into(), k.c_lower.to_string(), k.d_upper.to_string()]);
                all &= exact;
                out.push(json!({
                    "map": name,
                    "lift": lift.to_string(),
                    "e": cert.e,
                    "certificate": cert.to_json(),
                    "residual": res,
                    "constants": {
                        "C": k.c_lower.to_string(),
                        "D": k.d_upper.to_string(),
                        "f_terms": k.f_terms,
                        "g_terms": k.g_terms,
                        "embeddings": k.embeddings,
                        "f_norms": k.f_norms.iter().cloned().map(HeightEstimate::from_ball).collect::<Vec<_>>(),
                        "g_norms": k.g_norms.iter().cloned().map(HeightEstimate::from_ball).collect::<Vec<_>>(),
                    },
                }));
            }
            None => {
                all = false;
                t.push(vec![name.clone(), String::new(), String::new(), String::new(), String::new()]);
                out.push(json!({
                    "map": name,
                    "lift": lift.to_string(),
                    "e": null,
                    "certificate": null,
                    "residual": null,
                    "e_max": e_max,
                }));
            }
        }
    }
    let code = if all { exit::OK } else { exit::HYPOTHESIS };
    Ok(CommandOutput::new(Value::Array(out))
        .hypotheses(json!({"lifts_without_common_zero": all}))
        .table(t)
        .code(code))
}

fn growth<C: Scalar>(sys: &SemigroupSystem<C>, a: &crate::GrowthArgs, s: &Settings) -> Result<CommandOutput> {
    let x = point::<C>(&a.point, s.order)?;
    let place = RationalPlace::parse(&a.place)?;
    let word = Word::parse(&a.word, sys.len())?;
    let r = growth_check(sys, &x, place, &word)?;
    let mut t = Table::new(&["step", "size"]);
    for (i, v) in r.sizes.iter().enumerate() {
        t.push(vec![i.to_string(), v.to_string()]);
    }
    Ok(CommandOutput::new(to_value(&r))
        .hypotheses(json!({"size_above_threshold": r.precondition_met}))
        .table(t))
}

fn bounds<C: Scalar>(sys: &SemigroupSystem<C>, a: &crate::BoundsArgs, s: &Settings) -> Result<CommandOutput> {
    let a_val = rational(&a.a)?;
    let prec = s.precision;
    let cb = c_bound(sys, prec)?;
    let l = HeightEstimate::from_ball(house_bound_l(sys, &a_val, prec)?);
    let (m, m_reason) = match house_bound_m(sys, &a_val, prec) {
        Ok(m) => (Some(m), None),
        Err(Error::Hypothesis(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    let thresholds = if sys.is_rational() {
        let mut v = serde_json::Map::new();
        v.insert("inf".into(), json!(growth_threshold(sys, RationalPlace::Archimedean)?.to_string()));
        Some(Value::Object(v))
    } else {
        None
    };
    let mut t = Table::new(&["quantity", "value", "error"]);
    for (i, h) in cb.per_generator.iter().enumerate() {
        let [v, e] = est_row(h);
        t.push(vec![format!("c_hat[{}]", sys.names()[i]), v, e]);
    }
    let [v, e] = est_row(&l);
    t.push(vec!["L".into(), v, e]);
    if let Some(m) = &m {
        let [v, e] = est_row(&m.bound);
        t.push(vec!["M".into(), v, e]);
    }
    let mut size_checks = Value::Null;
    let mut sizes_hold = None;
    if let Some(src) = &a.point {
        let x = point::<C>(src, s.order)?;
        let order = primes::lcm(sys.order(), x.order());
        let mut rows = Vec::new();
        let mut ok = true;
        for (i, cm) in sys.certified()?.iter().enumerate() {
            let mut places: Vec<SizePlace> = galois_units(order).into_iter().map(SizePlace::Embedding).collect();
            if sys.is_rational() && x.is_rational() {
                for p in a.primes.split(',').filter(|p| !p.trim().is_empty()) {
                    let p: u64 = p
                        .trim()
                        .parse()
                        .map_err(|_| Error::InvalidInput(format!("bad prime '{p}'")))?;
                    places.push(SizePlace::Prime(p));
                }
            }
            for pl in places {
                let c = size_inequality(&cm.lift, &cm.constants, x.coords(), pl, prec)?;
                ok &= c.holds;
                rows.push(json!({"map": sys.names()[i], "check": c}));
            }
        }
        sizes_hold = Some(ok);
        size_checks = Value::Array(rows);
    }
    let d = sys.common_degree();
    let hyp = json!({
        "common_degree": d,
        "d_at_least_3": d.is_some_and(|d| d >= 3),
        "a_at_least_1": a_val >= Rational::from_integer(1.into()),
        "size_inequality_holds": sizes_hold,
    });
    let code = if m.is_some() && sizes_hold != Some(false) {
        exit::OK
    } else if m.is_none() {
        exit::HYPOTHESIS
    } else {
        exit::FAILURE
    };
    Ok(CommandOutput::new(json!({
        "c_hat": cb,
        "L": l,
        "M": m,
        "M_unavailable": m_reason,
        "growth_thresholds": thresholds,
        "size_checks": size_checks,
    }))
    .hypotheses(hyp)
    .table(t)
    .code(code))
}

fn search_collisions<C: Scalar>(sys: &SemigroupSystem<C>, s: &Settings) -> Result<CommandOutput> {
    let r = collision_bound_experiment(sys, &s.candidates, s.depth, &s.orbit_caps(), s.precision)?;
    let mut t = Table::new(&["point", "height", "n", "m", "word_n", "word_m", "bound", "within_bound"]);
    for row in &r.rows {
        t.push(vec![
            row.point.to_string(),
            row.height.value_string(20),
            row.n.to_string(),
            row.m.to_string(),
            row.word_n.to_string(),
            row.word_m.to_string(),
            row.bound.as_ref().map(|b| b.value_string(20)).unwrap_or_default(),
            row.within_bound.map(|b| b.to_string()).unwrap_or_default(),
        ]);
    }
    let all = r.rows.iter().all(|row| row.within_bound != Some(false));
    Ok(CommandOutput::new(to_value(&r))
        .hypotheses(json!({"common_degree": r.common_degree, "all_within_bound": all}))
        .table(t))
}

fn search_sigma<C: Scalar>(sys: &SemigroupSystem<C>, a: &crate::SigmaArgs, s: &Settings) -> Result<CommandOutput> {
    let a_val = rational(&a.a)?;
    let gammas = match &a.gammas {
        Some(g) => g
            .split(';')
            .filter(|t| !t.trim().is_empty())
            .map(|t| point::<C>(t, s.order))
            .collect::<Result<Vec<_>>>()?,
        None => vec![AffinePoint::new(vec![C::zero(); sys.dim()])?],
    };
    let r = sigma_a_search(sys, &a_val, &gammas, &s.candidates, s.depth, &s.orbit_caps(), s.precision)?;
    let mut t = Table::new(&["point", "n", "word", "house", "within_m", "scaled_integral"]);
    for h in &r.hits {
        t.push(vec![
            h.point.to_string(),
            h.n.to_string(),
            h.word.to_string(),
            h.house.value_string(20),
            h.within_m.map(|b| b.to_string()).unwrap_or_default(),
            h.scaled_integral.to_string(),
        ]);
    }
    let hyp = json!({
        "d_at_least_3": r.bound_m.is_some(),
        "all_within_m": r.hits.iter().all(|h| h.within_m != Some(false)),
        "all_scaled_integral": r.hits.iter().all(|h| h.scaled_integral),
    });
    Ok(CommandOutput::new(to_value(&r)).hypotheses(hyp).table(t))
}

fn search_pi<C: Scalar>(sys: &SemigroupSystem<C>, a: &crate::PiArgs, s: &Settings) -> Result<CommandOutput> {
    let k_max = a.k_max.unwrap_or(s.k_max);
    let l_max = a.l_max.unwrap_or(s.l_max);
    let caps = s.orbit_caps();
    if let Some(src) = &a.point {
        let x = point::<C>(src, s.order)?;
        let r = preperiodic_by_height(sys, &x, k_max, l_max, &canonical_options(s))?;
        let mut t = Table::new(&["point", "verdict"]);
        t.push(vec![x.to_string(), to_value(&r.verdict).as_str().unwrap_or_default().to_string()]);
        return Ok(CommandOutput::new(json!({"point": x.to_string(), "report": r})).table(t));
    }
    let pts: Vec<AffinePoint<C>> = s.candidates.points(sys.dim(), caps.max_points)?;
    let found = pts
        .par_iter()
        .map(|p| pi_membership(sys, p, k_max, l_max, &caps).map(|m| (p, m)))
        .collect::<Vec<_>>();
    let mut t = Table::new(&["point", "k", "l", "path", "return"]);
    let mut rows = Vec::new();
    let mut caps_hit = Vec::new();
    for r in found {
        match r {
            Ok((p, m)) => {
                if let Some(w) = m.found {
                    t.push(vec![p.to_string(), w.k.to_string(), w.l.to_string(), w.path.to_string(), w.ret.to_string()]);
                    rows.push(json!({"point": p.to_string(), "witness": w}));
                }
            }
            Err(e @ Error::Overflow { .. }) => caps_hit.push(e.to_string()),
            Err(e) => return Err(e),
        }
    }
    caps_hit.dedup();
    let mut out = CommandOutput::new(json!({
        "candidates": pts.len(),
        "k_max": k_max,
        "l_max": l_max,
        "preperiodic": rows,
    }))
    .table(t);
    if !caps_hit.is_empty() {
        out.code = exit::CAPS;
    }
    out.caps_hit = caps_hit;
    Ok(out)
}

fn search_splitform<C: Scalar>(sys: &SemigroupSystem<C>, a: &crate::SplitArgs, s: &Settings) -> Result<CommandOutput> {
    let form = parse_form::<C>(&a.form, s.order, sys.dim())?;
    let mode = match a.mode {
        SplitModeArg::Single => SplitMode::SingleSequence,
        SplitModeArg::Multi => SplitMode::MultiSequence,
    };
    let r = split_form_zero_search(sys, &form, &s.candidates, s.depth, mode, &s.orbit_caps(), s.precision)?;
    let mut t = Table::new(&["point", "ns", "words", "height", "within_bound"]);
    for h in &r.hits {
        let ns: Vec<String> = h.ns.iter().map(|n| n.to_string()).collect();
        let ws: Vec<String> = h.words.iter().map(|w| w.to_string()).collect();
        t.push(vec![
            h.point.to_string(),
            ns.join(" "),
            ws.join(" "),
            h.height.value_string(20),
            h.within_bound.to_string(),
        ]);
    }
    let hyp = json!({
        "checked": r.hypothesis,
        "all_within_bound": r.hits.iter().all(|h| h.within_bound),
    });
    Ok(CommandOutput::new(json!({"form": form.to_string(), "report": r}))
        .hypotheses(hyp)
        .table(t))
}

fn detect_monomial_form<C: Scalar>(sys: &SemigroupSystem<C>, map: Option<&str>) -> Result<CommandOutput> {
    let chosen: Vec<usize> = match map_index(sys, map)? {
        Some(i) => vec![i],
        None => (0..sys.len()).collect(),
    };
    let mut t = Table::new(&["map", "monomial", "perm", "diag", "exponent", "finite_order"]);
    let mut out = Vec::new();
    for i in chosen {
        let name = &sys.names()[i];
        match sys.maps()[i].unitary_monomial_form() {
            Some(f) => {
                let perm: Vec<usize> = f.perm.iter().map(|p| p + 1).collect();
                let diag: Vec<String> = f.diag.iter().map(|c| c.to_string()).collect();
                let finite = f.diag.iter().all(|c| c.to_cyclotomic().is_root_of_unity());
                t.push(vec![
                    name.clone(),
                    "true".into(),
                    format!("{perm:?}"),
                    diag.join(" "),
                    f.exponent.to_string(),
                    finite.to_string(),
                ]);
                out.push(json!({
                    "map": name,
                    "monomial": true,
                    "perm": perm,
                    "diag": diag,
                    "exponent": f.exponent,
                    "linear_part_finite_order": finite,
                }));
            }
            None => {
                t.push(vec![name.clone(), "false".into(), String::new(), String::new(), String::new(), String::new()]);
                out.push(json!({"map": name, "monomial": false}));
            }
        }
    }
    Ok(CommandOutput::new(Value::Array(out)).table(t))
}

/// Split forms such as `T1*T2 - 2*T3` or `[1, z4]*T1 + (1/2)*T2`: a sum of
/// terms, each a product of variables `Tj` and coefficients. A coefficient is
/// a scalar (applied to every coordinate) or a bracketed point.
pub(crate) fn parse_form<C: Scalar>(src: &str, order: u64, dim: usize) -> Result<SplitForm<C>> {
    let bytes = src.as_bytes();
    let mut terms: Vec<(usize, bool, &str)> = Vec::new();
    let mut depth = 0i32;
    let mut start = 0usize;
    let mut negative = false;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'(' | b'[' => depth += 1,
            b')' | b']' => depth -= 1,
            b'+' | b'-' if depth == 0 => {
                let prev = src[..i].trim_end();
                if prev.ends_with(['*', '/', '^']) {
                    continue;
                }
                if !src[start..i].trim().is_empty() {
                    terms.push((start, negative, &src[start..i]));
                } else if i > 0 && !src[..start].trim().is_empty() {
                    return Err(Error::parse(i + 1, "missing term"));
                }
                negative = b == b'-';
                start = i + 1;
            }
            _ => {}
        }
    }
    if src[start..].trim().is_empty() {
        return Err(Error::parse(src.len() + 1, "missing term"));
    }
    terms.push((start, negative, &src[start..]));
    let mut parts = Vec::new();
    let mut coeffs = Vec::new();
    let mut arity = 0;
    for (offset, neg, text) in terms {
        let mut vars = Vec::new();
        let sign = if neg { C::from_int(-1) } else { C::one() };
        let mut coeff = AffinePoint::new(vec![sign; dim])?;
        let mut pos = offset;
        for factor in split_top(text, b'*') {
            let f = factor.trim();
            let col = pos + factor.len() - factor.trim_start().len() + 1;
            pos += factor.len() + 1;
            if let Some(j) = f.strip_prefix('T').and_then(|d| d.parse::<usize>().ok()) {
                if j == 0 {
                    return Err(Error::parse(col, "variables are numbered from T1"));
                }
                vars.push(j - 1);
                arity = arity.max(j);
                continue;
            }
            let relocate = |e: Error| match e {
                Error::Parse { column, message, .. } => Error::parse(col + column - 1, message),
                other => other,
            };
            let c = if let Some(inner) = f.strip_prefix('[').and_then(|g| g.strip_suffix(']')) {
                let p = point::<C>(inner, order).map_err(relocate)?;
                if p.dim() != dim {
                    return Err(Error::parse(col, format!("coefficient has {} coordinates, expected {dim}", p.dim())));
                }
                p
            } else {
                let v = parse_scalar(f, order).map_err(relocate)?;
                let v = C::from_cyclotomic(&v).ok_or_else(|| Error::parse(col, "coefficient is not in the field"))?;
                AffinePoint::new(vec![v; dim])?
            };
            coeff = coeff.hadamard(&c)?;
        }
        if vars.is_empty() {
            return Err(Error::parse(offset + 1, "term without a variable Tj"));
        }
        parts.push(vars);
        coeffs.push(coeff);
    }
    SplitForm::new(arity, parts, coeffs)
}

fn split_top(s: &str, sep: u8) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, &b) in s.as_bytes().iter().enumerate() {
        match b {
            b'(' | b'[' => depth += 1,
            b')' | b']' => depth -= 1,
            _ if b == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms() {
        let f = parse_form::<Rational>("T1*T2 - 2*T3", 1, 1).unwrap();
        assert_eq!(f.arity(), 3);
        assert_eq!(f.parts(), &[vec![0, 1], vec![2]]);
        assert_eq!(f.coeffs()[1].to_string(), "(-2)");
        let g = parse_form::<Cyclotomic>("[1, z4]*T1 + (1/2)*T2", 4, 2).unwrap();
        assert_eq!(g.coeffs()[0].coords()[1], Cyclotomic::zeta(4));
        assert!(parse_form::<Rational>("T1 + 3", 1, 1).is_err());
        assert!(parse_form::<Rational>("T1 + T1", 1, 1).is_err());
        assert!(parse_form::<Rational>("T1 +", 1, 1).is_err());
        match parse_form::<Rational>("T1 + z4*T2", 1, 1) {
            Err(Error::Parse { column, .. }) => assert!(column >= 6, "{column}"),
            other => panic!("{other:?}"),
        }
    }
}
