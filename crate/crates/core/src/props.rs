//! Properties 1, 1′, 1″, 2 and 3, and the rank and uniform criteria.
//!
//! Throughout `m = ⌊(p−1)/4⌋`.

use std::collections::HashMap;
use std::fmt;

use crate::brace::{is_ideal, left_series, Brace};
use crate::budget::{Budget, Mode};
use crate::error::{Error, Result};
use crate::pgroup::{BoxSubgroup, GElement, GroupShape, Subgroup};
use crate::prelie::{left_chain, LinearMap, PreLie};
use crate::search::{first_fail, rand_index, sample_fail};

pub fn m_param(p: u64) -> u32 {
    ((p - 1) / 4) as u32
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyReport {
    pub id: String,
    pub holds: bool,
    pub witness: Option<String>,
    pub params: Vec<(String, String)>,
    pub mode: Mode,
    /// Set when a criterion applies but the property it implies fails.
    pub critical: Option<String>,
}

impl PropertyReport {
    fn new(id: &str, witness: Option<String>, params: Vec<(String, String)>, mode: Mode) -> Self {
        PropertyReport { id: id.into(), holds: witness.is_none(), witness, params, mode, critical: None }
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{}: {} [{}] ({})", self.id, if self.holds { "holds" } else { "fails" }, params.join(", "), self.mode)?;
        if let Some(w) = &self.witness {
            write!(f, " witness: {w}")?;
        }
        if let Some(c) = &self.critical {
            write!(f, " CRITICAL: {c}")?;
        }
        Ok(())
    }
}

fn mparams(p: u64) -> Vec<(String, String)> {
    vec![("m".into(), m_param(p).to_string())]
}

/// `L_a^m` for the brace, using additivity of `x ↦ a*x`.
fn star_power(b: &Brace, a: &GElement, m: u32) -> LinearMap {
    LinearMap::from_fn(b.shape(), |g| {
        let mut x = g.clone();
        for _ in 0..m {
            x = b.star(a, &x);
        }
        x
    })
}

fn elements_or_sample(shape: &GroupShape, budget: &Budget, per: u128, salt: &str) -> (Vec<GElement>, Mode) {
    let n = shape.order();
    if budget.allows_product(&[n, per.max(1)]) {
        (shape.elements().collect(), Mode::Generators)
    } else {
        let count = (budget.exhaustive as u128 / per.max(1)).clamp(1, budget.samples as u128) as u64;
        let mut rng = budget.rng(salt);
        ((0..count).map(|_| shape.element(rand_index(&mut rng, n))).collect(), Mode::Sampled { samples: count, seed: budget.seed })
    }
}

/// `a*(a*(⋯a*b)) ∈ pA` and `a*(a*(⋯a*ann(p^i))) ⊆ ann(p^{i−1})`, `a` appearing `m` times.
///
/// Both clauses are additive in the innermost argument, so it ranges over
/// generators; `a` ranges over all of `A` within budget.
pub fn check_property1(b: &Brace, budget: &Budget) -> PropertyReport {
    let shape = b.shape();
    let p = shape.p();
    if p <= 3 {
        return PropertyReport::new("P1", Some(format!("needs p > 3, got p = {p}")), mparams(p), Mode::Exhaustive);
    }
    let m = m_param(p);
    let e = shape.max_exponent();
    let r = shape.rank() as u128;
    let (elems, mode) = elements_or_sample(shape, budget, r * m as u128, "property1");
    let anns: Vec<(u32, Vec<GElement>, BoxSubgroup)> =
        (1..=e).map(|i| (i, shape.annihilator(i).generators(), shape.annihilator(i - 1))).collect();
    let basis = shape.basis();
    let w = first_fail(elems.len() as u64, |idx| {
        let a = &elems[idx as usize];
        let l = star_power(b, a, m);
        for (g, img) in basis.iter().zip(l.images()) {
            if !shape.in_pk(img, 1) {
                return Some(format!("clause 1: a={a}, b={g}: {img} ∉ pA"));
            }
        }
        for (i, gens, target) in &anns {
            for g in gens {
                let v = l.apply(shape, g);
                if !target.contains(&v) {
                    return Some(format!("clause 2 (i={i}): a={a}, x={g}: {v} ∉ ann(p^{})", i - 1));
                }
            }
        }
        None
    });
    let mut params = mparams(p);
    params.push(("i".into(), format!("1..={e}")));
    PropertyReport::new("P1", w, params, mode)
}

/// `A^m ⊆ pA` for the left series.
pub fn check_property1p(b: &Brace, budget: &Budget) -> PropertyReport {
    let shape = b.shape();
    let m = m_param(shape.p()) as usize;
    let series = left_series(b, budget);
    let term = if m == 0 {
        Subgroup::whole(shape)
    } else {
        series.terms.get(m - 1).cloned().unwrap_or_else(|| Subgroup::zero(shape))
    };
    let w = term.generators().into_iter().find(|g| !shape.in_pk(g, 1)).map(|g| format!("{g} ∈ A^{m} \\ pA"));
    PropertyReport::new("P1'", w, mparams(shape.p()), series.mode)
}

/// `S₀ = start`, `S_{t+1} = span{ prod(a, g) : a ∈ lefts, g ∈ gens(S_t) }`, `steps` times.
fn act_span(
    shape: &GroupShape,
    start: Subgroup,
    lefts: &[GElement],
    steps: u32,
    prod: impl Fn(&GElement, &GElement) -> GElement + Sync,
) -> Subgroup {
    use rayon::prelude::*;
    let mut cur = start;
    for _ in 0..steps {
        if cur.is_zero() {
            break;
        }
        let gens = cur.generators();
        let parts: Vec<Vec<GElement>> = lefts
            .par_chunks(256)
            .map(|chunk| {
                let mut local = Subgroup::zero(shape);
                let mut out = Vec::new();
                for a in chunk {
                    for g in &gens {
                        let v = prod(a, g);
                        if local.insert(&v) {
                            out.push(v);
                        }
                    }
                }
                out
            })
            .collect();
        cur = Subgroup::span(shape, parts.into_iter().flatten());
    }
    cur
}

/// `A*(A*(⋯A*ann(p^i))) ⊆ p·ann(p^i)` with `A` appearing `m` times, for every `i`.
pub fn check_property1pp(b: &Brace, budget: &Budget) -> PropertyReport {
    let shape = b.shape();
    let m = m_param(shape.p());
    let e = shape.max_exponent();
    let (lefts, mode) = elements_or_sample(shape, budget, shape.rank() as u128, "property1pp");
    let mut w = None;
    for i in 1..=e {
        let ann = shape.annihilator(i);
        let target = ann.times_p();
        let s = act_span(shape, ann.to_subgroup(), &lefts, m, |a, g| b.star(a, g));
        if let Some(g) = s.generators().into_iter().find(|g| !target.contains(g)) {
            w = Some(format!("i={i}: {g} ∉ p·ann(p^{i})"));
            break;
        }
    }
    let mut params = mparams(shape.p());
    params.push(("i".into(), format!("1..={e}")));
    PropertyReport::new("P1''", w, params, mode)
}

/// `p^iA`, `ann(p^i)` are ideals and `(p^iA)*ann(p^j) ⊆ ann(p^{j−i})` for `1 ≤ i ≤ j ≤ e`.
pub fn ideal_clauses(b: &Brace, budget: &Budget) -> Result<Mode> {
    let shape = b.shape();
    let e = shape.max_exponent();
    let mut mode = Mode::Generators;
    for i in 1..=e {
        for (name, s) in [(format!("p^{i}A"), shape.p_power_subgroup(i)), (format!("ann(p^{i})"), shape.annihilator(i))] {
            let c = is_ideal(b, &s.to_subgroup(), budget);
            mode = mode.combine(c.mode);
            if let Some((clause, w)) = c.witness {
                let w = w.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
                return Err(Error::precondition(format!("{name} is an ideal ({clause})"), Some(w)));
            }
        }
    }
    for i in 1..=e {
        let pi = shape.p_power_subgroup(i);
        let checks: Vec<(u32, Vec<GElement>, BoxSubgroup)> =
            (i..=e).map(|j| (j, shape.annihilator(j).generators(), shape.annihilator(j - i))).collect();
        let per: u128 = checks.iter().map(|c| c.1.len() as u128).sum();
        let test = |u: &GElement| {
            checks.iter().find_map(|(j, gens, target)| {
                gens.iter().find_map(|g| {
                    let v = b.star(u, g);
                    (!target.contains(&v)).then(|| format!("j={j}: {u} * {g} = {v}"))
                })
            })
        };
        let w = if budget.allows_product(&[pi.order(), per]) {
            let elems: Vec<GElement> = pi.elements().collect();
            first_fail(elems.len() as u64, |t| test(&elems[t as usize]))
        } else {
            mode = mode.combine(Mode::Sampled { samples: budget.samples, seed: budget.seed });
            sample_fail(&mut budget.rng(&format!("ideal-clause-{i}")), budget.samples, |rg| pi.random(rg), test)
        };
        if let Some(w) = w {
            return Err(Error::precondition(format!("(p^{i}A)*ann(p^j) ⊆ ann(p^(j-{i}))"), Some(w)));
        }
    }
    Ok(mode)
}

/// `p^{2k}a = p^{2k}b ⟺ p^k a^{∘p^k} = p^k b^{∘p^k}`, plus [`ideal_clauses`].
///
/// Exhaustively this is a single pass: the fibres of `φ(a) = p^k a^{∘p^k}` must
/// be exactly the classes of `p^{2k}a`.
pub fn check_property2(b: &Brace, k: u32, budget: &Budget) -> PropertyReport {
    let shape = b.shape();
    let p = shape.p();
    let mut params = vec![("k".to_string(), k.to_string())];
    params.extend(mparams(p));
    let mut mode = match ideal_clauses(b, budget) {
        Ok(m) => m,
        Err(e) => return PropertyReport::new("P2", Some(e.to_string()), params, Mode::Generators),
    };
    let pk = (p as i128).pow(k);
    let phi = |a: &GElement| shape.smul(pk, &b.circ_pow(a, pk).expect("nonnegative power"));
    let key = |a: &GElement| shape.smul(pk * pk, a);
    let n = shape.order();
    let w = if budget.allows_product(&[n, pk as u128]) {
        let vals: Vec<(GElement, GElement)> = {
            use rayon::prelude::*;
            (0..n as u64).into_par_iter().map(|i| {
                let a = shape.element(i as u128);
                (key(&a), phi(&a))
            }).collect()
        };
        let mut by_key: HashMap<&GElement, (usize, &GElement)> = HashMap::new();
        let mut by_phi: HashMap<&GElement, (usize, &GElement)> = HashMap::new();
        let mut w = None;
        for (i, (kk, ph)) in vals.iter().enumerate() {
            if let Some(&(j, other)) = by_key.get(kk) {
                if other != ph {
                    w = Some(format!("p^2k-equal {} and {} have different p^k a^(∘p^k)", shape.element(j as u128), shape.element(i as u128)));
                    break;
                }
            } else {
                by_key.insert(kk, (i, ph));
            }
            if let Some(&(j, other)) = by_phi.get(ph) {
                if other != kk {
                    w = Some(format!("{} and {} share p^k a^(∘p^k) but not p^2k a", shape.element(j as u128), shape.element(i as u128)));
                    break;
                }
            } else {
                by_phi.insert(ph, (i, kk));
            }
        }
        mode = mode.combine(Mode::Exhaustive);
        w
    } else {
        let count = budget.heavy_samples();
        mode = mode.combine(Mode::Sampled { samples: count, seed: budget.seed });
        let ann = shape.annihilator(2 * k);
        sample_fail(
            &mut budget.rng("property2"),
            count,
            |rg| {
                let a = shape.element(rand_index(rg, n));
                let same = shape.add(&a, &ann.random(rg));
                let other = shape.element(rand_index(rg, n));
                (a, same, other)
            },
            |(a, same, other)| {
                let (fa, fs, fo) = (phi(a), phi(same), phi(other));
                if fa != fs {
                    return Some(format!("p^2k-equal {a} and {same} have different p^k a^(∘p^k)"));
                }
                ((fa == fo) != (key(a) == key(other))).then(|| format!("biconditional fails at ({a}, {other})"))
            },
        )
    };
    PropertyReport::new("P2", w, params, mode)
}

/// Property 3 for a pre-Lie ring.
///
/// The first clause is read as printed: right-nested products of `m` elements
/// lie in `pA` (for `m = 1` this asks `A = pA`). The second clause applies `m`
/// left factors to `ann(p^i)` and asks for `p·ann(p^i)`. Both are exact through
/// basis elements by biadditivity.
pub fn check_property3(pl: &PreLie, _budget: &Budget) -> PropertyReport {
    let shape = pl.shape();
    let p = shape.p();
    let m = m_param(p);
    let e = shape.max_exponent();
    let mut params = mparams(p);
    params.push(("i".into(), format!("1..={e}")));
    if m == 0 {
        return PropertyReport::new("P3", Some(format!("needs p > 3, got p = {p}")), params, Mode::Generators);
    }
    let chain = left_chain(pl);
    let term = chain.get(m as usize - 1).cloned().unwrap_or_else(|| Subgroup::zero(shape));
    if let Some(g) = term.generators().into_iter().find(|g| !shape.in_pk(g, 1)) {
        return PropertyReport::new("P3", Some(format!("clause 1: {g} ∈ A({m}) \\ pA")), params, Mode::Generators);
    }
    let basis = shape.basis();
    for i in 1..=e {
        let ann = shape.annihilator(i);
        let target = ann.times_p();
        let s = act_span(shape, ann.to_subgroup(), &basis, m, |a, g| pl.dot(a, g));
        if let Some(g) = s.generators().into_iter().find(|g| !target.contains(g)) {
            return PropertyReport::new("P3", Some(format!("clause 2 (i={i}): {g} ∉ p·ann(p^{i})")), params, Mode::Generators);
        }
    }
    PropertyReport::new("P3", None, params, Mode::Generators)
}

fn criterion(id: &str, applies: std::result::Result<(), String>, implied: Vec<PropertyReport>, params: Vec<(String, String)>) -> PropertyReport {
    match applies {
        Err(w) => PropertyReport::new(id, Some(w), params, Mode::Exhaustive),
        Ok(()) => {
            let mode = implied.iter().fold(Mode::Exhaustive, |m, r| m.combine(r.mode));
            let mut r = PropertyReport::new(id, None, params, mode);
            r.critical = implied
                .iter()
                .find(|x| !x.holds)
                .map(|x| format!("criterion applies but {} fails: {}", x.id, x.witness.clone().unwrap_or_default()));
            r
        }
    }
}

/// `rank ≤ m`; when it applies, Property 1 is checked and must hold.
pub fn rank_criterion(b: &Brace, budget: &Budget) -> PropertyReport {
    let shape = b.shape();
    let m = m_param(shape.p());
    let r = shape.rank();
    let applies = if r as u32 <= m { Ok(()) } else { Err(format!("rank {r} > m = {m}")) };
    let implied = if applies.is_ok() { vec![check_property1(b, budget)] } else { vec![] };
    let mut params = mparams(shape.p());
    params.push(("rank".into(), r.to_string()));
    criterion("rank", applies, implied, params)
}

fn m_fold_clause(b: &Brace, budget: &Budget) -> Option<String> {
    let shape = b.shape();
    let m = m_param(shape.p());
    let (elems, _) = elements_or_sample(shape, budget, shape.rank() as u128 * m as u128, "uniform");
    first_fail(elems.len() as u64, |i| {
        let a = &elems[i as usize];
        let l = star_power(b, a, m);
        l.images().iter().zip(shape.basis()).find(|(v, _)| !shape.in_pk(v, 1)).map(|(v, g)| format!("a={a}, b={g}: {v} ∉ pA"))
    })
}

/// Uniform additive group and the `m`-fold clause; when it applies, Property 1 must hold.
pub fn uniform_criterion(b: &Brace, budget: &Budget) -> PropertyReport {
    let shape = b.shape();
    let applies = if !shape.is_uniform() {
        Err(format!("{shape} is not uniform"))
    } else if let Some(w) = m_fold_clause(b, budget) {
        Err(w)
    } else {
        Ok(())
    };
    let implied = if applies.is_ok() { vec![check_property1(b, budget)] } else { vec![] };
    criterion("uniform", applies, implied, mparams(shape.p()))
}

/// The hypothesis of the uniform theorem in its two readings: `A^m = 0`
/// (as printed) and `A^m ⊆ pA`. Either one, on a uniform group, should give
/// Properties 1′ and 1″.
pub fn uniform1_readings(b: &Brace, budget: &Budget) -> (PropertyReport, PropertyReport) {
    let shape = b.shape();
    let m = m_param(shape.p()) as usize;
    let series = left_series(b, budget);
    let term = if m == 0 { Subgroup::whole(shape) } else { series.terms.get(m - 1).cloned().unwrap_or_else(|| Subgroup::zero(shape)) };
    let uniform = shape.is_uniform();
    let strict = if !uniform {
        Err(format!("{shape} is not uniform"))
    } else if !term.is_zero() {
        Err(format!("A^{m} has order {}", term.order()))
    } else {
        Ok(())
    };
    let loose = if !uniform {
        Err(format!("{shape} is not uniform"))
    } else if let Some(g) = term.generators().into_iter().find(|g| !shape.in_pk(g, 1)) {
        Err(format!("{g} ∈ A^{m} \\ pA"))
    } else {
        Ok(())
    };
    let implied = || vec![check_property1p(b, budget), check_property1pp(b, budget)];
    let a = criterion("uniform1(A^m=0)", strict.clone(), if strict.is_ok() { implied() } else { vec![] }, mparams(shape.p()));
    let c = criterion("uniform1(A^m<=pA)", loose.clone(), if loose.is_ok() { implied() } else { vec![] }, mparams(shape.p()));
    (a, c)
}

/// All brace properties and criteria with the implications between them.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub k: u32,
    pub reports: Vec<PropertyReport>,
    pub violations: Vec<String>,
}

impl Lattice {
    pub fn get(&self, id: &str) -> Option<&PropertyReport> {
        self.reports.iter().find(|r| r.id == id)
    }

    pub fn holds(&self, id: &str) -> bool {
        self.get(id).is_some_and(|r| r.holds)
    }
}

/// Checks `(1′∧1″) ⇒ 1`, `1 ⇒ 2`, rank ⇒ 1, uniform ⇒ 1 and both uniform-theorem readings.
pub fn implication_lattice(b: &Brace, k: u32, budget: &Budget) -> Lattice {
    let p1 = check_property1(b, budget);
    let p1p = check_property1p(b, budget);
    let p1pp = check_property1pp(b, budget);
    let p2 = check_property2(b, k, budget);
    let rank = rank_criterion(b, budget);
    let uniform = uniform_criterion(b, budget);
    let (u_strict, u_loose) = uniform1_readings(b, budget);
    let mut violations = Vec::new();
    if p1p.holds && p1pp.holds && !p1.holds {
        violations.push(format!("(1' and 1'') holds but 1 fails: {}", p1.witness.clone().unwrap_or_default()));
    }
    if p1.holds && !p2.holds {
        violations.push(format!("1 holds but 2 fails: {}", p2.witness.clone().unwrap_or_default()));
    }
    for r in [&rank, &uniform, &u_strict, &u_loose] {
        if let Some(c) = &r.critical {
            violations.push(format!("{}: {c}", r.id));
        }
    }
    Lattice { k, reports: vec![p1, p1p, p1pp, p2, rank, uniform, u_strict, u_loose], violations }
}
