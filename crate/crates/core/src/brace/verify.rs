//! Brace and pseudobrace axiom checks.
//!
//! Exhaustive triple loops run when `|A|³` fits the budget. Above that, the
//! checks stay exact through two reductions: the brace law only needs `c` to
//! range over a basis once `λ_a(0) = 0`, and associativity only needs the middle
//! argument to range over a set generating `(A, ∘)` (Light's test). Beyond the
//! quadratic budget everything falls back to seeded sampling.

use std::collections::VecDeque;
use std::fmt;

use super::series::left_series;
use super::view::{Structure, Visitor};
use super::Brace;
use crate::budget::{Budget, Mode};
use crate::pgroup::GElement;
use crate::search::{first_fail, rand_index, sample_fail};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AxiomFailure {
    pub axiom: String,
    pub witness: Vec<GElement>,
    pub detail: String,
}

impl fmt::Display for AxiomFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.axiom)?;
        for (i, w) in self.witness.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{w}")?;
        }
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BraceReport {
    pub passed: bool,
    pub failures: Vec<AxiomFailure>,
    /// Mode used by each check that ran, in order.
    pub checks: Vec<(String, Mode)>,
    /// Checks not run because an earlier one failed.
    pub skipped: Vec<String>,
    /// Orders of the nonzero terms of the left series.
    pub series_orders: Vec<u128>,
    pub series_length: usize,
    pub mode: Mode,
    pub seed: u64,
}

impl BraceReport {
    pub fn witness(&self) -> Option<&AxiomFailure> {
        self.failures.first()
    }
}

struct Outcome {
    name: &'static str,
    mode: Mode,
    failure: Option<AxiomFailure>,
}

fn fail<S: Structure>(s: &S, axiom: &str, w: &[&S::E], detail: impl Into<String>) -> AxiomFailure {
    AxiomFailure { axiom: axiom.into(), witness: w.iter().map(|x| s.to_g(x)).collect(), detail: detail.into() }
}

/// Budget units charged per `∘` of a rule-backed structure, relative to a table lookup.
const RULE_COST: u128 = 100;

fn cost<S: Structure>(s: &S) -> u128 {
    if s.is_table() {
        1
    } else {
        RULE_COST
    }
}

fn sampled(budget: &Budget, n: u64) -> Mode {
    Mode::Sampled { samples: n, seed: budget.seed }
}

fn check_identity<S: Structure>(s: &S, budget: &Budget) -> Outcome {
    let n = s.order();
    let z = s.zero();
    let test = |a: &S::E| {
        (s.op(&z, a) != *a || s.op(a, &z) != *a).then(|| fail(s, "identity", &[a], "0 is not a two-sided ∘-identity"))
    };
    if budget.allows_product(&[n, 2, cost(s)]) {
        let f = first_fail(n as u64, |i| test(&s.elem(i as u128)));
        Outcome { name: "identity", mode: Mode::Exhaustive, failure: f }
    } else {
        let mut rng = budget.rng("identity");
        let f = sample_fail(&mut rng, budget.samples, |r| s.elem(rand_index(r, n)), test);
        Outcome { name: "identity", mode: sampled(budget, budget.samples), failure: f }
    }
}

fn pow<S: Structure>(s: &S, a: &S::E, mut e: u128) -> S::E {
    let mut acc = s.zero();
    let mut base = a.clone();
    while e > 0 {
        if e & 1 == 1 {
            acc = s.op(&acc, &base);
        }
        e >>= 1;
        if e > 0 {
            base = s.op(&base, &base);
        }
    }
    acc
}

fn check_inverses<S: Structure>(s: &S, budget: &Budget) -> Outcome {
    let n = s.order();
    let z = s.zero();
    if s.is_table() && budget.allows_product(&[n, n]) {
        let f = first_fail(n as u64, |i| {
            let a = s.elem(i as u128);
            let has = (0..n).any(|j| s.op(&a, &s.elem(j)) == z);
            (!has).then(|| fail(s, "inverse", &[&a], "no right ∘-inverse"))
        });
        return Outcome { name: "inverse", mode: Mode::Exhaustive, failure: f };
    }
    let test = |a: &S::E| {
        let u = pow(s, a, n - 1);
        (s.op(a, &u) != z).then(|| fail(s, "inverse", &[a], "a∘a^(|A|-1) is not 0"))
    };
    let bits = 128 - n.leading_zeros() as u128;
    if budget.allows_product(&[n, 2, bits, cost(s)]) {
        let f = first_fail(n as u64, |i| test(&s.elem(i as u128)));
        Outcome { name: "inverse", mode: Mode::Exhaustive, failure: f }
    } else {
        let count = budget.heavy_samples();
        let mut rng = budget.rng("inverse");
        let f = sample_fail(&mut rng, count, |r| s.elem(rand_index(r, n)), test);
        Outcome { name: "inverse", mode: sampled(budget, count), failure: f }
    }
}

/// `a∘(b+c) + a = a∘b + a∘c`, i.e. left distributivity of `*`.
fn check_brace_law<S: Structure>(s: &S, budget: &Budget, name: &'static str) -> Outcome {
    let n = s.order();
    let law = |a: &S::E, b: &S::E, c: &S::E| {
        let l = s.add(&s.op(a, &s.add(b, c)), a);
        let r = s.add(&s.op(a, b), &s.op(a, c));
        (l != r).then(|| fail(s, name, &[a, b, c], "a∘(b+c)+a ≠ a∘b+a∘c"))
    };
    let basis = s.basis();
    // With λ_a(0) = 0, additivity on (b, basis) gives additivity everywhere.
    let on_basis = || {
        first_fail(n as u64, |i| {
            let a = s.elem(i as u128);
            let z = s.zero();
            if s.op(&a, &z) != a {
                return Some(fail(s, name, &[&a, &z, &z], "a∘0 ≠ a"));
            }
            (0..n).find_map(|j| {
                let b = s.elem(j);
                basis.iter().find_map(|g| law(&a, &b, g))
            })
        })
    };
    if budget.allows_product(&[n, n, n, cost(s)]) {
        // The basis scan is equivalent and rejects broken tables sooner.
        let f = on_basis().or_else(|| {
            first_fail(n as u64, |i| {
                let a = s.elem(i as u128);
                (0..n).find_map(|j| {
                    let b = s.elem(j);
                    (0..n).find_map(|k| law(&a, &b, &s.elem(k)))
                })
            })
        });
        return Outcome { name, mode: Mode::Exhaustive, failure: f };
    }
    if budget.allows_product(&[n, n, basis.len() as u128, cost(s)]) {
        return Outcome { name, mode: Mode::Generators, failure: on_basis() };
    }
    let mut rng = budget.rng(name);
    let f = sample_fail(
        &mut rng,
        budget.samples,
        |r| (s.elem(rand_index(r, n)), s.elem(rand_index(r, n)), s.elem(rand_index(r, n))),
        |(a, b, c)| law(a, b, c),
    );
    Outcome { name, mode: sampled(budget, budget.samples), failure: f }
}

/// A set generating `(A, ∘)` as a magma, with `0` assumed present.
fn magma_generators<S: Structure>(s: &S) -> Option<Vec<S::E>> {
    let n = s.order() as usize;
    let mut inset = vec![false; n];
    let mut list: Vec<S::E> = Vec::new();
    let mut gens = Vec::new();
    let mut queue = VecDeque::new();
    queue.push_back(s.zero());
    inset[0] = true;
    let mut next = 0usize;
    loop {
        while let Some(x) = queue.pop_front() {
            list.push(x.clone());
            for y in list.clone().iter() {
                for v in [s.op(&x, y), s.op(y, &x)] {
                    let vi = s.index(&v) as usize;
                    if !inset[vi] {
                        inset[vi] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        while next < n && inset[next] {
            next += 1;
        }
        if next == n {
            return Some(gens);
        }
        let g = s.elem(next as u128);
        inset[next] = true;
        gens.push(g.clone());
        queue.push_back(g);
        if gens.len() > 64 {
            return None;
        }
    }
}

fn check_assoc<S: Structure>(s: &S, budget: &Budget) -> Outcome {
    let n = s.order();
    let assoc = |a: &S::E, b: &S::E, c: &S::E| {
        (s.op(&s.op(a, b), c) != s.op(a, &s.op(b, c))).then(|| fail(s, "associativity", &[a, b, c], "(a∘b)∘c ≠ a∘(b∘c)"))
    };
    if budget.allows_product(&[n, n, n, cost(s)]) {
        let f = first_fail(n as u64, |i| {
            let a = s.elem(i as u128);
            (0..n).find_map(|j| {
                let b = s.elem(j);
                (0..n).find_map(|k| assoc(&a, &b, &s.elem(k)))
            })
        });
        return Outcome { name: "associativity", mode: Mode::Exhaustive, failure: f };
    }
    if budget.allows_product(&[n, n, 4, cost(s)]) && n <= u32::MAX as u128 {
        if let Some(gens) = magma_generators(s) {
            if budget.allows_product(&[n, n, gens.len() as u128, cost(s)]) {
                let f = first_fail(n as u64, |i| {
                    let a = s.elem(i as u128);
                    gens.iter().find_map(|g| (0..n).find_map(|k| assoc(&a, g, &s.elem(k))))
                });
                return Outcome { name: "associativity", mode: Mode::Generators, failure: f };
            }
        }
    }
    let mut rng = budget.rng("associativity");
    let f = sample_fail(
        &mut rng,
        budget.samples,
        |r| (s.elem(rand_index(r, n)), s.elem(rand_index(r, n)), s.elem(rand_index(r, n))),
        |(a, b, c)| assoc(a, b, c),
    );
    Outcome { name: "associativity", mode: sampled(budget, budget.samples), failure: f }
}

/// Power laws of a pseudobrace.
///
/// With `λ_a` additive, `a^{∘i}∘b = a∘(a∘⋯(a∘b))` for all `b` is equivalent to
/// `λ_{a^{∘i}} = λ_a^i` on a basis. Once `a^{∘N} = 0` this makes `b ↦ a∘b` a
/// permutation of order dividing `N`, so negative powers are `a^{∘(N−i)}` and
/// the remaining laws for all integers `i, j` follow.
fn check_powers<S: Structure>(s: &S, budget: &Budget) -> Outcome {
    let n = s.order();
    let basis = s.basis();
    let r = basis.len() as u128;
    let test = |a: &S::E, limit: u128, full: bool| -> Option<AxiomFailure> {
        let mut ai = a.clone();
        let mut iter: Vec<S::E> = basis.clone();
        let mut i = 1u128;
        loop {
            for (g, v) in basis.iter().zip(iter.iter_mut()) {
                *v = s.lambda(a, v);
                if s.lambda(&ai, g) != *v {
                    return Some(fail(s, "powers", &[a, g], format!("a^(∘{i})∘g differs from the {i}-fold left product")));
                }
            }
            if s.is_zero(&ai) {
                return None;
            }
            if i >= limit {
                return full.then(|| fail(s, "powers", &[a], "∘-powers of a do not return to 0"));
            }
            ai = s.op(a, &ai);
            i += 1;
        }
    };
    if budget.allows_product(&[n, n, r, 2, cost(s)]) {
        let f = first_fail(n as u64, |i| test(&s.elem(i as u128), n, true));
        Outcome { name: "powers", mode: Mode::Generators, failure: f }
    } else {
        let count = budget.heavy_samples();
        let mut rng = budget.rng("powers");
        let f = sample_fail(&mut rng, count, |rg| s.elem(rand_index(rg, n)), |a| test(a, 64, false));
        Outcome { name: "powers", mode: sampled(budget, count), failure: f }
    }
}

struct Checks<'a> {
    budget: &'a Budget,
    pseudo: bool,
}

impl Visitor for Checks<'_> {
    type Output = (Vec<Outcome>, Vec<String>);

    fn visit<S: Structure>(self, s: &S) -> Self::Output {
        let order: Vec<&'static str> = if self.pseudo {
            vec!["identity", "left-distributivity", "powers"]
        } else {
            vec!["identity", "inverse", "brace-law", "associativity"]
        };
        let mut out = Vec::new();
        let mut skipped = Vec::new();
        for name in order {
            if out.iter().any(|o: &Outcome| o.failure.is_some()) {
                skipped.push(name.to_string());
                continue;
            }
            out.push(match name {
                "identity" => check_identity(s, self.budget),
                "inverse" => check_inverses(s, self.budget),
                "brace-law" | "left-distributivity" => check_brace_law(s, self.budget, name),
                "associativity" => check_assoc(s, self.budget),
                _ => check_powers(s, self.budget),
            });
        }
        (out, skipped)
    }
}

fn run(b: &Brace, budget: &Budget, pseudo: bool) -> BraceReport {
    let (outcomes, mut skipped) = b.dispatch(Checks { budget, pseudo });
    let mut failures: Vec<AxiomFailure> = outcomes.iter().filter_map(|o| o.failure.clone()).collect();
    let mut checks: Vec<(String, Mode)> = outcomes.iter().map(|o| (o.name.to_string(), o.mode)).collect();
    let (mut series_orders, mut series_length) = (Vec::new(), 0);
    if failures.is_empty() {
        let series = left_series(b, budget);
        series_orders = series.terms.iter().map(|t| t.order()).filter(|&o| o > 1).collect();
        series_length = series.length();
        checks.push(("left-series".into(), series.mode));
        let n = b.shape().n() as usize;
        if !series.reached_zero || series_length > n {
            failures.push(AxiomFailure {
                axiom: "left-series".into(),
                witness: Vec::new(),
                detail: format!("A^(n+1) ≠ 0: {} nonzero terms for n = {n}", series_length),
            });
        }
    } else {
        skipped.push("left-series".into());
    }
    let mode = checks.iter().fold(Mode::Exhaustive, |m, (_, c)| m.combine(*c));
    BraceReport { passed: failures.is_empty(), failures, checks, skipped, series_orders, series_length, mode, seed: budget.seed }
}

/// Group axioms of `(A, ∘)`, the brace law, and the left series bound.
pub fn verify_brace(b: &Brace, budget: &Budget) -> BraceReport {
    run(b, budget, false)
}

/// Pseudobrace axioms 2–5.
pub fn verify_pseudobrace(b: &Brace, budget: &Budget) -> BraceReport {
    run(b, budget, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brace::{BraceKind, CircRule};
    use crate::corpus;
    use crate::pgroup::GroupShape;

    #[test]
    fn corpus_braces_pass() {
        let budget = Budget::default();
        for b in [
            corpus::trivial_brace(GroupShape::new(7, &[2]).unwrap()),
            corpus::trivial_brace(GroupShape::new(5, &[1, 2]).unwrap()),
            corpus::radical_ring_brace(7, 3, 7).unwrap(),
        ] {
            let r = verify_brace(&b.clone().compact(), &budget);
            assert!(r.passed, "{:?}", r.failures);
            assert!(r.mode.is_exact(), "{:?}", r.mode);
            let r = verify_pseudobrace(&b.compact(), &budget);
            assert!(r.passed, "{:?}", r.failures);
        }
    }

    #[test]
    fn reductions_agree_with_triples() {
        let b = corpus::radical_ring_brace(5, 3, 5).unwrap().compact();
        let small = Budget { exhaustive: 200_000, ..Budget::default() };
        let r = verify_brace(&b, &small);
        assert!(r.passed);
        assert_eq!(r.mode, Mode::Generators);
        for seed in 0..20 {
            let bad = corpus::perturb(&b, seed).unwrap();
            let exact = verify_brace(&bad, &Budget::default());
            let reduced = verify_brace(&bad, &small);
            assert!(!exact.passed && !reduced.passed, "seed {seed}");
        }
    }

    struct NotAssoc;

    impl CircRule for NotAssoc {
        // a∘b = a + b + a·b² on Z/25: left distributive fails, identity holds.
        fn circ(&self, shape: &GroupShape, a: &GElement, b: &GElement) -> GElement {
            let (x, y) = (a.coeffs()[0] as i128, b.coeffs()[0] as i128);
            shape.from_ints(&[x + y + 5 * x * y * y]).unwrap()
        }
        fn label(&self) -> String {
            "not-assoc".into()
        }
    }

    #[test]
    fn failing_rule_has_witness() {
        let b = Brace::from_rule(GroupShape::new(5, &[2]).unwrap(), NotAssoc, BraceKind::Unverified);
        let r = verify_brace(&b, &Budget::default());
        assert!(!r.passed);
        let w = &r.failures[0];
        assert!(!w.witness.is_empty());
        assert!(r.skipped.contains(&"left-series".to_string()));
    }

    #[test]
    fn sampled_mode_recorded() {
        let b = corpus::radical_ring_brace(13, 6, 13).unwrap();
        let budget = Budget { exhaustive: 1_000, samples: 2_000, seed: 9 };
        let r = verify_brace(&b, &budget);
        assert!(r.passed, "{:?}", r.failures);
        assert!(matches!(r.mode, Mode::Sampled { seed: 9, .. }));
    }
}
