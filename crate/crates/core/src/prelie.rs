//! Pre-Lie rings, the ξ machinery and brace → pre-Lie extraction.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;

use crate::arith;
use crate::brace::{check_table, AxiomFailure, Brace, Metadata, RuleDesc, TABLE_CAP};
use crate::budget::{Budget, Mode};
use crate::error::{Error, Result};
use crate::pgroup::{BoxSubgroup, GElement, GroupShape, PullbackChoice, Subgroup};
use crate::props;
use crate::search::{first_fail, rand_index, sample_fail};

/// A group endomorphism, stored as the images of the standard basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearMap {
    images: Vec<GElement>,
}

impl LinearMap {
    pub fn from_fn(shape: &GroupShape, f: impl Fn(&GElement) -> GElement) -> Self {
        LinearMap { images: shape.basis().iter().map(f).collect() }
    }

    pub fn images(&self) -> &[GElement] {
        &self.images
    }

    pub fn apply(&self, shape: &GroupShape, x: &GElement) -> GElement {
        let moduli = shape.moduli();
        let mut out = vec![0u64; moduli.len()];
        for (&c, img) in x.coeffs().iter().zip(&self.images) {
            if c == 0 {
                continue;
            }
            for ((o, &v), &m) in out.iter_mut().zip(img.coeffs()).zip(moduli) {
                *o = (*o + arith::mul_mod(c % m, v, m)) % m;
            }
        }
        GElement::from_slice(&out)
    }

    pub fn is_zero(&self) -> bool {
        self.images.iter().all(|g| g.is_zero())
    }
}

pub trait DotRule: Send + Sync {
    fn dot(&self, shape: &GroupShape, a: &GElement, b: &GElement) -> GElement;
    fn label(&self) -> String;
    fn descriptor(&self) -> Option<RuleDesc> {
        None
    }
}

#[derive(Clone)]
pub enum DotBacking {
    Table(Arc<Vec<u32>>),
    Rule(Arc<dyn DotRule>),
}

#[derive(Clone)]
pub struct PreLie {
    shape: GroupShape,
    backing: DotBacking,
    meta: Metadata,
}

impl fmt::Debug for PreLie {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PreLie").field("shape", &self.shape.to_string()).field("backing", &self.backing_label()).finish()
    }
}

impl PreLie {
    pub fn from_table(shape: GroupShape, table: Vec<u32>) -> Result<Self> {
        check_table(&shape, &table)?;
        Ok(PreLie { shape, backing: DotBacking::Table(Arc::new(table)), meta: Metadata::default() })
    }

    pub fn from_rule<R: DotRule + 'static>(shape: GroupShape, rule: R) -> Self {
        PreLie { shape, backing: DotBacking::Rule(Arc::new(rule)), meta: Metadata::default() }
    }

    pub fn from_rule_arc(shape: GroupShape, rule: Arc<dyn DotRule>) -> Self {
        PreLie { shape, backing: DotBacking::Rule(rule), meta: Metadata::default() }
    }

    pub fn shape(&self) -> &GroupShape {
        &self.shape
    }

    pub fn order(&self) -> u128 {
        self.shape.order()
    }

    pub fn meta(&self) -> &Metadata {
        &self.meta
    }

    pub fn with_meta(mut self, meta: Metadata) -> Self {
        self.meta = meta;
        self
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.meta.provenance = provenance.into();
        self
    }

    pub fn backing(&self) -> &DotBacking {
        &self.backing
    }

    pub fn table(&self) -> Option<&[u32]> {
        match &self.backing {
            DotBacking::Table(t) => Some(t),
            DotBacking::Rule(_) => None,
        }
    }

    pub fn backing_label(&self) -> String {
        match &self.backing {
            DotBacking::Table(_) => "table".into(),
            DotBacking::Rule(r) => format!("rule:{}", r.label()),
        }
    }

    pub fn dot(&self, a: &GElement, b: &GElement) -> GElement {
        match &self.backing {
            DotBacking::Table(t) => {
                let n = self.shape.order() as usize;
                let i = self.shape.index(a) as usize * n + self.shape.index(b) as usize;
                self.shape.element(t[i] as u128)
            }
            DotBacking::Rule(r) => r.dot(&self.shape, a, b),
        }
    }

    /// `L_a = (b ↦ a·b)`, assuming additivity in `b`.
    pub fn left_mult(&self, a: &GElement) -> LinearMap {
        LinearMap::from_fn(&self.shape, |g| self.dot(a, g))
    }

    /// `e_i · e_j` for all basis pairs.
    pub fn structure_constants(&self) -> Vec<Vec<GElement>> {
        let basis = self.shape.basis();
        basis.iter().map(|x| basis.iter().map(|y| self.dot(x, y)).collect()).collect()
    }

    pub fn materialize(&self) -> Result<PreLie> {
        match &self.backing {
            DotBacking::Table(_) => Ok(self.clone()),
            DotBacking::Rule(r) => {
                let n = self.shape.order();
                if n > TABLE_CAP {
                    return Err(Error::Structural(format!("order {n} exceeds the table cap {TABLE_CAP}")));
                }
                let table = crate::brace::tabulate(&self.shape, |a, b| r.dot(&self.shape, a, b));
                Ok(PreLie::from_table(self.shape.clone(), table)?.with_meta(self.meta.clone()))
            }
        }
    }

    pub fn compact(self) -> PreLie {
        if self.table().is_none() && self.order() <= TABLE_CAP {
            self.materialize().expect("order within cap")
        } else {
            self
        }
    }

    pub fn structurally_eq(&self, other: &PreLie) -> bool {
        self.shape == other.shape
            && self.meta == other.meta
            && match (&self.backing, &other.backing) {
                (DotBacking::Table(a), DotBacking::Table(b)) => a == b,
                (DotBacking::Rule(a), DotBacking::Rule(b)) => a.descriptor().is_some() && a.descriptor() == b.descriptor(),
                _ => false,
            }
    }
}

/// `x·y = Σ xᵢ yⱼ cᵢⱼ` from structure constants.
pub struct BilinearDot {
    consts: Vec<Vec<GElement>>,
}

impl BilinearDot {
    /// Rejects constants that do not give a well-defined product on the shape.
    pub fn new(shape: &GroupShape, consts: Vec<Vec<GElement>>) -> Result<Self> {
        let r = shape.rank();
        if consts.len() != r || consts.iter().any(|row| row.len() != r) {
            return Err(Error::Structural("structure constants must form an r×r array".into()));
        }
        let p = shape.p() as i128;
        for (i, row) in consts.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                shape.check(c)?;
                let (ai, aj) = (shape.exponents()[i], shape.exponents()[j]);
                for a in [ai, aj] {
                    if !shape.smul(p.pow(a), c).is_zero() {
                        return Err(Error::Structural(format!("constant e{i}·e{j} = {c} is not killed by p^{a}")));
                    }
                }
            }
        }
        Ok(BilinearDot { consts })
    }

    pub fn constants(&self) -> &[Vec<GElement>] {
        &self.consts
    }
}

pub(crate) fn bilinear_eval(shape: &GroupShape, consts: &[Vec<GElement>], a: &GElement, b: &GElement) -> GElement {
    let moduli = shape.moduli();
    let mut out = vec![0u64; moduli.len()];
    for (i, &x) in a.coeffs().iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.coeffs().iter().enumerate() {
            if y == 0 {
                continue;
            }
            for ((o, &c), &m) in out.iter_mut().zip(consts[i][j].coeffs()).zip(moduli) {
                if c != 0 {
                    let xy = arith::mul_mod(x % m, y % m, m);
                    *o = (*o + arith::mul_mod(xy, c, m)) % m;
                }
            }
        }
    }
    GElement::from_slice(&out)
}

pub(crate) fn consts_to_json(consts: &[Vec<GElement>]) -> serde_json::Value {
    let mut entries = Vec::new();
    for (i, row) in consts.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            if !c.is_zero() {
                entries.push(serde_json::json!([i, j, c.coeffs()]));
            }
        }
    }
    serde_json::Value::Array(entries)
}

impl DotRule for BilinearDot {
    fn dot(&self, shape: &GroupShape, a: &GElement, b: &GElement) -> GElement {
        bilinear_eval(shape, &self.consts, a, b)
    }

    fn label(&self) -> String {
        "bilinear".into()
    }

    fn descriptor(&self) -> Option<RuleDesc> {
        Some(RuleDesc { rule: "bilinear".into(), params: serde_json::json!({ "constants": consts_to_json(&self.consts) }) })
    }
}

/// `x·y = μxy` on a cyclic group.
pub struct ScalarDot {
    pub mu: u64,
}

impl DotRule for ScalarDot {
    fn dot(&self, shape: &GroupShape, a: &GElement, b: &GElement) -> GElement {
        let m = shape.moduli()[0];
        let v = arith::mul_mod(arith::mul_mod(self.mu % m, a.coeffs()[0], m), b.coeffs()[0], m);
        GElement::from_slice(&[v])
    }

    fn label(&self) -> String {
        format!("scalar(mu={})", self.mu)
    }

    fn descriptor(&self) -> Option<RuleDesc> {
        Some(RuleDesc { rule: "scalar".into(), params: serde_json::json!({ "mu": self.mu }) })
    }
}

pub struct ZeroDot;

impl DotRule for ZeroDot {
    fn dot(&self, shape: &GroupShape, _a: &GElement, _b: &GElement) -> GElement {
        shape.zero()
    }

    fn label(&self) -> String {
        "zero".into()
    }

    fn descriptor(&self) -> Option<RuleDesc> {
        Some(RuleDesc { rule: "zero".into(), params: serde_json::json!({}) })
    }
}

#[derive(Clone, Debug)]
pub struct PreLieReport {
    pub passed: bool,
    pub failures: Vec<AxiomFailure>,
    pub checks: Vec<(String, Mode)>,
    /// Smallest `m` with all right-nested products of `m` elements zero.
    pub left_nilpotency: Option<usize>,
    pub mode: Mode,
    pub seed: u64,
}

/// Biadditivity and the pre-Lie identity
/// `(x·y)·z − x·(y·z) = (y·x)·z − y·(x·z)`.
///
/// Exhaustive over triples when `|A|³` fits the budget. Otherwise biadditivity
/// is checked against basis shifts (exact when `6·|A|²·r` fits, sampled beyond),
/// the identity on all basis triples (exact given biadditivity) and on seeded
/// random triples.
pub fn verify_prelie(pl: &PreLie, budget: &Budget) -> PreLieReport {
    let shape = pl.shape();
    let n = shape.order();
    let basis = shape.basis();
    let r = basis.len() as u128;
    let mut checks = Vec::new();
    let mut failures = Vec::new();
    let el = |i: u128| shape.element(i);
    let fail = |axiom: &str, w: Vec<&GElement>, d: &str| AxiomFailure {
        axiom: axiom.into(),
        witness: w.into_iter().cloned().collect(),
        detail: d.into(),
    };
    let additive = |a: &GElement, b: &GElement, c: &GElement| {
        if pl.dot(&shape.add(a, b), c) != shape.add(&pl.dot(a, c), &pl.dot(b, c)) {
            return Some(fail("biadditivity", vec![a, b, c], "(a+b)·c ≠ a·c+b·c"));
        }
        if pl.dot(a, &shape.add(b, c)) != shape.add(&pl.dot(a, b), &pl.dot(a, c)) {
            return Some(fail("biadditivity", vec![a, b, c], "a·(b+c) ≠ a·b+a·c"));
        }
        None
    };
    let identity = |x: &GElement, y: &GElement, z: &GElement| {
        let l = shape.sub(&pl.dot(&pl.dot(x, y), z), &pl.dot(x, &pl.dot(y, z)));
        let rr = shape.sub(&pl.dot(&pl.dot(y, x), z), &pl.dot(y, &pl.dot(x, z)));
        (l != rr).then(|| fail("pre-lie", vec![x, y, z], "(x·y)·z − x·(y·z) ≠ (y·x)·z − y·(x·z)"))
    };
    let sampled = Mode::Sampled { samples: budget.samples, seed: budget.seed };
    if budget.allows_product(&[n, n, n]) {
        let f = first_fail(n as u64, |i| {
            let a = el(i as u128);
            (0..n).find_map(|j| {
                let b = el(j);
                (0..n).find_map(|k| additive(&a, &b, &el(k)).or_else(|| identity(&a, &b, &el(k))))
            })
        });
        checks.push(("biadditivity+pre-lie".to_string(), Mode::Exhaustive));
        failures.extend(f);
    } else {
        // Each basis-shift check evaluates six products.
        let (f, mode) = if budget.allows_product(&[n, n, r, 6]) {
            let f = first_fail(n as u64, |i| {
                let a = el(i as u128);
                (0..n).find_map(|j| {
                    let b = el(j);
                    basis.iter().find_map(|g| additive(&a, &b, g).or_else(|| additive(g, &a, &b)))
                })
            });
            (f, Mode::Generators)
        } else {
            let f = sample_fail(
                &mut budget.rng("prelie-additive"),
                budget.samples,
                |rg| (el(rand_index(rg, n)), el(rand_index(rg, n)), el(rand_index(rg, n))),
                |(a, b, c)| additive(a, b, c),
            );
            (f, sampled)
        };
        checks.push(("biadditivity".to_string(), mode));
        failures.extend(f);
        if failures.is_empty() {
            let f = first_fail((r * r * r) as u64, |i| {
                let (a, b, c) = ((i / (r * r) as u64) as usize, ((i / r as u64) % r as u64) as usize, (i % r as u64) as usize);
                identity(&basis[a], &basis[b], &basis[c])
            });
            checks.push(("pre-lie(basis)".to_string(), mode));
            failures.extend(f);
        }
        if failures.is_empty() {
            let f = sample_fail(
                &mut budget.rng("prelie-identity"),
                budget.samples,
                |rg| (el(rand_index(rg, n)), el(rand_index(rg, n)), el(rand_index(rg, n))),
                |(a, b, c)| identity(a, b, c),
            );
            checks.push(("pre-lie(sampled)".to_string(), sampled));
            failures.extend(f);
        }
    }
    let left_nilpotency = if failures.is_empty() { left_nilpotency_index(pl) } else { None };
    if failures.is_empty() && left_nilpotency.is_none() {
        failures.push(AxiomFailure { axiom: "left-nilpotency".into(), witness: Vec::new(), detail: "A(i) stabilizes above 0".into() });
    }
    let mode = checks.iter().fold(Mode::Exhaustive, |m, (_, c)| m.combine(*c));
    PreLieReport { passed: failures.is_empty(), failures, checks, left_nilpotency, mode, seed: budget.seed }
}

/// `A(1) = A`, `A(i+1) = A·A(i)`, exact through basis elements on the left.
pub fn left_chain(pl: &PreLie) -> Vec<Subgroup> {
    let shape = pl.shape();
    let basis = shape.basis();
    let mut terms = vec![Subgroup::whole(shape)];
    loop {
        let cur = terms.last().unwrap();
        if cur.is_zero() || terms.len() > shape.n() as usize + 2 {
            return terms;
        }
        let gens = cur.generators();
        let next = Subgroup::span(shape, basis.iter().flat_map(|a| gens.iter().map(move |g| pl.dot(a, g))));
        let stuck = next.same_as(cur);
        terms.push(next);
        if stuck {
            return terms;
        }
    }
}

/// Smallest `m` with `a₁·(a₂·(⋯a_m)) = 0` for all arguments.
pub fn left_nilpotency_index(pl: &PreLie) -> Option<usize> {
    let chain = left_chain(pl);
    chain.last().unwrap().is_zero().then(|| chain.len())
}

/// Smallest `m` such that every product of at least `m` elements, in any bracketing, is zero.
pub fn strong_nilpotency_index(pl: &PreLie) -> Option<usize> {
    let shape = pl.shape();
    let bound = shape.n() as usize + 2;
    let mut terms: Vec<Subgroup> = vec![Subgroup::zero(shape), Subgroup::whole(shape)];
    let mut first_zero: Option<usize> = None;
    for m in 2..=2 * bound {
        let mut s = Subgroup::zero(shape);
        for i in 1..m {
            let (gi, gj) = (terms[i].generators(), terms[m - i].generators());
            for x in &gi {
                for y in &gj {
                    s.insert(&pl.dot(x, y));
                }
            }
        }
        let zero = s.is_zero();
        terms.push(s);
        match (zero, first_zero) {
            (true, None) => first_zero = Some(m),
            (false, Some(_)) => first_zero = None,
            _ => {}
        }
        if let Some(z) = first_zero {
            if m + 1 >= 2 * z {
                return Some(z);
            }
        }
        if m > bound && first_zero.is_none() {
            return None;
        }
    }
    None
}

/// Smallest `γ ≥ 2` generating `(Z/p^n)^×` (checked modulo `p` for `n = 1`, `p²` otherwise).
pub fn primitive_root(p: u64, n: u32) -> u64 {
    let m = if n == 1 { p } else { p * p };
    let phi = if n == 1 { p - 1 } else { p * (p - 1) };
    (2..m).find(|&g| g % p != 0 && arith::mult_order(g, m, phi) == phi).expect("odd prime powers have primitive roots")
}

/// `γ`, `ξ = γ^{p^{n−1}}` and `−(1+p+⋯+p^n)`, all modulo `p^n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XiContext {
    pub p: u64,
    pub n: u32,
    pub gamma: u64,
    pub xi: BigUint,
    pub scale: BigUint,
}

impl XiContext {
    pub fn new(p: u64, n: u32) -> Self {
        let gamma = primitive_root(p, n);
        let modulus = arith::big_pow(p, n);
        let xi = BigUint::from(gamma).modpow(&arith::big_pow(p, n - 1), &modulus);
        let geo: BigUint = (0..=n).map(|i| arith::big_pow(p, i)).sum();
        let scale = (&modulus - (geo % &modulus)) % &modulus;
        XiContext { p, n, gamma, xi, scale }
    }

    pub fn xi_mod(&self, m: u64) -> u64 {
        arith::big_mod(&self.xi, m as u128) as u64
    }

    pub fn scale_mod(&self, m: u64) -> u64 {
        arith::big_mod(&self.scale, m as u128) as u64
    }

    /// Multiplicative order of `ξ` modulo `p^n`.
    pub fn xi_order(&self) -> u64 {
        let modulus = arith::big_pow(self.p, self.n);
        let one = BigUint::from(1u32);
        let mut x = self.xi.clone() % &modulus;
        let mut k = 1;
        while x != one {
            x = (x * &self.xi) % &modulus;
            k += 1;
            if k > self.p {
                return 0;
            }
        }
        k
    }
}

pub fn xi_context(p: u64, n: u32) -> XiContext {
    XiContext::new(p, n)
}

/// `Σ_{i=0}^{p−2} ξ^{p−1−i} ((ξ^i x) * y)` in the brace, with `ξ` reduced mod the exponent.
pub fn xi_sum(b: &Brace, xi: u64, x: &GElement, y: &GElement) -> GElement {
    let shape = b.shape();
    let p = shape.p();
    let m = shape.exponent_modulus();
    let mut acc = shape.zero();
    let mut xi_i = 1u64;
    for i in 0..p - 1 {
        let w = arith::pow_mod(xi, (p - 1 - i) as u128, m);
        let t = b.star(&shape.smul(xi_i as i128, x), y);
        acc = shape.add(&acc, &shape.smul(w as i128, &t));
        xi_i = arith::mul_mod(xi_i, xi, m);
    }
    acc
}

struct ExtractDot {
    parent: Brace,
    k: u32,
    choice: PullbackChoice,
    classes: BoxSubgroup,
    xi: u64,
    scale: u64,
}

impl DotRule for ExtractDot {
    fn dot(&self, _shape: &GroupShape, a: &GElement, b: &GElement) -> GElement {
        let shape = self.parent.shape();
        let x = shape.smul(shape.p().pow(self.k) as i128, &self.classes.from_quotient(a));
        let y = self.classes.from_quotient(b);
        let v = shape.smul(self.scale as i128, &xi_sum(&self.parent, self.xi, &x, &y));
        let w = shape.wp_inv(&v, self.k, self.choice).expect("p^kA is an ideal, so the sum lies in p^kA");
        self.classes.to_quotient(&w)
    }

    fn label(&self) -> String {
        format!("extract(k={}, choice={})", self.k, self.choice)
    }
}

/// The pre-Lie ring on `A/ann(p^{2k})` extracted from a brace.
///
/// `[a]•[b] = [℘⁻¹(−(1+p+⋯+p^n) Σ_{i=0}^{p−2} ξ^{p−1−i}((ξ^i p^k a)*b))]`.
/// The sum lies in `p^kA` and the classes do not depend on the pullback.
pub fn extract_prelie(b: &Brace, k: u32, choice: PullbackChoice, budget: &Budget) -> Result<PreLie> {
    if let PullbackChoice::Offset { preserve_level: false, .. } = choice {
        return Err(Error::Spec("extraction needs a level-preserving pullback".into()));
    }
    props::ideal_clauses(b, budget)?;
    Ok(extract_unchecked(b, k, choice))
}

pub(crate) fn extract_unchecked(b: &Brace, k: u32, choice: PullbackChoice) -> PreLie {
    let shape = b.shape();
    let ctx = XiContext::new(shape.p(), shape.n().max(1));
    let m = shape.exponent_modulus();
    let classes = shape.annihilator(2 * k);
    let q = classes.quotient_shape().clone();
    let rule = ExtractDot { parent: b.clone(), k, choice, classes, xi: ctx.xi_mod(m), scale: ctx.scale_mod(m) };
    PreLie::from_rule(q, rule).with_provenance(format!("extract({}, k={k})", b.meta().provenance)).compact()
}

struct ClassicRule {
    pl: PreLie,
    inv_fact: Vec<u64>,
}

impl ClassicRule {
    /// `Σ_{j≥1} (1/j!) L_a^{j−1}(a)`.
    fn w(&self, a: &GElement) -> GElement {
        let shape = self.pl.shape();
        let mut term = a.clone();
        let mut acc = shape.zero();
        for (j, &inv) in self.inv_fact.iter().enumerate().skip(1) {
            if j > 1 {
                term = self.pl.dot(a, &term);
            }
            acc = shape.add(&acc, &shape.smul(inv as i128, &term));
        }
        acc
    }

    /// `Σ_{j≥1} (1/j!) L_a^j(b)`.
    fn w2(&self, a: &GElement, b: &GElement) -> GElement {
        let shape = self.pl.shape();
        let mut term = b.clone();
        let mut acc = shape.zero();
        for &inv in self.inv_fact.iter().skip(1) {
            term = self.pl.dot(a, &term);
            acc = shape.add(&acc, &shape.smul(inv as i128, &term));
        }
        acc
    }

    /// Solves `W(x) = a` by the iteration `x ← x + a − W(x)`.
    fn omega(&self, a: &GElement) -> GElement {
        let shape = self.pl.shape();
        let mut x = a.clone();
        for _ in 0..=self.inv_fact.len() + 1 {
            let d = shape.sub(a, &self.w(&x));
            if d.is_zero() {
                return x;
            }
            x = shape.add(&x, &d);
        }
        panic!("classic Ω did not converge at {a}");
    }
}

impl crate::brace::CircRule for ClassicRule {
    fn circ(&self, shape: &GroupShape, a: &GElement, b: &GElement) -> GElement {
        let t = self.w2(&self.omega(a), b);
        shape.add(&shape.add(a, b), &t)
    }

    fn label(&self) -> String {
        "classic-flows".into()
    }
}

/// The unmodified group of flows `a∘b = a + b + W(Ω(a), b)` with `1/j!` as modular inverses.
///
/// Requires strong nilpotency index below `p`, so that every surviving `j!` is a unit.
pub fn classic_exp_log(pl: &PreLie) -> Result<Brace> {
    let shape = pl.shape();
    let p = shape.p() as usize;
    let idx = strong_nilpotency_index(pl)
        .ok_or_else(|| Error::precondition("strongly nilpotent", None))?;
    if idx >= p {
        return Err(Error::precondition(format!("strong nilpotency index {idx} < p = {p}"), None));
    }
    let m = shape.exponent_modulus();
    let mut inv_fact = vec![1u64];
    let mut fact = 1u64;
    for j in 1..idx.max(2) as u64 {
        fact = arith::mul_mod(fact, j, m);
        inv_fact.push(arith::inv_mod(fact as u128, m as u128).expect("j < p") as u64);
    }
    let rule = ClassicRule { pl: pl.clone(), inv_fact };
    Ok(Brace::from_rule(shape.clone(), rule, crate::brace::BraceKind::Unverified)
        .with_provenance(format!("classic-flows({})", pl.meta().provenance))
        .compact())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brace::verify_brace;
    use crate::corpus;

    fn scalar(p: u64, n: u32, mu: u64) -> PreLie {
        PreLie::from_rule(GroupShape::new(p, &[n]).unwrap(), ScalarDot { mu })
    }

    #[test]
    fn primitive_roots() {
        assert_eq!(primitive_root(7, 1), 3);
        assert_eq!(primitive_root(7, 2), 3);
        assert_eq!(primitive_root(5, 1), 2);
        let c = XiContext::new(7, 2);
        assert_eq!(c.xi, BigUint::from(31u32));
        assert_eq!(c.xi_order(), 6);
        let c = XiContext::new(5, 1);
        assert_eq!(c.xi, BigUint::from(2u32));
        for (p, n) in [(7, 3), (13, 6), (11, 4)] {
            let c = XiContext::new(p, n);
            assert_eq!(c.xi_order(), p - 1);
            // scale·(p−1) ≡ 1 modulo p^n
            let m = p.pow(n);
            assert_eq!(arith::mul_mod(c.scale_mod(m), p - 1, m), 1);
        }
    }

    #[test]
    fn nilpotency_indices() {
        let zero = PreLie::from_rule(GroupShape::new(7, &[2]).unwrap(), ZeroDot);
        assert_eq!(left_nilpotency_index(&zero), Some(2));
        assert_eq!(strong_nilpotency_index(&zero), Some(2));
        let s = scalar(7, 3, 7);
        assert_eq!(left_nilpotency_index(&s), Some(4));
        assert_eq!(strong_nilpotency_index(&s), Some(4));
        let s = scalar(7, 3, 49);
        assert_eq!(strong_nilpotency_index(&s), Some(3));
        let field = scalar(7, 1, 1);
        assert_eq!(left_nilpotency_index(&field), None);
    }

    #[test]
    fn verify_examples() {
        let budget = Budget::default();
        assert!(verify_prelie(&scalar(7, 3, 7).compact(), &budget).passed);
        let zero = PreLie::from_rule(GroupShape::new(5, &[1, 1]).unwrap(), ZeroDot).compact();
        assert!(verify_prelie(&zero, &budget).passed);
        let mut t = scalar(7, 2, 7).compact().table().unwrap().to_vec();
        t[49 + 3] = (t[49 + 3] + 1) % 49;
        let bad = PreLie::from_table(GroupShape::new(7, &[2]).unwrap(), t).unwrap();
        let r = verify_prelie(&bad, &budget);
        assert!(!r.passed);
        assert!(!r.failures[0].witness.is_empty());
    }

    #[test]
    fn linear_map_matches_dot() {
        let pl = PreLie::from_rule(
            GroupShape::new(5, &[2, 1]).unwrap(),
            BilinearDot::new(
                &GroupShape::new(5, &[2, 1]).unwrap(),
                vec![
                    vec![GElement::from_slice(&[5, 0]), GElement::from_slice(&[0, 0])],
                    vec![GElement::from_slice(&[5, 0]), GElement::from_slice(&[10, 0])],
                ],
            )
            .unwrap(),
        );
        for a in pl.shape().elements().step_by(7) {
            let l = pl.left_mult(&a);
            for b in pl.shape().elements() {
                assert_eq!(l.apply(pl.shape(), &b), pl.dot(&a, &b));
            }
        }
    }

    #[test]
    fn bilinear_well_definedness() {
        let s = GroupShape::new(5, &[2, 1]).unwrap();
        // e1·e0 = e0 is not killed by 5 (the order of e1).
        let bad = vec![
            vec![GElement::from_slice(&[0, 0]), GElement::from_slice(&[0, 0])],
            vec![GElement::from_slice(&[1, 0]), GElement::from_slice(&[0, 0])],
        ];
        assert!(BilinearDot::new(&s, bad).is_err());
    }

    #[test]
    fn extraction_of_trivial_and_radical() {
        let budget = Budget::default();
        let t = corpus::trivial_brace(GroupShape::new(7, &[3]).unwrap());
        let pl = extract_prelie(&t, 1, PullbackChoice::Canonical, &budget).unwrap();
        assert!(pl.structure_constants().iter().flatten().all(|c| c.is_zero()));

        let b = corpus::radical_ring_brace(7, 6, 7).unwrap();
        let pl = extract_prelie(&b, 1, PullbackChoice::Canonical, &budget).unwrap();
        assert_eq!(pl.order(), 2401);
        for x in (0..2401u64).step_by(31) {
            for y in (0..2401u64).step_by(29) {
                assert_eq!(pl.dot(&GElement::from_slice(&[x]), &GElement::from_slice(&[y])), GElement::from_slice(&[7 * x * y % 2401]));
            }
        }
        let off = extract_prelie(&b, 1, PullbackChoice::offset(4), &budget).unwrap();
        assert_eq!(pl.table(), off.table());
    }

    #[test]
    fn classic_flows_of_scalar_ring() {
        // x·y = 49xy on Z/343: W(a, b) = 49ab, so a∘b = a + b + 49ab.
        let pl = scalar(7, 3, 49);
        let b = classic_exp_log(&pl).unwrap();
        for x in (0..343u64).step_by(5) {
            for y in (0..343u64).step_by(3) {
                assert_eq!(b.circ(&GElement::from_slice(&[x]), &GElement::from_slice(&[y])), GElement::from_slice(&[(x + y + 49 * x * y) % 343]));
            }
        }
        assert!(verify_brace(&b, &Budget::default()).passed);
        assert!(classic_exp_log(&scalar(7, 3, 7)).is_ok());
        assert!(classic_exp_log(&scalar(7, 1, 1)).is_err());
    }

    #[test]
    fn xi_sum_recovers_product_in_lazard_range() {
        // For a group of flows of strong index < p the ξ-sum picks the linear part.
        let pl = PreLie::from_rule(
            GroupShape::new(7, &[2, 2]).unwrap(),
            BilinearDot::new(
                &GroupShape::new(7, &[2, 2]).unwrap(),
                vec![
                    vec![GElement::from_slice(&[0, 7]), GElement::from_slice(&[7, 0])],
                    vec![GElement::from_slice(&[0, 14]), GElement::from_slice(&[0, 0])],
                ],
            )
            .unwrap(),
        );
        let b = classic_exp_log(&pl).unwrap();
        let s = b.shape().clone();
        let xi = XiContext::new(7, s.n()).xi_mod(s.exponent_modulus());
        for x in s.elements().step_by(97) {
            for y in s.elements().step_by(89) {
                assert_eq!(xi_sum(&b, xi, &x, &y), s.smul(6, &pl.dot(&x, &y)));
            }
        }
    }
}
