//! Test braces and pre-Lie rings, negative controls, the spec registry and the file format.

mod file;

pub use file::{from_json_str, load, save, to_json_string, Structure, FORMAT_VERSION};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::arith;
use crate::brace::{verify_brace, Brace, BraceKind, CircRule, RuleDesc};
use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::pgroup::{GElement, GroupShape};
use crate::prelie::{bilinear_eval, consts_to_json, verify_prelie, BilinearDot, PreLie, ScalarDot, ZeroDot};

pub(crate) struct TrivialRule;

impl CircRule for TrivialRule {
    fn circ(&self, shape: &GroupShape, a: &GElement, b: &GElement) -> GElement {
        shape.add(a, b)
    }

    fn label(&self) -> String {
        "trivial".into()
    }

    fn descriptor(&self) -> Option<RuleDesc> {
        Some(RuleDesc { rule: "trivial".into(), params: serde_json::json!({}) })
    }
}

/// `a∘b = a + b + λab` on a cyclic group.
pub(crate) struct RadicalRule {
    pub lambda: u64,
}

impl CircRule for RadicalRule {
    fn circ(&self, shape: &GroupShape, a: &GElement, b: &GElement) -> GElement {
        let m = shape.moduli()[0];
        let (x, y) = (a.coeffs()[0], b.coeffs()[0]);
        let t = arith::mul_mod(arith::mul_mod(self.lambda % m, x, m), y, m);
        GElement::from_slice(&[((x as u128 + y as u128 + t as u128) % m as u128) as u64])
    }

    fn label(&self) -> String {
        format!("radical(lambda={})", self.lambda)
    }

    fn descriptor(&self) -> Option<RuleDesc> {
        Some(RuleDesc { rule: "radical".into(), params: serde_json::json!({ "lambda": file::int_json(self.lambda as u128) }) })
    }
}

/// `a∘b = a + b + ab` for a nilpotent associative ring given by structure constants.
pub(crate) struct BilinearRule {
    pub consts: Vec<Vec<GElement>>,
}

impl CircRule for BilinearRule {
    fn circ(&self, shape: &GroupShape, a: &GElement, b: &GElement) -> GElement {
        shape.add(&shape.add(a, b), &bilinear_eval(shape, &self.consts, a, b))
    }

    fn label(&self) -> String {
        "bilinear".into()
    }

    fn descriptor(&self) -> Option<RuleDesc> {
        Some(RuleDesc { rule: "bilinear".into(), params: serde_json::json!({ "constants": consts_to_json(&self.consts) }) })
    }
}

pub(crate) struct DirectSumRule {
    pub parts: [Brace; 2],
}

impl DirectSumRule {
    fn split(&self, x: &GElement) -> (GElement, GElement) {
        let r = self.parts[0].shape().rank();
        (GElement::from_slice(&x.coeffs()[..r]), GElement::from_slice(&x.coeffs()[r..]))
    }
}

impl CircRule for DirectSumRule {
    fn circ(&self, _shape: &GroupShape, a: &GElement, b: &GElement) -> GElement {
        let ((a0, a1), (b0, b1)) = (self.split(a), self.split(b));
        let (c0, c1) = (self.parts[0].circ(&a0, &b0), self.parts[1].circ(&a1, &b1));
        let mut v = c0.coeffs().to_vec();
        v.extend_from_slice(c1.coeffs());
        GElement::from_slice(&v)
    }

    fn label(&self) -> String {
        format!("direct_sum({}, {})", self.parts[0].backing_label(), self.parts[1].backing_label())
    }

    fn descriptor(&self) -> Option<RuleDesc> {
        let parts: Option<Vec<serde_json::Value>> = self.parts.iter().map(|b| file::brace_value(b).ok()).collect();
        Some(RuleDesc { rule: "direct_sum".into(), params: serde_json::json!({ "parts": parts? }) })
    }
}

/// `a∘b = a + b`.
pub fn trivial_brace(shape: GroupShape) -> Brace {
    let desc = format!("trivial({shape})");
    Brace::from_rule(shape, TrivialRule, BraceKind::Brace).with_provenance(desc)
}

/// `a∘b = a + b + λab` on `Z/p^n`; `p | λ` makes the product nilpotent.
pub fn radical_ring_brace(p: u64, n: u32, lambda: u64) -> Result<Brace> {
    if lambda % p != 0 {
        return Err(Error::precondition(format!("p | lambda (p = {p}, lambda = {lambda})"), None));
    }
    let shape = GroupShape::new(p, &[n])?;
    Ok(Brace::from_rule(shape, RadicalRule { lambda }, BraceKind::Brace).with_provenance(format!("radical(p={p},n={n},lambda={lambda})")))
}

/// The radical brace of a nilpotent associative ring given by `eᵢeⱼ = cᵢⱼ`.
///
/// Checks that the constants are well defined, associative on basis triples
/// and nilpotent.
pub fn bilinear_brace(shape: GroupShape, consts: Vec<Vec<GElement>>) -> Result<Brace> {
    BilinearDot::new(&shape, consts.clone())?;
    let basis = shape.basis();
    let mul = |x: &GElement, y: &GElement| bilinear_eval(&shape, &consts, x, y);
    for x in &basis {
        for y in &basis {
            for z in &basis {
                if mul(&mul(x, y), z) != mul(x, &mul(y, z)) {
                    return Err(Error::Structural(format!("structure constants are not associative at ({x}, {y}, {z})")));
                }
            }
        }
    }
    let pl = PreLie::from_rule(shape.clone(), BilinearDot::new(&shape, consts.clone())?);
    if crate::prelie::left_nilpotency_index(&pl).is_none() {
        return Err(Error::Structural("structure constants do not give a nilpotent ring".into()));
    }
    Ok(Brace::from_rule(shape, BilinearRule { consts }, BraceKind::Brace))
}

fn consts_from(shape: &GroupShape, entries: &[(usize, usize, Vec<u64>)]) -> Vec<Vec<GElement>> {
    let r = shape.rank();
    let mut c = vec![vec![shape.zero(); r]; r];
    for (i, j, v) in entries {
        let reduced: Vec<u64> = v.iter().zip(shape.moduli()).map(|(x, m)| x % m).collect();
        c[*i][*j] = GElement::from_slice(&reduced);
    }
    c
}

/// `(Z/p^e)²` with `e₀² = e₁`, `e₀e₁ = e₁e₀ = pe₀`, `e₁² = pe₁`.
pub fn ramified(p: u64, e: u32) -> Result<Brace> {
    let shape = GroupShape::new(p, &[e, e])?;
    let c = consts_from(&shape, &[(0, 0, vec![0, 1]), (0, 1, vec![p, 0]), (1, 0, vec![p, 0]), (1, 1, vec![0, p])]);
    Ok(bilinear_brace(shape, c)?.with_provenance(format!("ramified(p={p},e={e})")))
}

/// `Z/p ⊕ Z/p` with `a*b = (0, a₀b₀)`: a brace violating Property 1.
pub fn negative_control_p1(p: u64) -> Result<Brace> {
    let shape = GroupShape::new(p, &[1, 1])?;
    let c = consts_from(&shape, &[(0, 0, vec![0, 1])]);
    Ok(bilinear_brace(shape, c)?.with_provenance(format!("control-p1(p={p})")))
}

pub fn direct_sum(a: &Brace, b: &Brace) -> Result<Brace> {
    if a.shape().p() != b.shape().p() {
        return Err(Error::Structural(format!("prime mismatch: {} vs {}", a.shape().p(), b.shape().p())));
    }
    let mut exps = a.shape().exponents().to_vec();
    exps.extend_from_slice(b.shape().exponents());
    let shape = GroupShape::new(a.shape().p(), &exps)?;
    let kind = if a.kind() == b.kind() { a.kind() } else { BraceKind::Unverified };
    let prov = format!("({}) + ({})", a.meta().provenance, b.meta().provenance);
    Ok(Brace::from_rule(shape, DirectSumRule { parts: [a.clone(), b.clone()] }, kind).with_provenance(prov))
}

/// One deterministic table edit: even seeds swap two entries of a row, odd seeds
/// overwrite one entry with a different value.
pub fn perturb(b: &Brace, seed: u64) -> Result<Brace> {
    let table = b.table().ok_or_else(|| Error::precondition("perturb needs a table-backed brace", None))?;
    let n = b.order() as usize;
    if n < 3 {
        return Err(Error::precondition("perturb needs order at least 3", None));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = table.to_vec();
    let a = rng.gen_range(0..n);
    if seed % 2 == 0 {
        let b1 = rng.gen_range(1..n);
        let mut b2 = rng.gen_range(1..n - 1);
        if b2 >= b1 {
            b2 += 1;
        }
        t.swap(a * n + b1, a * n + b2);
    } else {
        let b1 = rng.gen_range(0..n);
        let old = t[a * n + b1] as usize;
        t[a * n + b1] = ((old + rng.gen_range(1..n)) % n) as u32;
    }
    Ok(Brace::from_table(b.shape().clone(), t, BraceKind::Unverified)?
        .with_provenance(format!("perturb({}, seed={seed})", b.meta().provenance)))
}

pub fn zero_prelie(shape: GroupShape) -> PreLie {
    let prov = format!("zero({shape})");
    PreLie::from_rule(shape, ZeroDot).with_provenance(prov)
}

/// `x·y = μxy` on `Z/p^n`.
pub fn scalar_prelie(p: u64, n: u32, mu: u64) -> Result<PreLie> {
    Ok(PreLie::from_rule(GroupShape::new(p, &[n])?, ScalarDot { mu }).with_provenance(format!("scalar(p={p},n={n},mu={mu})")))
}

/// A registered structure.
#[derive(Clone, Debug)]
pub enum Built {
    Brace(Brace),
    PreLie(PreLie),
}

fn parse_params(spec: &str) -> Result<(String, Vec<(String, String)>)> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut params = Vec::new();
    for part in rest.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| Error::Spec(format!("`{part}` is not key=value")))?;
        params.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok((name.trim().to_string(), params))
}

struct Params(Vec<(String, String)>);

impl Params {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn int(&self, key: &str) -> Result<Option<u64>> {
        self.raw(key).map(|v| v.parse::<u64>().map_err(|_| Error::Spec(format!("`{key}` must be an integer")))).transpose()
    }

    fn need(&self, key: &str) -> Result<u64> {
        self.int(key)?.ok_or_else(|| Error::Spec(format!("missing `{key}`")))
    }

    fn exps(&self) -> Result<Vec<u32>> {
        let v = self.raw("exps").ok_or_else(|| Error::Spec("missing `exps`".into()))?;
        v.split('.').map(|x| x.parse::<u32>().map_err(|_| Error::Spec(format!("bad exponent `{x}`")))).collect()
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.0.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((k, _)) => Err(Error::Spec(format!("unknown parameter `{k}`"))),
            None => Ok(()),
        }
    }
}

/// Registered constructors, as `name: parameters`.
pub const REGISTRY: &[(&str, &str)] = &[
    ("trivial", "p, exps (dot-separated, e.g. 2.1)"),
    ("radical", "p, n, lambda (default p)"),
    ("radical-sum", "p, n, lambda (default p), copies"),
    ("ramified", "p, e"),
    ("control-p1", "p"),
    ("zero-prelie", "p, exps"),
    ("scalar-prelie", "p, n, mu"),
    ("field-prelie", "p"),
];

/// Budget used for the fail-fast check at construction.
pub fn construction_budget() -> Budget {
    Budget { exhaustive: 20_000_000, samples: 2_000, seed: 0 }
}

/// Builds a registered instance and checks it with its advertised verifier.
///
/// Specs look like `radical:p=13,n=6,lambda=13`. Negative controls are braces
/// too and pass `verify_brace`; their property failures are the point.
pub fn from_spec(spec: &str) -> Result<Built> {
    let (name, raw) = parse_params(spec)?;
    let ps = Params(raw);
    let built = match name.as_str() {
        "trivial" => {
            ps.check_keys(&["p", "exps"])?;
            Built::Brace(trivial_brace(GroupShape::new(ps.need("p")?, &ps.exps()?)?))
        }
        "radical" => {
            ps.check_keys(&["p", "n", "lambda"])?;
            let p = ps.need("p")?;
            Built::Brace(radical_ring_brace(p, ps.need("n")? as u32, ps.int("lambda")?.unwrap_or(p))?)
        }
        "radical-sum" => {
            ps.check_keys(&["p", "n", "lambda", "copies"])?;
            let p = ps.need("p")?;
            let one = radical_ring_brace(p, ps.need("n")? as u32, ps.int("lambda")?.unwrap_or(p))?;
            let copies = ps.need("copies")?;
            if copies == 0 {
                return Err(Error::Spec("copies must be positive".into()));
            }
            let mut acc = one.clone();
            for _ in 1..copies {
                acc = direct_sum(&acc, &one)?;
            }
            Built::Brace(acc)
        }
        "ramified" => {
            ps.check_keys(&["p", "e"])?;
            Built::Brace(ramified(ps.need("p")?, ps.need("e")? as u32)?)
        }
        "control-p1" => {
            ps.check_keys(&["p"])?;
            Built::Brace(negative_control_p1(ps.need("p")?)?)
        }
        "zero-prelie" => {
            ps.check_keys(&["p", "exps"])?;
            Built::PreLie(zero_prelie(GroupShape::new(ps.need("p")?, &ps.exps()?)?))
        }
        "scalar-prelie" => {
            ps.check_keys(&["p", "n", "mu"])?;
            Built::PreLie(scalar_prelie(ps.need("p")?, ps.need("n")? as u32, ps.need("mu")?)?)
        }
        "field-prelie" => {
            ps.check_keys(&["p"])?;
            Built::PreLie(scalar_prelie(ps.need("p")?, 1, 1)?.with_provenance(format!("field(p={})", ps.need("p")?)))
        }
        other => return Err(Error::Registry(other.to_string())),
    };
    let budget = construction_budget();
    Ok(match built {
        Built::Brace(b) => {
            let b = b.compact();
            let r = verify_brace(&b, &budget);
            if !r.passed {
                return Err(Error::critical(format!("registered constructor `{spec}` failed verify_brace"), r.witness().map(|w| w.to_string())));
            }
            let mut meta = b.meta().clone();
            meta.provenance = spec.to_string();
            meta.verified = vec![format!("brace:{}", r.mode)];
            Built::Brace(b.with_meta(meta))
        }
        Built::PreLie(pl) => {
            let pl = pl.compact();
            let r = verify_prelie(&pl, &budget);
            let ok = r.failures.iter().all(|f| f.axiom == "left-nilpotency");
            if !ok {
                return Err(Error::critical(format!("registered constructor `{spec}` failed verify_prelie"), Some(r.failures[0].to_string())));
            }
            let mut meta = pl.meta().clone();
            meta.provenance = spec.to_string();
            meta.verified = vec![format!("prelie:{}", r.mode)];
            Built::PreLie(pl.with_meta(meta))
        }
    })
}

pub fn brace_from_spec(spec: &str) -> Result<Brace> {
    match from_spec(spec)? {
        Built::Brace(b) => Ok(b),
        Built::PreLie(_) => Err(Error::Spec(format!("`{spec}` is a pre-Lie ring, not a brace"))),
    }
}

pub fn prelie_from_spec(spec: &str) -> Result<PreLie> {
    match from_spec(spec)? {
        Built::PreLie(p) => Ok(p),
        Built::Brace(_) => Err(Error::Spec(format!("`{spec}` is a brace, not a pre-Lie ring"))),
    }
}

/// Brace instances of the acceptance corpus, pinned by spec string.
pub const BRACE_CORPUS: &[&str] = &[
    "trivial:p=5,exps=3",
    "trivial:p=7,exps=3",
    "trivial:p=7,exps=1.2",
    "trivial:p=13,exps=2",
    "trivial:p=13,exps=1.2.1",
    "trivial:p=7,exps=2.2.2",
    "radical:p=5,n=3",
    "radical:p=7,n=3",
    "radical:p=11,n=3",
    "radical:p=13,n=3",
    "radical:p=13,n=5",
    "radical:p=13,n=6",
    "radical:p=7,n=6",
    "radical-sum:p=13,n=3,copies=2",
    "radical-sum:p=13,n=6,copies=2",
    "ramified:p=13,e=2",
    "control-p1:p=7",
    "control-p1:p=13",
];

/// Pre-Lie instances of the acceptance corpus.
pub const PRELIE_CORPUS: &[&str] = &[
    "zero-prelie:p=13,exps=2",
    "zero-prelie:p=7,exps=2",
    "scalar-prelie:p=7,n=3,mu=49",
    "scalar-prelie:p=7,n=3,mu=7",
    "scalar-prelie:p=13,n=3,mu=13",
    "scalar-prelie:p=11,n=3,mu=11",
    "field-prelie:p=7",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brace::verify_pseudobrace;

    #[test]
    fn registry_builds_and_verifies() {
        for spec in ["trivial:p=7,exps=2", "radical:p=7,n=3", "ramified:p=5,e=2", "control-p1:p=7", "radical-sum:p=5,n=2,copies=2"] {
            let b = brace_from_spec(spec).unwrap();
            assert_eq!(b.meta().provenance, spec);
        }
        assert!(matches!(from_spec("nope:p=3"), Err(Error::Registry(_))));
        assert!(matches!(from_spec("radical:p=7"), Err(Error::Spec(_))));
        assert!(matches!(from_spec("radical:p=7,n=3,lambda=3"), Err(Error::Precondition { .. })));
        assert!(prelie_from_spec("scalar-prelie:p=7,n=3,mu=7").is_ok());
        assert!(brace_from_spec("ramified:p=7,e=1").is_ok());
    }

    #[test]
    fn lambda_zero_is_trivial() {
        let b = radical_ring_brace(7, 2, 0).unwrap();
        for x in b.shape().elements() {
            for y in b.shape().elements().step_by(5) {
                assert_eq!(b.circ(&x, &y), b.shape().add(&x, &y));
            }
        }
    }

    #[test]
    fn perturbations_are_deterministic_and_rejected() {
        let b = trivial_brace(GroupShape::new(7, &[2]).unwrap()).compact();
        assert_eq!(perturb(&b, 4).unwrap().table(), perturb(&b, 4).unwrap().table());
        for seed in 0..20 {
            let bad = perturb(&b, seed).unwrap();
            assert_ne!(bad.table(), b.table());
            let r = verify_brace(&bad, &Budget::default());
            assert!(!r.passed);
            assert!(r.witness().is_some());
        }
        let rule = radical_ring_brace(13, 6, 13).unwrap();
        assert!(perturb(&rule, 0).is_err());
    }

    #[test]
    fn direct_sums() {
        let t = trivial_brace(GroupShape::new(5, &[1]).unwrap());
        let s = direct_sum(&t, &t).unwrap().compact();
        for x in s.shape().elements() {
            for y in s.shape().elements() {
                assert_eq!(s.circ(&x, &y), s.shape().add(&x, &y));
            }
        }
        let r = radical_ring_brace(5, 2, 5).unwrap();
        let s = direct_sum(&r, &t).unwrap().compact();
        assert!(verify_brace(&s, &Budget::default()).passed);
        let other = trivial_brace(GroupShape::new(7, &[1]).unwrap());
        assert!(direct_sum(&r, &other).is_err());
    }

    #[test]
    fn ramified_and_control_are_braces() {
        let budget = Budget::default();
        assert!(verify_brace(&ramified(5, 2).unwrap().compact(), &budget).passed);
        assert!(verify_pseudobrace(&negative_control_p1(7).unwrap().compact(), &budget).passed);
        let s = GroupShape::new(5, &[1, 1]).unwrap();
        // e₀e₀ = e₀ is not nilpotent.
        let c = consts_from(&s, &[(0, 0, vec![1, 0])]);
        assert!(bilinear_brace(s, c).is_err());
    }
}
