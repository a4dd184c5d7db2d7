//! Ideals, factor braces and the subbrace `p^kA`.

use std::sync::Arc;

use super::{Brace, BraceKind, CircRule};
use crate::budget::{Budget, Mode};
use crate::error::{Error, Result};
use crate::pgroup::{BoxSubgroup, GElement, GroupShape, Subgroup};
use crate::search::{first_fail, rand_index, sample_fail};

#[derive(Clone, Debug)]
pub struct IdealCheck {
    pub holds: bool,
    /// Failing clause and the elements involved.
    pub witness: Option<(String, Vec<GElement>)>,
    pub mode: Mode,
}

/// Checks `a*s, s*a ∈ S` and `(a+s)*b − a*b ∈ S` for all `a, b ∈ A`, `s ∈ S`.
///
/// The first clause uses generators of `S` (left distributivity), the second
/// and third a basis for `b`. The third clause is what makes factors of
/// pseudobraces well defined; for braces it follows from the other two.
pub fn is_ideal(b: &Brace, s: &Subgroup, budget: &Budget) -> IdealCheck {
    let shape = b.shape();
    let n = shape.order();
    let sorder = s.order();
    let gens = s.generators();
    let basis = shape.basis();
    let r = basis.len() as u128;
    let mut mode = Mode::Generators;
    let bad = |clause: &str, w: Vec<GElement>| Some((clause.to_string(), w));

    let left = |a: &GElement| gens.iter().find_map(|g| (!s.contains(&b.star(a, g))).then(|| bad("a*s", vec![a.clone(), g.clone()])).flatten());
    let w = if gens.is_empty() {
        None
    } else if budget.allows_product(&[n, gens.len() as u128]) {
        first_fail(n as u64, |i| left(&shape.element(i as u128)))
    } else {
        mode = mode.combine(Mode::Sampled { samples: budget.samples, seed: budget.seed });
        sample_fail(&mut budget.rng("ideal-left"), budget.samples, |rg| shape.element(rand_index(rg, n)), left)
    };
    if w.is_some() {
        return IdealCheck { holds: false, witness: w, mode };
    }

    let elems: Vec<GElement> = if budget.allows_product(&[sorder, r]) {
        s.elements().collect::<Vec<_>>()
    } else {
        let mut rng = budget.rng("ideal-right");
        let count = budget.samples.min(1 << 16);
        mode = mode.combine(Mode::Sampled { samples: count, seed: budget.seed });
        (0..count)
            .map(|_| {
                let mut acc = shape.zero();
                for g in &gens {
                    acc = shape.add(&acc, &shape.smul(rand_index(&mut rng, shape.order()) as i128, g));
                }
                acc
            })
            .collect()
    };
    let right = |x: &GElement| basis.iter().find_map(|g| (!s.contains(&b.star(x, g))).then(|| bad("s*a", vec![x.clone(), g.clone()])).flatten());
    if let Some(w) = first_fail(elems.len() as u64, |i| right(&elems[i as usize])) {
        return IdealCheck { holds: false, witness: Some(w), mode };
    }

    let shift = |a: &GElement, x: &GElement| {
        let ax = shape.add(a, x);
        basis
            .iter()
            .find_map(|g| {
                let d = shape.sub(&b.star(&ax, g), &b.star(a, g));
                (!s.contains(&d)).then(|| bad("(a+s)*b-a*b", vec![a.clone(), x.clone(), g.clone()]))
            })
            .flatten()
    };
    let w = if b.kind() == BraceKind::Brace {
        None
    } else if budget.allows_product(&[n, sorder, r]) && elems.len() as u128 == sorder {
        first_fail(n as u64, |i| {
            let a = shape.element(i as u128);
            elems.iter().find_map(|x| shift(&a, x))
        })
    } else {
        let count = budget.samples;
        mode = mode.combine(Mode::Sampled { samples: count, seed: budget.seed });
        let sel = elems.clone();
        sample_fail(
            &mut budget.rng("ideal-shift"),
            count,
            |rg| (shape.element(rand_index(rg, n)), sel[rand_index(rg, sel.len() as u128) as usize].clone()),
            |(a, x)| shift(a, x),
        )
    };
    IdealCheck { holds: w.is_none(), witness: w, mode }
}

struct QuotientRule {
    parent: Brace,
    sub: BoxSubgroup,
}

impl CircRule for QuotientRule {
    fn circ(&self, _shape: &GroupShape, a: &GElement, b: &GElement) -> GElement {
        let x = self.sub.from_quotient(a);
        let y = self.sub.from_quotient(b);
        self.sub.to_quotient(&self.parent.circ(&x, &y))
    }

    fn label(&self) -> String {
        format!("quotient({}, {})", self.parent.backing_label(), self.sub)
    }
}

/// `B/I` without the ideal check; callers must know `I` is an ideal.
pub(crate) fn quotient_unchecked(b: &Brace, sub: &BoxSubgroup) -> Brace {
    let shape = sub.quotient_shape().clone();
    let rule = QuotientRule { parent: b.clone(), sub: sub.clone() };
    Brace::from_rule_arc(shape, Arc::new(rule), b.kind())
        .with_provenance(format!("{} / {}", b.meta().provenance, sub))
        .compact()
}

/// The factor `B/I` for a box subgroup `I`, on canonical coset representatives.
pub fn quotient(b: &Brace, sub: &BoxSubgroup, budget: &Budget) -> Result<Brace> {
    let check = is_ideal(b, &sub.to_subgroup(), budget);
    if !check.holds {
        let (clause, w) = check.witness.unwrap();
        return Err(Error::precondition(
            format!("{sub} is an ideal ({clause})"),
            Some(w.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")),
        ));
    }
    Ok(quotient_unchecked(b, sub))
}

struct SubRule {
    parent: Brace,
    k: u32,
    kept: Vec<usize>,
}

impl SubRule {
    fn up(&self, x: &GElement) -> GElement {
        let shape = self.parent.shape();
        let p = shape.p();
        let mut c = vec![0u64; shape.rank()];
        for (j, &i) in self.kept.iter().enumerate() {
            c[i] = x.coeffs()[j] * p.pow(self.k);
        }
        GElement::from_slice(&c)
    }

    fn down(&self, y: &GElement) -> GElement {
        let p = self.parent.shape().p();
        GElement::from_slice(&self.kept.iter().map(|&i| y.coeffs()[i] / p.pow(self.k)).collect::<Vec<_>>())
    }
}

impl CircRule for SubRule {
    fn circ(&self, _shape: &GroupShape, a: &GElement, b: &GElement) -> GElement {
        self.down(&self.parent.circ(&self.up(a), &self.up(b)))
    }

    fn label(&self) -> String {
        format!("sub_pk({}, k={})", self.parent.backing_label(), self.k)
    }
}

/// The brace `p^kA`, re-indexed as `⊕ Z/p^{αᵢ−k}` through `x ↦ p^k x`.
pub fn sub_pk(b: &Brace, k: u32, budget: &Budget) -> Result<Brace> {
    let shape = b.shape();
    let pk = shape.p_power_subgroup(k);
    let gens = pk.generators();
    let test = |a: &GElement| {
        gens.iter().find_map(|g| (!pk.contains(&b.star(a, g))).then(|| format!("{a} * {g}")))
    };
    let w = if budget.allows_product(&[pk.order(), gens.len() as u128]) {
        let elems: Vec<GElement> = pk.elements().collect();
        first_fail(elems.len() as u64, |i| test(&elems[i as usize]))
    } else {
        sample_fail(&mut budget.rng("sub_pk"), budget.samples, |rg| pk.random(rg), test)
    };
    if let Some(w) = w {
        return Err(Error::precondition(format!("p^{k}A closed under ∘"), Some(w)));
    }
    let kept: Vec<usize> = (0..shape.rank()).filter(|&i| shape.exponents()[i] > k).collect();
    let exps: Vec<u32> = kept.iter().map(|&i| shape.exponents()[i] - k).collect();
    let sub_shape = if exps.is_empty() { GroupShape::trivial(shape.p())? } else { GroupShape::new(shape.p(), &exps)? };
    let rule = SubRule { parent: b.clone(), k, kept };
    Ok(Brace::from_rule_arc(sub_shape, Arc::new(rule), b.kind())
        .with_provenance(format!("p^{k}({})", b.meta().provenance))
        .compact())
}
