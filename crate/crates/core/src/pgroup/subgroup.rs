//! Arbitrary subgroups, kept in an echelon form over `Z/p^e`.
//!
//! `⊕ Z/p^{αᵢ}` embeds into `(Z/p^e)^r` by `xᵢ ↦ xᵢ·p^{e−αᵢ}`. Subgroups become
//! submodules there, and a Howell-style echelon basis gives a membership test
//! by greedy reduction together with the exact order.

use super::{GElement, GroupShape};
use crate::arith;

#[derive(Clone, Debug)]
struct Row {
    col: usize,
    val: u32,
    vec: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct Subgroup {
    shape: GroupShape,
    pe: u64,
    scale: Vec<u64>,
    rows: Vec<Row>,
}

impl Subgroup {
    pub fn zero(shape: &GroupShape) -> Self {
        let e = shape.max_exponent();
        let p = shape.p();
        Subgroup {
            shape: shape.clone(),
            pe: p.pow(e),
            scale: shape.exponents().iter().map(|&a| p.pow(e - a)).collect(),
            rows: Vec::new(),
        }
    }

    pub fn span<I: IntoIterator<Item = GElement>>(shape: &GroupShape, gens: I) -> Self {
        let mut s = Subgroup::zero(shape);
        let vecs: Vec<Vec<u64>> = gens.into_iter().map(|g| s.embed(&g)).collect();
        s.rebuild(vecs);
        s
    }

    pub fn whole(shape: &GroupShape) -> Self {
        Subgroup::span(shape, shape.basis())
    }

    pub fn shape(&self) -> &GroupShape {
        &self.shape
    }

    fn embed(&self, x: &GElement) -> Vec<u64> {
        x.coeffs().iter().zip(&self.scale).map(|(&c, &s)| c * s).collect()
    }

    fn unembed(&self, y: &[u64]) -> GElement {
        GElement::from_slice(&y.iter().zip(&self.scale).map(|(&c, &s)| c / s).collect::<Vec<_>>())
    }

    fn rebuild(&mut self, mut work: Vec<Vec<u64>>) {
        let p = self.shape.p();
        let pe = self.pe;
        let r = self.shape.rank();
        work.retain(|w| w.iter().any(|&c| c != 0));
        let mut rows = Vec::new();
        for col in 0..r {
            let best = work
                .iter()
                .enumerate()
                .filter(|(_, w)| w[col] != 0)
                .min_by_key(|(_, w)| arith::vp(w[col] as u128, p))
                .map(|(i, _)| i);
            let Some(bi) = best else { continue };
            let mut piv = work.swap_remove(bi);
            let val = arith::vp(piv[col] as u128, p);
            let pv = p.pow(val);
            let unit = piv[col] / pv;
            let inv = arith::inv_mod(unit as u128, pe as u128).expect("unit") as u64;
            for c in piv.iter_mut() {
                *c = arith::mul_mod(*c, inv, pe);
            }
            for w in work.iter_mut() {
                if w[col] != 0 {
                    let f = w[col] / pv;
                    for (wc, &pc) in w.iter_mut().zip(&piv) {
                        *wc = (*wc + pe - arith::mul_mod(f, pc, pe)) % pe;
                    }
                }
            }
            let aug: Vec<u64> = piv.iter().map(|&c| arith::mul_mod(c, pe / pv, pe)).collect();
            if aug.iter().any(|&c| c != 0) {
                work.push(aug);
            }
            work.retain(|w| w.iter().any(|&c| c != 0));
            rows.push(Row { col, val, vec: piv });
        }
        debug_assert!(work.is_empty());
        self.rows = rows;
    }

    fn reduce(&self, mut y: Vec<u64>) -> Option<Vec<u64>> {
        let p = self.shape.p();
        for row in &self.rows {
            let c = y[row.col];
            if c == 0 {
                continue;
            }
            let pv = p.pow(row.val);
            if c % pv != 0 {
                return None;
            }
            let f = c / pv;
            for (yc, &rc) in y.iter_mut().zip(&row.vec) {
                *yc = (*yc + self.pe - arith::mul_mod(f, rc, self.pe)) % self.pe;
            }
        }
        Some(y)
    }

    pub fn contains(&self, x: &GElement) -> bool {
        matches!(self.reduce(self.embed(x)), Some(y) if y.iter().all(|&c| c == 0))
    }

    /// Adds `x` to the span; returns whether the subgroup grew.
    pub fn insert(&mut self, x: &GElement) -> bool {
        if self.contains(x) {
            return false;
        }
        let mut vecs: Vec<Vec<u64>> = self.rows.iter().map(|r| r.vec.clone()).collect();
        vecs.push(self.embed(x));
        self.rebuild(vecs);
        true
    }

    pub fn order(&self) -> u128 {
        let p = self.shape.p() as u128;
        let e = self.shape.max_exponent();
        self.rows.iter().map(|r| p.pow(e - r.val)).product()
    }

    pub fn is_zero(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn generators(&self) -> Vec<GElement> {
        self.rows.iter().map(|r| self.unembed(&r.vec)).collect()
    }

    /// The `i`-th element in the mixed-radix order given by the echelon rows.
    pub fn element(&self, mut i: u128) -> GElement {
        let p = self.shape.p() as u128;
        let e = self.shape.max_exponent();
        let mut acc = vec![0u64; self.shape.rank()];
        for row in &self.rows {
            let radix = p.pow(e - row.val);
            let c = (i % radix) as u64;
            i /= radix;
            for (a, &v) in acc.iter_mut().zip(&row.vec) {
                *a = (*a + arith::mul_mod(c, v, self.pe)) % self.pe;
            }
        }
        self.unembed(&acc)
    }

    pub fn elements(&self) -> impl Iterator<Item = GElement> + '_ {
        (0..self.order()).map(move |i| self.element(i))
    }

    pub fn is_subset_of(&self, other: &Subgroup) -> bool {
        self.generators().iter().all(|g| other.contains(g))
    }

    pub fn same_as(&self, other: &Subgroup) -> bool {
        self.order() == other.order() && self.is_subset_of(other)
    }
}

/// Incremental span whose generators remember how they were produced.
#[derive(Clone, Debug)]
pub struct SpanBuilder<P> {
    sub: Subgroup,
    gens: Vec<(GElement, P)>,
}

impl<P: Clone> SpanBuilder<P> {
    pub fn new(shape: &GroupShape) -> Self {
        SpanBuilder { sub: Subgroup::zero(shape), gens: Vec::new() }
    }

    pub fn insert(&mut self, x: GElement, prov: P) -> bool {
        if self.sub.insert(&x) {
            self.gens.push((x, prov));
            true
        } else {
            false
        }
    }

    pub fn subgroup(&self) -> &Subgroup {
        &self.sub
    }

    pub fn gens(&self) -> &[(GElement, P)] {
        &self.gens
    }

    pub fn into_parts(self) -> (Subgroup, Vec<(GElement, P)>) {
        (self.sub, self.gens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn closure(shape: &GroupShape, gens: &[GElement]) -> HashSet<GElement> {
        let mut set: HashSet<GElement> = HashSet::from([shape.zero()]);
        let mut frontier = vec![shape.zero()];
        while let Some(x) = frontier.pop() {
            for g in gens {
                let y = shape.add(&x, g);
                if set.insert(y.clone()) {
                    frontier.push(y);
                }
            }
        }
        set
    }

    #[test]
    fn matches_brute_force_closure() {
        let shape = GroupShape::new(3, &[2, 1, 3]).unwrap();
        let all: Vec<GElement> = shape.elements().collect();
        let mut seed = 7u64;
        for _ in 0..60 {
            let mut gens = Vec::new();
            for _ in 0..(seed % 3 + 1) {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                gens.push(all[(seed >> 33) as usize % all.len()].clone());
            }
            let brute = closure(&shape, &gens);
            let sub = Subgroup::span(&shape, gens.clone());
            assert_eq!(sub.order(), brute.len() as u128, "gens {gens:?}");
            for x in &all {
                assert_eq!(sub.contains(x), brute.contains(x));
            }
            let listed: HashSet<GElement> = sub.elements().collect();
            assert_eq!(listed, brute);
        }
    }

    #[test]
    fn howell_augmentation_needed() {
        let shape = GroupShape::new(3, &[2, 2]).unwrap();
        let g = GElement::from_slice(&[3, 1]);
        let sub = Subgroup::span(&shape, [g]);
        assert!(sub.contains(&GElement::from_slice(&[0, 3])));
        assert_eq!(sub.order(), 9);
    }

    #[test]
    fn box_and_general_agree() {
        let shape = GroupShape::new(5, &[2, 1]).unwrap();
        for i in 0..3 {
            let b = shape.annihilator(i);
            let s = b.to_subgroup();
            assert_eq!(s.order(), b.order());
            for x in shape.elements() {
                assert_eq!(s.contains(&x), b.contains(&x));
            }
        }
    }
}
