//! Uniform access to a binary operation on a finite p-group.
//!
//! Checks are written once against [`Structure`]; small tables run on `u32`
//! indices, rule-backed structures on [`GElement`]s.

use std::fmt::Debug;
use std::hash::Hash;

use crate::pgroup::{GElement, GroupShape};

pub trait Structure: Sync {
    type E: Clone + Eq + Hash + Send + Sync + Debug;

    fn shape(&self) -> &GroupShape;
    fn elem(&self, idx: u128) -> Self::E;
    fn index(&self, x: &Self::E) -> u128;
    fn to_g(&self, x: &Self::E) -> GElement;
    fn from_g(&self, x: &GElement) -> Self::E;
    fn zero(&self) -> Self::E;
    fn add(&self, x: &Self::E, y: &Self::E) -> Self::E;
    fn sub(&self, x: &Self::E, y: &Self::E) -> Self::E;
    fn smul(&self, k: i128, x: &Self::E) -> Self::E;
    fn op(&self, x: &Self::E, y: &Self::E) -> Self::E;
    fn basis(&self) -> Vec<Self::E>;
    /// Whether `op` is a constant-time table lookup.
    fn is_table(&self) -> bool;

    fn order(&self) -> u128 {
        self.shape().order()
    }

    fn neg(&self, x: &Self::E) -> Self::E {
        self.sub(&self.zero(), x)
    }

    fn is_zero(&self, x: &Self::E) -> bool {
        *x == self.zero()
    }

    /// `x op y − x − y`.
    fn star(&self, x: &Self::E, y: &Self::E) -> Self::E {
        let c = self.op(x, y);
        self.sub(&self.sub(&c, x), y)
    }

    /// `x op y − x`.
    fn lambda(&self, x: &Self::E, y: &Self::E) -> Self::E {
        let c = self.op(x, y);
        self.sub(&c, x)
    }
}

pub trait Visitor {
    type Output;
    fn visit<S: Structure>(self, s: &S) -> Self::Output;
}

/// Dense table over mixed-radix indices.
pub struct IdxView<'a> {
    shape: &'a GroupShape,
    table: &'a [u32],
    n: usize,
    r: usize,
    digits: Vec<u32>,
    moduli: Vec<u32>,
    places: Vec<u32>,
}

impl<'a> IdxView<'a> {
    pub fn new(shape: &'a GroupShape, table: &'a [u32]) -> Self {
        let n = shape.order() as usize;
        let r = shape.rank();
        let mut digits = Vec::with_capacity(n * r);
        for i in 0..n {
            digits.extend(shape.element(i as u128).coeffs().iter().map(|&c| c as u32));
        }
        let moduli: Vec<u32> = shape.moduli().iter().map(|&m| m as u32).collect();
        let mut places = Vec::with_capacity(r);
        let mut pl = 1u32;
        for &m in &moduli {
            places.push(pl);
            pl = pl.wrapping_mul(m);
        }
        IdxView { shape, table, n, r, digits, moduli, places }
    }

    #[inline]
    fn digit(&self, x: u32, i: usize) -> u32 {
        self.digits[x as usize * self.r + i]
    }
}

impl Structure for IdxView<'_> {
    type E = u32;

    fn shape(&self) -> &GroupShape {
        self.shape
    }

    fn elem(&self, idx: u128) -> u32 {
        idx as u32
    }

    fn index(&self, x: &u32) -> u128 {
        *x as u128
    }

    fn to_g(&self, x: &u32) -> GElement {
        self.shape.element(*x as u128)
    }

    fn from_g(&self, x: &GElement) -> u32 {
        self.shape.index(x) as u32
    }

    fn zero(&self) -> u32 {
        0
    }

    #[inline]
    fn add(&self, x: &u32, y: &u32) -> u32 {
        let mut acc = 0;
        for i in 0..self.r {
            let m = self.moduli[i];
            let mut d = self.digit(*x, i) + self.digit(*y, i);
            if d >= m {
                d -= m;
            }
            acc += d * self.places[i];
        }
        acc
    }

    #[inline]
    fn sub(&self, x: &u32, y: &u32) -> u32 {
        let mut acc = 0;
        for i in 0..self.r {
            let m = self.moduli[i];
            let (a, b) = (self.digit(*x, i), self.digit(*y, i));
            let d = if a >= b { a - b } else { a + m - b };
            acc += d * self.places[i];
        }
        acc
    }

    fn smul(&self, k: i128, x: &u32) -> u32 {
        let mut acc = 0;
        for i in 0..self.r {
            let m = self.moduli[i] as i128;
            let d = (k.rem_euclid(m) * self.digit(*x, i) as i128) % m;
            acc += d as u32 * self.places[i];
        }
        acc
    }

    #[inline]
    fn op(&self, x: &u32, y: &u32) -> u32 {
        self.table[*x as usize * self.n + *y as usize]
    }

    fn basis(&self) -> Vec<u32> {
        self.places.clone()
    }

    fn is_table(&self) -> bool {
        true
    }
}

/// Elementwise view over a closure computing the operation.
pub struct ElemView<'a, F> {
    shape: &'a GroupShape,
    f: F,
}

impl<'a, F> ElemView<'a, F>
where
    F: Fn(&GElement, &GElement) -> GElement + Sync,
{
    pub fn new(shape: &'a GroupShape, f: F) -> Self {
        ElemView { shape, f }
    }
}

impl<F> Structure for ElemView<'_, F>
where
    F: Fn(&GElement, &GElement) -> GElement + Sync,
{
    type E = GElement;

    fn shape(&self) -> &GroupShape {
        self.shape
    }

    fn elem(&self, idx: u128) -> GElement {
        self.shape.element(idx)
    }

    fn index(&self, x: &GElement) -> u128 {
        self.shape.index(x)
    }

    fn to_g(&self, x: &GElement) -> GElement {
        x.clone()
    }

    fn from_g(&self, x: &GElement) -> GElement {
        x.clone()
    }

    fn zero(&self) -> GElement {
        self.shape.zero()
    }

    fn add(&self, x: &GElement, y: &GElement) -> GElement {
        self.shape.add(x, y)
    }

    fn sub(&self, x: &GElement, y: &GElement) -> GElement {
        self.shape.sub(x, y)
    }

    fn smul(&self, k: i128, x: &GElement) -> GElement {
        self.shape.smul(k, x)
    }

    fn op(&self, x: &GElement, y: &GElement) -> GElement {
        (self.f)(x, y)
    }

    fn basis(&self) -> Vec<GElement> {
        self.shape.basis()
    }

    fn is_table(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_arithmetic_matches_elements() {
        let shape = GroupShape::new(5, &[1, 2]).unwrap();
        let n = shape.order() as usize;
        let table: Vec<u32> = vec![0; n * n];
        let v = IdxView::new(&shape, &table);
        for a in 0..n as u32 {
            for b in 0..n as u32 {
                let (ga, gb) = (shape.element(a as u128), shape.element(b as u128));
                assert_eq!(v.to_g(&v.add(&a, &b)), shape.add(&ga, &gb));
                assert_eq!(v.to_g(&v.sub(&a, &b)), shape.sub(&ga, &gb));
            }
            assert_eq!(v.to_g(&v.smul(-3, &a)), shape.smul(-3, &shape.element(a as u128)));
        }
        let basis: Vec<GElement> = v.basis().iter().map(|b| v.to_g(b)).collect();
        assert_eq!(basis, shape.basis());
    }
}
