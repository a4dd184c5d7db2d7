//! The left series `A¹ = A`, `A^{i+1} = A*A^i`.

use super::Brace;
use crate::budget::{Budget, Mode};
use crate::pgroup::{GElement, GroupShape, Subgroup};
use crate::search::rand_index;

#[derive(Clone, Debug)]
pub struct LeftSeries {
    /// `A¹, A², …`, ending with the zero subgroup when the series reaches it.
    pub terms: Vec<Subgroup>,
    pub reached_zero: bool,
    pub mode: Mode,
}

impl LeftSeries {
    /// Number of nonzero terms.
    pub fn length(&self) -> usize {
        self.terms.iter().filter(|t| !t.is_zero()).count()
    }

    pub fn orders(&self) -> Vec<u128> {
        self.terms.iter().map(|t| t.order()).collect()
    }
}

/// Chain `S₁ = A`, `S_{i+1} = span{ prod(a, g) : a ∈ A, g ∈ gens(S_i) }`.
///
/// Valid when `prod` is additive in its second argument. When `|A|·|gens|`
/// exceeds the budget the left factor is sampled and the mode says so.
pub(crate) fn span_chain(
    shape: &GroupShape,
    budget: &Budget,
    salt: &str,
    prod: impl Fn(&GElement, &GElement) -> GElement + Sync,
) -> LeftSeries {
    use rayon::prelude::*;
    let n = shape.order();
    let bound = shape.n() as usize + 2;
    let mut terms = vec![Subgroup::whole(shape)];
    let mut mode = Mode::Generators;
    let mut rng = budget.rng(salt);
    loop {
        let cur = terms.last().unwrap();
        if cur.is_zero() {
            return LeftSeries { terms, reached_zero: true, mode };
        }
        if terms.len() > bound {
            return LeftSeries { terms, reached_zero: false, mode };
        }
        let gens = cur.generators();
        let lefts: Vec<GElement> = if budget.allows_product(&[n, gens.len() as u128]) {
            shape.elements().collect()
        } else {
            let count = (budget.samples / gens.len().max(1) as u64).clamp(1, 1 << 16);
            mode = Mode::Sampled { samples: count, seed: budget.seed };
            (0..count).map(|_| shape.element(rand_index(&mut rng, n))).collect()
        };
        let products: Vec<Vec<GElement>> = lefts
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
        let next = Subgroup::span(shape, products.into_iter().flatten());
        if next.same_as(cur) {
            terms.push(next);
            return LeftSeries { terms, reached_zero: false, mode };
        }
        terms.push(next);
    }
}

pub fn left_series(b: &Brace, budget: &Budget) -> LeftSeries {
    if let Some(s) = b.cached_series(budget) {
        return s;
    }
    let s = span_chain(b.shape(), budget, "left-series", |a, g| b.star(a, g));
    b.store_series(budget, &s);
    s
}
