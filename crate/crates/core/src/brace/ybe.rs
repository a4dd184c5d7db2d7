//! The set-theoretic solution `r(x, y) = (λ_x(y), λ_z(x))` with `z = λ_x(y)^{∘−1}`.

use super::Brace;
use crate::budget::{Budget, Mode};
use crate::error::Result;
use crate::pgroup::GElement;
use crate::search::{first_fail, rand_index, sample_fail};

/// `r` on element pairs; small braces use a precomputed index table.
pub struct YbMap {
    brace: Brace,
    table: Option<Vec<(u32, u32)>>,
}

impl YbMap {
    pub fn apply(&self, x: &GElement, y: &GElement) -> Result<(GElement, GElement)> {
        let b = &self.brace;
        let u = b.lambda(x, y);
        let z = b.inverse(&u)?;
        Ok((u, b.lambda(&z, x)))
    }

    fn apply_idx(&self, x: u32, y: u32) -> (u32, u32) {
        let n = self.brace.order() as usize;
        self.table.as_ref().expect("table")[x as usize * n + y as usize]
    }
}

pub fn yb_solution(b: &Brace) -> Result<YbMap> {
    let mut map = YbMap { brace: b.clone(), table: None };
    if b.table().is_some() {
        let shape = b.shape();
        let n = b.order();
        let mut t = Vec::with_capacity((n * n) as usize);
        for x in shape.elements() {
            for y in shape.elements() {
                let (u, v) = map.apply(&x, &y)?;
                t.push((shape.index(&u) as u32, shape.index(&v) as u32));
            }
        }
        map.table = Some(t);
    }
    Ok(map)
}

#[derive(Clone, Debug)]
pub struct YbeReport {
    pub involutive: bool,
    pub braid: bool,
    pub witness: Option<String>,
    pub mode: Mode,
}

impl YbeReport {
    pub fn holds(&self) -> bool {
        self.involutive && self.braid
    }
}

/// Involutivity `r∘r = id` on pairs and the braid relation on triples.
pub fn verify_ybe(b: &Brace, budget: &Budget) -> Result<YbeReport> {
    let map = yb_solution(b)?;
    let n = b.order();
    let shape = b.shape();
    let mut report = YbeReport { involutive: false, braid: false, witness: None, mode: Mode::Exhaustive };
    if map.table.is_some() && budget.allows_product(&[n, n, n]) {
        let inv = first_fail((n * n) as u64, |i| {
            let (x, y) = ((i / n as u64) as u32, (i % n as u64) as u32);
            let (u, v) = map.apply_idx(x, y);
            (map.apply_idx(u, v) != (x, y)).then_some((x, y))
        });
        if let Some((x, y)) = inv {
            report.witness = Some(format!("r(r({}, {})) ≠ id", shape.element(x as u128), shape.element(y as u128)));
            return Ok(report);
        }
        report.involutive = true;
        let braid = first_fail(n as u64, |x| {
            let x = x as u32;
            (0..n as u32).find_map(|y| {
                (0..n as u32).find_map(|z| {
                    // r₁₂ r₂₃ r₁₂ versus r₂₃ r₁₂ r₂₃
                    let (a1, b1) = map.apply_idx(x, y);
                    let (b2, c2) = map.apply_idx(b1, z);
                    let (a3, b3) = map.apply_idx(a1, b2);
                    let left = (a3, b3, c2);
                    let (y1, z1) = map.apply_idx(y, z);
                    let (x2, y2) = map.apply_idx(x, y1);
                    let (y3, z3) = map.apply_idx(y2, z1);
                    let right = (x2, y3, z3);
                    (left != right).then_some((x, y, z))
                })
            })
        });
        if let Some((x, y, z)) = braid {
            let e = |i: u32| shape.element(i as u128);
            report.witness = Some(format!("braid relation fails at ({}, {}, {})", e(x), e(y), e(z)));
            return Ok(report);
        }
        report.braid = true;
        return Ok(report);
    }
    let count = budget.samples;
    report.mode = Mode::Sampled { samples: count, seed: budget.seed };
    let r = |x: &GElement, y: &GElement| map.apply(x, y).expect("verified brace has inverses");
    let inv = sample_fail(
        &mut budget.rng("ybe-involutive"),
        count,
        |rg| (shape.element(rand_index(rg, n)), shape.element(rand_index(rg, n))),
        |(x, y)| {
            let (u, v) = r(x, y);
            (r(&u, &v) != (x.clone(), y.clone())).then(|| format!("r(r({x}, {y})) ≠ id"))
        },
    );
    if inv.is_some() {
        report.witness = inv;
        return Ok(report);
    }
    report.involutive = true;
    let braid = sample_fail(
        &mut budget.rng("ybe-braid"),
        count,
        |rg| (shape.element(rand_index(rg, n)), shape.element(rand_index(rg, n)), shape.element(rand_index(rg, n))),
        |(x, y, z)| {
            let (a1, b1) = r(x, y);
            let (b2, c2) = r(&b1, z);
            let (a3, b3) = r(&a1, &b2);
            let (y1, z1) = r(y, z);
            let (x2, y2) = r(x, &y1);
            let (y3, z3) = r(&y2, &z1);
            ((a3, b3, c2) != (x2, y3, z3)).then(|| format!("braid relation fails at ({x}, {y}, {z})"))
        },
    );
    report.braid = braid.is_none();
    report.witness = braid;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::pgroup::GroupShape;

    #[test]
    fn trivial_brace_gives_flip() {
        let b = corpus::trivial_brace(GroupShape::new(5, &[2]).unwrap()).compact();
        let r = yb_solution(&b).unwrap();
        for x in b.shape().elements() {
            for y in b.shape().elements() {
                assert_eq!(r.apply(&x, &y).unwrap(), (y.clone(), x.clone()));
            }
        }
    }

    #[test]
    fn radical_brace_solution() {
        let b = corpus::radical_ring_brace(5, 3, 5).unwrap().compact();
        let rep = verify_ybe(&b, &Budget::default()).unwrap();
        assert!(rep.holds(), "{:?}", rep.witness);
        assert_eq!(rep.mode, Mode::Exhaustive);
    }

    #[test]
    fn non_brace_is_caught() {
        let b = corpus::radical_ring_brace(5, 2, 5).unwrap().compact();
        let bad = corpus::perturb(&b, 3).unwrap();
        let rep = verify_ybe(&bad, &Budget::default());
        assert!(rep.map(|r| !r.holds()).unwrap_or(true));
    }
}
