//! `[x]⊙[y] = [℘⁻¹((p^k x)*y)]` on `A/ann(p^{2k})`.

use rayon::prelude::*;

use super::{is_ideal, Brace};
use crate::budget::{Budget, Mode};
use crate::error::{Error, Result};
use crate::pgroup::{BoxSubgroup, GElement, GroupShape, PullbackChoice};
use crate::search::{first_fail, rand_index, sample_fail};

#[derive(Clone)]
pub struct Odot {
    parent: Brace,
    k: u32,
    choice: PullbackChoice,
    ann2k: BoxSubgroup,
}

impl Odot {
    /// No precondition checks; see [`verify_odot`].
    pub fn new(b: &Brace, k: u32, choice: PullbackChoice) -> Self {
        Odot { parent: b.clone(), k, choice, ann2k: b.shape().annihilator(2 * k) }
    }

    pub fn quotient_shape(&self) -> &GroupShape {
        self.ann2k.quotient_shape()
    }

    pub fn classes(&self) -> &BoxSubgroup {
        &self.ann2k
    }

    /// `⊙` of two ambient representatives, as a quotient element.
    pub fn eval_reps(&self, x: &GElement, y: &GElement) -> Result<GElement> {
        let shape = self.parent.shape();
        let u = shape.smul(shape.p().pow(self.k) as i128, x);
        self.from_pkx(&u, y)
    }

    /// The same value computed from `u = p^k x`.
    pub fn from_pkx(&self, u: &GElement, y: &GElement) -> Result<GElement> {
        let v = self.parent.star(u, y);
        let w = self.parent.shape().wp_inv(&v, self.k, self.choice)?;
        Ok(self.ann2k.to_quotient(&w))
    }

    pub fn eval(&self, qx: &GElement, qy: &GElement) -> Result<GElement> {
        self.eval_reps(&self.ann2k.from_quotient(qx), &self.ann2k.from_quotient(qy))
    }

    /// Dense table over quotient indices (canonical representatives).
    pub fn table(&self) -> Result<Vec<u32>> {
        let q = self.quotient_shape();
        let elems: Vec<GElement> = q.elements().collect();
        let rows: Result<Vec<Vec<u32>>> = elems
            .par_iter()
            .map(|x| elems.iter().map(|y| self.eval(x, y).map(|v| q.index(&v) as u32)).collect())
            .collect();
        Ok(rows?.concat())
    }
}

#[derive(Clone, Debug)]
pub struct OdotReport {
    pub k: u32,
    pub quotient_order: u128,
    pub preconditions: bool,
    pub representative_independent: bool,
    pub choice_independent: bool,
    pub choices: Vec<PullbackChoice>,
    pub witness: Option<String>,
    pub mode: Mode,
}

impl OdotReport {
    pub fn holds(&self) -> bool {
        self.preconditions && self.representative_independent && self.choice_independent
    }
}

/// Preconditions of the well-definedness theorem for `⊙`, with a witness on failure.
pub fn odot_preconditions(b: &Brace, k: u32, budget: &Budget) -> Result<Mode> {
    let shape = b.shape();
    if (k as u64) * (shape.p() - 1) < shape.max_exponent() as u64 {
        return Err(Error::precondition(format!("p^(k(p-1))A = 0 for k = {k}"), None));
    }
    let mut mode = Mode::Generators;
    for (name, s) in [
        ("p^kA", shape.p_power_subgroup(k)),
        ("ann(p^k)", shape.annihilator(k)),
        ("ann(p^2k)", shape.annihilator(2 * k)),
    ] {
        let c = is_ideal(b, &s.to_subgroup(), budget);
        mode = mode.combine(c.mode);
        if let Some((clause, w)) = c.witness {
            let w = w.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
            return Err(Error::precondition(format!("{name} is an ideal ({clause})"), Some(w)));
        }
    }
    let pk = shape.p_power_subgroup(k);
    let ann2 = shape.annihilator(2 * k).generators();
    let annk = shape.annihilator(k);
    let test = |u: &GElement| ann2.iter().find_map(|g| (!annk.contains(&b.star(u, g))).then(|| format!("{u} * {g}")));
    let w = if budget.allows_product(&[pk.order(), ann2.len() as u128]) {
        let elems: Vec<GElement> = pk.elements().collect();
        first_fail(elems.len() as u64, |i| test(&elems[i as usize]))
    } else {
        mode = mode.combine(Mode::Sampled { samples: budget.samples, seed: budget.seed });
        sample_fail(&mut budget.rng("odot-pre"), budget.samples, |rg| pk.random(rg), test)
    };
    match w {
        Some(w) => Err(Error::precondition("(p^kA)*ann(p^2k) ⊆ ann(p^k)", Some(w))),
        None => Ok(mode),
    }
}

/// Checks that `⊙` does not depend on representatives nor on the pullback.
///
/// `(p^k x)*y` depends on `x` only through `u = p^k x`, so scanning all pairs
/// `(u, y) ∈ p^kA × A` covers every representative of every class. Each value is
/// compared with the table built from canonical representatives and the
/// canonical pullback.
///
/// When that scan is over budget, `y` runs over a basis of `A` and generators
/// of `ann(p^{2k})` instead. This is exact for a brace: `u*y` is additive in `y`
/// and pullbacks of a sum differ by `ann(p^k)`, so each value is additive in `y`
/// modulo `ann(p^{2k})`.
pub fn verify_odot(b: &Brace, k: u32, choices: &[PullbackChoice], budget: &Budget) -> Result<OdotReport> {
    let shape = b.shape();
    let base = Odot::new(b, k, PullbackChoice::Canonical);
    let q = base.quotient_shape().clone();
    let mut report = OdotReport {
        k,
        quotient_order: q.order(),
        preconditions: false,
        representative_independent: false,
        choice_independent: false,
        choices: choices.to_vec(),
        witness: None,
        mode: Mode::Exhaustive,
    };
    match odot_preconditions(b, k, budget) {
        Ok(m) => {
            report.preconditions = true;
            report.mode = m;
        }
        Err(e) => {
            report.witness = Some(e.to_string());
            return Ok(report);
        }
    }
    let expected = base.table()?;
    let qn = q.order() as usize;
    let pk = shape.p_power_subgroup(k);
    let ann = base.classes().clone();
    let check = |c: &Odot, u: &GElement, y: &GElement| -> Option<String> {
        let x0 = match shape.wp_inv(u, k, PullbackChoice::Canonical) {
            Ok(x) => x,
            Err(e) => return Some(e.to_string()),
        };
        let (cx, cy) = (q.index(&ann.to_quotient(&x0)) as usize, q.index(&ann.to_quotient(y)) as usize);
        match c.from_pkx(u, y) {
            Ok(v) if q.index(&v) as usize == expected[cx * qn + cy] as usize => None,
            Ok(v) => Some(format!("choice {}: x={x0}, p^k x={u}, y={y} gives {v}", c.choice)),
            Err(e) => Some(format!("choice {}: {e}", c.choice)),
        }
    };
    let mut all = vec![PullbackChoice::Canonical];
    all.extend(choices.iter().copied().filter(|c| *c != PullbackChoice::Canonical));
    let mut ys = shape.basis();
    ys.extend(ann.generators());
    let choices_n = all.len() as u128;
    let mode = if budget.allows_product(&[pk.order(), shape.order(), choices_n]) {
        Mode::Exhaustive
    } else if budget.allows_product(&[pk.order(), ys.len() as u128, choices_n]) {
        Mode::Generators
    } else {
        Mode::Sampled { samples: budget.samples, seed: budget.seed }
    };
    let pk_elems: Vec<GElement> = if mode.is_exact() { pk.elements().collect() } else { Vec::new() };
    for (ci, choice) in all.iter().enumerate() {
        let c = Odot::new(b, k, *choice);
        let w = if mode == Mode::Exhaustive {
            first_fail(pk_elems.len() as u64, |i| {
                let u = &pk_elems[i as usize];
                shape.elements().find_map(|y| check(&c, u, &y))
            })
        } else if mode == Mode::Generators {
            first_fail(pk_elems.len() as u64, |i| ys.iter().find_map(|y| check(&c, &pk_elems[i as usize], y)))
        } else {
            let n = shape.order();
            sample_fail(
                &mut budget.rng(&format!("odot-{choice}")),
                budget.samples,
                |rg| (pk.random(rg), shape.element(rand_index(rg, n))),
                |(u, y)| check(&c, u, y),
            )
        };
        if let Some(w) = w {
            report.representative_independent = ci > 0;
            report.witness = Some(w);
            return Ok(report);
        }
    }
    report.representative_independent = true;
    report.choice_independent = true;
    report.mode = report.mode.combine(mode);
    Ok(report)
}
