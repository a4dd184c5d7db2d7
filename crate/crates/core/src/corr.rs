//! The elements `e′_i`, `e_j`, `d_s`, the operation `⋆` and the maps `f`, `g`.
//!
//! Here `s_j = v_p(j)` and `σ_j` is the unit with `C(p^k, j) = p^{k−s_j}σ_j`.
//! With `h = (p−1)/2`: `e₀(a, b) = e′_h(a, ρ⁻¹(b))`, `e_j = e′_j` for `p ∤ j`, and
//! `e_j(a, b) = d_s(a, e′_{j−hs}(a, b))` otherwise, `d_s` being `s` applications of `e₀`.
//! `a⋆b = Σ σ_j e_j(a, b)` and `f(a) = Σ σ_j e_j(a, ↾)`.
//!
//! Since `e′_i(a, ·)` lands in `A^{i+1}` and `A^{n+1} = 0`, every term with
//! `j − hk > n` vanishes; sums stop at `j_cap = min(p^k, n + 1 + hk)`.

use rayon::prelude::*;

use crate::arith;
use crate::brace::{odot_preconditions, Brace, Odot};
use crate::budget::{Budget, Mode};
use crate::error::{Error, Result};
use crate::flows::Arg;
use crate::pgroup::{BoxSubgroup, GElement, GroupShape, PullbackChoice};
use crate::props::{self, m_param, PropertyReport};
use crate::search::{first_fail, rand_index, sample_fail};

/// Per-pair budget charge of the `⊙` comparison, per unit of depth.
const ODOT_PAIR_COST: u128 = 100;

/// Sampled tuples for the checks that draw several elements at once.
pub const TUPLE_SAMPLES: u64 = 20_000;

/// `f` is tabulated on `A/ann(p^{2k})` up to this order.
pub const G_TABLE_CAP: u128 = 1 << 22;

/// `v_p(j)`.
pub fn binom_s(j: u64, p: u64) -> u32 {
    arith::vp(j as u128, p)
}

/// `σ_j = C(p^k, j) / p^{k−v_p(j)}` reduced modulo `p^n`, from the exact binomial.
pub fn binom_sigma(p: u64, k: u32, j: u64, n: u32) -> u128 {
    let pk = arith::big_pow(p, k);
    let c = arith::binomial(arith::big_mod(&pk, u64::MAX as u128) as u64, j);
    let d = arith::big_pow(p, k - binom_s(j, p));
    debug_assert!((&c % &d) == 0u32.into());
    let m = arith::pow_u128(p, n).expect("modulus fits");
    arith::big_mod(&(c / d), m)
}

pub struct CorrContext {
    b: Brace,
    k: u32,
    p: u64,
    n: u32,
    m: u32,
    half: usize,
    pk: u128,
    j_cap: usize,
    sigma: Vec<u64>,
    choice: PullbackChoice,
    property1: PropertyReport,
}

impl CorrContext {
    /// Requires `p ≥ 7`, `k ≥ 1` and Property 1.
    pub fn new(b: &Brace, k: u32, choice: PullbackChoice, budget: &Budget) -> Result<Self> {
        let shape = b.shape();
        let p = shape.p();
        if p < 7 {
            return Err(Error::precondition(format!("p >= 7 (got p = {p})"), None));
        }
        if k == 0 {
            return Err(Error::precondition("k >= 1", None));
        }
        let property1 = props::check_property1(b, budget);
        if !property1.holds {
            return Err(Error::precondition("Property 1", property1.witness.clone()));
        }
        let n = shape.n();
        let half = ((p - 1) / 2) as usize;
        let pk = arith::pow_u128(p, k).ok_or_else(|| Error::precondition("p^k fits in 128 bits", None))?;
        let j_cap = (pk.min((n as usize + 1 + half * k as usize) as u128)) as usize;
        let modulus = shape.exponent_modulus();
        // Unit parts of C(p^k, j) by C(N, j) = C(N, j−1)·(N−j+1)/j.
        let unit = |x: u128| -> u64 {
            let mut x = x;
            while x % p as u128 == 0 {
                x /= p as u128;
            }
            (x % modulus as u128) as u64
        };
        let mut sigma = vec![0u64; j_cap + 1];
        let mut acc = 1u64 % modulus;
        for j in 1..=j_cap {
            let num = unit(pk - j as u128 + 1);
            let den = arith::inv_mod(unit(j as u128) as u128, modulus as u128).unwrap_or(0) as u64;
            acc = arith::mul_mod(arith::mul_mod(acc, num, modulus), den, modulus);
            sigma[j] = acc;
        }
        Ok(CorrContext {
            b: b.clone(),
            k,
            p,
            n,
            m: m_param(p),
            half,
            pk,
            j_cap,
            sigma,
            choice,
            property1,
        })
    }

    /// The same context with another pullback.
    pub fn with_choice(&self, choice: PullbackChoice) -> Self {
        CorrContext {
            b: self.b.clone(),
            k: self.k,
            p: self.p,
            n: self.n,
            m: self.m,
            half: self.half,
            pk: self.pk,
            j_cap: self.j_cap,
            sigma: self.sigma.clone(),
            choice,
            property1: self.property1.clone(),
        }
    }

    pub fn brace(&self) -> &Brace {
        &self.b
    }

    pub fn shape(&self) -> &GroupShape {
        self.b.shape()
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn j_cap(&self) -> usize {
        self.j_cap
    }

    pub fn choice(&self) -> PullbackChoice {
        self.choice
    }

    pub fn property1(&self) -> &PropertyReport {
        &self.property1
    }

    /// `σ_j` modulo the exponent of `A`, for `1 ≤ j ≤ j_cap`.
    pub fn sigma(&self, j: usize) -> u64 {
        self.sigma[j]
    }

    /// `[e′_0, …, e′_len]`; for `↾` slot 0 holds `0` and is never read.
    fn chain(&self, a: &GElement, x: Arg<'_>, len: usize) -> Vec<GElement> {
        let shape = self.shape();
        let mut c = Vec::with_capacity(len + 1);
        c.push(match x {
            Arg::Elem(b) => b.clone(),
            Arg::Unit => shape.zero(),
        });
        for i in 1..=len {
            let next = match (i, x) {
                (1, Arg::Unit) => a.clone(),
                _ if i > 1 && c[i - 1].is_zero() => shape.zero(),
                _ => self.b.star(a, &c[i - 1]),
            };
            c.push(next);
        }
        c
    }

    /// `e₀(a, y) = e′_h(a, ρ⁻¹(y))` for `y ∈ pA`.
    pub fn e_zero(&self, a: &GElement, y: &GElement) -> Result<GElement> {
        let shape = self.shape();
        let mut x = shape.rho_inv(y, self.choice).map_err(|_| {
            Error::critical("argument of e_0 lies in pA", Some(format!("a={a}, y={y}")))
        })?;
        for _ in 0..self.half {
            x = self.b.star(a, &x);
        }
        Ok(x)
    }

    fn e_from_chain(&self, a: &GElement, chain: &[GElement], j: usize) -> Result<GElement> {
        if j as u64 % self.p != 0 {
            return Ok(chain[j].clone());
        }
        let s = binom_s(j as u64, self.p) as usize;
        let mut y = chain[j - self.half * s].clone();
        for _ in 0..s {
            y = self.e_zero(a, &y)?;
        }
        Ok(y)
    }

    fn weighted_sum(&self, a: &GElement, x: Arg<'_>) -> Result<GElement> {
        let shape = self.shape();
        let chain = self.chain(a, x, self.j_cap);
        let mut acc = shape.zero();
        for j in 1..=self.j_cap {
            let e = self.e_from_chain(a, &chain, j)?;
            acc = shape.add(&acc, &shape.smul(self.sigma[j] as i128, &e));
        }
        Ok(acc)
    }
}

/// `e′_i(a, x)`: `i`-fold left `*` power, with `e′_0(a, b) = b` and `e′_1(a, ↾) = a`.
pub fn e_prime(ctx: &CorrContext, i: usize, a: &GElement, x: Arg<'_>) -> Result<GElement> {
    if i == 0 {
        return match x {
            Arg::Elem(b) => Ok(b.clone()),
            Arg::Unit => Err(Error::Domain { op: "e_prime", detail: "e'_0 is not defined on the unit symbol".into() }),
        };
    }
    Ok(ctx.chain(a, x, i).pop().expect("nonempty chain"))
}

/// `e_j(a, x)`, any `j ≥ 1`.
pub fn e_full(ctx: &CorrContext, j: usize, a: &GElement, x: Arg<'_>) -> Result<GElement> {
    if j == 0 {
        return match x {
            Arg::Elem(y) => ctx.e_zero(a, y),
            Arg::Unit => Err(Error::Domain { op: "e_full", detail: "e_0 is not defined on the unit symbol".into() }),
        };
    }
    let chain = ctx.chain(a, x, j);
    ctx.e_from_chain(a, &chain, j)
}

pub fn star_op(ctx: &CorrContext, a: &GElement, b: &GElement) -> Result<GElement> {
    ctx.weighted_sum(a, Arg::Elem(b))
}

pub fn f_map(ctx: &CorrContext, a: &GElement) -> Result<GElement> {
    ctx.weighted_sum(a, Arg::Unit)
}

/// `ẽ′_i(a, b)`: `i`-fold left `⋆` power.
pub fn tilde_e(ctx: &CorrContext, i: usize, a: &GElement, b: &GElement) -> Result<GElement> {
    let mut x = b.clone();
    for _ in 0..i {
        x = star_op(ctx, a, &x)?;
    }
    Ok(x)
}

/// The permutation induced by `f` on `A/ann(p^{2k})` and its inverse `g`.
pub struct GMap {
    classes: BoxSubgroup,
    forward: Vec<u32>,
    inverse: Vec<u32>,
    pub cycles: usize,
    pub longest_cycle: u64,
    pub cycle_lcm: u128,
    /// How representative independence of `[a] ↦ [f(a)]` was checked.
    pub well_defined: Mode,
}

impl GMap {
    pub fn classes(&self) -> &BoxSubgroup {
        &self.classes
    }

    pub fn order(&self) -> usize {
        self.forward.len()
    }

    fn q(&self) -> &GroupShape {
        self.classes.quotient_shape()
    }

    /// `[f(a)]` for a quotient element.
    pub fn f_class(&self, x: &GElement) -> GElement {
        self.q().element(self.forward[self.q().index(x) as usize] as u128)
    }

    /// `[g(a)]` for a quotient element.
    pub fn g_class(&self, x: &GElement) -> GElement {
        self.q().element(self.inverse[self.q().index(x) as usize] as u128)
    }

    /// The canonical lift of `[g(a)]`.
    pub fn apply(&self, a: &GElement) -> GElement {
        self.classes.from_quotient(&self.g_class(&self.classes.to_quotient(a)))
    }
}

/// Tabulates `[a] ↦ [f(a)]` on canonical lifts, checks it is well defined on
/// sampled representatives and a bijection, and inverts it.
///
/// Every cycle length is at most `|A| = p^n` and so divides `p^n!`; the iterate
/// `f^{(p^n!−1)}` therefore agrees with the inverse, which is what is returned.
pub fn g_map(ctx: &CorrContext, budget: &Budget) -> Result<GMap> {
    let b = &ctx.b;
    let k = ctx.k;
    let p2 = props::check_property2(b, k, budget);
    if !p2.holds {
        return Err(Error::precondition("Property 2", p2.witness));
    }
    let shape = b.shape();
    let classes = shape.annihilator(2 * k);
    let q = classes.quotient_shape().clone();
    let order = q.order();
    if order > G_TABLE_CAP {
        return Err(Error::precondition(format!("quotient order {order} <= {G_TABLE_CAP} for tabulating f"), None));
    }
    let forward: Vec<u32> = (0..order as u64)
        .into_par_iter()
        .map(|i| {
            let a = classes.from_quotient(&q.element(i as u128));
            f_map(ctx, &a).map(|fa| q.index(&classes.to_quotient(&fa)) as u32)
        })
        .collect::<Result<_>>()?;

    let count = budget.heavy_samples();
    let mut rng = budget.rng("g-map-representatives");
    let w = sample_fail(&mut rng, count, |rg| shape.random(rg), |a| {
        let fa = match f_map(ctx, a) {
            Ok(v) => v,
            Err(e) => return Some(e.to_string()),
        };
        let got = q.index(&classes.to_quotient(&fa)) as u32;
        let expect = forward[q.index(&classes.to_quotient(a)) as usize];
        (got != expect).then(|| format!("a={a}: [f(a)] differs from [f] of the canonical lift"))
    });
    if let Some(w) = w {
        return Err(Error::critical("[a] -> [f(a)] is well defined", Some(w)));
    }

    let mut inverse = vec![u32::MAX; forward.len()];
    for (i, &v) in forward.iter().enumerate() {
        if inverse[v as usize] != u32::MAX {
            let x = classes.from_quotient(&q.element(inverse[v as usize] as u128));
            let y = classes.from_quotient(&q.element(i as u128));
            return Err(Error::critical("[a] -> [f(a)] is injective", Some(format!("[f({x})] = [f({y})]"))));
        }
        inverse[v as usize] = i as u32;
    }

    let bound = arith::pow_u128(ctx.p, ctx.n).unwrap_or(u128::MAX);
    let mut seen = vec![false; forward.len()];
    let (mut cycles, mut longest, mut lcm) = (0usize, 0u64, 1u128);
    for start in 0..forward.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0u64;
        let mut x = start;
        while !seen[x] {
            seen[x] = true;
            x = forward[x] as usize;
            len += 1;
        }
        if len as u128 > bound {
            return Err(Error::critical("cycle lengths of f divide p^n!", Some(format!("cycle of length {len}"))));
        }
        cycles += 1;
        longest = longest.max(len);
        lcm = lcm / arith::gcd(lcm, len as u128) * len as u128;
    }
    Ok(GMap {
        classes,
        forward,
        inverse,
        cycles,
        longest_cycle: longest,
        cycle_lcm: lcm,
        well_defined: Mode::Sampled { samples: count, seed: budget.seed },
    })
}

#[derive(Clone, Debug)]
pub struct WaznyReport {
    pub k: u32,
    pub holds: bool,
    pub witness: Option<String>,
    pub pairs: u128,
    pub mode: Mode,
}

/// `a^{∘p^k}*b = p^k(a⋆b)`, `a^{∘p^k} = p^k f(a)`, and `p^{s_j}e_j = e′_j` for `p | j`.
pub fn verify_wazny(ctx: &CorrContext, budget: &Budget) -> WaznyReport {
    let b = &ctx.b;
    let shape = b.shape();
    let n = shape.order();
    let pk = ctx.pk as i128;
    let p = ctx.p;

    let per_a = |a: &GElement| -> std::result::Result<GElement, String> {
        let apow = b.circ_pow(a, pk).map_err(|e| e.to_string())?;
        let fa = f_map(ctx, a).map_err(|e| e.to_string())?;
        if shape.smul(pk, &fa) != apow {
            return Err(format!("a={a}: p^k f(a) = {} but a^(∘p^k) = {apow}", shape.smul(pk, &fa)));
        }
        Ok(apow)
    };
    let pair = |a: &GElement, apow: &GElement, x: &GElement| -> Option<String> {
        let chain = ctx.chain(a, Arg::Elem(x), ctx.j_cap);
        let mut acc = shape.zero();
        for j in 1..=ctx.j_cap {
            let e = match ctx.e_from_chain(a, &chain, j) {
                Ok(e) => e,
                Err(err) => return Some(err.to_string()),
            };
            if j as u64 % p == 0 {
                let s = binom_s(j as u64, p);
                if shape.smul((p as i128).pow(s), &e) != chain[j] {
                    return Some(format!("a={a}, b={x}: p^s e_{j} != e'_{j}"));
                }
            }
            acc = shape.add(&acc, &shape.smul(ctx.sigma[j] as i128, &e));
        }
        let lhs = b.star(apow, x);
        let rhs = shape.smul(pk, &acc);
        (lhs != rhs).then(|| format!("a={a}, b={x}: a^(∘p^k)*b = {lhs} but p^k(a⋆b) = {rhs}"))
    };

    let cost = ctx.j_cap as u128 + 1;
    let (w, pairs, mode) = if budget.allows_product(&[n, n, cost]) {
        let w = first_fail(n as u64, |i| {
            let a = shape.element(i as u128);
            let apow = match per_a(&a) {
                Ok(v) => v,
                Err(e) => return Some(e),
            };
            (0..n).find_map(|t| pair(&a, &apow, &shape.element(t)))
        });
        (w, n * n, Mode::Exhaustive)
    } else {
        let count = budget.samples;
        let w = sample_fail(
            &mut budget.rng("wazny"),
            count,
            |rg| (shape.element(rand_index(rg, n)), shape.element(rand_index(rg, n))),
            |(a, x)| match per_a(a) {
                Ok(apow) => pair(a, &apow, x),
                Err(e) => Some(e),
            },
        );
        (w, count as u128, Mode::Sampled { samples: count, seed: budget.seed })
    };
    WaznyReport { k: ctx.k, holds: w.is_none(), witness: w, pairs, mode }
}

#[derive(Clone, Debug)]
pub struct FStarOdotReport {
    pub k: u32,
    pub depth: usize,
    pub quotient_order: u128,
    pub holds: bool,
    pub witness: Option<String>,
    pub mode: Mode,
}

/// `ē′_i([f(a)], [b]) = [ẽ′_i(a, b)]` for `1 ≤ i ≤ depth`, where `ē′` iterates
/// `[f(a)]⊙·` and `ẽ′` iterates `a⋆·`. Needs the `⊙` preconditions and Property 2.
pub fn verify_fstar_odot(ctx: &CorrContext, depth: usize, budget: &Budget) -> Result<FStarOdotReport> {
    let b = &ctx.b;
    let k = ctx.k;
    let mut mode = odot_preconditions(b, k, budget)?;
    let p2 = props::check_property2(b, k, budget);
    if !p2.holds {
        return Err(Error::precondition("Property 2", p2.witness));
    }
    mode = mode.combine(p2.mode);
    let shape = b.shape();
    let odot = Odot::new(b, k, ctx.choice);
    let classes = odot.classes().clone();
    let q = classes.quotient_shape().clone();
    let qn = q.order();

    let run = |a: &GElement, fa: &GElement, y: &GElement| -> Option<String> {
        let mut lhs = shape.zero();
        let mut rhs = y.clone();
        for i in 1..=depth {
            let arg = if i == 1 { y.clone() } else { classes.from_quotient(&lhs) };
            lhs = match odot.eval_reps(fa, &arg) {
                Ok(v) => v,
                Err(e) => return Some(e.to_string()),
            };
            rhs = match star_op(ctx, a, &rhs) {
                Ok(v) => v,
                Err(e) => return Some(e.to_string()),
            };
            let r = classes.to_quotient(&rhs);
            if r != lhs {
                return Some(format!("depth {i}, a={a}, b={y}: [f(a)]⊙… = {lhs} but [a⋆…] = {r}"));
            }
        }
        None
    };

    let w = if budget.allows_product(&[qn, qn, ODOT_PAIR_COST, depth as u128]) {
        mode = mode.combine(Mode::Exhaustive);
        first_fail(qn as u64, |i| {
            let a = classes.from_quotient(&q.element(i as u128));
            let fa = match f_map(ctx, &a) {
                Ok(v) => v,
                Err(e) => return Some(e.to_string()),
            };
            (0..qn).find_map(|t| run(&a, &fa, &classes.from_quotient(&q.element(t))))
        })
    } else {
        let count = budget.samples.min(TUPLE_SAMPLES);
        mode = mode.combine(Mode::Sampled { samples: count, seed: budget.seed });
        sample_fail(&mut budget.rng("fstar-odot"), count, |rg| (shape.random(rg), shape.random(rg)), |(a, y)| {
            match f_map(ctx, a) {
                Ok(fa) => run(a, &fa, y),
                Err(e) => Some(e.to_string()),
            }
        })
    };
    Ok(FStarOdotReport { k, depth, quotient_order: qn, holds: w.is_none(), witness: w, mode })
}

/// A named instance-level identity and how it was decided.
#[derive(Clone, Debug)]
pub struct CorrCheck {
    pub id: String,
    pub name: String,
    pub outcome: std::result::Result<Mode, String>,
}

impl CorrCheck {
    pub fn holds(&self) -> bool {
        self.outcome.is_ok()
    }
}

fn check(id: &str, name: &str, w: Option<String>, mode: Mode) -> CorrCheck {
    CorrCheck { id: id.into(), name: name.into(), outcome: w.map_or(Ok(mode), Err) }
}

/// The identities around `e₀`, with `h′ = (p−3)/2`:
/// `e_{h′}(a, ann(p)) = 0`, `e_{h′}(a, A) ⊆ pA`, `e_{h′}(a, ↾) ∈ pA`,
/// `e₀(a, b) = e_{h′}(a, ρ⁻¹(a*b))`, additivity of `e_i(a, ·)`,
/// `ẽ′_{h′}(a, b) ∈ pA` and `ẽ′_{h′}(a, ann(p)) = 0`.
pub fn check_lemma_e0(ctx: &CorrContext, budget: &Budget) -> Vec<CorrCheck> {
    let b = &ctx.b;
    let shape = b.shape();
    let n = shape.order();
    let h3 = (ctx.p as usize - 3) / 2;
    let basis = shape.basis();
    let ann_p = shape.annihilator(1);
    let ann_gens = ann_p.generators();
    let pa = shape.p_power_subgroup(1);
    let mut out = Vec::new();

    let per = (basis.len() + ann_gens.len() + 1) as u128 * h3.max(1) as u128;
    let (w1, w2, w3, mode) = {
        let test = |a: &GElement| -> [Option<String>; 3] {
            let e = |x: Arg<'_>| e_prime(ctx, h3, a, x).expect("h' >= 2");
            [
                ann_gens.iter().find_map(|g| {
                    let v = e(Arg::Elem(g));
                    (!v.is_zero()).then(|| format!("a={a}, x={g}: {v} != 0"))
                }),
                basis.iter().find_map(|g| {
                    let v = e(Arg::Elem(g));
                    (!shape.in_pk(&v, 1)).then(|| format!("a={a}, b={g}: {v} not in pA"))
                }),
                {
                    let v = e(Arg::Unit);
                    (!shape.in_pk(&v, 1)).then(|| format!("a={a}: {v} not in pA"))
                },
            ]
        };
        let (elems, mode): (Vec<GElement>, Mode) = if budget.allows_product(&[n, per]) {
            (shape.elements().collect(), Mode::Generators)
        } else {
            let mut rng = budget.rng("lemma-e0");
            let c = budget.samples;
            ((0..c).map(|_| shape.random(&mut rng)).collect(), Mode::Sampled { samples: c, seed: budget.seed })
        };
        let res: Vec<[Option<String>; 3]> = elems.par_iter().map(test).collect();
        let first = |i: usize| res.iter().find_map(|r| r[i].clone());
        (first(0), first(1), first(2), mode)
    };
    out.push(check("e_ann_zero", "e_(p-3)/2(a, ann(p)) = 0", w1, mode));
    out.push(check("e_in_pa", "e_(p-3)/2(a, A) in pA", w2, mode));
    out.push(check("e_unit_in_pa", "e_(p-3)/2(a, unit) in pA", w3, mode));

    let count = budget.samples.min(TUPLE_SAMPLES);
    let smode = Mode::Sampled { samples: count, seed: budget.seed };
    let mut rng = budget.rng("lemma-e0-tuples");
    let tuples: Vec<[GElement; 5]> = (0..count)
        .map(|_| [shape.random(&mut rng), pa.random(&mut rng), shape.random(&mut rng), shape.random(&mut rng), ann_p.random(&mut rng)])
        .collect();
    let results: Vec<[Option<String>; 4]> = tuples
        .par_iter()
        .map(|[a, y, c, d, z]| {
            let lemma = (|| {
                let lhs = ctx.e_zero(a, y).ok()?;
                let u = shape.rho_inv(&b.star(a, y), ctx.choice).ok()?;
                let rhs = e_prime(ctx, h3, a, Arg::Elem(&u)).ok()?;
                (lhs != rhs).then(|| format!("a={a}, b={y}: e_0 = {lhs} but lemma form gives {rhs}"))
            })();
            let additive = (1..=ctx.j_cap).find_map(|i| {
                let cd = shape.add(c, d);
                let l = e_full(ctx, i, a, Arg::Elem(&cd)).ok()?;
                let r = shape.add(&e_full(ctx, i, a, Arg::Elem(c)).ok()?, &e_full(ctx, i, a, Arg::Elem(d)).ok()?);
                (l != r).then(|| format!("i={i}, a={a}, b={c}, c={d}"))
            });
            let te = tilde_e(ctx, h3, a, c);
            let tilde_pa = match &te {
                Ok(v) => (!shape.in_pk(v, 1)).then(|| format!("a={a}, b={c}: {v} not in pA")),
                Err(e) => Some(e.to_string()),
            };
            let tilde_ann = match tilde_e(ctx, h3, a, z) {
                Ok(v) => (!v.is_zero()).then(|| format!("a={a}, x={z}: {v} != 0")),
                Err(e) => Some(e.to_string()),
            };
            [lemma, additive, tilde_pa, tilde_ann]
        })
        .collect();
    let first = |i: usize| results.iter().find_map(|r| r[i].clone());
    out.push(check("e0_lemma_form", "e_0(a,b) = e_(p-3)/2(a, rho^-1(a*b))", first(0), smode));
    out.push(check("e_additive", "e_i(a, b+c) = e_i(a,b) + e_i(a,c)", first(1), smode));
    out.push(check("tilde_in_pa", "tilde e'_(p-3)/2(a, b) in pA", first(2), smode));
    out.push(check("tilde_ann_zero", "tilde e'_(p-3)/2(a, ann(p)) = 0", first(3), smode));
    out
}

/// `e₀`, `⋆` and `f` agree elementwise under every pullback in `choices`.
pub fn check_choice_independence(ctx: &CorrContext, choices: &[PullbackChoice], budget: &Budget) -> CorrCheck {
    let shape = ctx.shape();
    let pa = shape.p_power_subgroup(1);
    let others: Vec<CorrContext> = choices.iter().map(|&c| ctx.with_choice(c)).collect();
    let count = budget.samples.min(TUPLE_SAMPLES);
    let w = sample_fail(
        &mut budget.rng("corr-choice"),
        count,
        |rg| (shape.random(rg), pa.random(rg), shape.random(rg)),
        |(a, y, x)| {
            let base = (ctx.e_zero(a, y).ok()?, star_op(ctx, a, x).ok()?, f_map(ctx, a).ok()?);
            others.iter().find_map(|o| {
                let other = (o.e_zero(a, y), star_op(o, a, x), f_map(o, a));
                match other {
                    (Ok(e), Ok(s), Ok(f)) if (e.clone(), s.clone(), f.clone()) == base => None,
                    _ => Some(format!("choice {}: a={a}, y={y}, b={x}", o.choice)),
                }
            })
        },
    );
    check("choice_independence", "e_0, star and f independent of the pullback", w, Mode::Sampled { samples: count, seed: budget.seed })
}

/// Everything the `corr` command reports.
#[derive(Clone, Debug)]
pub struct CorrReport {
    pub k: u32,
    pub choice: PullbackChoice,
    pub j_cap: usize,
    pub wazny: WaznyReport,
    pub fstar: std::result::Result<FStarOdotReport, String>,
    pub g: std::result::Result<(usize, usize, u64), String>,
    pub checks: Vec<CorrCheck>,
}

impl CorrReport {
    pub fn critical(&self) -> bool {
        !self.wazny.holds
            || matches!(&self.fstar, Ok(r) if !r.holds)
            || self.checks.iter().any(|c| !c.holds())
    }
}

pub fn verify_corr(b: &Brace, k: u32, choice: PullbackChoice, depth: usize, budget: &Budget) -> Result<CorrReport> {
    let ctx = CorrContext::new(b, k, choice, budget)?;
    let wazny = verify_wazny(&ctx, budget);
    let fstar = verify_fstar_odot(&ctx, depth, budget).map_err(|e| e.to_string());
    let g = g_map(&ctx, budget).map(|g| (g.order(), g.cycles, g.longest_cycle)).map_err(|e| e.to_string());
    let mut checks = check_lemma_e0(&ctx, budget);
    let alt = match choice {
        PullbackChoice::Canonical => PullbackChoice::offset(budget.seed),
        _ => PullbackChoice::Canonical,
    };
    checks.push(check_choice_independence(&ctx, &[alt], budget));
    Ok(CorrReport { k, choice, j_cap: ctx.j_cap, wazny, fstar, g, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn small() -> Budget {
        Budget { exhaustive: 200_000_000, samples: 4_000, seed: 3 }
    }

    #[test]
    fn binomial_constants() {
        assert_eq!(binom_sigma(7, 1, 1, 3), 1);
        assert_eq!(binom_sigma(7, 1, 3, 3), 5);
        assert_eq!(binom_s(7, 7), 1);
        let c = arith::binomial(49, 7);
        assert_eq!(arith::vp(arith::big_mod(&c, u128::MAX), 7), 1);
        let b = corpus::radical_ring_brace(7, 3, 7).unwrap();
        let ctx = CorrContext::new(&b, 2, PullbackChoice::Canonical, &small()).unwrap();
        for j in 1..=ctx.j_cap() {
            assert_eq!(ctx.sigma(j) as u128, binom_sigma(7, 2, j as u64, 3), "j={j}");
        }
    }

    #[test]
    fn e_prime_closed_form() {
        let b = corpus::radical_ring_brace(7, 3, 7).unwrap();
        let ctx = CorrContext::new(&b, 1, PullbackChoice::Canonical, &small()).unwrap();
        let s = b.shape();
        for (a, x) in [(1u64, 1u64), (3, 5), (10, 200)] {
            let (ga, gx) = (GElement::from_slice(&[a]), GElement::from_slice(&[x]));
            for j in 0..5u32 {
                let c = (7u128.pow(j) * (a as u128).pow(j) * x as u128 % 343) as u64;
                assert_eq!(e_prime(&ctx, j as usize, &ga, Arg::Elem(&gx)).unwrap(), GElement::from_slice(&[c]));
                if j >= 1 {
                    let c = (7u128.pow(j - 1) * (a as u128).pow(j) % 343) as u64;
                    assert_eq!(e_prime(&ctx, j as usize, &ga, Arg::Unit).unwrap(), GElement::from_slice(&[c]));
                }
            }
        }
        assert!(e_prime(&ctx, 0, &s.zero(), Arg::Unit).is_err());
    }

    #[test]
    fn trivial_brace() {
        let b = corpus::trivial_brace(GroupShape::new(7, &[2]).unwrap());
        let ctx = CorrContext::new(&b, 1, PullbackChoice::Canonical, &small()).unwrap();
        for a in b.shape().elements() {
            assert_eq!(f_map(&ctx, &a).unwrap(), a);
            for x in b.shape().elements().step_by(5) {
                assert!(star_op(&ctx, &a, &x).unwrap().is_zero());
                assert!(e_full(&ctx, 3, &a, Arg::Elem(&x)).unwrap().is_zero());
            }
        }
        let g = g_map(&ctx, &small()).unwrap();
        for x in g.classes().quotient_shape().elements() {
            assert_eq!(g.g_class(&x), x);
        }
        assert!(verify_wazny(&ctx, &small()).holds);
        assert!(verify_fstar_odot(&ctx, 3, &small()).unwrap().holds);
    }

    #[test]
    fn f_on_radical_7_3() {
        let b = corpus::radical_ring_brace(7, 3, 7).unwrap();
        let ctx = CorrContext::new(&b, 1, PullbackChoice::Canonical, &small()).unwrap();
        let one = GElement::from_slice(&[1]);
        let pow = b.circ_pow(&one, 7).unwrap();
        assert_eq!(pow, GElement::from_slice(&[154]));
        let f1 = f_map(&ctx, &one).unwrap();
        assert_eq!(f1.coeffs()[0] % 49, 22);
        for a in b.shape().elements() {
            for x in b.shape().elements().step_by(7) {
                for y in b.shape().elements().step_by(11) {
                    let l = star_op(&ctx, &a, &b.shape().add(&x, &y)).unwrap();
                    let r = b.shape().add(&star_op(&ctx, &a, &x).unwrap(), &star_op(&ctx, &a, &y).unwrap());
                    assert_eq!(l, r);
                }
            }
        }
    }

    #[test]
    fn wazny_radical_7_3_exhaustive() {
        let b = corpus::radical_ring_brace(7, 3, 7).unwrap();
        let ctx = CorrContext::new(&b, 1, PullbackChoice::Canonical, &Budget::default()).unwrap();
        let r = verify_wazny(&ctx, &Budget::default());
        assert!(r.holds, "{:?}", r.witness);
        assert_eq!(r.mode, Mode::Exhaustive);
        assert_eq!(r.pairs, 343 * 343);
    }

    #[test]
    fn rho_inv_term_at_j_equal_p() {
        let b = corpus::radical_ring_brace(7, 6, 7).unwrap();
        let base = CorrContext::new(&b, 1, PullbackChoice::Canonical, &small()).unwrap();
        let other = base.with_choice(PullbackChoice::offset(9));
        let s = b.shape();
        let mut rng = small().rng("t");
        for _ in 0..200 {
            let (a, x) = (s.random(&mut rng), s.random(&mut rng));
            let e7 = e_full(&base, 7, &a, Arg::Elem(&x)).unwrap();
            let inner = e_prime(&base, 4, &a, Arg::Elem(&x)).unwrap();
            assert_eq!(e7, base.e_zero(&a, &inner).unwrap());
            let u = s.rho_inv(&inner, PullbackChoice::Canonical).unwrap();
            assert_eq!(e7, e_prime(&base, 3, &a, Arg::Elem(&u)).unwrap());
            assert_eq!(e7, e_full(&other, 7, &a, Arg::Elem(&x)).unwrap());
            assert_eq!(s.smul(7, &e7), e_prime(&base, 7, &a, Arg::Elem(&x)).unwrap());
        }
    }

    #[test]
    fn g_inverts_f_and_matches_iterate() {
        let b = corpus::radical_ring_brace(7, 3, 7).unwrap();
        let ctx = CorrContext::new(&b, 1, PullbackChoice::Canonical, &small()).unwrap();
        let g = g_map(&ctx, &small()).unwrap();
        let q = g.classes().quotient_shape().clone();
        for x in q.elements() {
            assert_eq!(g.f_class(&g.g_class(&x)), x);
            assert_eq!(g.g_class(&g.f_class(&x)), x);
            // g = f^(L−1) with L the lcm of the cycle lengths, a divisor of p^n!.
            let mut y = g.classes().from_quotient(&x);
            for _ in 0..g.cycle_lcm - 1 {
                y = f_map(&ctx, &y).unwrap();
            }
            assert_eq!(g.classes().to_quotient(&y), g.g_class(&x));
        }
    }

    #[test]
    fn fstar_odot_and_lemma_e0() {
        for (p, n) in [(7, 3), (7, 6), (11, 3)] {
            let b = corpus::radical_ring_brace(p, n, p).unwrap();
            for choice in [PullbackChoice::Canonical, PullbackChoice::offset(5)] {
                let ctx = CorrContext::new(&b, 1, choice, &small()).unwrap();
                let r = verify_fstar_odot(&ctx, 3, &small()).unwrap();
                assert!(r.holds, "p={p} n={n}: {:?}", r.witness);
                for c in check_lemma_e0(&ctx, &small()) {
                    assert!(c.holds(), "p={p} n={n} {}: {:?}", c.name, c.outcome);
                }
                let c = check_choice_independence(&ctx, &[PullbackChoice::offset(77), PullbackChoice::Offset { seed: 8, preserve_level: false }], &small());
                assert!(c.holds(), "{:?}", c.outcome);
            }
        }
    }

    #[test]
    fn rejects_small_primes_and_property1_failures() {
        let b = corpus::radical_ring_brace(5, 3, 5).unwrap();
        assert!(matches!(CorrContext::new(&b, 1, PullbackChoice::Canonical, &small()), Err(Error::Precondition { .. })));
        let b = corpus::negative_control_p1(7).unwrap();
        assert!(matches!(CorrContext::new(&b, 1, PullbackChoice::Canonical, &small()), Err(Error::Precondition { .. })));
    }
}
