//! The modified group of flows.
//!
//! With `s_j = v_p(j!)`, `η_j = m·s_j` and `σ_j` the inverse of the unit part of
//! `j!`, the operators are `E_{j,a} = L_a^{j−η_j} (ρ⁻¹)^{s_j} L_a^{η_j}`, and
//! `W(a) = Σ σ_j E_{j,a}(↾)`, `W(a, b) = Σ σ_j E_{j,a}(b)`,
//! `a∘′b = a + b + W(Ω(a), b)` with `Ω = W⁻¹`.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rayon::prelude::*;

use crate::arith;
use crate::brace::{quotient_unchecked, verify_pseudobrace, Brace, BraceKind, BraceReport, CircRule, Odot, TABLE_CAP};
use crate::budget::{Budget, Mode};
use crate::error::{Error, Result};
use crate::pgroup::{GElement, GroupShape, PullbackChoice};
use crate::prelie::{extract_prelie, left_nilpotency_index, strong_nilpotency_index, PreLie};
use crate::props::{self, m_param, PropertyReport};
use crate::search::{first_fail, rand_index, sample_fail};

/// `W` is tabulated and inverted as a permutation up to this order.
pub const OMEGA_TABLE_CAP: u128 = 1 << 16;

/// Pair evaluations of the round trip are charged this many budget units each.
const PAIR_COST: u128 = 1_000;

/// Sampled pairs for a round trip whose final quotient is too large to sweep.
pub const ROUNDTRIP_SAMPLES: u64 = 20_000;

/// `v_p(j!)` by Legendre's formula.
pub fn fact_valuation(j: u64, p: u64) -> u32 {
    arith::legendre(j, p)
}

/// `(γ_j, σ_j)` with `j! = γ_j·p^{s_j}` and `σ_j·γ_j ≡ 1`, both reduced modulo `p^n`.
pub fn fact_sigma(j: u64, p: u64, n: u32) -> (u128, u128) {
    let modulus = arith::big_pow(p, n);
    let mut g = BigUint::from(1u32) % &modulus;
    for i in 1..=j {
        let mut t = i;
        while t % p == 0 {
            t /= p;
        }
        g = (g * BigUint::from(t)) % &modulus;
    }
    let m = arith::big_mod(&modulus, u128::MAX);
    let gamma = arith::big_mod(&g, m.max(1));
    let sigma = if m == 1 { 0 } else { arith::inv_mod(gamma, m).expect("unit part of j! is prime to p") };
    (gamma, sigma)
}

/// Argument of `E_{j,a}`: an element, or the formal identity `↾`.
#[derive(Clone, Copy, Debug)]
pub enum Arg<'a> {
    Elem(&'a GElement),
    Unit,
}

/// Why the construction was allowed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Property3,
    /// Property 3 fails but the strong nilpotency index is below `p`, so no
    /// `ρ⁻¹` occurs up to the truncation bound.
    Lazard { strong_index: usize },
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Property3 => write!(f, "property3"),
            Regime::Lazard { strong_index } => write!(f, "lazard(strong-index={strong_index})"),
        }
    }
}

struct WTables {
    w: Vec<u32>,
    omega: Vec<u32>,
}

pub struct FlowsContext {
    pl: PreLie,
    p: u64,
    n: u32,
    m: u32,
    fact_s: Vec<u32>,
    eta: Vec<u32>,
    gamma: Vec<u128>,
    sigma: Vec<u128>,
    sigma_e: Vec<u64>,
    j_max: usize,
    left_index: usize,
    choice: PullbackChoice,
    regime: Regime,
    property3: PropertyReport,
    tables: Option<std::result::Result<WTables, String>>,
}

impl fmt::Debug for FlowsContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowsContext")
            .field("shape", &self.pl.shape().to_string())
            .field("j_max", &self.j_max)
            .field("regime", &self.regime)
            .field("choice", &self.choice)
            .finish()
    }
}

impl FlowsContext {
    /// Checks Property 3 (or the Lazard exemption) and fixes all constants.
    pub fn new(pl: &PreLie, choice: PullbackChoice) -> Result<Self> {
        let shape = pl.shape();
        let p = shape.p();
        if p <= 3 {
            return Err(Error::precondition(format!("p > 3, got p = {p}"), None));
        }
        let n = shape.n();
        let m = m_param(p);
        let property3 = props::check_property3(pl, &Budget::default());
        let left_index = left_nilpotency_index(pl)
            .ok_or_else(|| Error::precondition("left nilpotent pre-Lie ring", Some("A(i) stabilizes above 0".into())))?;
        let (regime, j_max) = if property3.holds {
            (Regime::Property3, 2 * left_index)
        } else {
            match strong_nilpotency_index(pl) {
                Some(z) if z < p as usize => (Regime::Lazard { strong_index: z }, (2 * left_index).min(z)),
                _ => return Err(Error::precondition("Property 3", property3.witness.clone())),
            }
        };
        let top = j_max + 3;
        let em = shape.exponent_modulus() as u128;
        let mut fact_s = vec![0];
        let mut eta = vec![0];
        let mut gamma = vec![1];
        let mut sigma = vec![1];
        let mut sigma_e = vec![1];
        for j in 1..=top as u64 {
            let s = fact_valuation(j, p);
            let (g, sg) = fact_sigma(j, p, n);
            fact_s.push(s);
            eta.push(m * s);
            gamma.push(g);
            sigma.push(sg);
            sigma_e.push((sg % em.max(1)) as u64);
        }
        let mut ctx = FlowsContext {
            pl: pl.clone(),
            p,
            n,
            m,
            fact_s,
            eta,
            gamma,
            sigma,
            sigma_e,
            j_max,
            left_index,
            choice,
            regime,
            property3,
            tables: None,
        };
        ctx.tables = ctx.build_tables();
        Ok(ctx)
    }

    pub fn prelie(&self) -> &PreLie {
        &self.pl
    }

    pub fn shape(&self) -> &GroupShape {
        self.pl.shape()
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

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    /// Length of the left chain `A(1) ⊋ ⋯ ⊋ A(M) = 0`.
    pub fn left_index(&self) -> usize {
        self.left_index
    }

    pub fn choice(&self) -> PullbackChoice {
        self.choice
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn property3(&self) -> &PropertyReport {
        &self.property3
    }

    pub fn fact_s(&self, j: usize) -> u32 {
        self.fact_s.get(j).copied().unwrap_or_else(|| fact_valuation(j as u64, self.p))
    }

    pub fn eta(&self, j: usize) -> u32 {
        self.eta.get(j).copied().unwrap_or_else(|| self.m * self.fact_s(j))
    }

    pub fn gamma(&self, j: usize) -> u128 {
        self.gamma.get(j).copied().unwrap_or_else(|| fact_sigma(j as u64, self.p, self.n).0)
    }

    pub fn sigma(&self, j: usize) -> u128 {
        self.sigma.get(j).copied().unwrap_or_else(|| fact_sigma(j as u64, self.p, self.n).1)
    }

    fn sigma_e(&self, j: usize) -> i128 {
        match self.sigma_e.get(j) {
            Some(&s) => s as i128,
            None => (self.sigma(j) % self.shape().exponent_modulus() as u128) as i128,
        }
    }

    fn l_pow(&self, a: &GElement, mut v: GElement, t: usize) -> GElement {
        for _ in 0..t {
            if v.is_zero() {
                break;
            }
            v = self.pl.dot(a, &v);
        }
        v
    }

    /// `L_a^t(↾)`, i.e. `a` for `t = 1` and `a·L_a^{t−1}(↾)` above.
    fn l_pow_unit(&self, a: &GElement, t: usize) -> GElement {
        debug_assert!(t >= 1);
        self.l_pow(a, a.clone(), t - 1)
    }

    fn pull(&self, v: &GElement, s: u32, j: usize, a: &GElement) -> Result<GElement> {
        self.shape().wp_inv(v, s, self.choice).map_err(|_| {
            Error::critical(
                format!("E_{j}: L_a^{} image outside p^{s}A", self.eta(j)),
                Some(format!("a = {a}, value = {v}")),
            )
        })
    }

    /// `E_{j,a}(x)` evaluated as printed: inner `L_a^{η}`, then `(ρ⁻¹)^{s}`, then outer `L_a^{j−η}`.
    pub fn e_op(&self, j: usize, a: &GElement, x: Arg<'_>) -> Result<GElement> {
        if j == 0 {
            return Err(Error::Domain { op: "e_op", detail: "j must be at least 1".into() });
        }
        let s = self.fact_s(j);
        let inner = if s == 0 { j } else { self.eta(j) as usize };
        let v = match x {
            Arg::Elem(b) => self.l_pow(a, b.clone(), inner),
            Arg::Unit => self.l_pow_unit(a, inner),
        };
        if s == 0 {
            return Ok(v);
        }
        let v = self.pull(&v, s, j, a)?;
        Ok(self.l_pow(a, v, j - inner))
    }

    /// `Σ_{j=1}^{j_max} σ_j E_{j,a}(x)`, reusing the inner powers `L_a^t(x)`.
    fn series(&self, a: &GElement, x: Arg<'_>) -> Result<GElement> {
        let shape = self.shape();
        let mut pows: Vec<GElement> = Vec::with_capacity(self.j_max + 1);
        match x {
            Arg::Elem(b) => pows.push(b.clone()),
            Arg::Unit => {
                pows.push(shape.zero());
                pows.push(a.clone());
            }
        }
        while pows.len() <= self.j_max {
            let last = pows.last().unwrap();
            let next = if last.is_zero() { last.clone() } else { self.pl.dot(a, last) };
            pows.push(next);
        }
        let mut acc = shape.zero();
        for j in 1..=self.j_max {
            let s = self.fact_s(j);
            let term = if s == 0 {
                pows[j].clone()
            } else {
                let eta = self.eta(j) as usize;
                let v = self.pull(&pows[eta], s, j, a)?;
                self.l_pow(a, v, j - eta)
            };
            if !term.is_zero() {
                acc = shape.add(&acc, &shape.smul(self.sigma_e(j), &term));
            }
        }
        Ok(acc)
    }

    pub fn w(&self, a: &GElement) -> Result<GElement> {
        self.series(a, Arg::Unit)
    }

    pub fn w_bin(&self, a: &GElement, b: &GElement) -> Result<GElement> {
        self.series(a, Arg::Elem(b))
    }

    fn tables(&self) -> Option<&std::result::Result<WTables, String>> {
        self.tables.as_ref()
    }

    /// `W` over all of `A` and its inverse permutation, for orders up to [`OMEGA_TABLE_CAP`].
    fn build_tables(&self) -> Option<std::result::Result<WTables, String>> {
        let shape = self.shape();
        let n = shape.order();
        if n > OMEGA_TABLE_CAP {
            return None;
        }
        let w: std::result::Result<Vec<u32>, String> = (0..n as u64)
            .into_par_iter()
            .map(|i| self.w(&shape.element(i as u128)).map(|v| shape.index(&v) as u32).map_err(|e| e.to_string()))
            .collect();
        let w = match w {
            Ok(w) => w,
            Err(e) => return Some(Err(e)),
        };
        let mut omega = vec![u32::MAX; n as usize];
        for (i, &v) in w.iter().enumerate() {
            let slot = &mut omega[v as usize];
            if *slot != u32::MAX {
                return Some(Err(format!(
                    "W({}) = W({}) = {}",
                    shape.element(*slot as u128),
                    shape.element(i as u128),
                    shape.element(v as u128)
                )));
            }
            *slot = i as u32;
        }
        Some(Ok(WTables { w, omega }))
    }

    fn omega_iterations(&self) -> usize {
        64 + 4 * (self.n as usize + 1) * self.left_index
    }

    /// `Ω(a)`: table lookup for small orders, otherwise the iteration
    /// `x ← x + a − W(x)` with the certificate `W(x) = a`.
    pub fn omega(&self, a: &GElement) -> Result<GElement> {
        let shape = self.shape();
        if let Some(t) = self.tables() {
            let t = t.as_ref().map_err(|w| Error::critical("W is not injective", Some(w.clone())))?;
            return Ok(shape.element(t.omega[shape.index(a) as usize] as u128));
        }
        let mut x = a.clone();
        for _ in 0..self.omega_iterations() {
            let w = self.w(&x)?;
            if w == *a {
                return Ok(x);
            }
            x = shape.add(&x, &shape.sub(a, &w));
        }
        Err(Error::critical("Ω iteration did not reach W(x) = a", Some(a.to_string())))
    }

    /// `a∘′b = a + b + W(Ω(a), b)`.
    pub fn circ(&self, a: &GElement, b: &GElement) -> Result<GElement> {
        let t = self.w_bin(&self.omega(a)?, b)?;
        let shape = self.shape();
        Ok(shape.add(&shape.add(a, b), &t))
    }
}

/// `W_map(ctx, a)`.
pub fn w_map(ctx: &FlowsContext, a: &GElement) -> Result<GElement> {
    ctx.w(a)
}

/// `W_bin(ctx, a, b)`.
pub fn w_bin(ctx: &FlowsContext, a: &GElement, b: &GElement) -> Result<GElement> {
    ctx.w_bin(a, b)
}

/// `E_op(ctx, j, a, x)`.
pub fn e_op(ctx: &FlowsContext, j: usize, a: &GElement, x: Arg<'_>) -> Result<GElement> {
    ctx.e_op(j, a, x)
}

#[derive(Clone, Debug)]
pub struct OmegaReport {
    pub bijective: bool,
    /// Every cycle of `W` has length dividing `(p^{n+1})!`, and `Ω` steps back along it.
    pub cycles_ok: bool,
    pub cycles: usize,
    pub longest_cycle: u128,
    pub witness: Option<String>,
    pub mode: Mode,
}

impl OmegaReport {
    pub fn holds(&self) -> bool {
        self.bijective && self.cycles_ok
    }
}

/// `Ω∘W = id = W∘Ω`, plus the cycle check behind `Ω = W^{(p^{n+1})!−1}`.
pub fn verify_omega(ctx: &FlowsContext, budget: &Budget) -> OmegaReport {
    let shape = ctx.shape();
    let n = shape.order();
    let mut rep = OmegaReport { bijective: false, cycles_ok: false, cycles: 0, longest_cycle: 0, witness: None, mode: Mode::Exhaustive };
    if let Some(t) = ctx.tables() {
        let t = match t {
            Ok(t) => t,
            Err(w) => {
                rep.witness = Some(w.clone());
                return rep;
            }
        };
        let bad = (0..n as usize).find(|&i| t.omega[t.w[i] as usize] as usize != i || t.w[t.omega[i] as usize] as usize != i);
        if let Some(i) = bad {
            rep.witness = Some(format!("Ω∘W or W∘Ω moves {}", shape.element(i as u128)));
            return rep;
        }
        rep.bijective = true;
        // Each cycle length L is at most |A| < p^{n+1}, hence divides (p^{n+1})!,
        // so W^{(p^{n+1})!−1} is the predecessor map on every cycle.
        let bound = arith::pow_u128(ctx.p, ctx.n + 1).unwrap_or(u128::MAX);
        let mut seen = vec![false; n as usize];
        for start in 0..n as usize {
            if seen[start] {
                continue;
            }
            let mut cyc = vec![start];
            seen[start] = true;
            let mut cur = t.w[start] as usize;
            while cur != start {
                seen[cur] = true;
                cyc.push(cur);
                cur = t.w[cur] as usize;
            }
            let len = cyc.len();
            rep.cycles += 1;
            rep.longest_cycle = rep.longest_cycle.max(len as u128);
            if len as u128 > bound {
                rep.witness = Some(format!("cycle of length {len} exceeds p^(n+1)"));
                return rep;
            }
            for (pos, &c) in cyc.iter().enumerate() {
                if t.omega[c] as usize != cyc[(pos + len - 1) % len] {
                    rep.witness = Some(format!("Ω({}) is not the cycle predecessor", shape.element(c as u128)));
                    return rep;
                }
            }
        }
        rep.cycles_ok = true;
        return rep;
    }
    let count = budget.heavy_samples();
    rep.mode = Mode::Sampled { samples: count, seed: budget.seed };
    let w = sample_fail(
        &mut budget.rng("omega"),
        count,
        |rg| shape.element(rand_index(rg, n)),
        |a| {
            let wa = match ctx.w(a) {
                Ok(v) => v,
                Err(e) => return Some(e.to_string()),
            };
            match ctx.omega(&wa) {
                Ok(x) if x == *a => {}
                Ok(x) => return Some(format!("Ω(W({a})) = {x}")),
                Err(e) => return Some(e.to_string()),
            }
            match ctx.omega(a).and_then(|x| ctx.w(&x)) {
                Ok(y) if y == *a => None,
                Ok(y) => Some(format!("W(Ω({a})) = {y}")),
                Err(e) => Some(e.to_string()),
            }
        },
    );
    rep.bijective = w.is_none();
    rep.cycles_ok = w.is_none();
    rep.witness = w;
    rep
}

#[derive(Clone, Debug)]
pub struct TruncationReport {
    pub rows: (usize, usize),
    pub holds: bool,
    pub witness: Option<String>,
    /// Rows whose operator word is undefined outside Property 3.
    pub skipped: Vec<usize>,
    pub mode: Mode,
}

/// `E_{j,a}(x) = 0` for `j ∈ (j_max, j_max+3]`, all `a`, and `x` over a basis and `↾`.
pub fn verify_truncation(ctx: &FlowsContext, budget: &Budget) -> TruncationReport {
    let shape = ctx.shape();
    let n = shape.order();
    let basis = shape.basis();
    let lo = ctx.j_max + 1;
    let hi = ctx.j_max + 3;
    let lazard = matches!(ctx.regime, Regime::Lazard { .. });
    let skipped: Vec<usize> = if lazard { (lo..=hi).filter(|&j| ctx.fact_s(j) > 0).collect() } else { Vec::new() };
    let rows: Vec<usize> = (lo..=hi).filter(|j| !skipped.contains(j)).collect();
    let test = |a: &GElement| -> Option<String> {
        for &j in &rows {
            let xs = basis.iter().map(Arg::Elem).chain(std::iter::once(Arg::Unit));
            for x in xs {
                match ctx.e_op(j, a, x) {
                    Ok(v) if v.is_zero() => {}
                    Ok(v) => return Some(format!("E_{j},{a}({}) = {v}", arg_str(x))),
                    Err(e) => return Some(e.to_string()),
                }
            }
        }
        None
    };
    let cost = (basis.len() as u128 + 1) * 3 * hi as u128;
    let (witness, mode) = if budget.allows_product(&[n, cost]) {
        (first_fail(n as u64, |i| test(&shape.element(i as u128))), Mode::Exhaustive)
    } else {
        let count = budget.heavy_samples();
        (
            sample_fail(&mut budget.rng("truncation"), count, |rg| shape.element(rand_index(rg, n)), test),
            Mode::Sampled { samples: count, seed: budget.seed },
        )
    };
    TruncationReport { rows: (lo, hi), holds: witness.is_none(), witness, skipped, mode }
}

fn arg_str(x: Arg<'_>) -> String {
    match x {
        Arg::Elem(b) => b.to_string(),
        Arg::Unit => "↾".into(),
    }
}

struct FlowsRule {
    ctx: Arc<FlowsContext>,
}

impl CircRule for FlowsRule {
    fn circ(&self, _shape: &GroupShape, a: &GElement, b: &GElement) -> GElement {
        self.ctx.circ(a, b).unwrap_or_else(|e| panic!("CRITICAL: flows ∘′ undefined at ({a}, {b}): {e}"))
    }

    fn label(&self) -> String {
        format!("flows({}, choice={})", self.ctx.pl.backing_label(), self.ctx.choice)
    }
}

/// `(A, +, ∘′)` together with the context that produced it.
#[derive(Clone, Debug)]
pub struct FlowsBrace {
    pub brace: Brace,
    pub ctx: Arc<FlowsContext>,
}

/// The flows structure; tabulated (with every entry checked) up to [`TABLE_CAP`].
pub fn flows_circ(ctx: Arc<FlowsContext>) -> Result<FlowsBrace> {
    let shape = ctx.shape().clone();
    let prov = format!("flows({}, {})", ctx.pl.meta().provenance, ctx.regime);
    let n = shape.order();
    let brace = if n <= TABLE_CAP {
        if let Some(Err(w)) = ctx.tables() {
            return Err(Error::critical("W is not injective", Some(w.clone())));
        }
        let elems: Vec<GElement> = shape.elements().collect();
        let rows: Result<Vec<Vec<u32>>> = elems
            .par_iter()
            .map(|a| {
                let om = ctx.omega(a)?;
                elems
                    .iter()
                    .map(|b| {
                        let t = ctx.w_bin(&om, b)?;
                        Ok(shape.index(&shape.add(&shape.add(a, b), &t)) as u32)
                    })
                    .collect()
            })
            .collect();
        Brace::from_table(shape.clone(), rows?.concat(), BraceKind::Pseudobrace)?
    } else {
        Brace::from_rule(shape, FlowsRule { ctx: ctx.clone() }, BraceKind::Pseudobrace)
    };
    Ok(FlowsBrace { brace: brace.with_provenance(prov), ctx })
}

#[derive(Clone, Debug)]
pub struct FlowsReport {
    pub pseudobrace: BraceReport,
    pub omega: OmegaReport,
    pub truncation: TruncationReport,
    /// Properties 1′, 1″ and 2 of the output; only asserted under Property 3.
    pub properties: Vec<PropertyReport>,
    pub w_powers: std::result::Result<Mode, String>,
}

impl FlowsReport {
    /// The first failed assertion, if any.
    pub fn critical(&self) -> Option<String> {
        if let Some(f) = self.pseudobrace.witness() {
            return Some(format!("pseudobrace: {f}"));
        }
        if !self.omega.holds() {
            return Some(format!("Ω: {}", self.omega.witness.clone().unwrap_or_default()));
        }
        if !self.truncation.holds {
            return Some(format!("truncation: {}", self.truncation.witness.clone().unwrap_or_default()));
        }
        if let Some(p) = self.properties.iter().find(|p| !p.holds) {
            return Some(format!("{}: {}", p.id, p.witness.clone().unwrap_or_default()));
        }
        self.w_powers.as_ref().err().map(|w| format!("W(i·a) = W(a)^(∘′i): {w}"))
    }

    pub fn passed(&self) -> bool {
        self.critical().is_none()
    }
}

/// Every assertion attached to the flows output.
pub fn verify_flows(fb: &FlowsBrace, budget: &Budget) -> FlowsReport {
    let ctx = &fb.ctx;
    let pseudobrace = verify_pseudobrace(&fb.brace, budget);
    let omega = verify_omega(ctx, budget);
    let truncation = verify_truncation(ctx, budget);
    let mut properties = Vec::new();
    if ctx.regime == Regime::Property3 {
        properties.push(props::check_property1p(&fb.brace, budget));
        properties.push(props::check_property1pp(&fb.brace, budget));
        properties.push(props::check_property2(&fb.brace, ctx.shape().min_k(), budget));
    }
    let w_powers = check_w_powers(fb, 4, budget);
    FlowsReport { pseudobrace, omega, truncation, properties, w_powers }
}

/// `W(i·a) = W(a)∘′(W(a)∘′(⋯W(a)))` (`i` factors) for `0 ≤ i ≤ window`.
pub fn check_w_powers(fb: &FlowsBrace, window: u32, budget: &Budget) -> std::result::Result<Mode, String> {
    let ctx = &fb.ctx;
    let shape = ctx.shape();
    let n = shape.order();
    let test = |a: &GElement| -> Option<String> {
        let wa = match ctx.w(a) {
            Ok(v) => v,
            Err(e) => return Some(e.to_string()),
        };
        let mut pow = shape.zero();
        for i in 0..=window {
            let lhs = match ctx.w(&shape.smul(i as i128, a)) {
                Ok(v) => v,
                Err(e) => return Some(e.to_string()),
            };
            if lhs != pow {
                return Some(format!("i = {i}, a = {a}: W(i·a) = {lhs}, W(a)^(∘′i) = {pow}"));
            }
            pow = fb.brace.circ(&wa, &pow);
        }
        None
    };
    if budget.allows_product(&[n, (window as u128 + 1), 4]) && n <= OMEGA_TABLE_CAP {
        first_fail(n as u64, |i| test(&shape.element(i as u128))).map_or(Ok(Mode::Exhaustive), Err)
    } else {
        let count = budget.heavy_samples();
        sample_fail(&mut budget.rng("w-powers"), count, |rg| shape.element(rand_index(rg, n)), test)
            .map_or(Ok(Mode::Sampled { samples: count, seed: budget.seed }), Err)
    }
}

/// `L_a^{η+i}((ρ⁻¹)^t(b)) = L_a^{η}((ρ⁻¹)^t L_a^i(b))` for `b ∈ p^tA`, `η = m·t`, `1 ≤ i ≤ 3`.
pub fn check_moving(ctx: &FlowsContext, budget: &Budget) -> std::result::Result<Mode, String> {
    let shape = ctx.shape();
    let n = shape.order();
    let e = shape.max_exponent();
    let test = |a: &GElement, t: u32, b: &GElement| -> Option<String> {
        let eta = (ctx.m * t) as usize;
        let pulled = shape.wp_inv(b, t, ctx.choice).ok()?;
        for i in 1..=3usize {
            let lhs = ctx.l_pow(a, pulled.clone(), eta + i);
            let inner = ctx.l_pow(a, b.clone(), i);
            let rhs = match shape.wp_inv(&inner, t, ctx.choice) {
                Ok(v) => ctx.l_pow(a, v, eta),
                Err(_) => return Some(format!("L_a^{i}(b) left p^{t}A at a = {a}, b = {b}")),
            };
            if lhs != rhs {
                return Some(format!("t = {t}, i = {i}, a = {a}, b = {b}: {lhs} ≠ {rhs}"));
            }
        }
        None
    };
    let total: u128 = (1..e).map(|t| shape.p_power_subgroup(t).order()).sum();
    if n <= OMEGA_TABLE_CAP && budget.allows_product(&[n, total, 12]) {
        let pts: Vec<(u32, Vec<GElement>)> = (1..e).map(|t| (t, shape.p_power_subgroup(t).elements().collect())).collect();
        first_fail(n as u64, |i| {
            let a = shape.element(i as u128);
            pts.iter().find_map(|(t, bs)| bs.iter().find_map(|b| test(&a, *t, b)))
        })
        .map_or(Ok(Mode::Exhaustive), Err)
    } else {
        let count = budget.heavy_samples();
        let subs: Vec<_> = (1..e).map(|t| (t, shape.p_power_subgroup(t))).collect();
        if subs.is_empty() {
            return Ok(Mode::Exhaustive);
        }
        sample_fail(
            &mut budget.rng("moving"),
            count,
            |rg| {
                let (t, s) = &subs[rand_index(rg, subs.len() as u128) as usize];
                (shape.element(rand_index(rg, n)), *t, s.random(rg))
            },
            |(a, t, b)| test(a, *t, b),
        )
        .map_or(Ok(Mode::Sampled { samples: count, seed: budget.seed }), Err)
    }
}

/// `E_{j,a}(x)` agrees across pullback choices for every `j ≤ j_max + 3` with `s_j > 0`.
///
/// Rows with `s_j = 0` contain no `ρ⁻¹` and are skipped; the count of compared
/// rows is returned with the mode.
pub fn check_choice_independence(
    pl: &PreLie,
    choices: &[PullbackChoice],
    budget: &Budget,
) -> Result<std::result::Result<(Mode, usize), String>> {
    let ctxs: Vec<FlowsContext> = choices.iter().map(|&c| FlowsContext::new(pl, c)).collect::<Result<_>>()?;
    let Some(first) = ctxs.first() else { return Ok(Ok((Mode::Exhaustive, 0))) };
    if first.regime != Regime::Property3 {
        return Ok(Ok((Mode::Exhaustive, 0)));
    }
    let rows: Vec<usize> = (1..=first.j_max + 3).filter(|&j| first.fact_s(j) > 0).collect();
    let shape = pl.shape();
    let n = shape.order();
    let test = |a: &GElement, x: Arg<'_>| -> Option<String> {
        for &j in &rows {
            let vals: Vec<Result<GElement>> = ctxs.iter().map(|c| c.e_op(j, a, x)).collect();
            let base = match &vals[0] {
                Ok(v) => v,
                Err(e) => return Some(e.to_string()),
            };
            for (c, v) in choices.iter().zip(&vals).skip(1) {
                match v {
                    Ok(v) if v == base => {}
                    Ok(v) => return Some(format!("E_{j},{a}({}) = {base} canonical, {v} under {c}", arg_str(x))),
                    Err(e) => return Some(e.to_string()),
                }
            }
        }
        None
    };
    if rows.is_empty() {
        return Ok(Ok((Mode::Exhaustive, 0)));
    }
    let cost = (rows.len() * ctxs.len() * (first.j_max + 3)) as u128;
    let res = if n <= OMEGA_TABLE_CAP && budget.allows_product(&[n, n, cost]) {
        first_fail(n as u64, |i| {
            let a = shape.element(i as u128);
            test(&a, Arg::Unit).or_else(|| (0..n).find_map(|k| test(&a, Arg::Elem(&shape.element(k)))))
        })
        .map_or(Ok((Mode::Exhaustive, rows.len())), Err)
    } else {
        let count = budget.heavy_samples();
        sample_fail(
            &mut budget.rng("choice-independence"),
            count,
            |rg| (shape.element(rand_index(rg, n)), shape.element(rand_index(rg, n))),
            |(a, b)| test(a, Arg::Unit).or_else(|| test(a, Arg::Elem(b))),
        )
        .map_or(Ok((Mode::Sampled { samples: count, seed: budget.seed }, rows.len())), Err)
    };
    Ok(res)
}

#[derive(Clone, Debug)]
pub struct Stage {
    pub name: String,
    pub mode: Option<Mode>,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct RoundTripReport {
    pub k: u32,
    pub choice: PullbackChoice,
    pub equal: bool,
    pub witness: Option<String>,
    /// `B/ann(p^{4k})`, the shape on which the comparison happens.
    pub quotient: GroupShape,
    pub extracted: GroupShape,
    pub regime: Regime,
    pub pairs: u64,
    pub mode: Mode,
    pub stages: Vec<Stage>,
}

struct Pipeline {
    extracted: PreLie,
    ctx: Arc<FlowsContext>,
    flows: Brace,
    stages: Vec<Stage>,
}

fn timed<T>(stages: &mut Vec<Stage>, name: &str, f: impl FnOnce() -> Result<(T, Option<Mode>)>) -> Result<T> {
    let t = Instant::now();
    let (v, mode) = f()?;
    stages.push(Stage { name: name.into(), mode, elapsed: t.elapsed() });
    Ok(v)
}

fn pipeline(b: &Brace, k: u32, choice: PullbackChoice, budget: &Budget) -> Result<Pipeline> {
    let mut stages = Vec::new();
    timed(&mut stages, "preconditions", || {
        let p1p = props::check_property1p(b, budget);
        if !p1p.holds {
            return Err(Error::precondition("P1'", p1p.witness));
        }
        let p1pp = props::check_property1pp(b, budget);
        if !p1pp.holds {
            return Err(Error::precondition("P1''", p1pp.witness));
        }
        Ok(((), Some(p1p.mode.combine(p1pp.mode))))
    })?;
    let extracted = timed(&mut stages, "extract", || Ok((extract_prelie(b, k, choice, budget)?, None)))?;
    let ctx = timed(&mut stages, "flows-context", || Ok((Arc::new(FlowsContext::new(&extracted, choice)?), None)))?;
    let flows = timed(&mut stages, "flows", || {
        let brace = if extracted.order() <= TABLE_CAP {
            flows_circ(ctx.clone())?.brace
        } else {
            Brace::from_rule(extracted.shape().clone(), FlowsRule { ctx: ctx.clone() }, BraceKind::Pseudobrace)
        };
        Ok((brace, None))
    })?;
    Ok(Pipeline { extracted, ctx, flows, stages })
}

/// Compares per pair; `prep` computes the per-row data (for instance `Ω` of the row element).
fn compare_pairs<P: Send + Sync>(
    q: &GroupShape,
    budget: &Budget,
    salt: &str,
    prep: impl Fn(&GElement) -> Result<P> + Sync,
    cmp: impl Fn(&GElement, &P, &GElement) -> Result<Option<String>> + Sync,
) -> (Option<String>, u64, Mode) {
    let qn = q.order();
    let pair = |a: &GElement, b: &GElement| match prep(a) {
        Ok(r) => cmp(a, &r, b).unwrap_or_else(|e| Some(e.to_string())),
        Err(e) => Some(e.to_string()),
    };
    if budget.allows_product(&[qn, qn, PAIR_COST]) {
        let w = first_fail(qn as u64, |i| {
            let a = q.element(i as u128);
            match prep(&a) {
                Ok(r) => (0..qn).find_map(|j| cmp(&a, &r, &q.element(j)).unwrap_or_else(|e| Some(e.to_string()))),
                Err(e) => Some(e.to_string()),
            }
        });
        (w, (qn * qn) as u64, Mode::Exhaustive)
    } else {
        let count = budget.samples.min(ROUNDTRIP_SAMPLES);
        let w = sample_fail(
            &mut budget.rng(salt),
            count,
            |rg| (q.element(rand_index(rg, qn)), q.element(rand_index(rg, qn))),
            |(a, b)| pair(a, b),
        );
        (w, count, Mode::Sampled { samples: count, seed: budget.seed })
    }
}

/// `B/ann(p^{4k})` against the flows structure of the extracted pre-Lie ring modulo `Ann(p^{2k})`.
pub fn verify_roundtrip(b: &Brace, k: u32, choice: PullbackChoice, budget: &Budget) -> Result<RoundTripReport> {
    let Pipeline { extracted, ctx, flows: _, mut stages } = pipeline(b, k, choice, budget)?;
    let t = Instant::now();
    let ann4 = b.shape().annihilator(4 * k);
    let ann2 = extracted.shape().annihilator(2 * k);
    let q = ann4.quotient_shape().clone();
    if *ann2.quotient_shape() != q {
        return Err(Error::Structural(format!("final quotients differ: {} vs {}", q, ann2.quotient_shape())));
    }
    let fshape = extracted.shape();
    let (witness, pairs, mode) = compare_pairs(
        &q,
        budget,
        "roundtrip",
        |qa| {
            let la = ann2.from_quotient(qa);
            Ok((ctx.omega(&la)?, la))
        },
        |qa, (om, la), qb| {
            let lb = ann2.from_quotient(qb);
            let f = fshape.add(&fshape.add(la, &lb), &ctx.w_bin(om, &lb)?);
            let lhs = ann4.to_quotient(&b.circ(&ann4.from_quotient(qa), &ann4.from_quotient(qb)));
            let rhs = ann2.to_quotient(&f);
            Ok((lhs != rhs).then(|| format!("[{qa}]∘[{qb}]: brace gives {lhs}, flows give {rhs}")))
        },
    );
    stages.push(Stage { name: "compare".into(), mode: Some(mode), elapsed: t.elapsed() });
    Ok(RoundTripReport {
        k,
        choice,
        equal: witness.is_none(),
        witness,
        quotient: q,
        extracted: fshape.clone(),
        regime: ctx.regime,
        pairs,
        mode,
        stages,
    })
}

#[derive(Clone, Debug)]
pub struct OdotEqualityReport {
    pub equal: bool,
    pub witness: Option<String>,
    pub pairs: u64,
    pub mode: Mode,
}

/// `⊙` from the factor brace `B/ann(p^{2k})` against `⊙′` from the flows structure, on `A/Ann(p^{2k})`.
pub fn verify_odot_equality(b: &Brace, k: u32, choice: PullbackChoice, budget: &Budget) -> Result<OdotEqualityReport> {
    let Pipeline { extracted, flows, .. } = pipeline(b, k, choice, budget)?;
    let c1 = quotient_unchecked(b, &b.shape().annihilator(2 * k));
    if c1.shape() != extracted.shape() {
        return Err(Error::Structural(format!("{} vs {}", c1.shape(), extracted.shape())));
    }
    let o1 = Odot::new(&c1, k, choice);
    let o2 = Odot::new(&flows, k, choice);
    let classes = o1.classes().clone();
    let q = classes.quotient_shape().clone();
    let (witness, pairs, mode) = compare_pairs(
        &q,
        budget,
        "odot-equality",
        |qa| Ok(classes.from_quotient(qa)),
        |qa, x, qb| {
            let y = classes.from_quotient(qb);
            let (l, r) = (o1.eval_reps(x, &y)?, o2.eval_reps(x, &y)?);
            Ok((l != r).then(|| format!("[{qa}]⊙[{qb}] = {l}, ⊙′ gives {r}")))
        },
    );
    Ok(OdotEqualityReport { equal: witness.is_none(), witness, pairs, mode })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::prelie::{classic_exp_log, ScalarDot, ZeroDot};

    fn scalar(p: u64, n: u32, mu: u64) -> PreLie {
        PreLie::from_rule(GroupShape::new(p, &[n]).unwrap(), ScalarDot { mu }).compact()
    }

    fn ctx(pl: &PreLie) -> Arc<FlowsContext> {
        Arc::new(FlowsContext::new(pl, PullbackChoice::Canonical).unwrap())
    }

    fn el(x: u64) -> GElement {
        GElement::from_slice(&[x])
    }

    #[test]
    fn factorial_constants() {
        assert_eq!(fact_valuation(7, 7), 1);
        assert_eq!(fact_valuation(49, 7), 8);
        assert_eq!(fact_valuation(6, 7), 0);
        assert_eq!(fact_sigma(1, 7, 2), (1, 1));
        assert_eq!(fact_sigma(7, 7, 2), (34, 13));
        assert_eq!(fact_sigma(3, 7, 1), (6, 6));
        for j in 1..40u64 {
            let (g, s) = fact_sigma(j, 13, 3);
            assert_eq!(g * s % 2197, 1);
            let fact = arith::binomial(j, 0) * (1..=j).map(BigUint::from).product::<BigUint>();
            let unit = fact / arith::big_pow(13, fact_valuation(j, 13));
            assert_eq!(arith::big_mod(&unit, 2197), g);
        }
    }

    #[test]
    fn zero_product() {
        let pl = PreLie::from_rule(GroupShape::new(13, &[2]).unwrap(), ZeroDot).compact();
        let c = ctx(&pl);
        let a = el(5);
        assert_eq!(c.e_op(1, &a, Arg::Unit).unwrap(), a);
        assert!(c.e_op(2, &a, Arg::Unit).unwrap().is_zero());
        assert_eq!(c.w(&a).unwrap(), a);
        assert!(c.w_bin(&a, &el(3)).unwrap().is_zero());
        assert_eq!(c.omega(&a).unwrap(), a);
        let fb = flows_circ(c).unwrap();
        for x in 0..169 {
            for y in (0..169).step_by(7) {
                assert_eq!(fb.brace.circ(&el(x), &el(y)), el((x + y) % 169));
            }
        }
    }

    #[test]
    fn lazard_scalar_ring_matches_classic() {
        let pl = scalar(7, 3, 49);
        let c = ctx(&pl);
        assert!(matches!(c.regime(), Regime::Lazard { .. }));
        let a = el(3);
        assert!(c.e_op(2, &a, Arg::Elem(&el(5))).unwrap().is_zero());
        // W(a) = a + σ₂·49a²
        for x in 0..343u64 {
            let sigma2 = arith::inv_mod(2, 343).unwrap() as u64;
            assert_eq!(c.w(&el(x)).unwrap(), el((x + sigma2 * 49 % 343 * (x * x % 343)) % 343));
        }
        let fb = flows_circ(c).unwrap();
        let classic = classic_exp_log(&pl).unwrap();
        assert_eq!(fb.brace.table(), classic.table());
        for x in 0..343u64 {
            for y in (0..343u64).step_by(11) {
                assert_eq!(fb.brace.circ(&el(x), &el(y)), el((x + y + 49 * x * y) % 343));
            }
        }
    }

    #[test]
    fn property3_flows_pass_all_assertions() {
        let budget = Budget::default();
        for pl in [scalar(13, 3, 13), scalar(11, 3, 11)] {
            let c = ctx(&pl);
            assert_eq!(c.regime(), Regime::Property3);
            let fb = flows_circ(c).unwrap();
            let r = verify_flows(&fb, &budget);
            assert!(r.passed(), "{:?}", r.critical());
            assert_eq!(r.pseudobrace.mode, Mode::Exhaustive.combine(r.pseudobrace.mode));
            assert!(r.omega.holds() && r.omega.mode == Mode::Exhaustive);
            assert!(check_moving(&fb.ctx, &budget).is_ok());
        }
    }

    #[test]
    fn rho_inv_terms_and_choice_independence() {
        // 11xy on Z/11^11: E_{11,a}(b) = L^9 ρ⁻¹ L^2 (b) = 11^10 a^11 b is the first ρ⁻¹ row.
        let pl = PreLie::from_rule(GroupShape::new(11, &[11]).unwrap(), ScalarDot { mu: 11 });
        let c = ctx(&pl);
        assert_eq!(c.fact_s(11), 1);
        assert_eq!(c.eta(11), 2);
        let m = 11u64.pow(11);
        let (a, b) = (el(3), el(5));
        let want = arith::mul_mod(11u64.pow(10), arith::mul_mod(arith::pow_mod(3, 11, m), 5, m), m);
        assert_eq!(c.e_op(11, &a, Arg::Elem(&b)).unwrap(), el(want));
        let off = FlowsContext::new(&pl, PullbackChoice::offset(9)).unwrap();
        assert_eq!(off.e_op(11, &a, Arg::Elem(&b)).unwrap(), el(want));
        let budget = Budget::default().with_samples(200);
        let r = check_choice_independence(&pl, &[PullbackChoice::Canonical, PullbackChoice::offset(1), PullbackChoice::offset(2)], &budget)
            .unwrap();
        let (_, rows) = r.unwrap();
        assert!(rows > 0);
        assert!(check_moving(&c, &budget).is_ok());
        let rep = verify_omega(&c, &budget);
        assert!(rep.holds(), "{:?}", rep.witness);
        assert!(verify_truncation(&c, &budget).holds);
    }

    #[test]
    fn roundtrip_radical_13_6() {
        let b = corpus::radical_ring_brace(13, 6, 13).unwrap();
        let budget = Budget { exhaustive: 50_000_000, ..Budget::default() };
        let r = verify_roundtrip(&b, 1, PullbackChoice::Canonical, &budget).unwrap();
        assert!(r.equal, "{:?}", r.witness);
        assert_eq!(r.quotient.order(), 169);
        assert_eq!(r.mode, Mode::Exhaustive);
        let o = verify_odot_equality(&b, 1, PullbackChoice::offset(3), &budget).unwrap();
        assert!(o.equal, "{:?}", o.witness);
    }

    #[test]
    fn trivial_roundtrip() {
        let b = corpus::trivial_brace(GroupShape::new(13, &[3]).unwrap());
        let r = verify_roundtrip(&b, 1, PullbackChoice::Canonical, &Budget::default()).unwrap();
        assert!(r.equal);
    }

    #[test]
    fn property3_required() {
        let field = scalar(7, 1, 1);
        assert!(FlowsContext::new(&field, PullbackChoice::Canonical).is_err());
    }
}
