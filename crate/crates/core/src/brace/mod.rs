//! Braces and pseudobraces over finite abelian p-groups.

mod ideal;
mod odot;
mod series;
mod verify;
pub mod view;
mod ybe;

pub use ideal::{is_ideal, quotient, sub_pk, IdealCheck};
pub(crate) use ideal::quotient_unchecked;
pub use odot::{odot_preconditions, verify_odot, Odot, OdotReport};
pub use series::{left_series, LeftSeries};
pub use verify::{verify_brace, verify_pseudobrace, AxiomFailure, BraceReport};
pub use ybe::{verify_ybe, yb_solution, YbMap, YbeReport};

use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::pgroup::{GElement, GroupShape};
use view::{ElemView, IdxView, Visitor};

/// Orders up to this size are stored as dense `∘` tables.
pub const TABLE_CAP: u128 = 4096;

/// Serializable name and parameters of a closed-form rule.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleDesc {
    pub rule: String,
    pub params: serde_json::Value,
}

pub trait CircRule: Send + Sync {
    fn circ(&self, shape: &GroupShape, a: &GElement, b: &GElement) -> GElement;
    fn label(&self) -> String;
    fn descriptor(&self) -> Option<RuleDesc> {
        None
    }
    /// Fast path for building the full table; `None` falls back to pairwise evaluation.
    fn tabulate(&self, _shape: &GroupShape) -> Option<Vec<u32>> {
        None
    }
}

#[derive(Clone)]
pub enum Backing {
    Table(Arc<Vec<u32>>),
    Rule(Arc<dyn CircRule>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BraceKind {
    Brace,
    Pseudobrace,
    Unverified,
}

impl BraceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BraceKind::Brace => "brace",
            BraceKind::Pseudobrace => "pseudobrace",
            BraceKind::Unverified => "unverified",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "brace" => Ok(BraceKind::Brace),
            "pseudobrace" => Ok(BraceKind::Pseudobrace),
            "unverified" => Ok(BraceKind::Unverified),
            _ => Err(Error::Spec(format!("unknown brace kind `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Metadata {
    pub provenance: String,
    pub verified: Vec<String>,
}

#[derive(Clone)]
pub struct Brace {
    shape: GroupShape,
    backing: Backing,
    kind: BraceKind,
    meta: Metadata,
    inv: Arc<OnceLock<Vec<u32>>>,
    /// Left series already computed, per budget.
    series: Arc<Mutex<Vec<(Budget, LeftSeries)>>>,
}

impl fmt::Debug for Brace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Brace")
            .field("shape", &self.shape.to_string())
            .field("backing", &self.backing_label())
            .field("kind", &self.kind)
            .finish()
    }
}

impl Brace {
    pub fn from_table(shape: GroupShape, table: Vec<u32>, kind: BraceKind) -> Result<Self> {
        check_table(&shape, &table)?;
        Ok(Brace {
            shape,
            backing: Backing::Table(Arc::new(table)),
            kind,
            meta: Metadata::default(),
            inv: Arc::default(),
            series: Arc::default(),
        })
    }

    pub fn from_rule<R: CircRule + 'static>(shape: GroupShape, rule: R, kind: BraceKind) -> Self {
        Self::from_rule_arc(shape, Arc::new(rule), kind)
    }

    pub fn from_rule_arc(shape: GroupShape, rule: Arc<dyn CircRule>, kind: BraceKind) -> Self {
        Brace { shape, backing: Backing::Rule(rule), kind, meta: Metadata::default(), inv: Arc::default(), series: Arc::default() }
    }

    pub fn shape(&self) -> &GroupShape {
        &self.shape
    }

    pub(crate) fn cached_series(&self, budget: &Budget) -> Option<LeftSeries> {
        let cache = self.series.lock().unwrap_or_else(|e| e.into_inner());
        cache.iter().find(|(b, _)| b == budget).map(|(_, s)| s.clone())
    }

    /// Never called with the lock held across a computation, so nested rayon work cannot deadlock.
    pub(crate) fn store_series(&self, budget: &Budget, series: &LeftSeries) {
        let mut cache = self.series.lock().unwrap_or_else(|e| e.into_inner());
        if !cache.iter().any(|(b, _)| b == budget) {
            cache.push((*budget, series.clone()));
        }
    }

    pub fn order(&self) -> u128 {
        self.shape.order()
    }

    pub fn kind(&self) -> BraceKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: BraceKind) -> Self {
        self.kind = kind;
        self
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

    pub fn backing(&self) -> &Backing {
        &self.backing
    }

    pub fn table(&self) -> Option<&[u32]> {
        match &self.backing {
            Backing::Table(t) => Some(t),
            Backing::Rule(_) => None,
        }
    }

    pub fn backing_label(&self) -> String {
        match &self.backing {
            Backing::Table(_) => "table".into(),
            Backing::Rule(r) => format!("rule:{}", r.label()),
        }
    }

    pub fn circ(&self, a: &GElement, b: &GElement) -> GElement {
        match &self.backing {
            Backing::Table(t) => {
                let n = self.shape.order() as usize;
                let i = self.shape.index(a) as usize * n + self.shape.index(b) as usize;
                self.shape.element(t[i] as u128)
            }
            Backing::Rule(r) => r.circ(&self.shape, a, b),
        }
    }

    pub fn try_circ(&self, a: &GElement, b: &GElement) -> Result<GElement> {
        self.shape.check(a)?;
        self.shape.check(b)?;
        Ok(self.circ(a, b))
    }

    /// `a*b = a∘b − a − b`.
    pub fn star(&self, a: &GElement, b: &GElement) -> GElement {
        let c = self.circ(a, b);
        self.shape.sub(&self.shape.sub(&c, a), b)
    }

    /// `λ_a(b) = a∘b − a`.
    pub fn lambda(&self, a: &GElement, b: &GElement) -> GElement {
        self.shape.sub(&self.circ(a, b), a)
    }

    fn inverse_table(&self) -> Option<&Vec<u32>> {
        let t = self.table()?;
        Some(self.inv.get_or_init(|| {
            let n = self.shape.order() as usize;
            (0..n)
                .map(|a| t[a * n..(a + 1) * n].iter().position(|&v| v == 0).map_or(u32::MAX, |b| b as u32))
                .collect()
        }))
    }

    /// The `∘`-inverse; for rules it is `a^{∘(|A|−1)}`, checked against `a`.
    pub fn inverse(&self, a: &GElement) -> Result<GElement> {
        if let Some(inv) = self.inverse_table() {
            let b = inv[self.shape.index(a) as usize];
            if b == u32::MAX {
                return Err(Error::Structural(format!("{a} has no ∘-inverse")));
            }
            return Ok(self.shape.element(b as u128));
        }
        let u = self.pow_pos(a, self.shape.order() - 1);
        if !self.circ(a, &u).is_zero() {
            return Err(Error::Structural(format!("{a} has no ∘-inverse of the form a^(|A|-1)")));
        }
        Ok(u)
    }

    fn pow_pos(&self, a: &GElement, mut e: u128) -> GElement {
        let mut acc = self.shape.zero();
        let mut base = a.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.circ(&acc, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.circ(&base, &base);
            }
        }
        acc
    }

    /// `a^{∘j}` by binary powering; negative `j` uses the `∘`-inverse.
    pub fn circ_pow(&self, a: &GElement, j: i128) -> Result<GElement> {
        if j >= 0 {
            Ok(self.pow_pos(a, j as u128))
        } else {
            let inv = self.inverse(a)?;
            Ok(self.pow_pos(&inv, j.unsigned_abs()))
        }
    }

    /// Table-backed copy; fails above [`TABLE_CAP`].
    pub fn materialize(&self) -> Result<Brace> {
        match &self.backing {
            Backing::Table(_) => Ok(self.clone()),
            Backing::Rule(r) => {
                let n = self.shape.order();
                if n > TABLE_CAP {
                    return Err(Error::Structural(format!("order {n} exceeds the table cap {TABLE_CAP}")));
                }
                let table = match r.tabulate(&self.shape) {
                    Some(t) => t,
                    None => tabulate(&self.shape, |a, b| r.circ(&self.shape, a, b)),
                };
                let mut b = Brace::from_table(self.shape.clone(), table, self.kind)?;
                b.meta = self.meta.clone();
                Ok(b)
            }
        }
    }

    /// Materializes when the order allows it, otherwise keeps the rule.
    pub fn compact(self) -> Brace {
        if self.table().is_none() && self.order() <= TABLE_CAP {
            self.materialize().expect("order within cap")
        } else {
            self
        }
    }

    pub fn dispatch<V: Visitor>(&self, v: V) -> V::Output {
        match &self.backing {
            Backing::Table(t) => v.visit(&IdxView::new(&self.shape, t)),
            Backing::Rule(r) => v.visit(&ElemView::new(&self.shape, |a: &GElement, b: &GElement| {
                r.circ(&self.shape, a, b)
            })),
        }
    }

    /// Same shape, kind, metadata and operation description.
    pub fn structurally_eq(&self, other: &Brace) -> bool {
        self.shape == other.shape
            && self.kind == other.kind
            && self.meta == other.meta
            && match (&self.backing, &other.backing) {
                (Backing::Table(a), Backing::Table(b)) => a == b,
                (Backing::Rule(a), Backing::Rule(b)) => {
                    a.descriptor().is_some() && a.descriptor() == b.descriptor()
                }
                _ => false,
            }
    }
}

pub(crate) fn check_table(shape: &GroupShape, table: &[u32]) -> Result<()> {
    let n = shape.order();
    if n > TABLE_CAP * 16 {
        return Err(Error::Structural(format!("order {n} too large for a table")));
    }
    if table.len() as u128 != n * n {
        return Err(Error::Structural(format!("table has {} entries, expected {}", table.len(), n * n)));
    }
    if let Some(pos) = table.iter().position(|&v| v as u128 >= n) {
        return Err(Error::Structural(format!("table entry {pos} is not a valid element index")));
    }
    Ok(())
}

pub(crate) fn tabulate(shape: &GroupShape, f: impl Fn(&GElement, &GElement) -> GElement + Sync) -> Vec<u32> {
    use rayon::prelude::*;
    let n = shape.order() as usize;
    let elems: Vec<GElement> = shape.elements().collect();
    let rows: Vec<Vec<u32>> = elems
        .par_iter()
        .map(|a| elems.iter().map(|b| shape.index(&f(a, b)) as u32).collect())
        .collect();
    let mut out = Vec::with_capacity(n * n);
    for r in rows {
        out.extend(r);
    }
    out
}
