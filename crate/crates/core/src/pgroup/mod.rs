//! Finite abelian p-groups `⊕ Z/p^αᵢ`, box subgroups and the pullbacks ρ⁻¹, ℘⁻¹.

mod subgroup;

pub use subgroup::{SpanBuilder, Subgroup};

use std::fmt;

use rand::Rng;
use smallvec::SmallVec;

use crate::arith;
use crate::error::{Error, Result};

pub type Coeffs = SmallVec<[u64; 4]>;

/// Coefficient vector of a group element. Coordinates are kept reduced.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GElement(Coeffs);

impl GElement {
    pub fn from_slice(c: &[u64]) -> Self {
        GElement(Coeffs::from_slice(c))
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

impl fmt::Debug for GElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for GElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Largest exponent allowed for a single cyclic factor: `p^α` must stay below 2^62.
const MAX_MODULUS_BITS: f64 = 62.0;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupShape {
    p: u64,
    exps: Vec<u32>,
    moduli: Vec<u64>,
    places: Vec<u128>,
    order: u128,
}

impl GroupShape {
    pub fn new(p: u64, exps: &[u32]) -> Result<Self> {
        if exps.is_empty() {
            return Err(Error::Structural("a shape needs at least one cyclic factor".into()));
        }
        if exps.contains(&0) {
            return Err(Error::Structural("exponents must be positive".into()));
        }
        Self::build(p, exps)
    }

    /// The one-element group, written as a shape with no factors.
    pub fn trivial(p: u64) -> Result<Self> {
        Self::build(p, &[])
    }

    fn build(p: u64, exps: &[u32]) -> Result<Self> {
        if p < 3 || !arith::is_prime(p) {
            return Err(Error::Structural(format!("p = {p} must be an odd prime")));
        }
        let mut moduli = Vec::with_capacity(exps.len());
        let mut places = Vec::with_capacity(exps.len());
        let mut order: u128 = 1;
        for &a in exps {
            if a as f64 * (p as f64).log2() > MAX_MODULUS_BITS {
                return Err(Error::Structural(format!("{p}^{a} exceeds the supported modulus size")));
            }
            let m = p.pow(a);
            places.push(order);
            moduli.push(m);
            order = order
                .checked_mul(m as u128)
                .filter(|o| *o < (1u128 << 127))
                .ok_or_else(|| Error::Structural("group order exceeds 2^127".into()))?;
        }
        Ok(GroupShape { p, exps: exps.to_vec(), moduli, places, order })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    pub fn rank(&self) -> usize {
        self.exps.len()
    }

    /// Total exponent `n` with `|A| = p^n`.
    pub fn n(&self) -> u32 {
        self.exps.iter().sum()
    }

    pub fn max_exponent(&self) -> u32 {
        self.exps.iter().copied().max().unwrap_or(0)
    }

    pub fn order(&self) -> u128 {
        self.order
    }

    pub fn is_uniform(&self) -> bool {
        self.exps.windows(2).all(|w| w[0] == w[1])
    }

    /// `p^e` with `e` the maximal exponent; every scalar acts through this modulus.
    pub fn exponent_modulus(&self) -> u64 {
        self.p.pow(self.max_exponent())
    }

    pub fn zero(&self) -> GElement {
        GElement(Coeffs::from_elem(0, self.rank()))
    }

    pub fn basis(&self) -> Vec<GElement> {
        (0..self.rank())
            .map(|i| {
                let mut c = Coeffs::from_elem(0, self.rank());
                c[i] = 1;
                GElement(c)
            })
            .collect()
    }

    pub fn element(&self, idx: u128) -> GElement {
        debug_assert!(idx < self.order);
        let mut c = Coeffs::with_capacity(self.rank());
        let mut rest = idx;
        for &m in &self.moduli {
            c.push((rest % m as u128) as u64);
            rest /= m as u128;
        }
        GElement(c)
    }

    pub fn index(&self, x: &GElement) -> u128 {
        x.0.iter().zip(&self.places).map(|(&c, &pl)| c as u128 * pl).sum()
    }

    pub fn from_ints(&self, c: &[i128]) -> Result<GElement> {
        if c.len() != self.rank() {
            return Err(self.mismatch(c.len()));
        }
        Ok(GElement(
            c.iter().zip(&self.moduli).map(|(&v, &m)| v.rem_euclid(m as i128) as u64).collect(),
        ))
    }

    pub fn check(&self, x: &GElement) -> Result<()> {
        if x.len() != self.rank() {
            return Err(self.mismatch(x.len()));
        }
        for (i, (&c, &m)) in x.0.iter().zip(&self.moduli).enumerate() {
            if c >= m {
                return Err(Error::Structural(format!("coordinate {i} = {c} not reduced mod {m}")));
            }
        }
        Ok(())
    }

    fn mismatch(&self, len: usize) -> Error {
        Error::Structural(format!("element of length {len} used with a rank-{} shape", self.rank()))
    }

    #[inline]
    pub fn add(&self, x: &GElement, y: &GElement) -> GElement {
        debug_assert_eq!(x.len(), self.rank());
        debug_assert_eq!(y.len(), self.rank());
        GElement(
            x.0.iter()
                .zip(&y.0)
                .zip(&self.moduli)
                .map(|((&a, &b), &m)| {
                    let s = a + b;
                    if s >= m {
                        s - m
                    } else {
                        s
                    }
                })
                .collect(),
        )
    }

    #[inline]
    pub fn sub(&self, x: &GElement, y: &GElement) -> GElement {
        GElement(
            x.0.iter()
                .zip(&y.0)
                .zip(&self.moduli)
                .map(|((&a, &b), &m)| if a >= b { a - b } else { a + m - b })
                .collect(),
        )
    }

    #[inline]
    pub fn neg(&self, x: &GElement) -> GElement {
        GElement(x.0.iter().zip(&self.moduli).map(|(&a, &m)| if a == 0 { 0 } else { m - a }).collect())
    }

    /// Integer multiple; any sign is accepted.
    #[inline]
    pub fn smul(&self, k: i128, x: &GElement) -> GElement {
        GElement(
            x.0.iter()
                .zip(&self.moduli)
                .map(|(&a, &m)| arith::mul_mod(k.rem_euclid(m as i128) as u64, a, m))
                .collect(),
        )
    }

    pub fn try_add(&self, x: &GElement, y: &GElement) -> Result<GElement> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.add(x, y))
    }

    pub fn try_neg(&self, x: &GElement) -> Result<GElement> {
        self.check(x)?;
        Ok(self.neg(x))
    }

    pub fn try_smul(&self, k: i128, x: &GElement) -> Result<GElement> {
        self.check(x)?;
        Ok(self.smul(k, x))
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> GElement {
        self.element(rng.gen_range(0..self.order))
    }

    /// Largest `l ≤ e` with `x ∈ p^l A` (so the zero element has level `e`).
    pub fn level(&self, x: &GElement) -> u32 {
        x.0.iter()
            .zip(&self.exps)
            .map(|(&c, &a)| if c == 0 { u32::MAX } else { arith::vp(c as u128, self.p).min(a) })
            .min()
            .map_or(0, |l| l.min(self.max_exponent()))
    }

    pub fn in_pk(&self, x: &GElement, k: u32) -> bool {
        x.0.iter().zip(&self.exps).all(|(&c, &a)| c % self.p.pow(k.min(a)) == 0)
    }

    pub fn elements(&self) -> impl Iterator<Item = GElement> + '_ {
        (0..self.order).map(move |i| self.element(i))
    }

    pub fn p_power_subgroup(&self, i: u32) -> BoxSubgroup {
        BoxSubgroup::new_unchecked(self, self.exps.iter().map(|&a| i.min(a)).collect())
    }

    pub fn annihilator(&self, i: u32) -> BoxSubgroup {
        BoxSubgroup::new_unchecked(self, self.exps.iter().map(|&a| a.saturating_sub(i)).collect())
    }

    pub fn whole(&self) -> BoxSubgroup {
        self.p_power_subgroup(0)
    }

    pub fn zero_subgroup(&self) -> BoxSubgroup {
        BoxSubgroup::new_unchecked(self, self.exps.clone())
    }

    /// Smallest `k ≥ 1` with `k(p−1) ≥ e`.
    pub fn min_k(&self) -> u32 {
        let e = self.max_exponent() as u64;
        (e.div_ceil(self.p - 1)).max(1) as u32
    }

    pub fn rho_inv(&self, x: &GElement, choice: PullbackChoice) -> Result<GElement> {
        if !self.in_pk(x, 1) {
            return Err(Error::Domain { op: "rho_inv", detail: format!("{x} is not in pA") });
        }
        let mut c: Coeffs = x.0.iter().map(|&v| v / self.p).collect();
        if let PullbackChoice::Offset { seed, preserve_level } = choice {
            let level = if x.is_zero() { u32::MAX } else { self.level(x) };
            let h = hash_coeffs(seed, &x.0);
            for (i, (ci, &a)) in c.iter_mut().zip(&self.exps).enumerate() {
                if preserve_level && level > a {
                    continue;
                }
                let t = splitmix(h.wrapping_add(i as u64 + 1)) % self.p;
                let m = self.moduli[i];
                *ci = (*ci + t * (m / self.p)) % m;
            }
        }
        Ok(GElement(c))
    }

    /// `℘⁻¹ = (ρ⁻¹)^k`; every intermediate value is checked to lie in `pA`.
    pub fn wp_inv(&self, x: &GElement, k: u32, choice: PullbackChoice) -> Result<GElement> {
        if !self.in_pk(x, k) {
            return Err(Error::Domain { op: "wp_inv", detail: format!("{x} is not in p^{k}A") });
        }
        let mut y = x.clone();
        for step in 1..=k {
            y = self.rho_inv(&y, choice).map_err(|_| Error::Domain {
                op: "wp_inv",
                detail: format!("intermediate value {y} left pA at step {step}"),
            })?;
        }
        Ok(y)
    }
}

impl fmt::Display for GroupShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exps.is_empty() {
            return write!(f, "0");
        }
        for (i, a) in self.exps.iter().enumerate() {
            if i > 0 {
                write!(f, "+")?;
            }
            write!(f, "Z/{}^{}", self.p, a)?;
        }
        Ok(())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_coeffs(seed: u64, c: &[u64]) -> u64 {
    c.iter().fold(splitmix(seed), |h, &v| splitmix(h ^ v))
}

/// How ρ⁻¹ picks a preimage under multiplication by `p`.
///
/// `Offset` adds a pseudorandom element of `ann(p)` determined by `(seed, x)`.
/// With `preserve_level`, coordinates are only offset when that keeps the result
/// in `p^{l-1}A` for `x ∈ p^l A`, which keeps every power `(ρ⁻¹)^k` defined on `p^k A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PullbackChoice {
    Canonical,
    Offset { seed: u64, preserve_level: bool },
}

impl PullbackChoice {
    pub fn offset(seed: u64) -> Self {
        PullbackChoice::Offset { seed, preserve_level: true }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s == "canonical" {
            return Ok(PullbackChoice::Canonical);
        }
        let (raw, rest) = match s.strip_prefix("offset-raw:") {
            Some(r) => (true, r),
            None => match s.strip_prefix("offset:") {
                Some(r) => (false, r),
                None => return Err(Error::Spec(format!("unknown pullback choice `{s}`"))),
            },
        };
        let seed = rest.parse().map_err(|_| Error::Spec(format!("bad offset seed `{rest}`")))?;
        Ok(PullbackChoice::Offset { seed, preserve_level: !raw })
    }
}

impl fmt::Display for PullbackChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PullbackChoice::Canonical => write!(f, "canonical"),
            PullbackChoice::Offset { seed, preserve_level: true } => write!(f, "offset:{seed}"),
            PullbackChoice::Offset { seed, preserve_level: false } => write!(f, "offset-raw:{seed}"),
        }
    }
}

/// `⊕ p^{βᵢ} Z/p^{αᵢ}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxSubgroup {
    shape: GroupShape,
    betas: Vec<u32>,
    quotient: GroupShape,
    kept: Vec<usize>,
}

impl BoxSubgroup {
    pub fn new(shape: &GroupShape, betas: Vec<u32>) -> Result<Self> {
        if betas.len() != shape.rank() {
            return Err(Error::Structural("betas length differs from the rank".into()));
        }
        if betas.iter().zip(shape.exponents()).any(|(b, a)| b > a) {
            return Err(Error::Structural("beta exceeds its exponent".into()));
        }
        Ok(Self::new_unchecked(shape, betas))
    }

    fn new_unchecked(shape: &GroupShape, betas: Vec<u32>) -> Self {
        let kept: Vec<usize> = (0..betas.len()).filter(|&i| betas[i] > 0).collect();
        let qexps: Vec<u32> = kept.iter().map(|&i| betas[i]).collect();
        let quotient = GroupShape::build(shape.p(), &qexps).expect("quotient of a valid shape");
        BoxSubgroup { shape: shape.clone(), betas, quotient, kept }
    }

    pub fn shape(&self) -> &GroupShape {
        &self.shape
    }

    pub fn betas(&self) -> &[u32] {
        &self.betas
    }

    pub fn contains(&self, x: &GElement) -> bool {
        x.coeffs().iter().zip(&self.betas).all(|(&c, &b)| c % self.shape.p.pow(b) == 0)
    }

    pub fn order(&self) -> u128 {
        self.betas
            .iter()
            .zip(self.shape.exponents())
            .map(|(&b, &a)| (self.shape.p as u128).pow(a - b))
            .product()
    }

    pub fn is_whole(&self) -> bool {
        self.betas.iter().all(|&b| b == 0)
    }

    pub fn is_trivial(&self) -> bool {
        self.betas == self.shape.exps
    }

    /// Canonical coset representative: coordinatewise reduction mod `p^{βᵢ}`.
    pub fn coset_rep(&self, x: &GElement) -> GElement {
        GElement(x.coeffs().iter().zip(&self.betas).map(|(&c, &b)| c % self.shape.p.pow(b)).collect())
    }

    pub fn quotient_shape(&self) -> &GroupShape {
        &self.quotient
    }

    /// Class of `x` written in the coordinates of [`Self::quotient_shape`].
    pub fn to_quotient(&self, x: &GElement) -> GElement {
        GElement(
            self.kept.iter().map(|&i| x.coeffs()[i] % self.shape.p.pow(self.betas[i])).collect(),
        )
    }

    /// Canonical representative in the ambient group of a quotient element.
    pub fn from_quotient(&self, q: &GElement) -> GElement {
        let mut c = Coeffs::from_elem(0, self.shape.rank());
        for (j, &i) in self.kept.iter().enumerate() {
            c[i] = q.coeffs()[j];
        }
        GElement(c)
    }

    pub fn generators(&self) -> Vec<GElement> {
        (0..self.shape.rank())
            .filter(|&i| self.betas[i] < self.shape.exps[i])
            .map(|i| {
                let mut c = Coeffs::from_elem(0, self.shape.rank());
                c[i] = self.shape.p.pow(self.betas[i]);
                GElement(c)
            })
            .collect()
    }

    pub fn elements(&self) -> impl Iterator<Item = GElement> + '_ {
        let inner = GroupShape::build(
            self.shape.p,
            &self
                .betas
                .iter()
                .zip(&self.shape.exps)
                .map(|(&b, &a)| a - b)
                .collect::<Vec<_>>(),
        )
        .expect("subgroup shape");
        let p = self.shape.p;
        let betas = self.betas.clone();
        (0..self.order()).map(move |i| {
            let y = inner.element(i);
            GElement(y.coeffs().iter().zip(&betas).map(|(&c, &b)| c * p.pow(b)).collect())
        })
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> GElement {
        let x = self.shape.random(rng);
        GElement(
            x.coeffs()
                .iter()
                .zip(&self.betas)
                .zip(&self.shape.moduli)
                .map(|((&c, &b), &m)| arith::mul_mod(c, self.shape.p.pow(b), m))
                .collect(),
        )
    }

    pub fn is_subset_of(&self, other: &BoxSubgroup) -> bool {
        self.betas.iter().zip(&other.betas).all(|(a, b)| a >= b)
    }

    pub fn intersect(&self, other: &BoxSubgroup) -> BoxSubgroup {
        let betas = self.betas.iter().zip(&other.betas).map(|(&a, &b)| a.max(b)).collect();
        BoxSubgroup::new_unchecked(&self.shape, betas)
    }

    /// `p·S`.
    pub fn times_p(&self) -> BoxSubgroup {
        let betas = self.betas.iter().zip(&self.shape.exps).map(|(&b, &a)| (b + 1).min(a)).collect();
        BoxSubgroup::new_unchecked(&self.shape, betas)
    }

    pub fn to_subgroup(&self) -> Subgroup {
        Subgroup::span(&self.shape, self.generators())
    }
}

impl fmt::Display for BoxSubgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "box{:?}", self.betas)
    }
}

pub fn p_power_subgroup(shape: &GroupShape, i: u32) -> BoxSubgroup {
    shape.p_power_subgroup(i)
}

pub fn annihilator(shape: &GroupShape, i: u32) -> BoxSubgroup {
    shape.annihilator(i)
}

pub fn min_k(shape: &GroupShape) -> u32 {
    shape.min_k()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(p: u64, e: &[u32]) -> GroupShape {
        GroupShape::new(p, e).unwrap()
    }

    #[test]
    fn modular_arithmetic() {
        let z49 = sh(7, &[2]);
        let x = GElement::from_slice(&[48]);
        let y = GElement::from_slice(&[3]);
        assert_eq!(z49.add(&x, &y), GElement::from_slice(&[2]));
        assert!(z49.smul(0, &x).is_zero());
        assert_eq!(z49.smul(-1, &x), z49.neg(&x));
        let g = sh(7, &[2, 1]);
        assert_eq!(g.smul(7, &GElement::from_slice(&[1, 1])), GElement::from_slice(&[7, 0]));
        assert!(g.try_add(&x, &GElement::from_slice(&[1, 1])).is_err());
        assert!(g.check(&GElement::from_slice(&[1, 7])).is_err());
    }

    #[test]
    fn rejects_bad_primes() {
        assert!(GroupShape::new(2, &[3]).is_err());
        assert!(GroupShape::new(9, &[1]).is_err());
        assert!(GroupShape::new(7, &[]).is_err());
    }

    #[test]
    fn mixed_radix_indexing_is_bijective() {
        let g = sh(5, &[1, 2]);
        for i in 0..g.order() {
            assert_eq!(g.index(&g.element(i)), i);
        }
        assert_eq!(g.element(1), GElement::from_slice(&[1, 0]));
        assert_eq!(g.element(5), GElement::from_slice(&[0, 1]));
    }

    #[test]
    fn box_subgroups() {
        let z343 = sh(7, &[3]);
        let s = z343.p_power_subgroup(1);
        let elems: Vec<u64> = s.elements().map(|x| x.coeffs()[0]).collect();
        assert_eq!(elems.len(), 49);
        assert_eq!(elems[1], 7);
        assert_eq!(*elems.last().unwrap(), 336);
        let ann = z343.annihilator(1);
        assert_eq!(ann.betas(), &[2]);
        assert!(z343.annihilator(3).is_whole());
        assert!(z343.p_power_subgroup(0).is_whole());
        let g = sh(7, &[2, 1]);
        assert!(g.p_power_subgroup(2).is_trivial());
        // brute-force annihilator
        let ann1 = g.annihilator(1);
        for x in g.elements() {
            assert_eq!(ann1.contains(&x), g.smul(7, &x).is_zero());
        }
        assert_eq!(ann1.betas(), &[1, 0]);
    }

    #[test]
    fn coset_representatives() {
        let z343 = sh(7, &[3]);
        let s = z343.annihilator(2);
        assert_eq!(s.coset_rep(&GElement::from_slice(&[10])), GElement::from_slice(&[3]));
        let g = sh(7, &[2, 1]);
        let s = g.annihilator(1);
        for x in g.elements() {
            for y in g.elements() {
                let same = s.coset_rep(&x) == s.coset_rep(&y);
                assert_eq!(same, s.contains(&g.sub(&x, &y)));
            }
        }
        let q = g.whole();
        assert_eq!(q.quotient_shape().order(), 1);
        assert_eq!(s.quotient_shape().exponents(), &[1]);
        for x in g.elements() {
            let r = s.from_quotient(&s.to_quotient(&x));
            assert_eq!(r, s.coset_rep(&x));
        }
    }

    #[test]
    fn pullback_examples() {
        let z49 = sh(7, &[2]);
        let x = GElement::from_slice(&[14]);
        assert_eq!(z49.rho_inv(&x, PullbackChoice::Canonical).unwrap(), GElement::from_slice(&[2]));
        assert!(z49.rho_inv(&GElement::from_slice(&[3]), PullbackChoice::Canonical).is_err());
        assert!(z49.rho_inv(&z49.zero(), PullbackChoice::Canonical).unwrap().is_zero());
        let z343 = sh(7, &[3]);
        assert_eq!(
            z343.wp_inv(&GElement::from_slice(&[98]), 2, PullbackChoice::Canonical).unwrap(),
            GElement::from_slice(&[2])
        );
        for c in [PullbackChoice::Canonical, PullbackChoice::offset(3), PullbackChoice::offset(99)] {
            for x in z343.p_power_subgroup(2).elements() {
                let y = z343.wp_inv(&x, 2, c).unwrap();
                assert_eq!(z343.smul(49, &y), x);
                let one = z343.wp_inv(&x, 1, c).unwrap();
                assert_eq!(one, z343.rho_inv(&x, c).unwrap());
            }
        }
    }

    #[test]
    fn raw_offsets_can_break_iterated_pullback() {
        let g = sh(7, &[1, 3]);
        let bad = (0..64u64).any(|seed| {
            g.p_power_subgroup(2)
                .elements()
                .any(|x| g.wp_inv(&x, 2, PullbackChoice::Offset { seed, preserve_level: false }).is_err())
        });
        assert!(bad);
        for seed in 0..16u64 {
            for x in g.p_power_subgroup(2).elements() {
                assert!(g.wp_inv(&x, 2, PullbackChoice::offset(seed)).is_ok());
            }
        }
    }

    #[test]
    fn min_k_examples() {
        assert_eq!(sh(7, &[3]).min_k(), 1);
        assert_eq!(sh(7, &[7]).min_k(), 2);
        assert_eq!(sh(5, &[4]).min_k(), 1);
        assert_eq!(sh(13, &[6]).min_k(), 1);
    }

    #[test]
    fn choice_parsing() {
        assert_eq!(PullbackChoice::parse("canonical").unwrap(), PullbackChoice::Canonical);
        assert_eq!(PullbackChoice::parse("offset:7").unwrap(), PullbackChoice::offset(7));
        assert!(PullbackChoice::parse("offset:x").is_err());
        for c in [PullbackChoice::Canonical, PullbackChoice::offset(5)] {
            assert_eq!(PullbackChoice::parse(&c.to_string()).unwrap(), c);
        }
    }
}
