//! Weighted digit-product constraints
//! `a_{g_1(n)}^{t_1} ⋯ a_{g_m(n)}^{t_m} ≤ φ(n)` and their reduction to a
//! single-digit bound `a_n ≤ ζ(n)`.
//!
//! Every comparison of a real power against a bound is certified: exactly
//! through integer powers when the exponents are small rationals, otherwise
//! through outward-rounded logarithms, with ties reported as indeterminate.

use crate::error::{Error, Result};
use crate::exponent::DigitSet;
use crate::growth::Growth;
use crate::rigor::{f64_down, rational_of, Bounds, Verdict};
use crate::systems::parse_rational;
use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

/// Largest integer exponent used in exact power comparisons.
const EXACT_EXPONENT_LIMIT: u64 = 4096;
/// Default cap on preimage searches for `g_i`.
pub const SEARCH_CAP: u64 = 1 << 22;
/// Enumerate exhaustively up to this many streams, sample beyond.
pub const EXHAUSTIVE_LIMIT: u128 = 10_000_000;
pub const DEFAULT_SAMPLES: usize = 100_000;

/// A total index map `g: ℕ → ℕ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexMap {
    /// `a·n + b`
    Affine { a: u64, b: u64 },
    Constant(u64),
    /// `g(n) = values[n-1]`, then the last value forever.
    Table(Vec<u64>),
}

impl IndexMap {
    pub fn identity() -> Self {
        IndexMap::Affine { a: 1, b: 0 }
    }

    /// Parses `identity`, `shift:k`, `scale:a`, `affine:a,b`, `constant:c`,
    /// `table:v1,v2,…` or `file=<path>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let bad = || Error::InvalidInput(format!("unknown index map '{spec}'"));
        let int = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
        let map = if spec == "identity" {
            IndexMap::identity()
        } else if let Some(k) = spec.strip_prefix("shift:") {
            IndexMap::Affine { a: 1, b: int(k)? }
        } else if let Some(a) = spec.strip_prefix("scale:") {
            IndexMap::Affine { a: int(a)?, b: 0 }
        } else if let Some(rest) = spec.strip_prefix("affine:") {
            let (a, b) = rest.split_once(',').ok_or_else(bad)?;
            IndexMap::Affine {
                a: int(a)?,
                b: int(b)?,
            }
        } else if let Some(c) = spec.strip_prefix("constant:") {
            IndexMap::Constant(int(c)?)
        } else if let Some(list) = spec.strip_prefix("table:") {
            IndexMap::Table(list.split(',').map(int).collect::<Result<_>>()?)
        } else if let Some(path) = spec.strip_prefix("file=") {
            let text = std::fs::read_to_string(Path::new(path))?;
            IndexMap::Table(
                text.split_whitespace()
                    .filter(|t| !t.starts_with('#'))
                    .map(int)
                    .collect::<Result<_>>()?,
            )
        } else {
            return Err(bad());
        };
        map.validate()?;
        Ok(map)
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            IndexMap::Affine { a, b } => *a > 0 || *b > 0,
            IndexMap::Constant(c) => *c > 0,
            IndexMap::Table(v) => !v.is_empty() && v.iter().all(|&x| x > 0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "index map {} must take values in ℕ",
                self.label()
            )))
        }
    }

    pub fn label(&self) -> String {
        match self {
            IndexMap::Affine { a: 1, b: 0 } => "identity".into(),
            IndexMap::Affine { a: 1, b } => format!("shift:{b}"),
            IndexMap::Affine { a, b: 0 } => format!("scale:{a}"),
            IndexMap::Affine { a, b } => format!("affine:{a},{b}"),
            IndexMap::Constant(c) => format!("constant:{c}"),
            IndexMap::Table(v) => format!("table[{}]", v.len()),
        }
    }

    /// `g(n)` for `n ≥ 1`.
    pub fn eval(&self, n: u64) -> u64 {
        match self {
            IndexMap::Affine { a, b } => a.saturating_mul(n).saturating_add(*b),
            IndexMap::Constant(c) => *c,
            IndexMap::Table(v) => v[(n as usize).clamp(1, v.len()) - 1],
        }
    }

    fn nondecreasing(&self) -> bool {
        match self {
            IndexMap::Table(v) => v.windows(2).all(|w| w[0] <= w[1]),
            _ => true,
        }
    }

    /// An index past which `g` takes no new values, if there is one.
    fn settles_after(&self) -> Option<u64> {
        match self {
            IndexMap::Affine { a: 0, .. } | IndexMap::Constant(_) => Some(1),
            IndexMap::Affine { .. } => None,
            IndexMap::Table(v) => Some(v.len() as u64),
        }
    }
}

/// `φ(n) = growth(n) + offset`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phi {
    pub growth: Growth,
    pub offset: u64,
}

impl Phi {
    pub fn new(growth: Growth) -> Self {
        Phi { growth, offset: 0 }
    }

    /// A [`Growth`] spec with an optional `+c` suffix, e.g. `log+3`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if !spec.starts_with("file=") {
            if let Some((head, c)) = spec.rsplit_once('+') {
                let offset = c.trim().parse::<u64>().map_err(|_| {
                    Error::InvalidInput(format!("bad offset in growth function '{spec}'"))
                })?;
                return Ok(Phi {
                    growth: Growth::parse(head)?,
                    offset,
                });
            }
        }
        Ok(Phi::new(Growth::parse(spec)?))
    }

    pub fn label(&self) -> String {
        if self.offset == 0 {
            self.growth.label()
        } else {
            format!("{}+{}", self.growth.label(), self.offset)
        }
    }

    pub fn eval(&self, n: u64) -> BigUint {
        self.growth.eval(&BigUint::from(n)) + BigUint::from(self.offset)
    }

    pub fn diverges(&self) -> bool {
        self.growth.diverges()
    }
}

/// The data of a weighted digit-product set.
#[derive(Debug, Clone)]
pub struct ProductSpec {
    /// Exponents `t_i > 0`.
    pub t: Vec<BigRational>,
    pub g: Vec<IndexMap>,
    pub phi: Phi,
    pub digits: DigitSet,
}

impl ProductSpec {
    pub fn new(t: Vec<BigRational>, g: Vec<IndexMap>, phi: Phi, digits: DigitSet) -> Result<Self> {
        if t.is_empty() || t.len() != g.len() {
            return Err(Error::InvalidInput(format!(
                "need one exponent per index map (got {} and {})",
                t.len(),
                g.len()
            )));
        }
        if let Some(bad) = t.iter().find(|x| !x.is_positive()) {
            return Err(Error::InvalidInput(format!(
                "exponents must be positive, got {bad}"
            )));
        }
        for map in &g {
            map.validate()?;
        }
        Ok(ProductSpec { t, g, phi, digits })
    }

    /// Parses exponents given as integers, decimals or `p/q`.
    pub fn parse_exponents(list: &str) -> Result<Vec<BigRational>> {
        list.split(',')
            .map(|x| {
                parse_rational(x)
                    .ok_or_else(|| Error::InvalidInput(format!("bad exponent '{x}'")))
            })
            .collect()
    }

    pub fn m(&self) -> usize {
        self.t.len()
    }

    fn max_t(&self) -> &BigRational {
        self.t.iter().max().expect("non-empty")
    }

    /// `m·t_i`, the root taken in `ζ_i`.
    pub fn root(&self, i: usize) -> BigRational {
        &self.t[i] * BigRational::from_integer(self.m().into())
    }

    /// `M(D) = max{min D, (min D)^{m·max t_i}}`.
    pub fn m_of_d(&self) -> Bounds {
        let d = self.digits.min();
        if d == 1 {
            return Bounds::exact(1.0);
        }
        let e = self.max_t() * BigRational::from_integer(self.m().into());
        let power = power_bounds(d, &e);
        let d = d as f64;
        Bounds::new(power.lo.max(d), power.hi.max(d))
    }

    /// First `n ≤ horizon` where `φ(n) ≥ M(D)` is certainly false.
    pub fn phi_below_floor(&self, horizon: u64) -> Option<u64> {
        let floor = self.m_of_d();
        (1..=horizon).find(|&n| Bounds::of_biguint(&self.phi.eval(n)).hi < floor.lo)
    }
}

/// Outward bounds on `d^e`.
fn power_bounds(d: u64, e: &BigRational) -> Bounds {
    Bounds::of(e)
        .mul(Bounds::ln(&BigRational::from_integer(d.into())))
        .exp()
}

fn exponent_fits(e: &BigRational) -> Option<(u64, u64)> {
    let p = e.numer().to_u64()?;
    let q = e.denom().to_u64()?;
    (p <= EXACT_EXPONENT_LIMIT && q <= EXACT_EXPONENT_LIMIT).then_some((p, q))
}

/// Certified `Π bases_i^{exponents_i} ≤ bound` for positive integer bases,
/// positive rational exponents and a positive rational bound.
pub fn product_at_most(terms: &[(u64, &BigRational)], bound: &BigRational) -> Verdict {
    assert!(bound.is_positive(), "bound must be positive");
    let mut lhs = Bounds::exact(0.0);
    for &(a, e) in terms {
        lhs = lhs.add(Bounds::of(e).mul(Bounds::ln(&BigRational::from_integer(a.into()))));
    }
    let quick = Bounds::ln(bound).at_least(lhs);
    if quick != Verdict::Indeterminate {
        return quick;
    }
    // Π a_i^{p_i/q_i} ≤ u/v  ⇔  Π a_i^{p_i L/q_i} · v^L ≤ u^L
    let mut l = 1u64;
    for &(_, e) in terms {
        match exponent_fits(e) {
            Some((_, q)) => l = l.lcm(&q),
            None => return Verdict::Indeterminate,
        }
        if l > EXACT_EXPONENT_LIMIT {
            return Verdict::Indeterminate;
        }
    }
    let mut left = BigUint::one();
    for &(a, e) in terms {
        let (p, q) = exponent_fits(e).expect("checked");
        let k = p * (l / q);
        if k > EXACT_EXPONENT_LIMIT * EXACT_EXPONENT_LIMIT {
            return Verdict::Indeterminate;
        }
        left *= Pow::pow(BigUint::from(a), k as u32);
    }
    let u = bound.numer().magnitude();
    let v = bound.denom().magnitude();
    if left * Pow::pow(v, l as u32) <= Pow::pow(u, l as u32) {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Largest `a` with `a^e ≤ bound` certified (0 if even `a = 1` is not).
pub fn largest_base(e: &BigRational, bound: &BigRational) -> u64 {
    let ok = |a: u64| a == 0 || product_at_most(&[(a, e)], bound) == Verdict::Pass;
    let guess = (f64_down(bound).ln() / e.to_f64().unwrap_or(f64::INFINITY))
        .exp()
        .floor();
    let mut a = if guess.is_finite() && guess >= 0.0 {
        (guess as u64).min(u64::MAX / 2)
    } else {
        0
    };
    while !ok(a) {
        a -= 1;
    }
    while ok(a + 1) {
        a += 1;
    }
    a
}

/// A strictly increasing minorant of φ on `[1, H]`.
#[derive(Debug, Clone, Serialize)]
pub struct StrictPhi {
    pub horizon: u64,
    /// `φ′(n)` at index `n - 1`.
    #[serde(serialize_with = "rationals")]
    pub values: Vec<BigRational>,
    #[serde(serialize_with = "crate::ser::rational")]
    pub delta: BigRational,
    /// φ was taken as already strictly increasing.
    pub passthrough: bool,
    /// Indices where `φ′(n)` may fall below `M(D)`.
    pub below_floor: Vec<u64>,
}

fn rationals<S: serde::Serializer>(v: &[BigRational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(crate::ser::rational_string))
}

impl StrictPhi {
    pub fn at(&self, n: u64) -> Result<&BigRational> {
        if n == 0 || n > self.horizon {
            return Err(Error::HorizonTooSmall(format!(
                "φ′({n}) requested beyond the strictified horizon {}",
                self.horizon
            )));
        }
        Ok(&self.values[n as usize - 1])
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] < w[1])
    }
}

/// `φ′(n) = min_{n ≤ k ≤ H} φ(k) − (H − n)δ` with `δ = 1/(2H)`, shrunk so
/// that `φ′` stays above `M(D)` when `φ` leaves room for it.
///
/// With `assume_strict` φ itself is returned after checking strict increase
/// on the horizon.
pub fn strictify(phi: &Phi, horizon: u64, floor: Bounds, assume_strict: bool) -> Result<StrictPhi> {
    if horizon < 2 {
        return Err(Error::InvalidInput("horizon must be at least 2".into()));
    }
    let raw: Vec<BigRational> = (1..=horizon)
        .map(|n| BigRational::from_integer(phi.eval(n).into()))
        .collect();
    let floor_hi = rational_of(floor.hi);
    let below = |values: &[BigRational]| {
        (1..=horizon)
            .filter(|&n| values[n as usize - 1] < floor_hi)
            .collect::<Vec<_>>()
    };
    if assume_strict {
        if let Some(n) = raw.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "φ is assumed strictly increasing but φ({}) ≥ φ({})",
                n + 1,
                n + 2
            )));
        }
        return Ok(StrictPhi {
            horizon,
            below_floor: below(&raw),
            values: raw,
            delta: BigRational::zero(),
            passthrough: true,
        });
    }
    if !phi.diverges() {
        return Err(Error::Divergence(format!(
            "{} is bounded, so it has no strictly increasing divergent minorant",
            phi.label()
        )));
    }
    let mut suffix_min = raw.clone();
    for k in (0..raw.len() - 1).rev() {
        if suffix_min[k + 1] < suffix_min[k] {
            suffix_min[k] = suffix_min[k + 1].clone();
        }
    }
    let h = BigRational::from_integer(horizon.into());
    let mut delta = (BigRational::one() / (&h + &h)).clone();
    let slack = &suffix_min[0] - &floor_hi;
    if slack.is_positive() {
        let room = &slack / (&h + &h);
        if room < delta {
            delta = room;
        }
    }
    let values: Vec<BigRational> = suffix_min
        .iter()
        .enumerate()
        .map(|(k, m)| m - &delta * BigRational::from_integer((horizon - 1 - k as u64).into()))
        .collect();
    Ok(StrictPhi {
        horizon,
        below_floor: below(&values),
        values,
        delta,
        passthrough: false,
    })
}

/// Values of one `g_i` found by scanning `r = 1, 2, …`.
#[derive(Debug, Clone)]
struct ImageScan<'a> {
    g: &'a IndexMap,
    /// value `k` → least preimage `M_{i,k}`
    first: BTreeMap<u64, u64>,
    /// every `M_{i,k}` found, increasing
    firsts: Vec<u64>,
    scanned: u64,
    cap: u64,
}

impl<'a> ImageScan<'a> {
    fn new(g: &'a IndexMap, cap: u64) -> Self {
        ImageScan {
            g,
            first: BTreeMap::new(),
            firsts: Vec::new(),
            scanned: 0,
            cap,
        }
    }

    /// No preimage beyond `scanned` can be new.
    fn complete(&self) -> bool {
        self.g.settles_after().is_some_and(|s| self.scanned >= s)
    }

    /// Scans further; false when the cap is reached or nothing is left.
    fn grow(&mut self) -> bool {
        if self.complete() || self.scanned >= self.cap {
            return false;
        }
        let target = (self.scanned.max(16) * 2).min(self.cap);
        for r in self.scanned + 1..=target {
            let v = self.g.eval(r);
            if let std::collections::btree_map::Entry::Vacant(e) = self.first.entry(v) {
                e.insert(r);
                self.firsts.push(r);
            }
        }
        self.scanned = target;
        true
    }

    fn too_small(&self, what: String) -> Error {
        Error::HorizonTooSmall(format!(
            "{what} undecided after scanning g = {} up to {}",
            self.g.label(),
            self.scanned
        ))
    }

    /// `Some(M_{i,k})` if `k ∈ I_i`, `None` if not.
    fn preimage(&mut self, k: u64) -> Result<Option<u64>> {
        loop {
            if let Some(&r) = self.first.get(&k) {
                return Ok(Some(r));
            }
            if self.complete()
                || (self.scanned > 0 && self.g.nondecreasing() && self.g.eval(self.scanned) > k)
            {
                return Ok(None);
            }
            if !self.grow() {
                return Err(self.too_small(format!("membership of {k} in the image")));
            }
        }
    }

    /// `R_{i,k}` by the two-case definition.
    fn complement_index(&mut self, k: u64) -> Result<u64> {
        loop {
            if let Some(&r) = self.firsts.iter().find(|&&r| r > k) {
                return Ok(r);
            }
            if self.complete() {
                break;
            }
            if !self.grow() {
                return Err(self.too_small(format!("R for k = {k}")));
            }
        }
        match self.firsts.iter().rev().find(|&&r| r < k) {
            Some(&r) => Ok(r + k),
            None => Err(Error::HorizonTooSmall(format!(
                "R for k = {k} is undefined: g = {} has no least preimage other than {k}",
                self.g.label()
            ))),
        }
    }
}

/// `M_{i,k} = min{r : g_i(r) = k}` (`i` is 1-based).
pub fn m_index(spec: &ProductSpec, i: usize, k: u64, cap: u64) -> Result<u64> {
    let g = component(spec, i)?;
    ImageScan::new(g, cap)
        .preimage(k)?
        .ok_or(Error::NotInImage { i, k })
}

/// `R_{i,k}` for `k ∉ g_i(ℕ)`.
pub fn r_index(spec: &ProductSpec, i: usize, k: u64, cap: u64) -> Result<u64> {
    let g = component(spec, i)?;
    let mut scan = ImageScan::new(g, cap);
    if scan.preimage(k)?.is_some() {
        return Err(Error::InvalidInput(format!(
            "{k} lies in the image of g_{i}; use the least preimage instead"
        )));
    }
    scan.complement_index(k)
}

fn component(spec: &ProductSpec, i: usize) -> Result<&IndexMap> {
    if i == 0 || i > spec.m() {
        return Err(Error::InvalidInput(format!(
            "component {i} out of range 1..={}",
            spec.m()
        )));
    }
    Ok(&spec.g[i - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    /// `n ∈ I_i`; the source is `M_{i,n}`.
    Image,
    /// `n ∈ C_i`; the source is `R_{i,n}`.
    Complement,
}

/// `ζ_i` on `[1, H]`.
#[derive(Debug, Clone, Serialize)]
pub struct ZetaComponent {
    pub i: usize,
    pub kind: Vec<IndexKind>,
    /// `M_{i,n}` or `R_{i,n}`, the argument of φ′ in `ζ_i(n)`.
    pub source: Vec<u64>,
    pub values: Vec<Bounds>,
    /// Largest digit certainly `≤ ζ_i(n)`.
    pub digit_caps: Vec<u64>,
    pub nondecreasing: bool,
    /// Nondecreasing along `I_i` and along `C_i` separately.
    pub nondecreasing_on_parts: bool,
}

impl ZetaComponent {
    pub fn image(&self) -> Vec<u64> {
        self.indices(IndexKind::Image)
    }

    pub fn complement(&self) -> Vec<u64> {
        self.indices(IndexKind::Complement)
    }

    fn indices(&self, which: IndexKind) -> Vec<u64> {
        (1..=self.kind.len() as u64)
            .filter(|&n| self.kind[n as usize - 1] == which)
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ZetaTable {
    pub horizon: u64,
    pub phi: StrictPhi,
    pub components: Vec<ZetaComponent>,
    /// `ζ(n) = min_i ζ_i(n)`.
    pub zeta: Vec<Bounds>,
    pub digit_caps: Vec<u64>,
    pub nondecreasing: bool,
}

impl ZetaTable {
    pub fn zeta_at(&self, n: u64) -> Bounds {
        self.zeta[n as usize - 1]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ZetaOptions {
    pub assume_strict: bool,
    pub search_cap: u64,
}

impl Default for ZetaOptions {
    fn default() -> Self {
        ZetaOptions {
            assume_strict: false,
            search_cap: SEARCH_CAP,
        }
    }
}

fn nondecreasing(values: impl Iterator<Item = Bounds>) -> bool {
    // false only on a certified decrease
    let v: Vec<Bounds> = values.collect();
    v.windows(2).all(|w| w[1].hi >= w[0].lo)
}

/// Builds `ζ_1, …, ζ_m` and `ζ` on `[1, horizon]`.
pub fn build_zeta(spec: &ProductSpec, horizon: u64, opts: ZetaOptions) -> Result<ZetaTable> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    let mut kinds = Vec::with_capacity(spec.m());
    let mut sources = Vec::with_capacity(spec.m());
    for g in &spec.g {
        let mut scan = ImageScan::new(g, opts.search_cap);
        let mut kind = Vec::with_capacity(horizon as usize);
        let mut source = Vec::with_capacity(horizon as usize);
        for n in 1..=horizon {
            match scan.preimage(n)? {
                Some(r) => {
                    kind.push(IndexKind::Image);
                    source.push(r);
                }
                None => {
                    kind.push(IndexKind::Complement);
                    source.push(scan.complement_index(n)?);
                }
            }
        }
        kinds.push(kind);
        sources.push(source);
    }
    let needed = sources
        .iter()
        .flatten()
        .copied()
        .max()
        .unwrap_or(1)
        .max(horizon)
        .max(2);
    let phi = strictify(&spec.phi, needed, spec.m_of_d(), opts.assume_strict)?;

    let mut components = Vec::with_capacity(spec.m());
    for (idx, (kind, source)) in kinds.into_iter().zip(sources).enumerate() {
        let root = spec.root(idx);
        let inv = Bounds::exact(1.0).div_positive(Bounds::of(&root));
        let mut values = Vec::with_capacity(source.len());
        let mut caps = Vec::with_capacity(source.len());
        for &s in &source {
            let bound = phi.at(s)?;
            values.push(if root.is_one() {
                Bounds::of(bound)
            } else {
                Bounds::ln(bound).mul(inv).exp()
            });
            caps.push(largest_base(&root, bound));
        }
        let part = |which: IndexKind| {
            nondecreasing(
                kind.iter()
                    .zip(&values)
                    .filter(|(k, _)| **k == which)
                    .map(|(_, v)| *v),
            )
        };
        components.push(ZetaComponent {
            i: idx + 1,
            nondecreasing: nondecreasing(values.iter().copied()),
            nondecreasing_on_parts: part(IndexKind::Image) && part(IndexKind::Complement),
            kind,
            source,
            values,
            digit_caps: caps,
        });
    }
    let zeta: Vec<Bounds> = (0..horizon as usize)
        .map(|k| {
            components.iter().fold(
                Bounds::exact(f64::INFINITY),
                |acc, c| Bounds::new(acc.lo.min(c.values[k].lo), acc.hi.min(c.values[k].hi)),
            )
        })
        .collect();
    let digit_caps = (0..horizon as usize)
        .map(|k| components.iter().map(|c| c.digit_caps[k]).min().unwrap())
        .collect();
    Ok(ZetaTable {
        horizon,
        nondecreasing: nondecreasing(zeta.iter().copied()),
        phi,
        components,
        zeta,
        digit_caps,
    })
}

/// Where a stream leaves the product set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Witness {
    /// `a_position ∉ D`
    Digit { position: u64 },
    /// The product bound fails (or is undecided) at `n`.
    Product { n: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Membership {
    pub verdict: Verdict,
    pub witness: Option<Witness>,
}

impl Membership {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Largest index `max_i g_i(n)` over `n ≤ horizon`.
pub fn stream_length_needed(spec: &ProductSpec, horizon: u64) -> u64 {
    (1..=horizon)
        .flat_map(|n| spec.g.iter().map(move |g| g.eval(n)))
        .max()
        .unwrap_or(0)
}

/// The product bound at one `n`, reading digits from a 1-based stream.
fn product_verdict(spec: &ProductSpec, stream: &[u64], n: u64, phi_n: &BigRational) -> Verdict {
    let terms: Vec<(u64, &BigRational)> = spec
        .g
        .iter()
        .zip(&spec.t)
        .map(|(g, t)| (stream[g.eval(n) as usize - 1], t))
        .collect();
    product_at_most(&terms, phi_n)
}

/// Whether a digit prefix satisfies the product bound for every `n ≤ horizon`
/// with all digits in `D`. The first failing `n` (or undecided one, when no
/// `n` fails) is the witness.
pub fn membership_p(spec: &ProductSpec, stream: &[u64], horizon: u64) -> Result<Membership> {
    let need = stream_length_needed(spec, horizon);
    if (stream.len() as u64) < need {
        return Err(Error::InvalidInput(format!(
            "stream has {} digits but the product bound up to n = {horizon} reads {need}",
            stream.len()
        )));
    }
    if let Some(p) = stream[..need as usize]
        .iter()
        .position(|&a| !spec.digits.contains(a))
    {
        return Ok(Membership {
            verdict: Verdict::Fail,
            witness: Some(Witness::Digit {
                position: p as u64 + 1,
            }),
        });
    }
    let mut undecided = None;
    for n in 1..=horizon {
        let phi_n = BigRational::from_integer(spec.phi.eval(n).into());
        match product_verdict(spec, stream, n, &phi_n) {
            Verdict::Pass => {}
            Verdict::Fail => {
                return Ok(Membership {
                    verdict: Verdict::Fail,
                    witness: Some(Witness::Product { n }),
                })
            }
            Verdict::Indeterminate => {
                undecided.get_or_insert(n);
            }
        }
    }
    Ok(match undecided {
        Some(n) => Membership {
            verdict: Verdict::Indeterminate,
            witness: Some(Witness::Product { n }),
        },
        None => Membership {
            verdict: Verdict::Pass,
            witness: None,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainLevel {
    /// `a_r ≤ φ′(M_{i,r})^{1/(m t_i)}` for `r ∈ I_i`.
    G2,
    /// `a_{g_i(n)} ≤ φ′(n)^{1/(m t_i)}`.
    G1,
    /// The product bound with the original φ.
    P,
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub stream: Vec<u64>,
    pub level: ChainLevel,
    /// The `r` (for G2) or `n` (for G1 and P) that fails.
    pub index: u64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ChainCounts {
    pub g2: u64,
    pub g1: u64,
    pub p: u64,
    /// Product bounds that rounding could not decide.
    pub p_indeterminate: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub horizon: u64,
    pub digit_cap: u64,
    /// Digits allowed at each position: `D ∩ [1, min(ζ(n), cap)]`.
    pub allowed: Vec<usize>,
    /// Number of streams in the enumerated space (saturating).
    pub space: u128,
    pub exhaustive: bool,
    pub seed: Option<u64>,
    pub streams_checked: u64,
    pub violations: ChainCounts,
    pub first_counterexample: Option<Counterexample>,
}

impl ChainReport {
    pub fn passed(&self) -> bool {
        self.violations.g2 == 0 && self.violations.g1 == 0 && self.violations.p == 0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ChainOptions {
    pub samples: usize,
    pub seed: u64,
    pub exhaustive_limit: u128,
    pub zeta: ZetaOptions,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            exhaustive_limit: EXHAUSTIVE_LIMIT,
            zeta: ZetaOptions::default(),
        }
    }
}

/// Digit caps of the G₂ and G₁ conditions and the φ values of the product
/// bound, all restricted to streams of length `H`.
struct ChainChecks<'a> {
    spec: &'a ProductSpec,
    /// `(position r, cap)` per component
    g2: Vec<Vec<(u64, u64)>>,
    /// `(n, position g_i(n), cap)` per component
    g1: Vec<Vec<(u64, u64, u64)>>,
    p: Vec<(u64, BigRational)>,
}

impl<'a> ChainChecks<'a> {
    fn new(spec: &'a ProductSpec, table: &ZetaTable, horizon: u64, cap: u64) -> Result<Self> {
        let mut g2 = Vec::new();
        let mut g1 = Vec::new();
        for (idx, g) in spec.g.iter().enumerate() {
            let root = spec.root(idx);
            let mut scan = ImageScan::new(g, cap);
            let mut own2 = Vec::new();
            for r in 1..=horizon {
                if let Some(m) = scan.preimage(r)? {
                    own2.push((r, largest_base(&root, table.phi.at(m)?)));
                }
            }
            let own1 = (1..=horizon)
                .filter(|&n| g.eval(n) <= horizon)
                .map(|n| Ok((n, g.eval(n), largest_base(&root, table.phi.at(n)?))))
                .collect::<Result<Vec<_>>>()?;
            g2.push(own2);
            g1.push(own1);
        }
        let p = (1..=horizon)
            .filter(|&n| spec.g.iter().all(|g| g.eval(n) <= horizon))
            .map(|n| (n, BigRational::from_integer(spec.phi.eval(n).into())))
            .collect();
        Ok(ChainChecks { spec, g2, g1, p })
    }

    /// Adds this stream's failures to `counts`; returns the first one.
    fn check(&self, stream: &[u64], counts: &mut ChainCounts) -> Option<(ChainLevel, u64)> {
        let mut first = None;
        for own in &self.g2 {
            for &(r, cap) in own {
                if stream[r as usize - 1] > cap {
                    counts.g2 += 1;
                    first.get_or_insert((ChainLevel::G2, r));
                }
            }
        }
        for own in &self.g1 {
            for &(n, pos, cap) in own {
                if stream[pos as usize - 1] > cap {
                    counts.g1 += 1;
                    first.get_or_insert((ChainLevel::G1, n));
                }
            }
        }
        for (n, phi_n) in &self.p {
            match product_verdict(self.spec, stream, *n, phi_n) {
                Verdict::Pass => {}
                Verdict::Fail => {
                    counts.p += 1;
                    first.get_or_insert((ChainLevel::P, *n));
                }
                Verdict::Indeterminate => counts.p_indeterminate += 1,
            }
        }
        first
    }
}

#[derive(Default)]
struct Partial {
    checked: u64,
    counts: ChainCounts,
    first: Option<Counterexample>,
}

impl Partial {
    fn record(&mut self, checks: &ChainChecks, stream: &[u64]) {
        self.checked += 1;
        if let Some((level, index)) = checks.check(stream, &mut self.counts) {
            self.first.get_or_insert_with(|| Counterexample {
                stream: stream.to_vec(),
                level,
                index,
            });
        }
    }

    fn merge(mut self, other: Partial) -> Partial {
        self.checked += other.checked;
        self.counts.g2 += other.counts.g2;
        self.counts.g1 += other.counts.g1;
        self.counts.p += other.counts.p;
        self.counts.p_indeterminate += other.counts.p_indeterminate;
        self.first = self.first.or(other.first);
        self
    }
}

/// Checks `G₃ ⊆ G₂ ⊆ G₁ ⊆ P_m` on digit prefixes of length `horizon`:
/// every stream with `a_n ∈ D`, `a_n ≤ ζ(n)` and `a_n ≤ digit_cap` is
/// tested against the three outer conditions. The space is enumerated when
/// it has at most `exhaustive_limit` streams and sampled otherwise.
pub fn subset_chain_check(
    spec: &ProductSpec,
    horizon: u64,
    digit_cap: u64,
    opts: ChainOptions,
) -> Result<ChainReport> {
    let table = build_zeta(spec, horizon, opts.zeta)?;
    let checks = ChainChecks::new(spec, &table, horizon, opts.zeta.search_cap)?;
    let alphabets: Vec<Vec<u64>> = table
        .digit_caps
        .iter()
        .map(|&c| spec.digits.up_to(c.min(digit_cap)))
        .collect();
    let allowed: Vec<usize> = alphabets.iter().map(Vec::len).collect();
    let space = allowed
        .iter()
        .fold(1u128, |acc, &k| acc.saturating_mul(k as u128));
    let exhaustive = space <= opts.exhaustive_limit;
    let partial = if space == 0 {
        Partial::default()
    } else if exhaustive {
        alphabets[0]
            .par_iter()
            .map(|&head| {
                let mut part = Partial::default();
                let mut digits = vec![0usize; alphabets.len()];
                let mut stream: Vec<u64> = alphabets.iter().map(|a| a[0]).collect();
                stream[0] = head;
                loop {
                    part.record(&checks, &stream);
                    // odometer over positions 2..=H
                    let mut p = alphabets.len() - 1;
                    loop {
                        if p == 0 {
                            return part;
                        }
                        digits[p] += 1;
                        if digits[p] < alphabets[p].len() {
                            stream[p] = alphabets[p][digits[p]];
                            break;
                        }
                        digits[p] = 0;
                        stream[p] = alphabets[p][0];
                        p -= 1;
                    }
                }
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(Partial::default(), Partial::merge)
    } else {
        const CHUNK: usize = 4096;
        let chunks = opts.samples.div_ceil(CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(c as u64);
                let mut part = Partial::default();
                let count = CHUNK.min(opts.samples - c * CHUNK);
                let mut stream = vec![0u64; alphabets.len()];
                for _ in 0..count {
                    for (slot, alphabet) in stream.iter_mut().zip(&alphabets) {
                        *slot = alphabet[rng.gen_range(0..alphabet.len())];
                    }
                    part.record(&checks, &stream);
                }
                part
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(Partial::default(), Partial::merge)
    };
    Ok(ChainReport {
        horizon,
        digit_cap,
        allowed,
        space,
        exhaustive,
        seed: (!exhaustive).then_some(opts.seed),
        streams_checked: partial.checked,
        violations: partial.counts,
        first_counterexample: partial.first,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn exact_powers_decide_ties() {
        // 4^{1/2} ≤ 2 holds with equality
        assert_eq!(product_at_most(&[(4, &q(1, 2))], &q(2, 1)), Verdict::Pass);
        assert_eq!(product_at_most(&[(5, &q(1, 2))], &q(2, 1)), Verdict::Fail);
        assert_eq!(product_at_most(&[(2, &q(3, 2)), (8, &q(1, 2))], &q(8, 1)), Verdict::Pass);
        assert_eq!(largest_base(&q(2, 1), &q(16, 1)), 4);
        assert_eq!(largest_base(&q(2, 1), &q(31, 2)), 3);
        assert_eq!(largest_base(&q(3, 1), &q(1, 2)), 0);
    }

    #[test]
    fn index_maps_parse() {
        assert_eq!(IndexMap::parse("shift:2").unwrap().eval(5), 7);
        assert_eq!(IndexMap::parse("scale:3").unwrap().eval(5), 15);
        assert_eq!(IndexMap::parse("table:4,1").unwrap().eval(9), 1);
        assert!(IndexMap::parse("constant:0").is_err());
        assert_eq!(Phi::parse("log+3").unwrap().eval(6), BigUint::from(6u32));
    }

    #[test]
    fn floor_uses_the_largest_exponent() {
        let spec = ProductSpec::new(
            vec![q(1, 1), q(3, 2)],
            vec![IndexMap::identity(), IndexMap::identity()],
            Phi::new(Growth::Linear { a: 1, b: 8 }),
            DigitSet::finite(vec![2, 3]).unwrap(),
        )
        .unwrap();
        let m = spec.m_of_d();
        // 2^{2·3/2} = 8
        assert!(m.lo <= 8.0 && 8.0 <= m.hi && m.hi - m.lo < 1e-12);
        assert_eq!(spec.phi_below_floor(10), None);
    }
}
