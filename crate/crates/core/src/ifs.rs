//! The iIFS abstraction, fundamental intervals, the digit codec and
//! sampling-based falsifiers for the contraction, distortion, regularity and
//! open-set axioms.

use crate::error::{Error, Result};
use crate::exponent::XiSequence;
use crate::rigor::{biguint_down, exp_down, exp_up, f64_down, f64_up, ln_bounds, Bounds};
use crate::scalar::{ArithmeticMode, Scalar};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;

/// Declared constants of a system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Composition length in the contraction axiom.
    pub m: usize,
    /// Contraction bound for compositions of length `m`.
    pub rho: BigRational,
    /// Distortion bound.
    pub kappa: BigRational,
}

impl SystemParams {
    pub fn rho_f64(&self) -> f64 {
        self.rho.to_f64().unwrap()
    }
    pub fn kappa_f64(&self) -> f64 {
        self.kappa.to_f64().unwrap()
    }
}

/// An infinite iterated function system on [0,1].
///
/// Every implementation here has monotone branches whose images are laid out
/// so that larger digits sit further left; the construction code checks
/// this against exact endpoints instead of relying on it.
pub trait Iifs<S: Scalar>: Send + Sync {
    fn label(&self) -> String;
    /// `f_n(x)`
    fn map(&self, n: u64, x: &S) -> S;
    /// `f_n'(x)`
    fn derivative(&self, n: u64, x: &S) -> S;
    fn xi(&self) -> XiSequence;
    fn params(&self) -> SystemParams;
    /// Whether `f_n` is decreasing.
    fn reverses(&self, n: u64) -> bool;

    fn mode(&self) -> ArithmeticMode {
        S::MODE
    }

    /// The first digit of `x`, i.e. the `n` with `x` in the interior of
    /// `f_n([0,1])`. Endpoints yield [`Error::Ambiguous`].
    fn locate(&self, _x: &S) -> Result<u64> {
        Err(Error::Unsupported(format!(
            "{} has no inducing map",
            self.label()
        )))
    }

    /// The digit the inducing map assigns to `x`. Unlike
    /// [`locate`](Self::locate) this resolves shared endpoints by the map's
    /// own convention; it fails only where no digit is defined or an
    /// enclosure straddles a branch boundary.
    fn inducing_digit(&self, x: &S) -> Result<u64> {
        self.locate(x)
    }

    /// `f_n^{-1}(x)` for `x` in the image of `f_n`.
    fn invert(&self, _n: u64, _x: &S) -> Result<S> {
        Err(Error::Unsupported(format!(
            "{} has no inducing map",
            self.label()
        )))
    }

    /// A description of `f_{d}∘⋯∘f_{d}` (`len` factors) good enough to compare
    /// lengths of sub-intervals without composing the maps.
    fn prefix_frame(&self, digit: u64, len: &BigUint) -> Result<PrefixFrame> {
        explicit_frame(self, digit, len)
    }
}

/// A finite digit string `(a_1, …, a_n)` with every entry at least 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
pub struct DigitString(Vec<u64>);

impl DigitString {
    pub fn new(digits: Vec<u64>) -> Result<Self> {
        if let Some(pos) = digits.iter().position(|&d| d == 0) {
            return Err(Error::InvalidDigits(format!(
                "digit at position {} is 0",
                pos + 1
            )));
        }
        Ok(DigitString(digits))
    }

    pub fn empty() -> Self {
        DigitString(Vec::new())
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(Self::empty());
        }
        let digits = text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<u64>()
                    .map_err(|_| Error::InvalidDigits(format!("not a digit: '{t}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(digits)
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn digits(&self) -> &[u64] {
        &self.0
    }

    pub fn push(&mut self, d: u64) {
        assert!(d >= 1);
        self.0.push(d);
    }

    pub fn extended(&self, d: u64) -> Self {
        let mut out = self.clone();
        out.push(d);
        out
    }
}

impl fmt::Display for DigitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// `I_n(ā)` with ordered endpoints.
#[derive(Debug, Clone)]
pub struct FundamentalInterval<S> {
    pub digits: DigitString,
    pub lo: S,
    pub hi: S,
}

impl<S: Scalar> FundamentalInterval<S> {
    pub fn length(&self) -> S {
        self.hi.clone() - self.lo.clone()
    }

    pub fn midpoint(&self) -> S {
        (self.lo.clone() + self.hi.clone()) / S::from_u64(2)
    }

    pub fn contains(&self, x: &S) -> bool {
        !x.certainly_lt(&self.lo) && !self.hi.certainly_lt(x)
    }

    /// Whether `other` lies inside `self`.
    pub fn encloses(&self, other: &FundamentalInterval<S>) -> bool {
        self.lo.certainly_le(&other.lo) && other.hi.certainly_le(&self.hi)
    }
}

/// Orders two endpoints, falling back to midpoints when enclosures overlap.
pub(crate) fn ordered<S: Scalar>(a: S, b: S) -> (S, S) {
    if b.certainly_lt(&a) || (!a.certainly_lt(&b) && b.midpoint() < a.midpoint()) {
        (b, a)
    } else {
        (a, b)
    }
}

fn check_unit<S: Scalar>(x: &S) -> Result<()> {
    if x.certainly_lt(&S::zero()) || S::one().certainly_lt(x) {
        return Err(Error::Domain(format!("{:?}", x)));
    }
    Ok(())
}

/// `f_{a_1}∘⋯∘f_{a_n}(x)`.
pub fn compose_map<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    digits: &DigitString,
    x: &S,
) -> Result<S> {
    check_unit(x)?;
    Ok(compose_unchecked(system, digits.digits(), x.clone()))
}

pub(crate) fn compose_unchecked<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    digits: &[u64],
    x: S,
) -> S {
    digits.iter().rev().fold(x, |acc, &d| system.map(d, &acc))
}

/// `I_n(ā)` as the image of [0,1], endpoints sorted by value.
pub fn fundamental_interval<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    digits: &DigitString,
) -> FundamentalInterval<S> {
    let a = compose_unchecked(system, digits.digits(), S::zero());
    let b = compose_unchecked(system, digits.digits(), S::one());
    let (lo, hi) = ordered(a, b);
    FundamentalInterval {
        digits: digits.clone(),
        lo,
        hi,
    }
}

/// The interval of the first `depth` digits drawn from `stream`.
pub fn natural_projection<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    stream: &mut dyn Iterator<Item = u64>,
    depth: usize,
) -> Result<FundamentalInterval<S>> {
    let mut digits = Vec::with_capacity(depth);
    for i in 0..depth {
        match stream.next() {
            Some(d) => digits.push(d),
            None => {
                return Err(Error::InvalidDigits(format!(
                    "stream ended after {i} digits"
                )))
            }
        }
    }
    Ok(fundamental_interval(system, &DigitString::new(digits)?))
}

/// The first `depth` digits of `x` under the inducing map.
pub fn digits_of<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    x: &S,
    depth: usize,
) -> Result<DigitString> {
    decode(system, x, depth, |y| system.inducing_digit(y))
}

/// As [`digits_of`], but rejects every endpoint of a fundamental interval of
/// depth at most `depth`.
pub fn digits_of_strict<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    x: &S,
    depth: usize,
) -> Result<DigitString> {
    decode(system, x, depth, |y| system.locate(y))
}

fn decode<S: Scalar, T: Iifs<S> + ?Sized>(
    system: &T,
    x: &S,
    depth: usize,
    digit: impl Fn(&S) -> Result<u64>,
) -> Result<DigitString> {
    check_unit(x)?;
    let mut y = x.clone();
    let mut out = Vec::with_capacity(depth);
    for position in 1..=depth {
        let d = match digit(&y) {
            Err(Error::Ambiguous { .. }) => return Err(Error::Ambiguous { position }),
            other => other?,
        };
        out.push(d);
        if position < depth {
            y = system.invert(d, &y)?;
        }
    }
    DigitString::new(out)
}

/// How the map of a long constant prefix `f_d^L` acts on sub-intervals.
#[derive(Debug, Clone, Serialize)]
pub enum FrameKind {
    /// The prefix is short enough to compose explicitly.
    Explicit { digits: Vec<u64> },
    /// `f_d^L(x) = (p_L + p_{L-1}x)/(q_L + q_{L-1}x)` with `q_{L-1}/q_L` in
    /// `[r_lo, r_hi]`.
    Mobius {
        #[serde(serialize_with = "crate::ser::rational")]
        r_lo: BigRational,
        #[serde(serialize_with = "crate::ser::rational")]
        r_hi: BigRational,
    },
    /// An affine prefix: length ratios are preserved exactly.
    Affine,
}

/// A constant prefix `(d, …, d)` of length `len` and what is known about it.
#[derive(Debug, Clone, Serialize)]
pub struct PrefixFrame {
    pub digit: u64,
    #[serde(serialize_with = "crate::ser::biguint")]
    pub len: BigUint,
    pub kind: FrameKind,
    /// Whether the prefix map is decreasing.
    pub reversing: bool,
    /// Upper bound on `ln |f_d^L([0,1])|`.
    pub ln_length_upper: f64,
    /// Lower bound on `ln |f_d^L([0,1])|`.
    pub ln_length_lower: f64,
}

/// Prefixes longer than this are not composed explicitly.
pub const EXPLICIT_PREFIX_CAP: u64 = 256;

fn explicit_frame<S: Scalar, T: Iifs<S> + ?Sized>(
    system: &T,
    digit: u64,
    len: &BigUint,
) -> Result<PrefixFrame> {
    let l = len
        .to_u64()
        .filter(|&l| l <= EXPLICIT_PREFIX_CAP)
        .ok_or_else(|| {
            Error::DepthOverflow(format!(
                "{} has no closed form for long prefixes; prefix length {len} exceeds {EXPLICIT_PREFIX_CAP}",
                system.label()
            ))
        })?;
    let digits = vec![digit; l as usize];
    let iv = fundamental_interval(system, &DigitString::new(digits.clone())?);
    let length_hi = iv.hi.rational_upper() - iv.lo.rational_lower();
    let length_lo = iv.hi.rational_lower() - iv.lo.rational_upper();
    let ln_length_lower = if length_lo.is_positive() {
        ln_bounds(&length_lo).0
    } else {
        f64::NEG_INFINITY
    };
    let reversing = (0..l).filter(|_| system.reverses(digit)).count() % 2 == 1;
    Ok(PrefixFrame {
        digit,
        len: len.clone(),
        kind: FrameKind::Explicit { digits },
        reversing,
        ln_length_upper: ln_bounds(&length_hi).1,
        ln_length_lower,
    })
}

/// Upper bound `⌊L/m⌋ · ln ρ` on the log-length of any depth-`L` interval,
/// valid when every branch has derivative at most 1 in modulus.
pub fn contraction_ln_bound(params: &SystemParams, len: &BigUint) -> f64 {
    let blocks = len / BigUint::from(params.m);
    let ln_rho_hi = ln_bounds(&params.rho).1;
    if blocks.is_zero() {
        return 0.0;
    }
    biguint_down(&blocks) * ln_rho_hi
}

fn rational_interval<S: Scalar>(
    a: &S,
    b: &S,
) -> (BigRational, BigRational, BigRational, BigRational) {
    (
        a.rational_lower(),
        a.rational_upper(),
        b.rational_lower(),
        b.rational_upper(),
    )
}

impl PrefixFrame {
    /// Bounds on `|F(inner)| / |F(outer)|` for the prefix map `F`, where
    /// `inner ⊆ outer ⊆ [0,1]` are given by their (unordered) endpoints.
    pub fn ratio_bounds<S: Scalar>(
        &self,
        system: &(impl Iifs<S> + ?Sized),
        outer: (&S, &S),
        inner: (&S, &S),
    ) -> (f64, f64) {
        let (lo, hi) = self.ratio_bounds_exact(system, outer, inner);
        (f64_down(&lo).max(0.0), f64_up(&hi))
    }

    /// As [`ratio_bounds`](Self::ratio_bounds) but returning rationals.
    pub fn ratio_bounds_exact<S: Scalar>(
        &self,
        system: &(impl Iifs<S> + ?Sized),
        outer: (&S, &S),
        inner: (&S, &S),
    ) -> (BigRational, BigRational) {
        match &self.kind {
            FrameKind::Explicit { digits } => {
                let image = |x: &S| compose_unchecked(system, digits, x.clone());
                let (a, b) = (image(outer.0), image(outer.1));
                let (c, d) = (image(inner.0), image(inner.1));
                let (olo, ohi) = length_bounds(&a, &b);
                let (ilo, ihi) = length_bounds(&c, &d);
                (safe_div(&ilo, &ohi), safe_div(&ihi, &olo))
            }
            FrameKind::Affine => {
                let (olo, ohi) = length_bounds(outer.0, outer.1);
                let (ilo, ihi) = length_bounds(inner.0, inner.1);
                (safe_div(&ilo, &ohi), safe_div(&ihi, &olo))
            }
            FrameKind::Mobius { r_lo, r_hi } => {
                let (olo, ohi) = length_bounds(outer.0, outer.1);
                let (ilo, ihi) = length_bounds(inner.0, inner.1);
                let base_lo = safe_div(&ilo, &ohi);
                let base_hi = safe_div(&ihi, &olo);
                // The distortion factor (1 + r a)(1 + r b) / ((1 + r c)(1 + r d))
                // is increasing in a, b and decreasing in c, d; r only enters
                // through a tiny enclosure, so numerator and denominator are
                // bounded separately.
                let (a_lo, a_hi, b_lo, b_hi) = rational_interval(outer.0, outer.1);
                let (c_lo, c_hi, d_lo, d_hi) = rational_interval(inner.0, inner.1);
                let one = BigRational::one();
                let term = |r: &BigRational, x: &BigRational| &one + r * x;
                let num_lo = term(r_lo, &a_lo) * term(r_lo, &b_lo);
                let num_hi = term(r_hi, &a_hi) * term(r_hi, &b_hi);
                let den_lo = term(r_lo, &c_lo) * term(r_lo, &d_lo);
                let den_hi = term(r_hi, &c_hi) * term(r_hi, &d_hi);
                (base_lo * num_lo / den_hi, base_hi * num_hi / den_lo)
            }
        }
    }

    /// Certified float bounds on `|F(inner)| / |F(outer)|`. Lengths are
    /// taken exactly; only the distortion factor of a Möbius prefix is
    /// evaluated in outward-rounded floating point, which makes this much
    /// cheaper than [`ratio_bounds_exact`](Self::ratio_bounds_exact).
    pub fn ratio_bounds_fast<S: Scalar>(
        &self,
        system: &(impl Iifs<S> + ?Sized),
        outer: (&S, &S),
        inner: (&S, &S),
    ) -> Bounds {
        self.ratio_bounds_against(system, outer, &self.outer_bounds(outer), inner)
    }

    /// The parts of [`ratio_bounds_fast`](Self::ratio_bounds_fast) that
    /// depend only on the outer interval, for reuse across many inner ones.
    pub fn outer_bounds<S: Scalar>(&self, outer: (&S, &S)) -> OuterBounds {
        OuterBounds {
            length: length_enclosure(outer.0, outer.1),
            factor: match &self.kind {
                FrameKind::Mobius { r_lo, r_hi } => {
                    let r = Bounds::new(f64_down(r_lo), f64_up(r_hi));
                    distortion_term(r, outer.0).mul(distortion_term(r, outer.1))
                }
                _ => Bounds::exact(1.0),
            },
        }
    }

    /// As [`ratio_bounds_fast`](Self::ratio_bounds_fast) with the outer
    /// interval's part precomputed by [`outer_bounds`](Self::outer_bounds).
    pub fn ratio_bounds_against<S: Scalar>(
        &self,
        system: &(impl Iifs<S> + ?Sized),
        outer: (&S, &S),
        pre: &OuterBounds,
        inner: (&S, &S),
    ) -> Bounds {
        let r = match &self.kind {
            FrameKind::Mobius { r_lo, r_hi } => Bounds::new(f64_down(r_lo), f64_up(r_hi)),
            FrameKind::Explicit { .. } => {
                let (lo, hi) = self.ratio_bounds_exact(system, outer, inner);
                return Bounds::new(f64_down(&lo), f64_up(&hi));
            }
            FrameKind::Affine => return length_quotient(pre.length, length_enclosure(inner.0, inner.1)),
        };
        let den = distortion_term(r, inner.0).mul(distortion_term(r, inner.1));
        let base = length_quotient(pre.length, length_enclosure(inner.0, inner.1));
        if base.hi.is_infinite() {
            return base;
        }
        base.mul(pre.factor).div_positive(den)
    }

    /// Upper bound on `ln |F(J)|` for `J` with the given endpoints.
    pub fn ln_length_upper_of<S: Scalar>(
        &self,
        system: &(impl Iifs<S> + ?Sized),
        a: &S,
        b: &S,
    ) -> f64 {
        let (_, hi) = self.ratio_bounds_exact(system, (&S::zero(), &S::one()), (a, b));
        if hi.is_zero() {
            return f64::NEG_INFINITY;
        }
        let (_, ln_hi) = ln_bounds(&hi);
        let v = self.ln_length_upper + ln_hi;
        v.next_up()
    }

    /// Lower bound on `ln |F(J)|` for `J` with the given endpoints.
    pub fn ln_length_lower_of<S: Scalar>(
        &self,
        system: &(impl Iifs<S> + ?Sized),
        a: &S,
        b: &S,
    ) -> f64 {
        let (lo, _) = self.ratio_bounds_exact(system, (&S::zero(), &S::one()), (a, b));
        if !lo.is_positive() {
            return f64::NEG_INFINITY;
        }
        (self.ln_length_lower + ln_bounds(&lo).0).next_down()
    }
}

/// Bounds on `|inner| / |outer|`.
/// Per-outer-interval data for [`PrefixFrame::ratio_bounds_against`].
#[derive(Debug, Clone, Copy)]
pub struct OuterBounds {
    length: Bounds,
    factor: Bounds,
}

/// `1 + r x` for `x` given as a scalar.
fn distortion_term<S: Scalar>(r: Bounds, x: &S) -> Bounds {
    let (lo, hi) = x.f64_bounds();
    Bounds::exact(1.0).add(r.mul(Bounds::new(lo, hi)))
}

fn length_enclosure<S: Scalar>(a: &S, b: &S) -> Bounds {
    let (lo, hi) = length_bounds(a, b);
    Bounds::new(f64_down(&lo), f64_up(&hi))
}

fn length_quotient(outer: Bounds, inner: Bounds) -> Bounds {
    if outer.lo <= 0.0 {
        return Bounds::new(inner.lo.min(0.0), f64::INFINITY);
    }
    inner.div_positive(outer)
}

/// Bounds on `|b - a|`.
fn length_bounds<S: Scalar>(a: &S, b: &S) -> (BigRational, BigRational) {
    let (a_lo, a_hi) = (a.rational_lower(), a.rational_upper());
    let (b_lo, b_hi) = (b.rational_lower(), b.rational_upper());
    let d1 = &b_lo - &a_hi;
    let d2 = &a_lo - &b_hi;
    let lo = if d1.is_positive() {
        d1
    } else if d2.is_positive() {
        d2
    } else {
        BigRational::zero()
    };
    let hi = Signed::abs(&(&b_hi - &a_lo)).max(Signed::abs(&(&a_hi - &b_lo)));
    (lo, hi)
}

fn safe_div(a: &BigRational, b: &BigRational) -> BigRational {
    if b.is_zero() {
        // unbounded ratio; only reachable with degenerate enclosures
        BigRational::from_integer(u64::MAX.into())
    } else {
        a / b
    }
}

/// Evenly spaced grid `{j/k : 0 ≤ j ≤ k}`.
pub fn uniform_grid<S: Scalar>(k: u64) -> Vec<S> {
    (0..=k).map(|j| S::from_ratio(j, k)).collect()
}

/// All strings of the given depth with digits in `1..=max_digit`.
pub fn all_strings(depth: usize, max_digit: u64) -> Vec<DigitString> {
    let mut out = vec![Vec::new()];
    for _ in 0..depth {
        out = out
            .into_iter()
            .flat_map(|p| {
                (1..=max_digit).map(move |d| {
                    let mut q = p.clone();
                    q.push(d);
                    q
                })
            })
            .collect();
    }
    out.into_iter().map(DigitString).collect()
}

/// Seeded random strings with digits in `1..=max_digit`.
pub fn random_strings(depth: usize, max_digit: u64, count: usize, seed: u64) -> Vec<DigitString> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| DigitString((0..depth).map(|_| rng.gen_range(1..=max_digit)).collect()))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub m: usize,
    pub declared_rho: f64,
    /// Largest sampled `|(f_{a_1}∘⋯∘f_{a_m})'(x)|` (upper bound per sample).
    pub measured_sup: f64,
    pub witness_digits: Vec<u64>,
    pub witness_x: f64,
    /// A sample where the derivative vanished, if any.
    pub zero_derivative: Option<(Vec<u64>, f64)>,
    pub samples: usize,
    pub passes: bool,
}

/// Derivative of `f_{a_1}∘⋯∘f_{a_n}` at `x` by the chain rule.
pub fn composite_derivative<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    digits: &[u64],
    x: &S,
) -> S {
    let mut y = x.clone();
    let mut acc = S::one();
    for &d in digits.iter().rev() {
        acc = acc * system.derivative(d, &y);
        y = system.map(d, &y);
    }
    acc
}

/// Samples `|(f_{a_1}∘⋯∘f_{a_m})'|` over all `m`-tuples with digits up to
/// `horizon` and the given grid.
pub fn verify_contraction<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    grid: &[S],
    horizon: u64,
) -> Result<ContractionReport> {
    if grid.is_empty() || horizon == 0 {
        return Err(Error::InvalidInput(
            "empty sample grid or digit horizon".into(),
        ));
    }
    let params = system.params();
    let m = params.m;
    let tails: Vec<Vec<u64>> = all_strings(m - 1, horizon)
        .into_iter()
        .map(|s| s.0)
        .collect();
    type Best = (f64, Vec<u64>, f64, Option<(Vec<u64>, f64)>);
    let per_first: Vec<Best> = (1..=horizon)
        .into_par_iter()
        .map(|a1| {
            let mut best: Best = (f64::NEG_INFINITY, Vec::new(), 0.0, None);
            for tail in &tails {
                let mut digits = Vec::with_capacity(m);
                digits.push(a1);
                digits.extend_from_slice(tail);
                for x in grid {
                    let dv = composite_derivative(system, &digits, x).abs();
                    if best.3.is_none() && dv.is_exact_zero() {
                        best.3 = Some((digits.clone(), x.midpoint()));
                    }
                    let v = dv.upper();
                    if v > best.0 {
                        best = (v, digits.clone(), x.midpoint(), best.3.take());
                    }
                }
            }
            best
        })
        .collect();
    let mut best: Best = (f64::NEG_INFINITY, Vec::new(), 0.0, None);
    let mut zero = None;
    for cand in per_first {
        if zero.is_none() {
            zero = cand.3.clone();
        }
        if cand.0 > best.0 {
            best = cand;
        }
    }
    let declared = params.rho_f64();
    let passes = zero.is_none() && best.0 <= declared;
    Ok(ContractionReport {
        m,
        declared_rho: declared,
        measured_sup: best.0,
        witness_digits: best.1,
        witness_x: best.2,
        zero_derivative: zero,
        samples: horizon.pow(m as u32) as usize * grid.len(),
        passes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortionReport {
    pub declared_kappa: f64,
    /// Largest `sup_x |f_ā'(x)| / inf_y |f_ā'(y)|` over the sampled strings.
    pub measured: f64,
    /// True when every sampled ratio was exactly 1.
    pub exactly_one: bool,
    pub witness: Vec<u64>,
    pub strings: usize,
    pub passes: bool,
}

/// Empirical bounded-distortion constant over sampled strings and grid points.
pub fn estimate_distortion<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    strings: &[DigitString],
    grid: &[S],
) -> Result<DistortionReport> {
    if grid.is_empty() || strings.is_empty() {
        return Err(Error::InvalidInput("empty sample set".into()));
    }
    let ratios: Vec<(BigRational, Vec<u64>)> = strings
        .par_iter()
        .map(|s| {
            let values: Vec<S> = grid
                .iter()
                .map(|x| composite_derivative(system, s.digits(), x).abs())
                .collect();
            let hi = values.iter().map(|v| v.rational_upper()).max().unwrap();
            let lo = values.iter().map(|v| v.rational_lower()).min().unwrap();
            let ratio = if lo.is_zero() {
                BigRational::from_integer(u64::MAX.into())
            } else {
                hi / lo
            };
            (ratio, s.digits().to_vec())
        })
        .collect();
    let mut best = (BigRational::zero(), Vec::new());
    for r in ratios {
        if r.0 > best.0 {
            best = r;
        }
    }
    let params = system.params();
    let exactly_one = best.0 == BigRational::one();
    Ok(DistortionReport {
        declared_kappa: params.kappa_f64(),
        measured: f64_up(&best.0),
        exactly_one,
        witness: best.1,
        strings: strings.len(),
        passes: best.0 <= params.kappa,
    })
}

/// Fitted constants of the regularity sandwich
/// `c1 / ξ_n^{1+ε} ≤ |f_n'(x)| ≤ c2 / ξ_n^{1-ε}`.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityFit {
    pub epsilon: f64,
    pub c1: f64,
    pub c2: f64,
    pub sample_count: usize,
    pub digit_horizon: u64,
    /// Whether the sandwich was re-checked on every sample.
    pub verified: bool,
}

/// Largest `c1` and smallest `c2` consistent with every sample (rounded
/// outward so the sandwich holds with the reported constants).
pub fn fit_regularity<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    epsilon: f64,
    horizon: u64,
    grid: &[S],
) -> Result<RegularityFit> {
    if grid.is_empty() || horizon == 0 {
        return Err(Error::InvalidInput(
            "empty sample grid or digit horizon".into(),
        ));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let xi = system.xi();
    let logs: Vec<(f64, f64, f64, f64)> = (1..=horizon)
        .into_par_iter()
        .map(|n| {
            let ln_xi = xi.ln_of(n);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for x in grid {
                let dv = system.derivative(n, x).abs();
                let l = ln_lower(&dv.rational_lower());
                let h = ln_bounds(&dv.rational_upper()).1;
                lo = lo.min(l);
                hi = hi.max(h);
            }
            (
                lo + (1.0 + epsilon) * ln_xi,
                hi + (1.0 - epsilon) * ln_xi,
                lo,
                ln_xi,
            )
        })
        .collect();
    let ln_c1 = logs.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let ln_c2 = logs.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    // widen to absorb the rounding of ln ξ
    let c1 = exp_down(ln_c1 - 1e-12 * ln_c1.abs().max(1.0));
    let c2 = exp_up(ln_c2 + 1e-12 * ln_c2.abs().max(1.0));
    let verified = logs
        .iter()
        .all(|&(_, _, ln_lo, ln_xi)| c1.ln() - (1.0 + epsilon) * ln_xi <= ln_lo + 1e-9);
    Ok(RegularityFit {
        epsilon,
        c1,
        c2,
        sample_count: horizon as usize * grid.len(),
        digit_horizon: horizon,
        verified,
    })
}

fn ln_lower(r: &BigRational) -> f64 {
    if r.is_positive() {
        ln_bounds(r).0
    } else {
        f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OpenSetReport {
    pub depth: usize,
    pub intervals: usize,
    pub passes: bool,
    pub witness: Option<(Vec<u64>, Vec<u64>)>,
}

/// Checks that the depth-`n` intervals with digits up to `max_digit` have
/// pairwise disjoint interiors.
pub fn verify_open_set<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    depth: usize,
    max_digit: u64,
) -> OpenSetReport {
    let mut ivs: Vec<FundamentalInterval<S>> = all_strings(depth, max_digit)
        .par_iter()
        .map(|s| fundamental_interval(system, s))
        .collect();
    ivs.sort_by(|a, b| a.lo.midpoint().partial_cmp(&b.lo.midpoint()).unwrap());
    let mut witness = None;
    for w in ivs.windows(2) {
        if !w[0].hi.certainly_le(&w[1].lo) {
            witness = Some((w[0].digits.0.clone(), w[1].digits.0.clone()));
            break;
        }
    }
    OpenSetReport {
        depth,
        intervals: ivs.len(),
        passes: witness.is_none(),
        witness,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundTripReport {
    pub depth: usize,
    pub strings: usize,
    pub failures: Vec<Vec<u64>>,
    pub passes: bool,
}

/// Decodes the midpoint of each fundamental interval and compares digits.
pub fn verify_round_trip<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    strings: &[DigitString],
) -> RoundTripReport {
    let failures: Vec<Vec<u64>> = strings
        .par_iter()
        .filter_map(|s| {
            let iv = fundamental_interval(system, s);
            match digits_of(system, &iv.midpoint(), s.depth()) {
                Ok(back) if &back == s => None,
                _ => Some(s.0.clone()),
            }
        })
        .collect();
    let depth = strings.first().map(|s| s.depth()).unwrap_or(0);
    RoundTripReport {
        depth,
        strings: strings.len(),
        passes: failures.is_empty(),
        failures,
    }
}
