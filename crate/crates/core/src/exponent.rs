//! Digit sets, ξ-sequences and the convergence exponents s₀(D;ξ) and τ(D).
//!
//! The estimator is the classical identity
//! `s₀ = limsup_k ln k / ln ξ_{d_k}`, proxied by the supremum over the upper
//! half-window `[⌈K/2⌉, K]`. Logarithms of digits are carried structurally
//! (`ln k²` is stored as `2·ln k`) so that the reference values 1/2 and 1/4
//! come out exactly in floating point.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;
use std::sync::RwLock;

/// The `k`-th element of a digit set together with its logarithm.
///
/// `value` is `None` when the digit does not fit in a `u64` (large powers);
/// the logarithm is always available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DigitValue {
    pub value: Option<u64>,
    pub ln: f64,
}

impl DigitValue {
    fn plain(v: u64) -> Self {
        DigitValue {
            value: Some(v),
            ln: (v as f64).ln(),
        }
    }

    pub fn require(&self) -> Result<u64> {
        self.value
            .ok_or_else(|| Error::Unsupported("digit too large for 64-bit arithmetic".into()))
    }
}

/// Sieve-backed enumeration of the primes, grown on demand.
#[derive(Debug, Default)]
pub struct PrimeTable {
    primes: RwLock<Vec<u64>>,
}

impl Clone for PrimeTable {
    fn clone(&self) -> Self {
        PrimeTable {
            primes: RwLock::new(self.primes.read().unwrap().clone()),
        }
    }
}

impl PrimeTable {
    fn ensure(&self, count: usize) {
        if self.primes.read().unwrap().len() >= count {
            return;
        }
        let mut guard = self.primes.write().unwrap();
        if guard.len() >= count {
            return;
        }
        // p_k < k (ln k + ln ln k) for k >= 6
        let n = count.max(6) as f64;
        let bound = (n * (n.ln() + n.ln().ln())) as usize + 16;
        let mut composite = vec![false; bound + 1];
        let mut out = Vec::with_capacity(count);
        for i in 2..=bound {
            if !composite[i] {
                out.push(i as u64);
                let mut j = i * i;
                while j <= bound {
                    composite[j] = true;
                    j += i;
                }
            }
        }
        *guard = out;
    }

    fn nth(&self, k: usize) -> u64 {
        self.ensure(k);
        self.primes.read().unwrap()[k - 1]
    }

    fn contains(&self, n: u64) -> bool {
        if n < 2 {
            return false;
        }
        let mut d = 2;
        while d * d <= n {
            if n % d == 0 {
                return false;
            }
            d += 1;
        }
        true
    }
}

/// A subset D ⊆ ℕ listed increasingly as d₁ < d₂ < ⋯.
#[derive(Debug, Clone)]
pub enum DigitSet {
    All,
    Squares,
    Cubes,
    Primes(PrimeTable),
    /// `{b^k : k ≥ 1}`
    Powers(u64),
    /// `{a, a+q, a+2q, …}`
    Arithmetic {
        start: u64,
        step: u64,
    },
    /// A finite list; rejected wherever the theory needs an infinite D.
    Finite(Vec<u64>),
}

impl DigitSet {
    pub fn primes() -> Self {
        DigitSet::Primes(PrimeTable::default())
    }

    pub fn finite(mut digits: Vec<u64>) -> Result<Self> {
        if digits.is_empty() || digits[0] == 0 {
            return Err(Error::InvalidInput(
                "digit list must be non-empty and positive".into(),
            ));
        }
        let sorted = digits.windows(2).all(|w| w[0] < w[1]);
        if !sorted {
            digits.sort_unstable();
            digits.dedup();
        }
        Ok(DigitSet::Finite(digits))
    }

    /// Parses `all`, `squares`, `cubes`, `primes`, `powers:b`,
    /// `arithmetic:a,q`, `file=<path>` or an inline list `list:1,2,5`.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown digit set '{spec}'"));
        match spec {
            "all" | "naturals" => return Ok(DigitSet::All),
            "squares" => return Ok(DigitSet::Squares),
            "cubes" => return Ok(DigitSet::Cubes),
            "primes" => return Ok(DigitSet::primes()),
            _ => {}
        }
        if let Some(b) = spec.strip_prefix("powers:") {
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if b < 2 {
                return Err(Error::InvalidInput("powers base must be at least 2".into()));
            }
            return Ok(DigitSet::Powers(b));
        }
        if let Some(rest) = spec.strip_prefix("arithmetic:") {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 2 {
                return Err(bad());
            }
            let start: u64 = parts[0].trim().parse().map_err(|_| bad())?;
            let step: u64 = parts[1].trim().parse().map_err(|_| bad())?;
            if start == 0 || step == 0 {
                return Err(Error::InvalidInput(
                    "arithmetic start and step must be positive".into(),
                ));
            }
            return Ok(DigitSet::Arithmetic { start, step });
        }
        if let Some(rest) = spec.strip_prefix("list:") {
            let digits = parse_integer_list(rest.replace(',', " ").as_str())?;
            return DigitSet::finite(digits);
        }
        if let Some(path) = spec.strip_prefix("file=") {
            return DigitSet::from_file(Path::new(path));
        }
        Err(bad())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        DigitSet::finite(parse_integer_list(&text)?)
    }

    pub fn label(&self) -> String {
        match self {
            DigitSet::All => "all".into(),
            DigitSet::Squares => "squares".into(),
            DigitSet::Cubes => "cubes".into(),
            DigitSet::Primes(_) => "primes".into(),
            DigitSet::Powers(b) => format!("powers:{b}"),
            DigitSet::Arithmetic { start, step } => format!("arithmetic:{start},{step}"),
            DigitSet::Finite(d) => {
                let items: Vec<String> = d.iter().map(|x| x.to_string()).collect();
                format!("list:{}", items.join(","))
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, DigitSet::Finite(_))
    }

    /// Number of elements, `None` when infinite.
    pub fn len(&self) -> Option<usize> {
        match self {
            DigitSet::Finite(d) => Some(d.len()),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The `k`-th element (1-based).
    pub fn nth(&self, k: usize) -> Result<DigitValue> {
        if k == 0 {
            return Err(Error::InvalidInput("digit sets are indexed from 1".into()));
        }
        let kf = k as f64;
        Ok(match self {
            DigitSet::All => DigitValue {
                value: Some(k as u64),
                ln: kf.ln(),
            },
            DigitSet::Squares => DigitValue {
                value: (k as u64).checked_mul(k as u64),
                ln: 2.0 * kf.ln(),
            },
            DigitSet::Cubes => DigitValue {
                value: (k as u64).checked_pow(3),
                ln: 3.0 * kf.ln(),
            },
            DigitSet::Primes(table) => DigitValue::plain(table.nth(k)),
            DigitSet::Powers(b) => DigitValue {
                value: u32::try_from(k).ok().and_then(|e| b.checked_pow(e)),
                ln: kf * (*b as f64).ln(),
            },
            DigitSet::Arithmetic { start, step } => {
                let v = (k as u64 - 1)
                    .checked_mul(*step)
                    .and_then(|x| x.checked_add(*start))
                    .ok_or_else(|| Error::Unsupported("arithmetic digit overflows".into()))?;
                DigitValue::plain(v)
            }
            DigitSet::Finite(d) => match d.get(k - 1) {
                Some(&v) => DigitValue::plain(v),
                None => {
                    return Err(Error::InvalidInput(format!(
                        "finite digit set has only {} elements, asked for element {k}",
                        d.len()
                    )))
                }
            },
        })
    }

    /// `d_k` as an integer.
    pub fn nth_value(&self, k: usize) -> Result<u64> {
        self.nth(k)?.require()
    }

    pub fn min(&self) -> u64 {
        self.nth_value(1).expect("first digit fits")
    }

    pub fn contains(&self, n: u64) -> bool {
        match self {
            DigitSet::All => n >= 1,
            DigitSet::Squares => {
                let r = (n as f64).sqrt().round() as u64;
                n >= 1 && (r.saturating_sub(1)..=r + 1).any(|x| x.checked_mul(x) == Some(n))
            }
            DigitSet::Cubes => {
                let r = (n as f64).cbrt().round() as u64;
                n >= 1 && (r.saturating_sub(1)..=r + 1).any(|x| x.checked_pow(3) == Some(n))
            }
            DigitSet::Primes(t) => t.contains(n),
            DigitSet::Powers(b) => {
                let mut x = *b;
                loop {
                    if x == n {
                        return true;
                    }
                    match x.checked_mul(*b) {
                        Some(y) if y <= n => x = y,
                        _ => return false,
                    }
                }
            }
            DigitSet::Arithmetic { start, step } => n >= *start && (n - start) % step == 0,
            DigitSet::Finite(d) => d.binary_search(&n).is_ok(),
        }
    }

    /// Number of elements `≤ bound`, together with the elements themselves.
    pub fn up_to(&self, bound: u64) -> Vec<u64> {
        let mut out = Vec::new();
        let mut k = 1;
        while let Ok(dv) = self.nth(k) {
            match dv.value {
                Some(v) if v <= bound => out.push(v),
                _ => break,
            }
            k += 1;
        }
        out
    }
}

fn parse_integer_list(text: &str) -> Result<Vec<u64>> {
    text.split_whitespace()
        .filter(|t| !t.starts_with('#'))
        .map(|t| {
            t.parse::<u64>()
                .map_err(|_| Error::InvalidInput(format!("not a positive integer: '{t}'")))
        })
        .collect()
}

/// Lengths `r_n − l_n` of a generalised Lüroth partition: an explicit head
/// followed by a geometric tail `tail_first · tail_ratio^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlsLengths {
    pub head: Vec<BigRational>,
    pub tail_first: BigRational,
    pub tail_ratio: BigRational,
}

impl GlsLengths {
    pub fn dyadic() -> Self {
        let half = BigRational::new(1.into(), 2.into());
        GlsLengths {
            head: Vec::new(),
            tail_first: half.clone(),
            tail_ratio: half,
        }
    }

    /// Head lengths followed by a tail that halves the remaining mass at each step.
    pub fn with_halving_tail(head: Vec<BigRational>) -> Result<Self> {
        let total: BigRational = head.iter().cloned().fold(BigRational::zero(), |a, b| a + b);
        let rest = BigRational::one() - total;
        if rest <= BigRational::zero() {
            return Err(Error::InvalidInput(
                "GLS head lengths leave no room for infinitely many digits".into(),
            ));
        }
        let half = BigRational::new(1.into(), 2.into());
        let lengths = GlsLengths {
            head,
            tail_first: rest * &half,
            tail_ratio: half,
        };
        lengths.validate()?;
        Ok(lengths)
    }

    pub fn validate(&self) -> Result<()> {
        let zero = BigRational::zero();
        if self.head.iter().any(|l| *l <= zero) || self.tail_first <= zero {
            return Err(Error::InvalidInput("GLS lengths must be positive".into()));
        }
        if self.tail_ratio <= zero || self.tail_ratio >= BigRational::one() {
            return Err(Error::InvalidInput(
                "GLS tail ratio must lie in (0,1)".into(),
            ));
        }
        let mut prev: Option<&BigRational> = None;
        for l in self.head.iter().chain(std::iter::once(&self.tail_first)) {
            if let Some(p) = prev {
                if l > p {
                    return Err(Error::InvalidInput(
                        "GLS lengths must be non-increasing".into(),
                    ));
                }
            }
            prev = Some(l);
        }
        let head_total: BigRational = self.head.iter().cloned().fold(zero, |a, b| a + b);
        let tail_total = &self.tail_first / (BigRational::one() - &self.tail_ratio);
        if head_total + tail_total != BigRational::one() {
            return Err(Error::InvalidInput("GLS lengths must sum to 1".into()));
        }
        Ok(())
    }

    /// `r_n − l_n` for `n ≥ 1`.
    pub fn length(&self, n: u64) -> BigRational {
        let i = (n - 1) as usize;
        if i < self.head.len() {
            return self.head[i].clone();
        }
        let j = (i - self.head.len()) as i32;
        &self.tail_first * num_traits::pow::Pow::pow(&self.tail_ratio, j as u32)
    }

    /// `ln(r_n − l_n)` without forming the rational for far-out digits.
    pub fn ln_length(&self, n: u64) -> f64 {
        let i = (n - 1) as usize;
        if i < self.head.len() {
            return crate::rigor::ln_bounds(&self.head[i]).0;
        }
        let j = (i - self.head.len()) as f64;
        rational_ln(&self.tail_first) + j * rational_ln(&self.tail_ratio)
    }

    /// Mass of the first `n` intervals.
    pub fn cumulative(&self, n: u64) -> BigRational {
        let h = self.head.len() as u64;
        let mut total: BigRational = self
            .head
            .iter()
            .take(n as usize)
            .cloned()
            .fold(BigRational::zero(), |a, b| a + b);
        if n > h {
            let j = (n - h) as u32;
            let one = BigRational::one();
            let geom =
                (&one - num_traits::pow::Pow::pow(&self.tail_ratio, j)) / (&one - &self.tail_ratio);
            total += &self.tail_first * geom;
        }
        total
    }
}

fn rational_ln(r: &BigRational) -> f64 {
    let (lo, hi) = crate::rigor::ln_bounds(r);
    0.5 * (lo + hi)
}

/// The regularity scale ξ = (ξ_n).
#[derive(Debug, Clone, PartialEq)]
pub enum XiSequence {
    /// `ξ_n = n^d`
    Power(u32),
    /// `ξ_n = n(n+1)`
    Pronic,
    /// `ξ_n = 1/(r_n − l_n)` for a generalised Lüroth partition.
    Gls(GlsLengths),
}

impl XiSequence {
    pub fn label(&self) -> String {
        match self {
            XiSequence::Power(d) => format!("n^{d}"),
            XiSequence::Pronic => "n(n+1)".into(),
            XiSequence::Gls(_) => "1/(r_n-l_n)".into(),
        }
    }

    /// `ln ξ_d` for a digit carried with its logarithm.
    pub fn ln_at(&self, d: &DigitValue) -> f64 {
        match self {
            XiSequence::Power(p) => *p as f64 * d.ln,
            XiSequence::Pronic => match d.value {
                Some(v) => d.ln + ((v + 1) as f64).ln(),
                None => 2.0 * d.ln,
            },
            XiSequence::Gls(lengths) => match d.value {
                Some(v) => -lengths.ln_length(v),
                None => f64::INFINITY,
            },
        }
    }

    pub fn ln_of(&self, n: u64) -> f64 {
        self.ln_at(&DigitValue::plain(n))
    }

    /// ξ_n as an exact rational.
    pub fn exact(&self, n: u64) -> BigRational {
        match self {
            XiSequence::Power(p) => BigRational::from_integer(BigInt::from(n).pow(*p)),
            XiSequence::Pronic => BigRational::from_integer(BigInt::from(n) * BigInt::from(n + 1)),
            XiSequence::Gls(lengths) => lengths.length(n).recip(),
        }
    }

    pub fn value(&self, n: u64) -> f64 {
        self.exact(n).to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn is_nondecreasing(&self) -> bool {
        true
    }
}

/// Result of a window-sup exponent estimate.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentEstimate {
    pub value: f64,
    pub horizon: usize,
    pub window: (usize, usize),
    /// Index in the window where the supremum is attained.
    pub argmax: usize,
    /// Sampled `(k, ln k / ln ξ_{d_k})` rows across the window.
    pub diagnostics: Vec<(usize, f64)>,
}

/// Estimate of s₀(D;ξ) from the first `horizon` digits.
pub fn s0_estimate(digits: &DigitSet, xi: &XiSequence, horizon: usize) -> Result<ExponentEstimate> {
    if horizon < 4 {
        return Err(Error::InvalidInput("horizon must be at least 4".into()));
    }
    if let Some(n) = digits.len() {
        if n < horizon {
            return Err(Error::InvalidInput(format!(
                "finite digit set has {n} elements, fewer than the horizon {horizon}"
            )));
        }
    }
    let lo = horizon.div_ceil(2);
    if let DigitSet::Primes(t) = digits {
        t.ensure(horizon);
    }
    let ratios: Vec<(usize, f64)> = (lo..=horizon)
        .into_par_iter()
        .map(|k| -> Result<(usize, f64)> {
            let d = digits.nth(k)?;
            let ln_xi = xi.ln_at(&d);
            if !(ln_xi > 0.0) {
                return Err(Error::UndefinedRatio { k, xi: ln_xi.exp() });
            }
            Ok((k, (k as f64).ln() / ln_xi))
        })
        .collect::<Result<Vec<_>>>()?;
    let (argmax, value) = ratios
        .iter()
        .copied()
        .fold((lo, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    let stride = (ratios.len() / 16).max(1);
    let mut diagnostics: Vec<(usize, f64)> = ratios.iter().step_by(stride).copied().collect();
    if diagnostics.last().map(|r| r.0) != Some(horizon) {
        diagnostics.push(*ratios.last().unwrap());
    }
    Ok(ExponentEstimate {
        value,
        horizon,
        window: (lo, horizon),
        argmax,
        diagnostics,
    })
}

/// Estimate of τ(D), the exponent of convergence of Σ_{n∈D} n^{-s}.
pub fn tau_estimate(digits: &DigitSet, horizon: usize) -> Result<ExponentEstimate> {
    s0_estimate(digits, &XiSequence::Power(1), horizon)
}

/// `Σ_{k≤K} ξ_{d_k}^{-s}` with compensated summation.
pub fn partial_sum(digits: &DigitSet, xi: &XiSequence, s: f64, horizon: usize) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::InvalidInput("exponent must be non-negative".into()));
    }
    if s == 0.0 {
        return Ok(horizon as f64);
    }
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for k in 1..=horizon {
        let term = (-s * xi.ln_at(&digits.nth(k)?)).exp();
        let t = sum + term;
        if sum.abs() >= term.abs() {
            carry += (sum - t) + term;
        } else {
            carry += (term - t) + sum;
        }
        sum = t;
    }
    Ok(sum + carry)
}

/// Growth diagnostic for the partial sums: `(S_K, S_2K, S_2K / S_K)`.
pub fn partial_sum_growth(
    digits: &DigitSet,
    xi: &XiSequence,
    s: f64,
    horizon: usize,
) -> Result<(f64, f64, f64)> {
    let a = partial_sum(digits, xi, s, horizon)?;
    let b = partial_sum(digits, xi, s, 2 * horizon)?;
    Ok((a, b, b / a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn naturals_and_squares_are_exact() {
        let sq = XiSequence::Power(2);
        let a = s0_estimate(&DigitSet::All, &sq, 100_000).unwrap();
        assert_eq!(a.value, 0.5);
        let b = s0_estimate(&DigitSet::Squares, &sq, 100_000).unwrap();
        assert_eq!(b.value, 0.25);
        assert_eq!(tau_estimate(&DigitSet::All, 1000).unwrap().value, 1.0);
        assert_eq!(tau_estimate(&DigitSet::Squares, 1000).unwrap().value, 0.5);
    }

    #[test]
    fn powers_of_two_are_negligible() {
        let est = s0_estimate(&DigitSet::Powers(2), &XiSequence::Power(2), 100_000).unwrap();
        // ln k / (2 k ln 2) is decreasing, so the sup sits at the window start
        let k = 50_000f64;
        assert!((est.value - k.ln() / (2.0 * k * 2f64.ln())).abs() < 1e-15);
        assert!(est.value < 1e-3);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            s0_estimate(&DigitSet::All, &XiSequence::Power(2), 3),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            s0_estimate(&DigitSet::All, &XiSequence::Power(0), 10),
            Err(Error::UndefinedRatio { .. })
        ));
        assert!(s0_estimate(
            &DigitSet::parse("list:1,2,3").unwrap(),
            &XiSequence::Power(2),
            4
        )
        .is_err());
    }

    #[test]
    fn basel_partial_sum() {
        let s = partial_sum(&DigitSet::All, &XiSequence::Power(2), 1.0, 10_000).unwrap();
        assert!((s - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-4);
        assert_eq!(
            partial_sum(&DigitSet::Squares, &XiSequence::Power(2), 0.0, 77).unwrap(),
            77.0
        );
    }

    #[test]
    fn harmonic_boundary_growth() {
        let (a, b, _) =
            partial_sum_growth(&DigitSet::Squares, &XiSequence::Power(2), 0.25, 5000).unwrap();
        // terms are 1/k, so doubling K adds about ln 2
        assert!((b - a - 2f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn digit_set_parsing_and_membership() {
        let p = DigitSet::parse("primes").unwrap();
        assert_eq!(p.nth_value(1).unwrap(), 2);
        assert_eq!(p.nth_value(10).unwrap(), 29);
        assert!(p.contains(97) && !p.contains(91));
        let a = DigitSet::parse("arithmetic:3,4").unwrap();
        assert_eq!(a.nth_value(3).unwrap(), 11);
        assert!(a.contains(11) && !a.contains(12));
        assert!(DigitSet::parse("powers:3").unwrap().contains(81));
        assert!(DigitSet::parse("cubes").unwrap().contains(27));
        assert!(DigitSet::parse("list:5,2,9").unwrap().is_finite());
        assert!(DigitSet::parse("bogus").is_err());
        assert_eq!(DigitSet::Squares.up_to(30), vec![1, 4, 9, 16, 25]);
    }

    #[test]
    fn gls_lengths() {
        let d = GlsLengths::dyadic();
        d.validate().unwrap();
        assert_eq!(d.length(3), BigRational::new(1.into(), 8.into()));
        assert_eq!(d.cumulative(2), BigRational::new(3.into(), 4.into()));
        assert_eq!(
            XiSequence::Gls(d.clone()).exact(5),
            BigRational::from_integer(32.into())
        );
        assert!((XiSequence::Gls(d).ln_of(40) - 40.0 * 2f64.ln()).abs() < 1e-12);
        let third = BigRational::new(1.into(), 3.into());
        let g = GlsLengths::with_halving_tail(vec![third.clone(), third]).unwrap();
        assert_eq!(g.length(3), BigRational::new(1.into(), 6.into()));
        assert!(
            GlsLengths::with_halving_tail(vec![BigRational::new(1.into(), 10.into())]).is_err()
        );
    }

    proptest! {
        #[test]
        fn doubling_identity_is_exact(start in 1u64..50, step in 1u64..20, k in 8usize..2000) {
            let d = DigitSet::Arithmetic { start: start + 1, step };
            let s0 = s0_estimate(&d, &XiSequence::Power(2), k).unwrap();
            let tau = tau_estimate(&d, k).unwrap();
            prop_assert_eq!(2.0 * s0.value, tau.value);
        }

        #[test]
        fn subsets_never_raise_the_estimate(step in 1u64..10, k in 8usize..3000) {
            let sub = DigitSet::Arithmetic { start: 2, step: step + 1 };
            let sup = DigitSet::Arithmetic { start: 2, step: 1 };
            let a = s0_estimate(&sub, &XiSequence::Power(2), k).unwrap().value;
            let b = s0_estimate(&sup, &XiSequence::Power(2), k).unwrap().value;
            prop_assert!(a <= b);
        }
    }
}
