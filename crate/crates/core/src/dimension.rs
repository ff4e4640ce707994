//! Cover sums `Σ |I_n(ā)|^s` over admissible digit strings and the
//! exponents at which they cross 1.
//!
//! These are finite-depth estimates: for a fixed finite alphabet the
//! critical exponent of the natural cover tends to the dimension of the
//! restricted set, but nothing here bounds the distance at a given depth.

use crate::error::{Error, Result};
use crate::exponent::DigitSet;
use crate::growth::Growth;
use crate::ifs::{ordered, Iifs};
use crate::rigor::{exp_down, exp_up, ln_bounds, rpow, sum_lower, sum_upper, Bounds};
use crate::scalar::Scalar;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

/// Most strings a cover is allowed to enumerate.
pub const MAX_STRINGS: usize = 1 << 24;
/// Bisection bracket for [`critical_exponent`].
pub const BRACKET: (f64, f64) = (0.0, 1.5);
pub const MAX_BISECTIONS: usize = 60;

/// Which digits may appear at each position of a finite string.
#[derive(Debug, Clone)]
pub enum Constraint {
    /// `a_n ∈ D` for a finite `D`.
    Digits(DigitSet),
    /// `a_n ∈ D` and `a_n ≤ φ(n)`.
    Bounded { digits: DigitSet, phi: Growth },
    /// `a_n ∈ windows[n-1]`.
    Windows(Vec<Vec<u64>>),
    /// `a_n ∈ D` and `a_n ≤ bounds[n-1]`; built from a product
    /// specification's single-digit bound.
    Table { digits: DigitSet, bounds: Vec<u64>, label: String },
}

impl Constraint {
    pub fn label(&self) -> String {
        match self {
            Constraint::Digits(d) => format!("digits {}", d.label()),
            Constraint::Bounded { digits, phi } => format!("digits {} under {}", digits.label(), phi.label()),
            Constraint::Windows(w) => format!("windows[{}]", w.len()),
            Constraint::Table { label, .. } => label.clone(),
        }
    }

    /// The admissible digits at position `n ≥ 1`, increasing.
    pub fn alphabet(&self, n: usize) -> Result<Vec<u64>> {
        match self {
            Constraint::Digits(d) => {
                if !d.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "digit set {} is infinite; bound it with a growth function",
                        d.label()
                    )));
                }
                Ok(d.up_to(u64::MAX))
            }
            Constraint::Bounded { digits, phi } => Ok(digits.up_to(phi.eval_u64(n as u64))),
            Constraint::Windows(w) => w
                .get(n - 1)
                .cloned()
                .ok_or_else(|| Error::InvalidInput(format!("no window for position {n}"))),
            Constraint::Table { digits, bounds, .. } => {
                let b = bounds
                    .get(n - 1)
                    .ok_or_else(|| Error::HorizonTooSmall(format!("bound table ends before position {n}")))?;
                Ok(digits.up_to(*b))
            }
        }
    }

    pub fn admits(&self, n: usize, digit: u64) -> bool {
        self.alphabet(n).map(|a| a.binary_search(&digit).is_ok()).unwrap_or(false)
    }
}

/// The lengths of all admissible depth-`n` fundamental intervals, as
/// enclosures of their logarithms.
#[derive(Debug, Clone)]
pub struct Cover {
    pub depth: usize,
    pub ln_lower: Vec<f64>,
    pub ln_upper: Vec<f64>,
    /// Exact lengths, kept only when the backend is exact.
    pub exact: Option<Vec<BigRational>>,
}

/// Builds the cover by prepending digits: `I(dā) = f_d(I(ā))`, so each
/// string costs two map evaluations whatever the depth.
pub fn build_cover<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    constraint: &Constraint,
    depth: usize,
) -> Result<Cover> {
    let alphabets: Vec<Vec<u64>> = (1..=depth).map(|n| constraint.alphabet(n)).collect::<Result<_>>()?;
    let total = alphabets.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.len()));
    match total {
        Some(t) if t <= MAX_STRINGS => {}
        _ => {
            return Err(Error::InvalidInput(format!(
                "cover at depth {depth} has more than {MAX_STRINGS} strings"
            )))
        }
    }
    let mut level: Vec<(S, S)> = vec![(S::zero(), S::one())];
    for alphabet in alphabets.iter().rev() {
        level = alphabet
            .par_iter()
            .flat_map_iter(|&d| {
                level.iter().map(move |(lo, hi)| ordered(system.map(d, lo), system.map(d, hi)))
            })
            .collect();
    }
    let exact_mode = S::PRECISION_BITS == u32::MAX;
    let lengths: Vec<(BigRational, BigRational)> = level
        .par_iter()
        .map(|(lo, hi)| {
            let min = hi.rational_lower() - lo.rational_upper();
            let max = hi.rational_upper() - lo.rational_lower();
            (if min.is_zero() || min < BigRational::zero() { BigRational::zero() } else { min }, max)
        })
        .collect();
    let (ln_lower, ln_upper): (Vec<f64>, Vec<f64>) = lengths
        .par_iter()
        .map(|(lo, hi)| {
            let l = if lo.is_zero() { f64::NEG_INFINITY } else { ln_bounds(lo).0 };
            (l, ln_bounds(hi).1)
        })
        .unzip();
    let exact = exact_mode.then(|| lengths.into_iter().map(|(lo, _)| lo).collect());
    Ok(Cover { depth, ln_lower, ln_upper, exact })
}

impl Cover {
    pub fn strings(&self) -> usize {
        self.ln_lower.len()
    }

    /// `ln Σ |I|^s` as an estimate, accumulated relative to the largest
    /// term so deep covers do not underflow.
    pub fn ln_sum(&self, s: f64) -> f64 {
        if self.ln_lower.is_empty() {
            return f64::NEG_INFINITY;
        }
        let logs: Vec<f64> =
            self.ln_lower.iter().zip(&self.ln_upper).map(|(a, b)| s * 0.5 * (a + b)).collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
    }

    pub fn sum(&self, s: f64) -> f64 {
        self.ln_sum(s).exp()
    }

    /// Certified enclosure of `Σ |I|^s` for `s ≥ 0`.
    pub fn sum_bounds(&self, s: f64) -> Bounds {
        if s == 0.0 {
            let n = self.strings() as f64;
            return Bounds::exact(n);
        }
        let sb = Bounds::exact(s);
        let (lows, highs): (Vec<f64>, Vec<f64>) = self
            .ln_lower
            .iter()
            .zip(&self.ln_upper)
            .map(|(&a, &b)| {
                let lo = if a == f64::NEG_INFINITY { 0.0 } else { exp_down(sb.mul(Bounds::exact(a)).lo) };
                (lo, exp_up(sb.mul(Bounds::exact(b)).hi))
            })
            .unzip();
        Bounds::new(sum_lower(&lows), sum_upper(&highs))
    }

    /// `Σ |I|^k` exactly, for exact covers.
    pub fn sum_exact(&self, k: u32) -> Option<BigRational> {
        self.exact.as_ref().map(|lengths| lengths.iter().map(|l| rpow(l, k)).sum())
    }
}

/// `Σ |I_n(ā)|^s` over admissible strings of length `depth`.
pub fn cover_sum<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    constraint: &Constraint,
    depth: usize,
    s: f64,
) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::InvalidInput("exponent must be non-negative".into()));
    }
    Ok(build_cover(system, constraint, depth)?.sum(s))
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalExponent {
    pub value: f64,
    pub depth: usize,
    /// Final bracket.
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
    pub strings: usize,
}

/// The `s` with `Σ |I|^s = 1` on a built cover, by bisection on
/// [`BRACKET`].
pub fn critical_exponent_of(cover: &Cover, tol: f64) -> Result<CriticalExponent> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let strings = cover.strings();
    let done = |value: f64, lo: f64, hi: f64, iterations: usize| CriticalExponent {
        value,
        depth: cover.depth,
        lo,
        hi,
        iterations,
        strings,
    };
    // one string: its length^s equals 1 only at s = 0
    if strings == 1 {
        return Ok(done(0.0, 0.0, 0.0, 0));
    }
    let (mut lo, mut hi) = BRACKET;
    if strings == 0 || cover.ln_sum(hi) > 0.0 {
        return Err(Error::NoCrossing { lo, hi });
    }
    let mut iterations = 0;
    while hi - lo > tol && iterations < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if cover.ln_sum(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(done(0.5 * (lo + hi), lo, hi, iterations))
}

pub fn critical_exponent<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    constraint: &Constraint,
    depth: usize,
    tol: f64,
) -> Result<CriticalExponent> {
    critical_exponent_of(&build_cover(system, constraint, depth)?, tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub phi: String,
    pub exponent: f64,
    pub strings: usize,
    /// `(n, φ(n))` for the positions of the cover.
    pub bounds: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Sweep {
    pub digits: String,
    pub depth: usize,
    pub rows: Vec<SweepRow>,
    /// Every pointwise-dominating φ has an exponent at least as large (up
    /// to the bisection tolerance).
    pub monotone: bool,
}

/// Critical exponents of `{a_n ∈ D, a_n ≤ φ(n)}` for each `φ` of a family.
pub fn slow_growth_sweep<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    digits: &DigitSet,
    family: &[Growth],
    depth: usize,
    tol: f64,
) -> Result<Sweep> {
    let mut rows = Vec::with_capacity(family.len());
    for phi in family {
        if !phi.diverges() && !matches!(phi, Growth::Constant(_)) {
            return Err(Error::Divergence(format!("{} is bounded", phi.label())));
        }
        let constraint = Constraint::Bounded { digits: digits.clone(), phi: phi.clone() };
        let cover = build_cover(system, &constraint, depth)?;
        let exponent = match critical_exponent_of(&cover, tol) {
            Ok(c) => c.value,
            // no admissible string at all
            Err(Error::NoCrossing { .. }) if cover.strings() == 0 => 0.0,
            Err(e) => return Err(e),
        };
        rows.push(SweepRow {
            phi: phi.label(),
            exponent,
            strings: cover.strings(),
            bounds: (1..=depth as u64).map(|n| phi.eval_u64(n)).collect(),
        });
    }
    let mut monotone = true;
    for a in &rows {
        for b in &rows {
            let dominates = a.bounds.iter().zip(&b.bounds).all(|(x, y)| x >= y);
            if dominates && a.exponent + 2.0 * tol < b.exponent {
                monotone = false;
            }
        }
    }
    Ok(Sweep { digits: digits.label(), depth, rows, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{Gauss, Luroth};

    #[test]
    fn zero_exponent_counts_strings() {
        let c = Constraint::Digits(DigitSet::finite(vec![1, 2, 5]).unwrap());
        let cover = build_cover::<BigRational>(&Luroth, &c, 4).unwrap();
        assert_eq!(cover.strings(), 81);
        assert_eq!(cover.sum_bounds(0.0), Bounds::exact(81.0));
        assert!((cover.sum(0.0) - 81.0).abs() < 1e-9);
    }

    #[test]
    fn infinite_alphabets_are_rejected() {
        let c = Constraint::Digits(DigitSet::All);
        assert!(build_cover::<f64>(&Gauss, &c, 2).is_err());
        let bounded = Constraint::Bounded { digits: DigitSet::All, phi: Growth::Constant(3) };
        assert_eq!(build_cover::<f64>(&Gauss, &bounded, 2).unwrap().strings(), 9);
    }

    #[test]
    fn sums_decrease_in_the_exponent() {
        let c = Constraint::Digits(DigitSet::finite(vec![1, 2, 3]).unwrap());
        let cover = build_cover::<BigRational>(&Gauss, &c, 5).unwrap();
        let values: Vec<f64> = (0..20).map(|i| cover.sum(i as f64 * 0.1)).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
    }
}
