//! Greedy choice of `r_k` and `N_j` and verbatim re-checks of their defining
//! inequalities.

use super::ConstructionParams;
use crate::error::{Error, Result};
use crate::exponent::{DigitSet, XiSequence};
use crate::growth::Growth;
use crate::rigor::{sum_lower, sum_upper, Bounds, Verdict};
use num_bigint::{BigInt, BigUint};
use num_traits::{FromPrimitive, One};
use serde::Serialize;

/// Bounds on the window term `(κ⁻¹ c1 / ξ_{d}^{1+ε})^{s(1+ε)}`.
struct WindowTerms<'a> {
    digits: &'a DigitSet,
    xi: &'a XiSequence,
    t: Bounds,
    one_eps: Bounds,
    base: Bounds,
    cache: Vec<Bounds>,
}

impl<'a> WindowTerms<'a> {
    fn new(digits: &'a DigitSet, xi: &'a XiSequence, params: &ConstructionParams) -> Self {
        WindowTerms {
            digits,
            xi,
            t: Bounds::of(&params.exponent()),
            one_eps: params.one_plus_eps(),
            base: Bounds::ln(&params.c1).sub(Bounds::ln(&params.kappa)),
            cache: Vec::new(),
        }
    }

    /// Term for the `n`-th digit (1-based).
    fn term(&mut self, n: usize) -> Result<Bounds> {
        while self.cache.len() < n {
            let k = self.cache.len() + 1;
            let d = self.digits.nth_value(k).map_err(|e| match e {
                Error::InvalidInput(_) => Error::Infeasible(format!(
                    "D has only {} digits, too few for the window sums",
                    k - 1
                )),
                other => other,
            })?;
            let ln_xi = Bounds::ln(&self.xi.exact(d));
            let v = self.t.mul(self.base.sub(self.one_eps.mul(ln_xi))).exp();
            self.cache.push(v);
        }
        Ok(self.cache[n - 1])
    }
}

/// Least `r_1 < r_2 < ⋯ < r_{k_max}` with `r_k − k ≥ 4` and a certified
/// lower bound of at least 3 on `Σ_{n=k}^{r_k} (κ⁻¹c1/ξ_{d_n}^{1+ε})^{s(1+ε)}`.
///
/// Minimality is relative to the certified lower bound: a sum whose true
/// value sits within rounding of 3 may push `r_k` one step further.
pub fn choose_rk(
    digits: &DigitSet,
    xi: &XiSequence,
    params: &ConstructionParams,
    k_max: usize,
    cap: u64,
) -> Result<Vec<u64>> {
    let mut terms = WindowTerms::new(digits, xi, params);
    let mut out: Vec<u64> = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let start = (k as u64 + 4).max(out.last().map_or(0, |r| r + 1));
        let mut acc = 0.0f64;
        let mut r = k as u64 - 1;
        loop {
            r += 1;
            if r > cap {
                return Err(Error::Infeasible(format!(
                    "window sum from k = {k} stays below 3 up to {cap} terms (reached {acc:.4}); \
                     s(1+eps) is too close to s0 or the constants are too small"
                )));
            }
            acc = (acc + terms.term(r as usize)?.lo).next_down();
            if r >= start && acc >= 3.0 {
                break;
            }
        }
        out.push(r);
    }
    Ok(out)
}

/// Outcome of re-checking one `r_k`.
#[derive(Debug, Clone, Serialize)]
pub struct RkCheck {
    pub k: usize,
    pub r: u64,
    pub sum_lower: f64,
    pub sum_upper: f64,
    pub verdict: Verdict,
    /// No smaller admissible value has a window sum certainly at least 3.
    pub minimal: bool,
}

/// Re-evaluates `r_k − k ≥ 4`, `r_k > r_{k−1}` and the window sum from scratch.
pub fn check_rk(
    digits: &DigitSet,
    xi: &XiSequence,
    params: &ConstructionParams,
    r: &[u64],
) -> Result<Vec<RkCheck>> {
    let mut terms = WindowTerms::new(digits, xi, params);
    let mut out = Vec::with_capacity(r.len());
    for (i, &rk) in r.iter().enumerate() {
        let k = i + 1;
        let mut lows = Vec::new();
        let mut highs = Vec::new();
        for n in k..=rk as usize {
            let b = terms.term(n)?;
            lows.push(b.lo);
            highs.push(b.hi);
        }
        let (lo, hi) = (sum_lower(&lows), sum_upper(&highs));
        let structural = rk >= k as u64 + 4 && (i == 0 || rk > r[i - 1]);
        let sum_verdict = if lo >= 3.0 {
            Verdict::Pass
        } else if hi < 3.0 {
            Verdict::Fail
        } else {
            Verdict::Indeterminate
        };
        let verdict = if structural {
            sum_verdict
        } else {
            Verdict::Fail
        };
        let floor = (k as u64 + 4).max(if i == 0 { 0 } else { r[i - 1] + 1 });
        let minimal = rk == floor || sum_lower(&lows[..lows.len() - 1]) < 3.0;
        out.push(RkCheck {
            k,
            r: rk,
            sum_lower: lo,
            sum_upper: hi,
            verdict,
            minimal,
        });
    }
    Ok(out)
}

/// Upper bound on `max { ln ξ_{d_i} : from ≤ i ≤ to }`.
fn max_ln_xi(digits: &DigitSet, xi: &XiSequence, from: usize, to: u64) -> Result<Bounds> {
    let mut best = Bounds::exact(f64::NEG_INFINITY);
    for i in from..=to as usize {
        let b = Bounds::ln(&xi.exact(digits.nth_value(i)?));
        best = Bounds::new(best.lo.max(b.lo), best.hi.max(b.hi));
    }
    Ok(best)
}

/// Both sides of the product bound in logarithms:
/// `(1+ε)(max ln ξ_{d_i} + (2m−1) max ln ξ_{d_k})` and
/// `−ln κ + 2m ln c1 − ε N ln ρ` without the `N` term.
fn product_bound_sides(
    digits: &DigitSet,
    xi: &XiSequence,
    r: &[u64],
    params: &ConstructionParams,
    j: usize,
) -> Result<(Bounds, Bounds, Bounds)> {
    let m = params.block_m as f64;
    let first = max_ln_xi(digits, xi, j, r[j])?;
    let rest = max_ln_xi(digits, xi, j, r[j + 1])?;
    let lhs = params
        .one_plus_eps()
        .mul(first.add(Bounds::exact(2.0 * m - 1.0).mul(rest)));
    let constant = Bounds::ln(&params.kappa)
        .neg()
        .add(Bounds::exact(2.0 * m).mul(Bounds::ln(&params.c1)));
    // ε · (−ln ρ) > 0
    let rate = params.eps_bounds().mul(Bounds::ln(&params.rho).neg());
    Ok((lhs, constant, rate))
}

/// Greedy `N_1 < ⋯ < N_{j_max}`: the least value above `N_{j−1}` with
/// `φ(n) ≥ d_{r_j} + 1` for all `n ≥ mN_j` and the product bound
/// `max (ξ_{d_{i_1}} ⋯ ξ_{d_{i_{2m}}})^{1+ε} ≤ κ⁻¹ c1^{2m} ρ^{−εN_j}`.
pub fn choose_nj(
    growth: &Growth,
    digits: &DigitSet,
    xi: &XiSequence,
    r: &[u64],
    params: &ConstructionParams,
    j_max: usize,
) -> Result<Vec<BigUint>> {
    if r.len() < j_max + 2 {
        return Err(Error::InvalidInput(format!(
            "N_{j_max} needs r up to index {}",
            j_max + 2
        )));
    }
    let m = BigUint::from(params.block_m);
    let mut out: Vec<BigUint> = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        let value = digits.nth_value(r[j - 1] as usize)? + 1;
        let threshold = growth.threshold(value)?;
        let by_growth = (&threshold + &m - BigUint::one()) / &m;
        let (lhs, constant, rate) = product_bound_sides(digits, xi, r, params, j)?;
        let need = lhs.sub(constant).hi;
        let by_product = if need <= 0.0 {
            BigUint::one()
        } else {
            let q = (need / rate.lo).next_up().ceil();
            BigInt::from_f64(q)
                .and_then(|b| b.to_biguint())
                .ok_or_else(|| {
                    Error::Infeasible(format!(
                        "product bound for j = {j} needs N beyond f64 range"
                    ))
                })?
        };
        let floor = out
            .last()
            .map_or(BigUint::one(), |prev| prev + BigUint::one());
        let n = by_growth.max(by_product).max(floor);
        out.push(n);
    }
    // the f64 solve can land one short of the certified inequality
    for j in 1..=j_max {
        while product_verdict(digits, xi, r, params, j, &out[j - 1])? != Verdict::Pass {
            out[j - 1] += BigUint::one();
            for later in j..j_max {
                if out[later] <= out[later - 1] {
                    out[later] = &out[later - 1] + BigUint::one();
                }
            }
        }
    }
    Ok(out)
}

fn product_verdict(
    digits: &DigitSet,
    xi: &XiSequence,
    r: &[u64],
    params: &ConstructionParams,
    j: usize,
    n: &BigUint,
) -> Result<Verdict> {
    let (lhs, constant, rate) = product_bound_sides(digits, xi, r, params, j)?;
    let rhs = constant.add(rate.mul(Bounds::of_biguint(n)));
    Ok(rhs.at_least(lhs))
}

/// Outcome of re-checking one `N_j`.
#[derive(Debug, Clone, Serialize)]
pub struct NjCheck {
    pub j: usize,
    #[serde(serialize_with = "crate::ser::biguint")]
    pub n: BigUint,
    /// `φ(n) ≥ d_{r_j} + 1` for every `n ≥ mN_j` (decided exactly).
    pub growth: Verdict,
    pub product: Verdict,
    pub increasing: bool,
}

impl NjCheck {
    pub fn verdict(&self) -> Verdict {
        let order = if self.increasing {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        self.growth.and(self.product).and(order)
    }
}

/// Re-checks the growth and product conditions for every stored `N_j`.
pub fn check_nj(
    growth: &Growth,
    digits: &DigitSet,
    xi: &XiSequence,
    r: &[u64],
    params: &ConstructionParams,
    n: &[BigUint],
) -> Result<Vec<NjCheck>> {
    let m = BigUint::from(params.block_m);
    let mut out = Vec::with_capacity(n.len());
    for (i, nj) in n.iter().enumerate() {
        let j = i + 1;
        if r.len() < j + 2 {
            return Err(Error::InvalidInput(format!(
                "checking N_{j} needs r_{}",
                j + 2
            )));
        }
        let value = digits.nth_value(r[i] as usize)? + 1;
        let growth_ok = match growth.threshold(value) {
            Ok(t) => {
                if t <= nj * &m {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            }
            Err(e) if e.is_infeasibility() => Verdict::Fail,
            Err(e) => return Err(e),
        };
        out.push(NjCheck {
            j,
            n: nj.clone(),
            growth: growth_ok,
            product: product_verdict(digits, xi, r, params, j, nj)?,
            increasing: i == 0 || nj > &n[i - 1],
        });
    }
    Ok(out)
}
