//! Rigorous bounds used by the verifiers.
//!
//! Every function here returns a one-sided bound that is checked exactly
//! wherever that is cheap: f64 conversions are compared against the exact
//! rational, and fractional powers are certified by raising both sides to an
//! integer power in big-integer arithmetic. Logarithms are the one place
//! where the platform `ln` is trusted, up to a widening of several ulps.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Float, One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;

/// Exact rational value of a finite f64.
pub fn rational_of(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// Largest f64 not exceeding `r`.
pub fn f64_down(r: &BigRational) -> f64 {
    f64_bounds(r).0
}

/// Smallest f64 not below `r`.
pub fn f64_up(r: &BigRational) -> f64 {
    f64_bounds(r).1
}

/// `(largest f64 ≤ r, smallest f64 ≥ r)`, from one integer division.
pub fn f64_bounds(r: &BigRational) -> (f64, f64) {
    if r.is_zero() {
        return (0.0, 0.0);
    }
    let (n, d) = (r.numer().magnitude(), r.denom().magnitude());
    // q = ⌊n·2^shift / d⌋ has 64 or 65 bits
    let shift = 64 + d.bits() as i64 - n.bits() as i64;
    let (q, rem) = if shift >= 0 {
        (n << shift as u64).div_rem(d)
    } else {
        n.div_rem(&(d << (-shift) as u64))
    };
    let drop = q.bits() - 53;
    let top = (&q >> drop).to_u64().expect("53 bits");
    let inexact = !rem.is_zero() || q.trailing_zeros().map_or(false, |z| z < drop);
    let exp = drop as i64 - shift;
    // |r| lies in [top·2^exp, (top+1)·2^exp), exactly at the left end unless inexact
    let (lo, hi) = match (scaled(top, exp), scaled(top + 1, exp)) {
        (Some(lo), Some(hi)) => (lo, if inexact { hi } else { lo }),
        _ => return f64_bounds_by_search(r),
    };
    if r.is_negative() {
        (-hi, -lo)
    } else {
        (lo, hi)
    }
}

/// `m · 2^e` when the result is a normal float (and therefore exact).
fn scaled(m: u64, e: i64) -> Option<f64> {
    let top = e + 63 - m.leading_zeros() as i64;
    if !(-1022..=1023).contains(&e) || !(-1022..=1023).contains(&top) {
        return None;
    }
    Some(m as f64 * f64::from_bits(((e + 1023) as u64) << 52))
}

fn f64_bounds_by_search(r: &BigRational) -> (f64, f64) {
    let guess = r
        .to_f64()
        .unwrap_or(if r.is_negative() { f64::MIN } else { f64::MAX });
    let lo = if guess.is_infinite() {
        if guess > 0.0 {
            f64::MAX
        } else {
            f64::NEG_INFINITY
        }
    } else {
        let mut y = guess;
        while rational_of(y) > *r {
            y = y.next_down();
        }
        y
    };
    let hi = if guess.is_infinite() {
        if guess > 0.0 {
            f64::INFINITY
        } else {
            f64::MIN
        }
    } else {
        let mut y = guess;
        while rational_of(y) < *r {
            y = y.next_up();
        }
        y
    };
    (lo, hi)
}

/// Lower bound on a non-negative big integer as f64.
pub fn biguint_down(n: &BigUint) -> f64 {
    f64_down(&BigRational::from_integer(BigInt::from(n.clone())))
}

/// Upper bound on a non-negative big integer as f64.
pub fn biguint_up(n: &BigUint) -> f64 {
    f64_up(&BigRational::from_integer(BigInt::from(n.clone())))
}

const LN2_LO: f64 = 0.693_147_180_559_945_2;
const LN2_HI: f64 = 0.693_147_180_559_945_4;

fn widen_down(x: f64) -> f64 {
    let mut y = x;
    for _ in 0..4 {
        y = y.next_down();
    }
    y - 1e-300
}

fn widen_up(x: f64) -> f64 {
    let mut y = x;
    for _ in 0..4 {
        y = y.next_up();
    }
    y + 1e-300
}

/// Bounds on `ln n` for `n >= 1`.
pub fn ln_biguint_bounds(n: &BigUint) -> (f64, f64) {
    assert!(!n.is_zero(), "ln of zero");
    let bits = n.bits();
    if bits <= 53 {
        let v = n.to_f64().expect("small integer");
        let l = v.ln();
        return (widen_down(l).max(0.0), widen_up(l));
    }
    if bits <= 64 {
        let exact = BigRational::from_integer(BigInt::from(n.clone()));
        return (
            widen_down(f64_down(&exact).ln()),
            widen_up(f64_up(&exact).ln()),
        );
    }
    let shift = bits - 64;
    let top: BigUint = n >> shift;
    let top = top.to_u64().expect("64 bits");
    let lo_m = f64_down(&BigRational::from_integer(BigInt::from(top)));
    let hi_m = f64_up(&BigRational::from_integer(BigInt::from(top) + 1));
    let s = shift as f64;
    (
        widen_down(lo_m.ln() + s * LN2_LO),
        widen_up(hi_m.ln() + s * LN2_HI),
    )
}

/// Bounds on `ln r` for `r > 0`.
pub fn ln_bounds(r: &BigRational) -> (f64, f64) {
    assert!(r.is_positive(), "ln of non-positive rational");
    let num = r.numer().magnitude();
    let den = r.denom().magnitude();
    let (nl, nh) = ln_biguint_bounds(num);
    let (dl, dh) = ln_biguint_bounds(den);
    (widen_down(nl - dh), widen_up(nh - dl))
}

/// Rational bounds on `√r` for `r ≥ 0` with relative width about `2^-bits`;
/// both bounds equal `√r` when it is rational.
pub fn sqrt_bounds(r: &BigRational, bits: u32) -> (BigRational, BigRational) {
    assert!(!r.is_negative(), "square root of a negative rational");
    let num = r.numer().magnitude();
    let den = r.denom().magnitude();
    let (sn, sd) = (num.sqrt(), den.sqrt());
    if &(&sn * &sn) == num && &(&sd * &sd) == den {
        let exact = BigRational::new(BigInt::from(sn), BigInt::from(sd));
        return (exact.clone(), exact);
    }
    // √(n/d) = √(n d 4^k) / (d 2^k)
    let scale = bits as u64 + 8;
    // the integer root gets at least `scale` bits
    let k = scale.saturating_sub((num.bits() + den.bits()) / 2) + 1;
    let radicand: BigUint = (num * den) << (2 * k as usize);
    let root = radicand.sqrt();
    let denom = BigInt::from(den.clone()) << (k as usize);
    let lo = BigRational::new(BigInt::from(root.clone()), denom.clone());
    let hi = BigRational::new(BigInt::from(root + 1u32), denom);
    (lo, hi)
}

/// Compares `a^p` with `b^q` exactly for finite non-negative f64 values.
fn cmp_pow(a: f64, p: u32, b: f64, q: u32) -> Ordering {
    fn decompose(x: f64) -> (BigUint, i64) {
        if x == 0.0 {
            return (BigUint::zero(), 0);
        }
        let (m, e, _) = Float::integer_decode(x);
        (BigUint::from(m), e as i64)
    }
    let (ma, ea) = decompose(a);
    let (mb, eb) = decompose(b);
    if ma.is_zero() || mb.is_zero() {
        return ma.is_zero().cmp(&mb.is_zero()).reverse();
    }
    let lhs = ma.pow(p);
    let rhs = mb.pow(q);
    let le = ea * p as i64;
    let re = eb * q as i64;
    // compare lhs * 2^le with rhs * 2^re
    if le >= re {
        (lhs << ((le - re) as usize)).cmp(&rhs)
    } else {
        lhs.cmp(&(rhs << ((re - le) as usize)))
    }
}

/// Certified lower bound on `x^(p/q)` for `x >= 0`.
pub fn pow_lower(x: f64, p: u32, q: u32) -> f64 {
    assert!(x >= 0.0 && q > 0);
    if x == 0.0 {
        return if p == 0 { 1.0 } else { 0.0 };
    }
    let mut y = x.powf(p as f64 / q as f64) * (1.0 - 2f64.powi(-40));
    let mut step = 2f64.powi(-30);
    while y > 0.0 && cmp_pow(y, q, x, p) == Ordering::Greater {
        y *= 1.0 - step;
        step *= 2.0;
    }
    y.max(0.0)
}

/// Certified upper bound on `x^(p/q)` for `x >= 0`.
pub fn pow_upper(x: f64, p: u32, q: u32) -> f64 {
    assert!(x >= 0.0 && q > 0);
    if x == 0.0 {
        return if p == 0 { 1.0 } else { 0.0 };
    }
    let mut y = x.powf(p as f64 / q as f64) * (1.0 + 2f64.powi(-40));
    let mut step = 2f64.powi(-30);
    while cmp_pow(y, q, x, p) == Ordering::Less {
        y *= 1.0 + step;
        step *= 2.0;
    }
    y
}

/// Lower bound on `exp(x)`, trusting the platform `exp` to a few ulps.
pub fn exp_down(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    let v = widen_down(x.exp());
    v.max(0.0)
}

/// Upper bound on `exp(x)`.
pub fn exp_up(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    widen_up(x.exp())
}

/// Rigorous lower bound on the exact sum of non-negative terms.
pub fn sum_lower(terms: &[f64]) -> f64 {
    let n = terms.len();
    if n == 0 {
        return 0.0;
    }
    let s: f64 = terms.iter().sum();
    let gamma = gamma(n);
    (s * (1.0 - gamma)).next_down().max(0.0)
}

/// Rigorous upper bound on the exact sum of non-negative terms.
pub fn sum_upper(terms: &[f64]) -> f64 {
    let n = terms.len();
    if n == 0 {
        return 0.0;
    }
    let s: f64 = terms.iter().sum();
    (s * (1.0 + 2.0 * gamma(n))).next_up()
}

fn gamma(n: usize) -> f64 {
    let nu = (n as f64) * f64::EPSILON;
    (nu / (1.0 - nu)).next_up()
}

/// Rational `p/q >= t` with `q <= max_den`; exact when `t` already has such a
/// denominator.
pub fn rational_at_least(t: &BigRational, max_den: u32) -> (u32, u32) {
    rational_round(t, max_den, true)
}

/// Rational `p/q <= t` with `q <= max_den`.
pub fn rational_at_most(t: &BigRational, max_den: u32) -> (u32, u32) {
    rational_round(t, max_den, false)
}

fn rational_round(t: &BigRational, max_den: u32, up: bool) -> (u32, u32) {
    assert!(!t.is_negative());
    if let (Some(n), Some(d)) = (t.numer().to_u32(), t.denom().to_u32()) {
        if d <= max_den {
            return (n, d);
        }
    }
    let d = BigInt::from(max_den);
    let scaled = t * BigRational::from_integer(d.clone());
    let n = if up { scaled.ceil() } else { scaled.floor() };
    let n = n.to_integer();
    let g = n.gcd(&d);
    let (n, d) = (&n / &g, &d / &g);
    (
        n.to_u32().expect("exponent numerator fits u32"),
        d.to_u32().expect("denominator fits u32"),
    )
}

/// A closed real interval with f64 endpoints; every operation rounds outward.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "bounds out of order: {lo} > {hi}");
        Bounds { lo, hi }
    }

    /// An f64 that is exact by construction (a small integer, say).
    pub fn exact(x: f64) -> Self {
        Bounds { lo: x, hi: x }
    }

    pub fn of(r: &BigRational) -> Self {
        let (lo, hi) = f64_bounds(r);
        Bounds { lo, hi }
    }

    /// Bounds on `ln x` over the interval; `lo` is `-∞` when it reaches 0.
    pub fn ln_interval(self) -> Bounds {
        assert!(self.hi > 0.0, "ln of a non-positive interval");
        let lo = if self.lo > 0.0 {
            widen_down(self.lo.ln())
        } else {
            f64::NEG_INFINITY
        };
        Bounds {
            lo,
            hi: widen_up(self.hi.ln()),
        }
    }

    pub fn of_biguint(n: &BigUint) -> Self {
        Bounds {
            lo: biguint_down(n),
            hi: biguint_up(n),
        }
    }

    /// Bounds on `ln r` for `r > 0`.
    pub fn ln(r: &BigRational) -> Self {
        let (lo, hi) = ln_bounds(r);
        Bounds { lo, hi }
    }

    pub fn add(self, other: Bounds) -> Bounds {
        Bounds {
            lo: (self.lo + other.lo).next_down(),
            hi: (self.hi + other.hi).next_up(),
        }
    }

    pub fn sub(self, other: Bounds) -> Bounds {
        self.add(other.neg())
    }

    pub fn neg(self) -> Bounds {
        Bounds {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn mul(self, other: Bounds) -> Bounds {
        let p = [
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        ];
        let lo = p
            .iter()
            .copied()
            .filter(|v| !v.is_nan())
            .fold(f64::INFINITY, f64::min);
        let hi = p
            .iter()
            .copied()
            .filter(|v| !v.is_nan())
            .fold(f64::NEG_INFINITY, f64::max);
        Bounds {
            lo: lo.next_down(),
            hi: hi.next_up(),
        }
    }

    /// Division by an interval of positive numbers.
    pub fn div_positive(self, other: Bounds) -> Bounds {
        assert!(other.lo > 0.0, "divisor must be positive");
        self.mul(Bounds {
            lo: (1.0 / other.hi).next_down(),
            hi: (1.0 / other.lo).next_up(),
        })
    }

    pub fn exp(self) -> Bounds {
        Bounds {
            lo: exp_down(self.lo),
            hi: exp_up(self.hi),
        }
    }

    /// Certified `self ≥ other`.
    pub fn at_least(self, other: Bounds) -> Verdict {
        if self.lo >= other.hi {
            Verdict::Pass
        } else if self.hi < other.lo {
            Verdict::Fail
        } else {
            Verdict::Indeterminate
        }
    }
}

/// Three-valued outcome of a certified comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

impl Verdict {
    /// Combines verdicts: any failure fails, otherwise any doubt stays in doubt.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Indeterminate, _) | (_, Verdict::Indeterminate) => Verdict::Indeterminate,
            _ => Verdict::Pass,
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// Decides `ln x >= v` for rational `x >= 0`.
pub fn ln_at_least(x: &BigRational, v: f64) -> Verdict {
    if !x.is_positive() {
        return if v == f64::NEG_INFINITY {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
    }
    // Huge negative thresholds: x >= 1/den >= 2^-bits(den).
    let den_bits = x.denom().bits() as f64;
    if v < -(den_bits + 2.0) * LN2_HI {
        return Verdict::Pass;
    }
    let (lo, hi) = ln_bounds(x);
    if lo >= v {
        Verdict::Pass
    } else if hi < v {
        Verdict::Fail
    } else {
        Verdict::Indeterminate
    }
}

/// `a^k` for a big rational and small exponent.
pub fn rpow(a: &BigRational, k: u32) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..k {
        acc *= a;
    }
    acc
}

/// Sign-aware helper used by callers holding signed big integers.
pub fn is_nonnegative(x: &BigInt) -> bool {
    x.sign() != Sign::Minus
}
