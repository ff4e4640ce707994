//! Scalar backends.
//!
//! Systems and interval computations are generic over [`Scalar`]. Three
//! backends are provided: exact big rationals, outward-rounded rational
//! enclosures at a fixed number of significant bits, and plain `f64` for fast
//! sampling where rigour is not needed.

use crate::rigor::{f64_down, f64_up, rational_of};
use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// How a scalar type represents values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArithmeticMode {
    ExactRational,
    OutwardInterval,
    Float,
}

pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + Zero
    + One
    + Neg<Output = Self>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    const MODE: ArithmeticMode;
    /// Significant bits carried (`u32::MAX` for exact arithmetic).
    const PRECISION_BITS: u32;

    fn from_u64(n: u64) -> Self;
    fn from_rational(r: &BigRational) -> Self;

    /// Lower bound on the represented value (the value itself for floats).
    fn lower(&self) -> f64;
    /// Upper bound on the represented value.
    fn upper(&self) -> f64;
    fn rational_lower(&self) -> BigRational;
    fn rational_upper(&self) -> BigRational;

    /// True only when every represented value is below every value of `other`.
    fn certainly_lt(&self, other: &Self) -> bool;

    fn certainly_le(&self, other: &Self) -> bool {
        !other.certainly_lt(self) && (self.rational_upper() <= other.rational_lower())
    }

    fn midpoint(&self) -> f64 {
        0.5 * (self.lower() + self.upper())
    }

    fn abs(&self) -> Self;

    /// Whether the value is known to be exactly zero.
    fn is_exact_zero(&self) -> bool {
        self.rational_lower().is_zero() && self.rational_upper().is_zero()
    }

    /// A value known only to lie in `[lo, hi]`. Exact backends can represent
    /// this only when the bounds coincide.
    fn from_bounds(lo: BigRational, hi: BigRational) -> Option<Self>;

    fn from_ratio(num: u64, den: u64) -> Self {
        Self::from_rational(&BigRational::new(num.into(), den.into()))
    }

    /// `(lower(), upper())`, for backends that share the work.
    fn f64_bounds(&self) -> (f64, f64) {
        (self.lower(), self.upper())
    }

    /// `1/(self + n)`.
    fn recip_shifted(&self, n: u64) -> Self {
        Self::one() / (self.clone() + Self::from_u64(n))
    }
}

impl Scalar for BigRational {
    const MODE: ArithmeticMode = ArithmeticMode::ExactRational;
    const PRECISION_BITS: u32 = u32::MAX;

    fn from_u64(n: u64) -> Self {
        BigRational::from_integer(n.into())
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn lower(&self) -> f64 {
        f64_down(self)
    }
    fn upper(&self) -> f64 {
        f64_up(self)
    }
    fn from_bounds(lo: BigRational, hi: BigRational) -> Option<Self> {
        (lo == hi).then_some(lo)
    }
    fn is_exact_zero(&self) -> bool {
        self.is_zero()
    }
    fn rational_lower(&self) -> BigRational {
        self.clone()
    }
    fn rational_upper(&self) -> BigRational {
        self.clone()
    }
    fn certainly_lt(&self, other: &Self) -> bool {
        self < other
    }
    fn certainly_le(&self, other: &Self) -> bool {
        self <= other
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn f64_bounds(&self) -> (f64, f64) {
        crate::rigor::f64_bounds(self)
    }
    fn recip_shifted(&self, n: u64) -> Self {
        // gcd(p + nq, q) = gcd(p, q) = 1, so no reduction is needed
        let den = self.numer() + self.denom() * BigInt::from(n);
        if den.is_positive() {
            BigRational::new_raw(self.denom().clone(), den)
        } else {
            BigRational::one() / (self + BigRational::from_integer(n.into()))
        }
    }
}

impl Scalar for f64 {
    const MODE: ArithmeticMode = ArithmeticMode::Float;
    const PRECISION_BITS: u32 = 53;

    fn from_u64(n: u64) -> Self {
        n as f64
    }
    fn from_rational(r: &BigRational) -> Self {
        num_traits::ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }
    fn lower(&self) -> f64 {
        *self
    }
    fn upper(&self) -> f64 {
        *self
    }
    fn from_bounds(lo: BigRational, hi: BigRational) -> Option<Self> {
        num_traits::ToPrimitive::to_f64(&((lo + hi) / BigRational::from_integer(2.into())))
    }
    fn rational_lower(&self) -> BigRational {
        rational_of(*self)
    }
    fn rational_upper(&self) -> BigRational {
        rational_of(*self)
    }
    fn certainly_lt(&self, other: &Self) -> bool {
        self < other
    }
    fn certainly_le(&self, other: &Self) -> bool {
        self <= other
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn is_exact_zero(&self) -> bool {
        *self == 0.0
    }
    fn from_ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }
}

/// A closed interval `[lo, hi]` of rationals whose endpoints are rounded
/// outward to `BITS` significant bits after every operation.
///
/// Division by an enclosure that contains zero panics; callers only divide by
/// quantities bounded away from zero (denominators of branch maps).
#[derive(Clone, Debug, PartialEq)]
pub struct Enclosure<const BITS: u32> {
    lo: BigRational,
    hi: BigRational,
}

fn round_rational(r: &BigRational, bits: u32, up: bool) -> BigRational {
    if r.is_zero() {
        return r.clone();
    }
    let num = r.numer();
    let den = r.denom();
    if num.bits() + den.bits() <= 2 * bits as u64 {
        return r.clone();
    }
    if num.sign() == Sign::Minus {
        return -round_rational(&-r, bits, !up);
    }
    let e = num.bits() as i64 - den.bits() as i64;
    let k = bits as i64 - e;
    let (scaled_num, scaled_den) = if k >= 0 {
        (num << (k as usize), den.clone())
    } else {
        (num.clone(), den << ((-k) as usize))
    };
    let (q, rem) = num_integer::Integer::div_rem(&scaled_num, &scaled_den);
    let m = if up && !rem.is_zero() { q + 1 } else { q };
    if k >= 0 {
        BigRational::new(m, BigInt::one() << (k as usize))
    } else {
        BigRational::from_integer(m << ((-k) as usize))
    }
}

impl<const BITS: u32> Enclosure<BITS> {
    pub fn new(lo: BigRational, hi: BigRational) -> Self {
        assert!(lo <= hi, "enclosure endpoints out of order");
        Enclosure {
            lo: round_rational(&lo, BITS, false),
            hi: round_rational(&hi, BITS, true),
        }
    }

    pub fn point(x: BigRational) -> Self {
        Self::new(x.clone(), x)
    }

    pub fn lo(&self) -> &BigRational {
        &self.lo
    }

    pub fn hi(&self) -> &BigRational {
        &self.hi
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    /// Smallest enclosure of both arguments.
    pub fn hull(&self, other: &Self) -> Self {
        Enclosure {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }
}

impl<const BITS: u32> Zero for Enclosure<BITS> {
    fn zero() -> Self {
        Self::point(BigRational::zero())
    }
    fn is_zero(&self) -> bool {
        self.lo.is_zero() && self.hi.is_zero()
    }
}

impl<const BITS: u32> One for Enclosure<BITS> {
    fn one() -> Self {
        Self::point(BigRational::one())
    }
}

impl<const BITS: u32> Neg for Enclosure<BITS> {
    type Output = Self;
    fn neg(self) -> Self {
        Enclosure {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl<const BITS: u32> Add for Enclosure<BITS> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl<const BITS: u32> Sub for Enclosure<BITS> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.lo - rhs.hi, self.hi - rhs.lo)
    }
}

impl<const BITS: u32> Mul for Enclosure<BITS> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let products = [
            &self.lo * &rhs.lo,
            &self.lo * &rhs.hi,
            &self.hi * &rhs.lo,
            &self.hi * &rhs.hi,
        ];
        let lo = products.iter().min().unwrap().clone();
        let hi = products.iter().max().unwrap().clone();
        Self::new(lo, hi)
    }
}

impl<const BITS: u32> Div for Enclosure<BITS> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        assert!(
            rhs.lo.is_positive() || rhs.hi.is_negative(),
            "division by an enclosure containing zero"
        );
        let recip = Enclosure {
            lo: rhs.hi.recip(),
            hi: rhs.lo.recip(),
        };
        self * recip
    }
}

impl<const BITS: u32> Scalar for Enclosure<BITS> {
    const MODE: ArithmeticMode = ArithmeticMode::OutwardInterval;
    const PRECISION_BITS: u32 = BITS;

    fn from_u64(n: u64) -> Self {
        Self::point(BigRational::from_integer(n.into()))
    }
    fn from_rational(r: &BigRational) -> Self {
        Self::point(r.clone())
    }
    fn lower(&self) -> f64 {
        f64_down(&self.lo)
    }
    fn upper(&self) -> f64 {
        f64_up(&self.hi)
    }
    fn from_bounds(lo: BigRational, hi: BigRational) -> Option<Self> {
        (lo <= hi).then(|| Self::new(lo, hi))
    }
    fn is_exact_zero(&self) -> bool {
        self.lo.is_zero() && self.hi.is_zero()
    }
    fn rational_lower(&self) -> BigRational {
        self.lo.clone()
    }
    fn rational_upper(&self) -> BigRational {
        self.hi.clone()
    }
    fn certainly_lt(&self, other: &Self) -> bool {
        self.hi < other.lo
    }
    fn abs(&self) -> Self {
        if !self.lo.is_negative() {
            self.clone()
        } else if !self.hi.is_positive() {
            -self.clone()
        } else {
            Enclosure {
                lo: BigRational::zero(),
                hi: (-self.lo.clone()).max(self.hi.clone()),
            }
        }
    }
}
