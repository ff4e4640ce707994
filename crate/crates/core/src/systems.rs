//! The example systems: regular continued fractions (Gauss), Lüroth
//! expansions, the quadratic Gauss map and generalised Lüroth series.

use crate::error::{Error, Result};
use crate::exponent::{GlsLengths, XiSequence};
use crate::ifs::{contraction_ln_bound, FrameKind, Iifs, PrefixFrame, SystemParams};
use crate::rigor::{biguint_down, biguint_up, ln_bounds, rational_of};
use crate::scalar::Scalar;
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::path::Path;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Digit `n` with `1/x ∈ (n, n+1)`, shared by systems whose `n`-th image is
/// `[1/(n+1), 1/n]`.
fn reciprocal_digit<S: Scalar>(x: &S) -> Result<u64> {
    let lo = x.rational_lower();
    let hi = x.rational_upper();
    if !lo.is_positive() {
        return Err(Error::Ambiguous { position: 1 });
    }
    let (y_lo, y_hi) = (hi.recip(), lo.recip());
    let n = y_lo.floor();
    if n == y_lo || y_hi >= &n + BigRational::one() || n.is_zero() {
        return Err(Error::Ambiguous { position: 1 });
    }
    n.to_integer()
        .to_u64()
        .ok_or_else(|| Error::Unsupported("digit exceeds 64 bits".into()))
}

/// `⌊1/x⌋`, the digit of the Gauss and Lüroth inducing maps, provided it is
/// the same across the enclosure.
fn reciprocal_floor<S: Scalar>(x: &S) -> Result<u64> {
    let lo = x.rational_lower();
    if !lo.is_positive() {
        return Err(Error::Ambiguous { position: 1 });
    }
    let n = x.rational_upper().recip().floor();
    if n != lo.recip().floor() {
        return Err(Error::Ambiguous { position: 1 });
    }
    n.to_integer()
        .to_u64()
        .ok_or_else(|| Error::Unsupported("digit exceeds 64 bits".into()))
}

/// `f_n(x) = 1/(x + n)`
#[derive(Debug, Clone, Copy, Default)]
pub struct Gauss;

impl<S: Scalar> Iifs<S> for Gauss {
    fn label(&self) -> String {
        "gauss".into()
    }
    fn map(&self, n: u64, x: &S) -> S {
        x.recip_shifted(n)
    }
    fn derivative(&self, n: u64, x: &S) -> S {
        let y = x.clone() + S::from_u64(n);
        -(S::one() / (y.clone() * y))
    }
    fn xi(&self) -> XiSequence {
        XiSequence::Power(2)
    }
    fn params(&self) -> SystemParams {
        SystemParams {
            m: 2,
            rho: rat(1, 2),
            kappa: rat(4, 1),
        }
    }
    fn reverses(&self, _n: u64) -> bool {
        true
    }
    fn locate(&self, x: &S) -> Result<u64> {
        reciprocal_digit(x)
    }
    fn inducing_digit(&self, x: &S) -> Result<u64> {
        reciprocal_floor(x)
    }
    fn invert(&self, n: u64, x: &S) -> Result<S> {
        Ok(S::one() / x.clone() - S::from_u64(n))
    }
    fn prefix_frame(&self, digit: u64, len: &BigUint) -> Result<PrefixFrame> {
        gauss_frame(digit, len)
    }
}

/// Prefixes up to this length get an exact continuant ratio.
const EXACT_CONTINUANT_LEN: u64 = 64;

fn gauss_frame(digit: u64, len: &BigUint) -> Result<PrefixFrame> {
    let d = BigRational::from_integer(digit.into());
    let f = |x: &BigRational| (&d + x).recip();
    let iterate = |mut x: BigRational, k: u64| {
        for _ in 0..k {
            x = f(&x);
        }
        x
    };
    // q_{L-1}/q_L = f_d^L(0) lies in f_d^k([0,1]) for every k ≤ L
    let (r_lo, r_hi) = match len.to_u64() {
        Some(l) if l <= EXACT_CONTINUANT_LEN => {
            let r = iterate(BigRational::zero(), l);
            (r.clone(), r)
        }
        _ => {
            let a = iterate(BigRational::zero(), EXACT_CONTINUANT_LEN);
            let b = iterate(BigRational::one(), EXACT_CONTINUANT_LEN);
            if a < b {
                (a, b)
            } else {
                (b, a)
            }
        }
    };
    let (ln_length_lower, ln_length_upper) = match len.to_u64() {
        Some(l) if l <= 4096 => {
            // |I_L| = 1/(q_L (q_L + q_{L-1}))
            let (mut q_prev, mut q) = (BigInt::zero(), BigInt::one());
            for _ in 0..l {
                let next = BigInt::from(digit) * &q + &q_prev;
                q_prev = q;
                q = next;
            }
            let length = BigRational::new(BigInt::one(), &q * (&q + &q_prev));
            ln_bounds(&length)
        }
        _ => {
            // q_L ≤ (d+1)^L, so |I_L| ≥ 1/(2 q_L²)
            let ln_digit_hi = ln_bounds(&rat(digit as i64 + 1, 1)).1;
            let lower = (-(std::f64::consts::LN_2.next_up()) - 2.0 * biguint_up(len) * ln_digit_hi)
                .next_down();
            (
                lower.next_down(),
                contraction_ln_bound(&Iifs::<BigRational>::params(&Gauss), len),
            )
        }
    };
    Ok(PrefixFrame {
        digit,
        len: len.clone(),
        kind: FrameKind::Mobius { r_lo, r_hi },
        reversing: len.is_odd(),
        ln_length_upper,
        ln_length_lower,
    })
}

/// `f_n(x) = x/(n(n+1)) + 1/(n+1)`
#[derive(Debug, Clone, Copy, Default)]
pub struct Luroth;

impl<S: Scalar> Iifs<S> for Luroth {
    fn label(&self) -> String {
        "luroth".into()
    }
    fn map(&self, n: u64, x: &S) -> S {
        x.clone() / S::from_u64(n * (n + 1)) + S::from_ratio(1, n + 1)
    }
    fn derivative(&self, n: u64, _x: &S) -> S {
        S::from_ratio(1, n * (n + 1))
    }
    fn xi(&self) -> XiSequence {
        XiSequence::Pronic
    }
    fn params(&self) -> SystemParams {
        SystemParams {
            m: 1,
            rho: rat(1, 2),
            kappa: rat(1, 1),
        }
    }
    fn reverses(&self, _n: u64) -> bool {
        false
    }
    fn locate(&self, x: &S) -> Result<u64> {
        reciprocal_digit(x)
    }
    fn inducing_digit(&self, x: &S) -> Result<u64> {
        reciprocal_floor(x)
    }
    fn invert(&self, n: u64, x: &S) -> Result<S> {
        Ok(x.clone() * S::from_u64(n * (n + 1)) - S::from_u64(n))
    }
    fn prefix_frame(&self, digit: u64, len: &BigUint) -> Result<PrefixFrame> {
        let (ln_slope_lo, ln_slope_hi) = ln_bounds(&rat(1, (digit * (digit + 1)) as i64));
        Ok(PrefixFrame {
            digit,
            len: len.clone(),
            kind: FrameKind::Affine,
            reversing: false,
            ln_length_upper: (biguint_down(len) * ln_slope_hi).next_up(),
            ln_length_lower: (biguint_up(len) * ln_slope_lo).next_down(),
        })
    }
}

/// The Lüroth digit of the inducing map, `⌊1/x⌋ + 1`.
///
/// This is one more than the index of the branch whose image contains `x`
/// (`x ∈ [1/(n+1), 1/n]` has digit `n + 1`); [`crate::ifs::digits_of`]
/// returns branch indices so that decoding inverts [`crate::ifs::compose_map`].
pub fn luroth_digit(x: &BigRational) -> Result<u64> {
    if !x.is_positive() || x > &BigRational::one() {
        return Err(Error::Domain(crate::ser::rational_string(x)));
    }
    (x.recip().floor().to_integer() + BigInt::one())
        .to_u64()
        .ok_or_else(|| Error::Unsupported("digit exceeds 64 bits".into()))
}

/// The Lüroth map `T(x) = d(d-1)(x - 1/d)` with `d = ⌊1/x⌋ + 1`.
pub fn luroth_map(x: &BigRational) -> Result<BigRational> {
    let d = luroth_digit(x)?;
    let d_r = BigRational::from_integer(d.into());
    Ok(&d_r * (&d_r - BigRational::one()) * (x - d_r.recip()))
}

/// `f_n(x) = q / (P(y) + y)` with `y = x + n - 1` and `P(y) = y² + p y + q`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticGauss {
    pub p: BigRational,
    pub q: BigRational,
    params: SystemParams,
    /// `p + 1` and `q` as small ratios, when they fit.
    small: Option<[(u64, u64); 2]>,
}

fn small_ratio(r: &BigRational) -> Option<(u64, u64)> {
    Some((r.numer().to_u64()?, r.denom().to_u64()?))
}

impl QuadraticGauss {
    /// Validates `p ≥ -1`, `q > 0`.
    pub fn new(p: BigRational, q: BigRational) -> Result<Self> {
        if p < rat(-1, 1) || !q.is_positive() {
            return Err(Error::InvalidInput(
                "quadratic Gauss needs p >= -1 and q > 0".into(),
            ));
        }
        let params = if p == rat(1, 1) && q == rat(1, 1) {
            SystemParams {
                m: 2,
                rho: rat(1, 2),
                kappa: rat(8, 1),
            }
        } else {
            measured_quadratic_params(&p, &q)
        };
        let small = small_ratio(&(&p + BigRational::one()))
            .zip(small_ratio(&q))
            .map(|(a, b)| [a, b]);
        Ok(QuadraticGauss {
            p,
            q,
            params,
            small,
        })
    }

    /// The case `p = q = 1`, i.e. `f_n(x) = 1/(x+n)²`.
    pub fn standard() -> Self {
        Self::new(rat(1, 1), rat(1, 1)).unwrap()
    }

    fn p1<S: Scalar>(&self) -> S {
        match self.small {
            Some([(a, b), _]) => S::from_ratio(a, b),
            None => S::from_rational(&(&self.p + BigRational::one())),
        }
    }

    fn q_value<S: Scalar>(&self) -> S {
        match self.small {
            Some([_, (a, b)]) => S::from_ratio(a, b),
            None => S::from_rational(&self.q),
        }
    }

    fn denominator<S: Scalar>(&self, y: &S) -> S {
        y.clone() * y.clone() + self.p1::<S>() * y.clone() + self.q_value::<S>()
    }

    /// `f_n^{-1}` in closed form: the root of `y² + (p+1)y + q - q/x`,
    /// shifted by `n - 1`. Monotone in `x`, so bounds map to bounds.
    fn preimage<S: Scalar>(&self, n: u64, x: &S) -> Result<S> {
        let x_lo = x.rational_lower();
        if !x_lo.is_positive() {
            return Err(Error::Domain(format!("{x:?}")));
        }
        let p1 = &self.p + BigRational::one();
        let four = BigRational::from_integer(4.into());
        let shift = BigRational::from_integer(BigInt::from(n) - 1);
        let bits = S::PRECISION_BITS.min(1024);
        let root = |x: &BigRational, upper: bool| {
            let disc = &p1 * &p1 - &four * &self.q + &four * &self.q / x;
            let (lo, hi) = crate::rigor::sqrt_bounds(&disc.max(BigRational::zero()), bits);
            let s = if upper { hi } else { lo };
            (s - &p1) / BigRational::from_integer(2.into()) - &shift
        };
        // larger x gives a smaller preimage
        let t_lo = root(&x.rational_upper(), false);
        let t_hi = root(&x_lo, true);
        S::from_bounds(t_lo, t_hi).ok_or_else(|| {
            Error::Unsupported(
                "quadratic Gauss inverse branches are irrational; use the interval backend".into(),
            )
        })
    }
}

/// Contraction and distortion constants for parameters other than
/// `p = q = 1`, measured on a grid and rounded up. They are empirical.
fn measured_quadratic_params(p: &BigRational, q: &BigRational) -> SystemParams {
    let (pf, qf) = (p.to_f64().unwrap(), q.to_f64().unwrap());
    let den = |y: f64| y * y + (pf + 1.0) * y + qf;
    let f = |n: u64, x: f64| qf / den(x + n as f64 - 1.0);
    let df = |n: u64, x: f64| {
        let y = x + n as f64 - 1.0;
        (qf * (2.0 * y + pf + 1.0) / (den(y) * den(y))).abs()
    };
    let grid: Vec<f64> = (0..=64).map(|j| j as f64 / 64.0).collect();
    let mut rho: f64 = 0.0;
    let mut kappa: f64 = 1.0;
    for a in 1..=40u64 {
        let vals: Vec<f64> = grid.iter().map(|&x| df(a, x)).collect();
        let mx = vals.iter().cloned().fold(0.0, f64::max);
        let mn = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if mn > 0.0 {
            kappa = kappa.max(mx / mn);
        }
        for b in 1..=40u64 {
            for &x in &grid {
                rho = rho.max(df(a, f(b, x)) * df(b, x));
            }
        }
    }
    let round_up = |v: f64| {
        let r = rational_of((v * 1000.0).ceil() / 1000.0);
        if r.is_zero() {
            rat(1, 1000)
        } else {
            r
        }
    };
    SystemParams {
        m: 2,
        rho: round_up(rho.min(0.999)),
        kappa: round_up(kappa.max(1.0)),
    }
}

impl<S: Scalar> Iifs<S> for QuadraticGauss {
    fn label(&self) -> String {
        format!(
            "quadratic-gauss:{},{}",
            crate::ser::rational_string(&self.p),
            crate::ser::rational_string(&self.q)
        )
    }
    fn map(&self, n: u64, x: &S) -> S {
        let y = x.clone() + S::from_u64(n - 1);
        self.q_value::<S>() / self.denominator(&y)
    }
    fn derivative(&self, n: u64, x: &S) -> S {
        let y = x.clone() + S::from_u64(n - 1);
        let den = self.denominator(&y);
        let slope = S::from_u64(2) * y + self.p1::<S>();
        -(self.q_value::<S>() * slope / (den.clone() * den))
    }
    fn xi(&self) -> XiSequence {
        XiSequence::Power(3)
    }
    fn params(&self) -> SystemParams {
        self.params.clone()
    }
    fn reverses(&self, _n: u64) -> bool {
        true
    }
    fn locate(&self, x: &S) -> Result<u64> {
        // image of f_n is [q/P̃(n), q/P̃(n-1)] with P̃(y) = y² + (p+1)y + q
        let mid = x.midpoint();
        if !(mid > 0.0) {
            return Err(Error::Ambiguous { position: 1 });
        }
        let (pf, qf) = (self.p.to_f64().unwrap(), self.q.to_f64().unwrap());
        let b = pf + 1.0;
        let c = qf - qf / mid;
        let y = (-b + (b * b - 4.0 * c).max(0.0).sqrt()) / 2.0;
        let guess = (y.floor().max(0.0) as u64) + 1;
        for n in [guess, guess.saturating_sub(1).max(1), guess + 1] {
            let lo = self.map(n, &S::one());
            let hi = self.map(n, &S::zero());
            if lo.certainly_lt(x) && x.certainly_lt(&hi) {
                return Ok(n);
            }
        }
        Err(Error::Ambiguous { position: 1 })
    }
    fn invert(&self, n: u64, x: &S) -> Result<S> {
        self.preimage(n, x)
    }
}

/// Orientation bits `ε_n`: an explicit head followed by a repeating pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrientationBits {
    pub head: Vec<bool>,
    pub pattern: Vec<bool>,
}

impl OrientationBits {
    pub fn all_increasing() -> Self {
        OrientationBits {
            head: Vec::new(),
            pattern: vec![false],
        }
    }

    pub fn bit(&self, n: u64) -> bool {
        let i = (n - 1) as usize;
        if i < self.head.len() {
            self.head[i]
        } else {
            self.pattern[(i - self.head.len()) % self.pattern.len()]
        }
    }
}

/// Generalised Lüroth series with intervals laid right to left:
/// `I_n = (1 - Σ_{k≤n} len_k, 1 - Σ_{k<n} len_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gls {
    pub lengths: GlsLengths,
    pub bits: OrientationBits,
}

impl Gls {
    pub fn new(lengths: GlsLengths, bits: OrientationBits) -> Result<Self> {
        lengths.validate()?;
        if bits.pattern.is_empty() {
            return Err(Error::InvalidInput(
                "orientation pattern must be non-empty".into(),
            ));
        }
        Ok(Gls { lengths, bits })
    }

    /// Intervals `[2^{-n}, 2^{-n+1})` with the given orientation pattern.
    pub fn dyadic(bits: OrientationBits) -> Self {
        Gls {
            lengths: GlsLengths::dyadic(),
            bits,
        }
    }

    /// Reads one `length orientation_bit` pair per line, lengths as exact
    /// fractions; the remaining mass is spread over a halving tail of
    /// increasing branches.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut head = Vec::new();
        let mut bits = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::InvalidInput(format!("GLS file line {}: '{line}'", i + 1));
            if parts.len() != 2 {
                return Err(bad());
            }
            head.push(parse_rational(parts[0]).ok_or_else(bad)?);
            bits.push(match parts[1] {
                "0" => false,
                "1" => true,
                _ => return Err(bad()),
            });
        }
        let lengths = GlsLengths::with_halving_tail(head)?;
        Gls::new(
            lengths,
            OrientationBits {
                head: bits,
                pattern: vec![false],
            },
        )
    }

    /// `l_n`
    pub fn left(&self, n: u64) -> BigRational {
        BigRational::one() - self.lengths.cumulative(n)
    }

    /// `r_n`
    pub fn right(&self, n: u64) -> BigRational {
        BigRational::one() - self.lengths.cumulative(n - 1)
    }

    /// The generalised Lüroth map `T_ε(x)` on a point inside some `I_n`.
    pub fn gls_map(&self, x: &BigRational) -> Result<BigRational> {
        let n = Iifs::<BigRational>::locate(self, x)?;
        Iifs::<BigRational>::invert(self, n, x)
    }
}

/// Parses `a/b`, an integer, or a finite decimal as an exact rational.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once('/') {
        let a: BigInt = a.trim().parse().ok()?;
        let b: BigInt = b.trim().parse().ok()?;
        if b.is_zero() {
            return None;
        }
        return Some(BigRational::new(a, b));
    }
    if let Some((int, frac)) = text.split_once('.') {
        let neg = int.starts_with('-');
        let int_part: BigInt = if int.is_empty() || int == "-" {
            BigInt::zero()
        } else {
            int.parse().ok()?
        };
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let frac_part: BigInt = frac.parse().ok()?;
        let scale = BigInt::from(10u8).pow(frac.len() as u32);
        let magnitude = BigRational::new(int_part.abs() * &scale + frac_part, scale);
        return Some(if neg { -magnitude } else { magnitude });
    }
    text.parse::<BigInt>().ok().map(BigRational::from_integer)
}

impl<S: Scalar> Iifs<S> for Gls {
    fn label(&self) -> String {
        "gls".into()
    }
    fn map(&self, n: u64, x: &S) -> S {
        let len = S::from_rational(&self.lengths.length(n));
        if self.bits.bit(n) {
            S::from_rational(&self.right(n)) - len * x.clone()
        } else {
            len * x.clone() + S::from_rational(&self.left(n))
        }
    }
    fn derivative(&self, n: u64, _x: &S) -> S {
        let len = S::from_rational(&self.lengths.length(n));
        if self.bits.bit(n) {
            -len
        } else {
            len
        }
    }
    fn xi(&self) -> XiSequence {
        XiSequence::Gls(self.lengths.clone())
    }
    fn params(&self) -> SystemParams {
        SystemParams {
            m: 1,
            rho: self.lengths.length(1),
            kappa: rat(1, 1),
        }
    }
    fn reverses(&self, n: u64) -> bool {
        self.bits.bit(n)
    }
    fn locate(&self, x: &S) -> Result<u64> {
        let (x_lo, x_hi) = (x.rational_lower(), x.rational_upper());
        if !x_lo.is_positive() {
            return Err(Error::Ambiguous { position: 1 });
        }
        let mut right = BigRational::one();
        for n in 1..=1_000_000u64 {
            let left = &right - self.lengths.length(n);
            if x_lo > left && x_hi < right {
                return Ok(n);
            }
            if x_hi >= left {
                return Err(Error::Ambiguous { position: 1 });
            }
            right = left;
        }
        Err(Error::Unsupported("digit beyond search range".into()))
    }
    /// `T` acts on `I_n = (l_n, r_n]`.
    fn inducing_digit(&self, x: &S) -> Result<u64> {
        let (x_lo, x_hi) = (x.rational_lower(), x.rational_upper());
        if !x_lo.is_positive() {
            return Err(Error::Ambiguous { position: 1 });
        }
        let mut right = BigRational::one();
        for n in 1..=1_000_000u64 {
            let left = &right - self.lengths.length(n);
            if x_lo > left && x_hi <= right {
                return Ok(n);
            }
            if x_hi > left {
                return Err(Error::Ambiguous { position: 1 });
            }
            right = left;
        }
        Err(Error::Unsupported("digit beyond search range".into()))
    }
    fn invert(&self, n: u64, x: &S) -> Result<S> {
        let len = S::from_rational(&self.lengths.length(n));
        Ok(if self.bits.bit(n) {
            (S::from_rational(&self.right(n)) - x.clone()) / len
        } else {
            (x.clone() - S::from_rational(&self.left(n))) / len
        })
    }
    fn prefix_frame(&self, digit: u64, len: &BigUint) -> Result<PrefixFrame> {
        let (ln_slope_lo, ln_slope_hi) = ln_bounds(&self.lengths.length(digit));
        Ok(PrefixFrame {
            digit,
            len: len.clone(),
            kind: FrameKind::Affine,
            reversing: self.bits.bit(digit) && len.is_odd(),
            ln_length_upper: (biguint_down(len) * ln_slope_hi).next_up(),
            ln_length_lower: (biguint_up(len) * ln_slope_lo).next_down(),
        })
    }
}

/// Parses a system selector: `gauss`, `luroth`, `quadratic-gauss:p,q`,
/// `gls:dyadic`, `gls:dyadic:<bits>` (a repeating pattern such as `1100`)
/// or `gls:file=<path>`.
pub fn parse_system(spec: &str) -> Result<SystemChoice> {
    let spec = spec.trim();
    match spec {
        "gauss" => return Ok(SystemChoice::Gauss),
        "luroth" => return Ok(SystemChoice::Luroth),
        "quadratic-gauss" => return Ok(SystemChoice::Quadratic(QuadraticGauss::standard())),
        "gls:dyadic" => {
            return Ok(SystemChoice::Gls(Gls::dyadic(
                OrientationBits::all_increasing(),
            )))
        }
        _ => {}
    }
    if let Some(rest) = spec.strip_prefix("quadratic-gauss:") {
        let (p, q) = rest.split_once(',').ok_or_else(|| {
            Error::InvalidInput(format!("expected quadratic-gauss:p,q, got '{spec}'"))
        })?;
        let p =
            parse_rational(p).ok_or_else(|| Error::InvalidInput(format!("bad p in '{spec}'")))?;
        let q =
            parse_rational(q).ok_or_else(|| Error::InvalidInput(format!("bad q in '{spec}'")))?;
        return Ok(SystemChoice::Quadratic(QuadraticGauss::new(p, q)?));
    }
    if let Some(pattern) = spec.strip_prefix("gls:dyadic:") {
        let bits = pattern
            .chars()
            .filter(|c| *c != ',')
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::InvalidInput(format!(
                    "bad orientation pattern '{pattern}'"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        if bits.is_empty() {
            return Err(Error::InvalidInput("empty orientation pattern".into()));
        }
        return Ok(SystemChoice::Gls(Gls::dyadic(OrientationBits {
            head: Vec::new(),
            pattern: bits,
        })));
    }
    if let Some(path) = spec.strip_prefix("gls:file=") {
        return Ok(SystemChoice::Gls(Gls::from_file(Path::new(path))?));
    }
    Err(Error::InvalidInput(format!("unknown system '{spec}'")))
}

/// One of the bundled systems, as selected on the command line.
#[derive(Debug, Clone)]
pub enum SystemChoice {
    Gauss,
    Luroth,
    Quadratic(QuadraticGauss),
    Gls(Gls),
}

impl SystemChoice {
    pub fn label(&self) -> String {
        match self {
            SystemChoice::Gauss => "gauss".into(),
            SystemChoice::Luroth => "luroth".into(),
            SystemChoice::Quadratic(q) => Iifs::<f64>::label(q),
            SystemChoice::Gls(_) => "gls".into(),
        }
    }

    /// Whether the system's exact computations can use plain rationals.
    pub fn is_rational(&self) -> bool {
        !matches!(self, SystemChoice::Quadratic(_))
    }

    /// The system with exact-rational arithmetic, or `None` for the
    /// quadratic Gauss family (whose inverse branches are irrational).
    pub fn exact(&self) -> Option<Box<dyn Iifs<BigRational>>> {
        match self {
            SystemChoice::Gauss => Some(Box::new(Gauss)),
            SystemChoice::Luroth => Some(Box::new(Luroth)),
            SystemChoice::Gls(g) => Some(Box::new(g.clone())),
            SystemChoice::Quadratic(_) => None,
        }
    }

    pub fn float(&self) -> Box<dyn Iifs<f64>> {
        match self {
            SystemChoice::Gauss => Box::new(Gauss),
            SystemChoice::Luroth => Box::new(Luroth),
            SystemChoice::Gls(g) => Box::new(g.clone()),
            SystemChoice::Quadratic(q) => Box::new(q.clone()),
        }
    }

    pub fn interval(&self) -> Box<dyn Iifs<crate::Interval>> {
        match self {
            SystemChoice::Gauss => Box::new(Gauss),
            SystemChoice::Luroth => Box::new(Luroth),
            SystemChoice::Gls(g) => Box::new(g.clone()),
            SystemChoice::Quadratic(q) => Box::new(q.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::{compose_map, digits_of, fundamental_interval, DigitString};
    use crate::Interval;

    type Q = BigRational;

    fn ds(d: &[u64]) -> DigitString {
        DigitString::new(d.to_vec()).unwrap()
    }

    #[test]
    fn gauss_evaluations() {
        assert_eq!(Iifs::<Q>::map(&Gauss, 3, &rat(1, 2)), rat(2, 7));
        assert_eq!(Iifs::<Q>::map(&Gauss, 1, &rat(0, 1)), rat(1, 1));
        assert_eq!(Iifs::<Q>::xi(&Gauss).exact(5), rat(25, 1));
    }

    #[test]
    fn luroth_evaluations() {
        assert_eq!(Iifs::<Q>::map(&Luroth, 2, &rat(1, 1)), rat(1, 2));
        assert_eq!(Iifs::<Q>::map(&Luroth, 2, &rat(0, 1)), rat(1, 3));
        for n in 1..50 {
            assert_eq!(
                Iifs::<Q>::derivative(&Luroth, n, &rat(1, 3)),
                rat(1, (n * (n + 1)) as i64)
            );
        }
        assert_eq!(luroth_digit(&rat(2, 5)).unwrap(), 3);
        // branch index of 0.4 is 2 since 0.4 ∈ [1/3, 1/2]
        assert_eq!(digits_of(&Luroth, &rat(2, 5), 1).unwrap(), ds(&[2]));
        let t = luroth_map(&rat(2, 5)).unwrap();
        assert_eq!(t, rat(2 * 3, 1) * (rat(2, 5) - rat(1, 3)));
    }

    #[test]
    fn quadratic_evaluations() {
        let qg = QuadraticGauss::standard();
        assert_eq!(Iifs::<Q>::map(&qg, 2, &rat(0, 1)), rat(1, 4));
        assert_eq!(Iifs::<Q>::map(&qg, 1, &rat(1, 1)), rat(1, 4));
        assert_eq!(Iifs::<Q>::xi(&qg).exact(2), rat(8, 1));
        assert!(QuadraticGauss::new(rat(-2, 1), rat(1, 1)).is_err());
        assert!(QuadraticGauss::new(rat(0, 1), rat(0, 1)).is_err());
    }

    #[test]
    fn quadratic_inverse_encloses_preimage() {
        let qg = QuadraticGauss::standard();
        let x = Interval::from_ratio(1, 7);
        let n = qg.locate(&x).unwrap();
        assert_eq!(n, 2); // 1/9 < 1/7 < 1/4
        let t = Iifs::<Interval>::invert(&qg, n, &x).unwrap();
        // exact preimage: 1/(t+2)^2 = 1/7, t = √7 − 2
        let two = rat(2, 1);
        let square = |v: BigRational| (&v + &two) * (&v + &two);
        assert!(square(t.rational_lower()) <= rat(7, 1));
        assert!(square(t.rational_upper()) >= rat(7, 1));
        assert!(t.width() < rat(1, 1) / BigRational::from_integer(BigInt::one() << 200));
        assert!(Iifs::<Q>::invert(&qg, 2, &rat(1, 7)).is_err());
        // perfect squares stay exact
        assert_eq!(Iifs::<Q>::invert(&qg, 2, &rat(4, 25)).unwrap(), rat(1, 2));
    }

    #[test]
    fn gls_layout() {
        let g = Gls::dyadic(OrientationBits::all_increasing());
        let iv = fundamental_interval::<Q>(&g, &ds(&[1]));
        assert_eq!((iv.lo, iv.hi), (rat(1, 2), rat(1, 1)));
        assert_eq!(Iifs::<Q>::derivative(&g, 1, &rat(0, 1)), rat(1, 2));
        assert_eq!(Iifs::<Q>::xi(&g).exact(7), rat(128, 1));
        let flipped = Gls::dyadic(OrientationBits {
            head: vec![],
            pattern: vec![true],
        });
        assert_eq!(Iifs::<Q>::map(&flipped, 3, &rat(0, 1)), flipped.right(3));
        assert_eq!(Iifs::<Q>::map(&flipped, 3, &rat(1, 1)), flipped.left(3));
        assert_eq!(flipped.left(3), rat(1, 8));
        assert_eq!(flipped.gls_map(&rat(3, 16)).unwrap(), rat(1, 2));
    }

    #[test]
    fn gls_file_round_trip() {
        let dir = std::env::temp_dir().join(format!("gls-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("spec.txt");
        std::fs::write(&path, "1/3 0\n1/4 1\n").unwrap();
        let g = Gls::from_file(&path).unwrap();
        assert_eq!(g.lengths.length(3), rat(5, 24));
        assert!(g.bits.bit(2) && !g.bits.bit(3));
        std::fs::write(&path, "1/3 0\n1/2 0\n").unwrap();
        assert!(Gls::from_file(&path).is_err());
    }

    #[test]
    fn gauss_frame_matches_explicit_composition() {
        for len in [1u64, 5, 12] {
            let frame = gauss_frame(2, &BigUint::from(len)).unwrap();
            let outer = (rat(1, 5), rat(3, 4));
            let inner = (rat(1, 3), rat(2, 5));
            let (lo, hi) =
                frame.ratio_bounds_exact::<Q>(&Gauss, (&outer.0, &outer.1), (&inner.0, &inner.1));
            assert_eq!(lo, hi);
            let prefix = ds(&vec![2; len as usize]);
            let f = |x: &Q| compose_map::<Q>(&Gauss, &prefix, x).unwrap();
            let truth = Signed::abs(&(f(&inner.1) - f(&inner.0)))
                / Signed::abs(&(f(&outer.1) - f(&outer.0)));
            assert_eq!(lo, truth);
            assert_eq!(frame.reversing, len % 2 == 1);
        }
        let far = gauss_frame(1, &(BigUint::one() << 600)).unwrap();
        let (lo, hi) =
            far.ratio_bounds::<Q>(&Gauss, (&rat(0, 1), &rat(1, 1)), (&rat(1, 2), &rat(1, 1)));
        assert!(lo <= hi && hi - lo < 1e-12);
        assert!(!far.reversing);
    }

    #[test]
    fn parse_systems() {
        assert!(matches!(
            parse_system("gauss").unwrap(),
            SystemChoice::Gauss
        ));
        assert!(matches!(
            parse_system("quadratic-gauss:1,1").unwrap(),
            SystemChoice::Quadratic(_)
        ));
        assert!(matches!(
            parse_system("gls:dyadic:1100").unwrap(),
            SystemChoice::Gls(_)
        ));
        assert!(parse_system("quadratic-gauss:-3,1").is_err());
        assert!(parse_system("nope").is_err());
        assert_eq!(parse_rational("0.4"), Some(rat(2, 5)));
        assert_eq!(parse_rational("-1.25"), Some(rat(-5, 4)));
        assert_eq!(parse_rational("7/21"), Some(rat(1, 3)));
    }
}
