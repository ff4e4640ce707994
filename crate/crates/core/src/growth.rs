//! Growth functions φ: ℕ → ℕ bounding digits, with exact thresholds.

use crate::error::{Error, Result};
use num_bigint::BigUint;
use num_traits::{CheckedSub, One, ToPrimitive};
use std::path::Path;

/// Thresholds with more bits than this are reported as unrepresentable.
pub const MAX_THRESHOLD_BITS: u64 = 1 << 24;

/// A divergent (or, for tests, bounded) digit bound φ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Growth {
    /// `x ↦ ⌊log₂(x + 2)⌋` applied `k` times (`k = 1` is `log`).
    IteratedLog(u32),
    /// `a·n + b`
    Linear {
        a: u64,
        b: u64,
    },
    Constant(u64),
    /// `φ(n) = values[n-1]` for `n ≤ len`, then the last value forever.
    Table(Vec<u64>),
}

impl Growth {
    /// Parses `log`, `loglog`, `iterated-log:k`, `linear:a,b`, `constant:c`,
    /// `table:v1,v2,…` or `file=<path>` (whitespace separated values).
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let bad = || Error::InvalidInput(format!("unknown growth function '{spec}'"));
        let int = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
        match spec {
            "log" => return Ok(Growth::IteratedLog(1)),
            "loglog" => return Ok(Growth::IteratedLog(2)),
            _ => {}
        }
        if let Some(k) = spec.strip_prefix("iterated-log:") {
            let k = int(k)? as u32;
            if k == 0 {
                return Err(bad());
            }
            return Ok(Growth::IteratedLog(k));
        }
        if let Some(rest) = spec.strip_prefix("linear:") {
            let (a, b) = rest.split_once(',').ok_or_else(bad)?;
            return Ok(Growth::Linear {
                a: int(a)?,
                b: int(b)?,
            });
        }
        if let Some(c) = spec.strip_prefix("constant:") {
            return Ok(Growth::Constant(int(c)?));
        }
        if let Some(list) = spec.strip_prefix("table:") {
            let values = list.split(',').map(int).collect::<Result<Vec<_>>>()?;
            return Growth::table(values);
        }
        if let Some(path) = spec.strip_prefix("file=") {
            return Growth::from_file(Path::new(path));
        }
        Err(bad())
    }

    pub fn table(values: Vec<u64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty growth table".into()));
        }
        Ok(Growth::Table(values))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let values = text
            .split_whitespace()
            .filter(|t| !t.starts_with('#'))
            .map(|t| {
                t.parse::<u64>()
                    .map_err(|_| Error::InvalidInput(format!("bad growth value '{t}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Growth::table(values)
    }

    pub fn label(&self) -> String {
        match self {
            Growth::IteratedLog(1) => "log".into(),
            Growth::IteratedLog(2) => "loglog".into(),
            Growth::IteratedLog(k) => format!("iterated-log:{k}"),
            Growth::Linear { a, b } => format!("linear:{a},{b}"),
            Growth::Constant(c) => format!("constant:{c}"),
            Growth::Table(v) => format!("table[{}]", v.len()),
        }
    }

    /// Whether φ is nondecreasing, so that it is its own minorant.
    pub fn is_monotone(&self) -> bool {
        match self {
            Growth::Table(v) => v.windows(2).all(|w| w[0] <= w[1]),
            _ => true,
        }
    }

    /// Whether φ(n) → ∞.
    pub fn diverges(&self) -> bool {
        match self {
            Growth::IteratedLog(_) => true,
            Growth::Linear { a, .. } => *a > 0,
            Growth::Constant(_) | Growth::Table(_) => false,
        }
    }

    /// `φ(n)` for `n ≥ 1`.
    pub fn eval(&self, n: &BigUint) -> BigUint {
        match self {
            Growth::IteratedLog(k) => {
                let mut x = n.clone();
                for _ in 0..*k {
                    x = BigUint::from((x + 2u32).bits() - 1);
                }
                x
            }
            Growth::Linear { a, b } => n * BigUint::from(*a) + BigUint::from(*b),
            Growth::Constant(c) => BigUint::from(*c),
            Growth::Table(v) => {
                let i = n.to_usize().map(|i| i.min(v.len())).unwrap_or(v.len());
                BigUint::from(v[i.max(1) - 1])
            }
        }
    }

    pub fn eval_u64(&self, n: u64) -> u64 {
        self.eval(&BigUint::from(n)).to_u64().unwrap_or(u64::MAX)
    }

    /// The least `N ≥ 1` with `φ(n) ≥ value` for every `n ≥ N`.
    pub fn threshold(&self, value: u64) -> Result<BigUint> {
        match self {
            Growth::IteratedLog(k) => {
                // ⌊log₂(x+2)⌋ ≥ v  ⇔  x ≥ 2^v − 2, and floors commute with
                // this map because every threshold is an integer
                let mut need = BigUint::from(value);
                for _ in 0..*k {
                    let bits = need
                        .to_u64()
                        .filter(|&b| b <= MAX_THRESHOLD_BITS)
                        .ok_or_else(|| {
                            Error::DepthOverflow(format!(
                                "{} reaches {value} only beyond 2^{need} digits",
                                self.label()
                            ))
                        })?;
                    need = (BigUint::one() << bits)
                        .checked_sub(&BigUint::from(2u32))
                        .unwrap_or_default();
                }
                Ok(need.max(BigUint::one()))
            }
            Growth::Linear { a, b } => {
                if *a == 0 {
                    return self.bounded_threshold(value, *b);
                }
                let gap = value.saturating_sub(*b);
                Ok(BigUint::from(gap.div_ceil(*a).max(1)))
            }
            Growth::Constant(c) => self.bounded_threshold(value, *c),
            Growth::Table(v) => {
                let tail = *v.last().unwrap();
                if tail < value {
                    return Err(Error::Divergence(format!(
                        "{} is eventually {tail} < {value}",
                        self.label()
                    )));
                }
                // suffix minima form the nondecreasing minorant
                let mut n = v.len();
                while n > 1 && v[n - 2] >= value {
                    n -= 1;
                }
                Ok(BigUint::from(n as u64))
            }
        }
    }

    fn bounded_threshold(&self, value: u64, bound: u64) -> Result<BigUint> {
        if bound >= value {
            Ok(BigUint::one())
        } else {
            Err(Error::Divergence(format!(
                "{} never reaches {value}",
                self.label()
            )))
        }
    }

    /// Least `n ≥ 1` with `φ(n) ≥ value`, searching at most `cap` values.
    pub fn first_reaching(&self, value: u64, cap: u64) -> Option<u64> {
        (1..=cap).find(|&n| self.eval_u64(n) >= value)
    }
}

impl std::fmt::Display for Growth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

/// Convenience for tests and callers working with small arguments.
pub fn big(n: u64) -> BigUint {
    BigUint::from(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_threshold(g: &Growth, value: u64, cap: u64) -> Option<u64> {
        // least N such that every n in [N, cap] reaches the value
        let mut answer = None;
        for n in (1..=cap).rev() {
            if g.eval_u64(n) >= value {
                answer = Some(n);
            } else {
                break;
            }
        }
        answer
    }

    #[test]
    fn log_values() {
        let g = Growth::parse("log").unwrap();
        assert_eq!(g.eval_u64(1), 1);
        assert_eq!(g.eval_u64(2), 2);
        assert_eq!(g.eval_u64(6), 3);
        assert_eq!(g.threshold(541).unwrap(), (BigUint::one() << 541u32) - 2u32);
        for v in 1..12 {
            assert_eq!(
                g.threshold(v).unwrap(),
                big(naive_threshold(&g, v, 5000).unwrap()),
                "v = {v}"
            );
        }
    }

    #[test]
    fn iterated_log_thresholds() {
        let g = Growth::parse("loglog").unwrap();
        for v in 1..4 {
            assert_eq!(
                g.threshold(v).unwrap(),
                big(naive_threshold(&g, v, 20_000).unwrap())
            );
        }
        assert!(matches!(g.threshold(541), Err(Error::DepthOverflow(_))));
        assert_eq!(
            Growth::parse("iterated-log:3").unwrap(),
            Growth::IteratedLog(3)
        );
    }

    #[test]
    fn linear_and_tables() {
        let g = Growth::parse("linear:2,3").unwrap();
        assert_eq!(g.eval_u64(5), 13);
        for v in [1, 4, 5, 6, 100] {
            assert_eq!(
                g.threshold(v).unwrap(),
                big(naive_threshold(&g, v, 1000).unwrap())
            );
        }
        let t = Growth::parse("table:3,9,4,8,8").unwrap();
        assert!(!t.is_monotone());
        assert_eq!(t.eval_u64(2), 9);
        assert_eq!(t.eval_u64(50), 8);
        assert_eq!(t.threshold(5).unwrap(), big(4));
        assert_eq!(t.threshold(3).unwrap(), big(1));
        assert!(matches!(t.threshold(9), Err(Error::Divergence(_))));
        assert!(matches!(
            Growth::Constant(4).threshold(5),
            Err(Error::Divergence(_))
        ));
        assert!(Growth::parse("table:").is_err());
        assert!(Growth::parse("cubic").is_err());
    }
}
