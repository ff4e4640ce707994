//! Points of the constructed Cantor set and an independent membership test.

use super::layers::{local_block, Pruning, WindowOrders};
use super::ConstructionState;
use crate::error::{Error, Result};
use crate::exponent::DigitSet;
use crate::growth::Growth;
use crate::ifs::{fundamental_interval, DigitString, Iifs};
use crate::scalar::Scalar;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// How [`sample_member`] picks a surviving block in each layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemberChoice {
    /// The surviving child that is leftmost on the real line.
    Leftmost,
    /// Uniform over the surviving children, from a seeded stream.
    Random(u64),
}

/// A point of the limit set, known through its first `prefix_len + tail.len()`
/// digits: `prefix_len` copies of `prefix_digit`, then `tail`.
#[derive(Debug, Clone)]
pub struct MemberSample<S> {
    pub prefix_digit: u64,
    pub prefix_len: BigUint,
    pub tail: Vec<u64>,
    /// `f_{tail}([0,1])`; the point lies in `F` of this interval.
    pub lo: S,
    pub hi: S,
    /// Upper bound on the log-length of the enclosing layer interval.
    pub ln_length_upper: f64,
}

impl<S> MemberSample<S> {
    /// The digit at position `n ≥ 1`, if known.
    pub fn digit_at(&self, n: &BigUint) -> Option<u64> {
        if n == &BigUint::from(0u32) {
            return None;
        }
        if n <= &self.prefix_len {
            return Some(self.prefix_digit);
        }
        let i = n - &self.prefix_len - 1u32;
        usize::try_from(i)
            .ok()
            .and_then(|i| self.tail.get(i).copied())
    }
}

/// Descends `layers` layers of the construction, choosing one surviving
/// block per layer. Pruning follows the construction (no removal in layer 1,
/// leftmost and rightmost blocks removed afterwards).
pub fn sample_member<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    state: &ConstructionState,
    layers: usize,
    choice: MemberChoice,
) -> Result<MemberSample<S>> {
    if layers > state.max_layer() {
        return Err(Error::DepthOverflow(format!(
            "{layers} layers requested, windows cover {}",
            state.max_layer()
        )));
    }
    let frame = state.frame(system)?;
    let orders = WindowOrders::new(system, state)?;
    let reverses = |d: u64| system.reverses(d);
    let mut rng = match choice {
        MemberChoice::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        MemberChoice::Leftmost => None,
    };
    let mut tail: Vec<u64> = Vec::new();
    for layer in 1..=layers {
        let windows = state.layer_windows(layer)?;
        let slices: Vec<&[u64]> = windows.iter().map(|&j| orders.order(j)).collect();
        let prune = Pruning::Standard.prunes(layer);
        let block = match rng.as_mut() {
            None => {
                // real orientation of F ∘ f_tail
                let flipped = frame.reversing
                    ^ (tail.iter().filter(|&&d| system.reverses(d)).count() % 2 == 1);
                local_block(&slices, &reverses, !flipped, usize::from(prune))
            }
            Some(rng) => {
                let extremes = [
                    local_block(&slices, &reverses, true, 0),
                    local_block(&slices, &reverses, false, 0),
                ];
                loop {
                    let pick: Vec<u64> = slices
                        .iter()
                        .map(|w| w[rng.gen_range(0..w.len())])
                        .collect();
                    if !prune || !extremes.contains(&pick) {
                        break pick;
                    }
                }
            }
        };
        tail.extend(block);
    }
    let iv = fundamental_interval(
        system,
        &DigitString::new(tail.clone()).unwrap_or_else(|_| DigitString::empty()),
    );
    let ln_length_upper = frame.ln_length_upper_of(system, &iv.lo, &iv.hi);
    Ok(MemberSample {
        prefix_digit: state.first_digit(),
        prefix_len: state.prefix_len(),
        tail,
        lo: iv.lo,
        hi: iv.hi,
        ln_length_upper,
    })
}

/// Checks the defining conditions of `S(f, D, φ)` directly on a digit
/// sequence given as a constant prefix followed by a tail: every digit at
/// positions `1..=horizon` and every tail digit lies in `D` and satisfies
/// `a_n ≤ φ(n)`. Returns the first offending position.
pub fn satisfies_growth_condition(
    digits: &DigitSet,
    growth: &Growth,
    prefix_digit: u64,
    prefix_len: &BigUint,
    tail: &[u64],
    horizon: u64,
) -> std::result::Result<(), BigUint> {
    let check = |n: &BigUint, a: u64| digits.contains(a) && growth.eval(n) >= BigUint::from(a);
    let mut n = BigUint::from(1u32);
    while &n <= prefix_len && n <= BigUint::from(horizon) {
        if !check(&n, prefix_digit) {
            return Err(n);
        }
        n += 1u32;
    }
    for (i, &a) in tail.iter().enumerate() {
        let n = prefix_len + BigUint::from(i as u64 + 1);
        if !check(&n, a) {
            return Err(n);
        }
    }
    Ok(())
}
