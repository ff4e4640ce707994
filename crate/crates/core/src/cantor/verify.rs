//! Checks of the mass distribution lemma's hypotheses on built layers, and
//! of the structural properties of the layer tree.

use super::layers::{local_block, tail_string, LayerTree, Node, Pruning, WindowOrders};
use super::ConstructionState;
use crate::error::Result;
use crate::ifs::{compose_unchecked, ordered, Iifs};
use crate::rigor::{f64_down, f64_up, rpow, sum_lower, sum_upper, Bounds, Verdict};
use crate::scalar::Scalar;
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;

/// The worst pair of siblings found by the separation check.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationWitness {
    pub parent: String,
    pub left_child: String,
    pub right_child: String,
    /// Lower bound on `|gap| / |A|`; zero when the grandchildren touch.
    pub gap_ratio_lower: f64,
    /// Lower bound on `ln(|gap| / |A|) − ε ln |A|`; `None` for a zero gap.
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerSeparation {
    pub layer: usize,
    pub parents_checked: usize,
    pub pairs_checked: usize,
    pub sampled: bool,
    pub verdict: Verdict,
    pub worst: Option<SeparationWitness>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub epsilon: f64,
    pub layers: Vec<LayerSeparation>,
    pub verdict: Verdict,
}

struct ParentSeparation {
    verdict: Verdict,
    pairs: usize,
    witness: Option<SeparationWitness>,
}

/// Hull, in local coordinates, of the children that survive in a family of
/// layer `layer`.
fn surviving_hull<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    orders: &WindowOrders,
    windows: &[usize],
    prune: bool,
) -> (S, S) {
    let slices: Vec<&[u64]> = windows.iter().map(|&j| orders.order(j)).collect();
    let inset = usize::from(prune);
    let reverses = |d: u64| system.reverses(d);
    let mut ends = Vec::with_capacity(4);
    for from_left in [true, false] {
        let block = local_block(&slices, &reverses, from_left, inset);
        ends.push(compose_unchecked(system, &block, S::zero()));
        ends.push(compose_unchecked(system, &block, S::one()));
    }
    let lo = ends
        .iter()
        .cloned()
        .reduce(|a, b| if b.certainly_lt(&a) { b } else { a })
        .unwrap();
    let hi = ends
        .into_iter()
        .reduce(|a, b| if a.certainly_lt(&b) { b } else { a })
        .unwrap();
    (lo, hi)
}

/// Checks `dist(∪Des(Y), ∪Des(Z)) ≥ |A|^{1+ε}` for every parent `A` in
/// layers `0..depth` whose children were built, and all sibling pairs.
///
/// Grandchildren are not enumerated: the surviving grandchildren of `Y`
/// span `f_Y(H)`, where `H` is the local hull of the second-extreme blocks
/// (or the extreme blocks when nothing is removed), and the minimum over
/// pairs is attained by neighbouring siblings.
pub fn verify_separation<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    state: &ConstructionState,
    tree: &LayerTree<S>,
    depth: usize,
) -> Result<SeparationReport> {
    let orders = WindowOrders::new(system, state)?;
    let eps = state.params.eps_bounds();
    let mut layers = Vec::new();
    let mut overall = Verdict::Pass;
    for n in 0..depth.min(tree.depth()) {
        let children_layer = &tree.layers[n + 1];
        let grand = n + 2;
        let windows = state.layer_windows(grand)?;
        let hull = surviving_hull(system, &orders, &windows, tree.pruning.prunes(grand));
        let results: Vec<ParentSeparation> = children_layer
            .families
            .par_iter()
            .map(|family| {
                let parent = &tree.layers[n].nodes[family.parent];
                let children = &children_layer.nodes[family.start..family.end];
                check_parent(system, tree, parent, children, &hull, eps)
            })
            .collect();
        let mut verdict = Verdict::Pass;
        let mut worst: Option<SeparationWitness> = None;
        let mut pairs = 0;
        for r in results {
            verdict = verdict.and(r.verdict);
            pairs += r.pairs;
            if let Some(w) = r.witness {
                if worse(&w, worst.as_ref()) {
                    worst = Some(w);
                }
            }
        }
        overall = overall.and(verdict);
        layers.push(LayerSeparation {
            layer: n,
            parents_checked: children_layer.families.len(),
            pairs_checked: pairs,
            sampled: tree.layers[n].sampled || children_layer.sampled,
            verdict,
            worst,
        });
    }
    Ok(SeparationReport {
        epsilon: eps.lo,
        layers,
        verdict: overall,
    })
}

fn worse(a: &SeparationWitness, b: Option<&SeparationWitness>) -> bool {
    match (a.margin, b.and_then(|b| b.margin)) {
        (_, _) if b.is_none() => true,
        (None, Some(_)) => true,
        (Some(x), Some(y)) => x < y,
        _ => false,
    }
}

fn check_parent<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    tree: &LayerTree<S>,
    parent: &Node<S>,
    children: &[Node<S>],
    hull: &(S, S),
    eps: Bounds,
) -> ParentSeparation {
    if children.len() < 2 {
        return ParentSeparation {
            verdict: Verdict::Pass,
            pairs: 0,
            witness: None,
        };
    }
    let frame = &tree.frame;
    let ln_a = Bounds::new(
        frame.ln_length_lower_of(system, &parent.lo, &parent.hi),
        frame.ln_length_upper_of(system, &parent.lo, &parent.hi),
    );
    let threshold = eps.mul(ln_a);
    // grandchildren hulls in J coordinates, children already in J order
    let hulls: Vec<(BigRational, BigRational)> = children
        .iter()
        .map(|y| {
            let a = compose_unchecked(system, &y.tail, hull.0.clone());
            let b = compose_unchecked(system, &y.tail, hull.1.clone());
            let (lo, hi) = ordered(a, b);
            (lo.rational_lower(), hi.rational_upper())
        })
        .collect();
    let outer = (&parent.lo, &parent.hi);
    let pre = frame.outer_bounds(outer);
    let mut verdict = Verdict::Pass;
    let mut witness: Option<(usize, f64, Option<f64>)> = None;
    for i in 0..hulls.len() - 1 {
        let (left_end, right_start) = (&hulls[i].1, &hulls[i + 1].0);
        let ratio = if right_start <= left_end {
            Bounds::exact(0.0)
        } else {
            frame.ratio_bounds_against(
                system,
                outer,
                &pre,
                (&S::from_rational(left_end), &S::from_rational(right_start)),
            )
        };
        let ln_ratio = if ratio.hi > 0.0 {
            ratio.ln_interval()
        } else {
            Bounds::exact(f64::NEG_INFINITY)
        };
        let v = if ln_ratio.lo >= threshold.hi {
            Verdict::Pass
        } else if ln_ratio.hi < threshold.lo {
            Verdict::Fail
        } else {
            Verdict::Indeterminate
        };
        verdict = verdict.and(v);
        let margin = if ln_ratio.lo > f64::NEG_INFINITY {
            Some((ln_ratio.lo - threshold.hi).next_down())
        } else {
            None
        };
        let ratio_lo = ratio.lo;
        let replace = match &witness {
            None => true,
            Some((_, r, m)) => match (margin, m) {
                (None, Some(_)) => true,
                (Some(x), Some(y)) => x < *y,
                (None, None) => ratio_lo < *r,
                _ => false,
            },
        };
        if replace {
            witness = Some((i, ratio_lo, margin));
        }
    }
    let witness = witness.map(|(i, lo_f, margin)| SeparationWitness {
        parent: tail_string(&parent.tail),
        left_child: tail_string(&children[i].tail),
        right_child: tail_string(&children[i + 1].tail),
        gap_ratio_lower: lo_f,
        margin,
    });
    ParentSeparation {
        verdict,
        pairs: children.len() * (children.len() - 1) / 2,
        witness,
    }
}

/// Result of one `Σ r_i^t ≥ 1` comparison.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MassSum {
    pub lower: f64,
    pub upper: f64,
    pub verdict: Verdict,
}

/// Decides `Σ_i r_i^t ≥ 1` for ratios known to lie in `[lo_i, hi_i] ⊆ [0,1]`.
///
/// Integer exponents are decided in exact rational arithmetic; other
/// exponents through certified logarithms and exponentials.
pub fn mass_verdict(ratios: &[(BigRational, BigRational)], t: &BigRational) -> MassSum {
    if let Some(k) = small_integer(t) {
        {
            let lo: BigRational = ratios.iter().map(|(a, _)| rpow(a, k)).sum();
            let hi: BigRational = ratios.iter().map(|(_, b)| rpow(b, k)).sum();
            let one = BigRational::one();
            let verdict = if lo >= one {
                Verdict::Pass
            } else if hi < one {
                Verdict::Fail
            } else {
                Verdict::Indeterminate
            };
            return MassSum {
                lower: f64_down(&lo),
                upper: f64_up(&hi),
                verdict,
            };
        }
    }
    let bounds: Vec<Bounds> = ratios
        .iter()
        .map(|(a, b)| Bounds::new(f64_down(a), f64_up(b)))
        .collect();
    mass_verdict_float(&bounds, t)
}

fn small_integer(t: &BigRational) -> Option<u32> {
    if t.is_integer() {
        t.to_integer().to_u32().filter(|&k| k <= 64)
    } else {
        None
    }
}

/// As [`mass_verdict`] for ratios known through float bounds, using
/// certified logarithms and exponentials.
pub fn mass_verdict_float(ratios: &[Bounds], t: &BigRational) -> MassSum {
    let t = Bounds::of(t);
    let terms: Vec<Bounds> = ratios
        .iter()
        .map(|r| {
            if r.hi <= 0.0 {
                Bounds::exact(0.0)
            } else {
                let e = t.mul(r.ln_interval()).exp();
                Bounds::new(if r.lo > 0.0 { e.lo } else { 0.0 }, e.hi)
            }
        })
        .collect();
    let lower = sum_lower(&terms.iter().map(|b| b.lo).collect::<Vec<_>>());
    let upper = sum_upper(&terms.iter().map(|b| b.hi).collect::<Vec<_>>());
    let verdict = if lower >= 1.0 {
        Verdict::Pass
    } else if upper < 1.0 {
        Verdict::Fail
    } else {
        Verdict::Indeterminate
    };
    MassSum {
        lower,
        upper,
        verdict,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerMass {
    pub layer: usize,
    pub parents_checked: usize,
    pub sampled: bool,
    pub verdict: Verdict,
    /// Smallest certified lower bound on `Σ (|B|/|A|)^{s(1+ε)}`.
    pub min_sum_lower: f64,
    pub worst_parent: Option<String>,
    /// The closing-chain bound for this layer's windows (informational).
    pub chain: ChainBound,
}

#[derive(Debug, Clone, Serialize)]
pub struct MassReport {
    #[serde(serialize_with = "crate::ser::rational")]
    pub exponent: BigRational,
    pub layers: Vec<LayerMass>,
    pub verdict: Verdict,
}

/// Checks `Σ_{B ∈ Des(A)} |B|^t ≥ |A|^t` for every parent in layers
/// `0..depth` whose children were built, with `t` given explicitly (the
/// construction uses `s(1+ε)`).
pub fn verify_mass<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    state: &ConstructionState,
    tree: &LayerTree<S>,
    depth: usize,
    exponent: &BigRational,
) -> Result<MassReport> {
    let mut layers = Vec::new();
    let mut overall = Verdict::Pass;
    for n in 0..depth.min(tree.depth()) {
        let children_layer = &tree.layers[n + 1];
        let sums: Vec<MassSum> = children_layer
            .families
            .par_iter()
            .map(|family| {
                let parent = &tree.layers[n].nodes[family.parent];
                let children = &children_layer.nodes[family.start..family.end];
                let outer = (&parent.lo, &parent.hi);
                if small_integer(exponent).is_some() {
                    let ratios: Vec<(BigRational, BigRational)> = children
                        .iter()
                        .map(|b| tree.frame.ratio_bounds_exact(system, outer, (&b.lo, &b.hi)))
                        .collect();
                    mass_verdict(&ratios, exponent)
                } else {
                    let pre = tree.frame.outer_bounds(outer);
                    let ratios: Vec<Bounds> = children
                        .iter()
                        .map(|b| tree.frame.ratio_bounds_against(system, outer, &pre, (&b.lo, &b.hi)))
                        .collect();
                    mass_verdict_float(&ratios, exponent)
                }
            })
            .collect();
        let mut verdict = Verdict::Pass;
        let mut min_lower = f64::INFINITY;
        let mut worst = None;
        for (family, sum) in children_layer.families.iter().zip(&sums) {
            verdict = verdict.and(sum.verdict);
            if sum.lower < min_lower {
                min_lower = sum.lower;
                worst = Some(tail_string(&tree.layers[n].nodes[family.parent].tail));
            }
        }
        overall = overall.and(verdict);
        layers.push(LayerMass {
            layer: n,
            parents_checked: sums.len(),
            sampled: tree.layers[n].sampled || children_layer.sampled,
            verdict,
            min_sum_lower: min_lower,
            worst_parent: worst,
            chain: chain_bound(state, n + 1, exponent, tree.pruning)?,
        });
    }
    Ok(MassReport {
        exponent: exponent.clone(),
        layers,
        verdict: overall,
    })
}

/// `κ^{-t} Π_i Σ_{d ∈ W_i} (c1/ξ_d^{1+ε})^t − (removed blocks) ≥ 1` for the
/// windows of one layer: the distortion-based lower bound on the mass sum.
#[derive(Debug, Clone, Serialize)]
pub struct ChainBound {
    pub layer: usize,
    pub lower: f64,
    pub upper: f64,
    pub verdict: Verdict,
}

pub fn chain_bound(
    state: &ConstructionState,
    layer: usize,
    exponent: &BigRational,
    pruning: Pruning,
) -> Result<ChainBound> {
    let p = &state.params;
    let t = Bounds::of(exponent);
    let one_eps = p.one_plus_eps();
    let ln_c1 = Bounds::ln(&p.c1);
    let mut product = t.mul(Bounds::ln(&p.kappa)).neg().exp();
    for j in state.layer_windows(layer)? {
        let mut lows = Vec::new();
        let mut highs = Vec::new();
        for &d in &state.windows[j - 1] {
            let term = t
                .mul(ln_c1.sub(one_eps.mul(Bounds::ln(&state.xi.exact(d)))))
                .exp();
            lows.push(term.lo);
            highs.push(term.hi);
        }
        product = product.mul(Bounds::new(sum_lower(&lows), sum_upper(&highs)));
    }
    let removed = if pruning.prunes(layer) { 2.0 } else { 0.0 };
    let value = product.sub(Bounds::exact(removed));
    Ok(ChainBound {
        layer,
        lower: value.lo,
        upper: value.hi,
        verdict: value.at_least(Bounds::exact(1.0)),
    })
}

/// Structural properties of the layer tree.
#[derive(Debug, Clone, Serialize)]
pub struct TreeReport {
    pub layers: Vec<usize>,
    /// Every child extends its parent by one block drawn from the windows.
    pub extends_parents: bool,
    /// Child counts equal the block count minus the removed extremes.
    pub child_counts: bool,
    /// Every expanded parent keeps at least two children.
    pub at_least_two: bool,
    /// Children lie inside their parents.
    pub nested: bool,
}

impl TreeReport {
    pub fn verdict(&self) -> Verdict {
        if self.extends_parents && self.child_counts && self.at_least_two && self.nested {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

pub fn check_tree<S: Scalar>(state: &ConstructionState, tree: &LayerTree<S>) -> Result<TreeReport> {
    let mut report = TreeReport {
        layers: tree.sizes(),
        extends_parents: true,
        child_counts: true,
        at_least_two: true,
        nested: true,
    };
    for layer in &tree.layers[1..] {
        let windows: Vec<&[u64]> = layer
            .windows
            .iter()
            .map(|&j| state.windows[j - 1].as_slice())
            .collect();
        let blocks: usize = windows.iter().map(|w| w.len()).product();
        let expected = blocks
            - if tree.pruning.prunes(layer.index) {
                2
            } else {
                0
            };
        for family in &layer.families {
            let parent = &tree.layers[layer.index - 1].nodes[family.parent];
            let children = &layer.nodes[family.start..family.end];
            report.child_counts &= children.len() == expected;
            report.at_least_two &= children.len() >= 2;
            for child in children {
                let (head, block) = child.tail.split_at(parent.tail.len().min(child.tail.len()));
                report.extends_parents &= head == parent.tail.as_slice()
                    && block.len() == windows.len()
                    && block
                        .iter()
                        .zip(&windows)
                        .all(|(d, w)| w.binary_search(d).is_ok());
                report.nested &=
                    parent.lo.certainly_le(&child.lo) && child.hi.certainly_le(&parent.hi);
            }
        }
    }
    Ok(report)
}

/// Pairwise disjointness of the intervals of each layer.
#[derive(Debug, Clone, Serialize)]
pub struct DisjointnessReport {
    pub layer: usize,
    pub intervals: usize,
    /// Neighbours sharing an endpoint (closed intervals touch).
    pub touching: usize,
    /// Neighbours whose interiors overlap or cannot be separated.
    pub overlapping: usize,
    /// Interiors are pairwise disjoint.
    pub verdict: Verdict,
}

/// Layers are stored left to right in `J` coordinates, so neighbours suffice.
pub fn check_disjointness<S: Scalar>(tree: &LayerTree<S>) -> Vec<DisjointnessReport> {
    tree.layers
        .iter()
        .map(|layer| {
            let mut touching = 0;
            let mut overlapping = 0;
            for w in layer.nodes.windows(2) {
                let (a, b) = (&w[0].hi, &w[1].lo);
                if a.certainly_lt(b) {
                    continue;
                }
                if a.certainly_le(b) {
                    touching += 1;
                } else {
                    overlapping += 1;
                }
            }
            DisjointnessReport {
                layer: layer.index,
                intervals: layer.nodes.len(),
                touching,
                overlapping,
                verdict: if overlapping == 0 {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                },
            }
        })
        .collect()
}

/// `δ_n ≤ ρ^{N_1 − 1 + n}` for the largest interval of each layer.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaReport {
    pub layer: usize,
    /// Upper bound on `ln δ_n`.
    pub ln_delta_upper: f64,
    /// `(N_1 − 1 + n) ln ρ`, rounded down; `None` when it overflows `f64`.
    pub ln_bound: Option<f64>,
    /// The prefix part was decided by counting `m`-blocks under the
    /// declared contraction ratio rather than from certified lengths.
    pub prefix_by_contraction: bool,
    pub verdict: Verdict,
}

/// Splits `|F(J)| ≤ ρ^{N_1−1} ρ^n` into the prefix part, decided from the
/// frame, and `|F(J)|/|F([0,1])| ≤ ρ^n`, decided exactly.
pub fn check_delta<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    state: &ConstructionState,
    tree: &LayerTree<S>,
) -> Vec<DeltaReport> {
    let rho = &state.params.rho;
    let ln_rho = Bounds::ln(rho);
    let prefix_blocks = &state.n[0] - BigUint::one();
    let frame = &tree.frame;
    let (prefix, by_contraction) = prefix_verdict(system, state, frame, &prefix_blocks, ln_rho);
    let unit = (S::zero(), S::one());
    let unit_bounds = frame.outer_bounds((&unit.0, &unit.1));
    tree.layers
        .iter()
        .map(|layer| {
            let n = layer.index;
            let bound_ratio = rpow(rho, n as u32);
            let bound_lo = f64_down(&bound_ratio);
            let is_whole =
                |node: &Node<S>| node.lo.is_exact_zero() && (node.hi.clone() - S::one()).is_exact_zero();
            // certified float bounds settle almost every node; the rest are
            // compared exactly
            let mut worst: Option<f64> = None;
            let mut ratio_ok = Verdict::Pass;
            for node in &layer.nodes {
                let hi = if is_whole(node) {
                    1.0
                } else {
                    frame
                        .ratio_bounds_against(system, (&unit.0, &unit.1), &unit_bounds, (&node.lo, &node.hi))
                        .hi
                };
                if worst.map_or(true, |w| hi > w) {
                    worst = Some(hi);
                }
                if hi > bound_lo && !is_whole(node) {
                    let (_, exact) =
                        frame.ratio_bounds_exact(system, (&unit.0, &unit.1), (&node.lo, &node.hi));
                    if exact > bound_ratio {
                        ratio_ok = Verdict::Fail;
                    }
                }
            }
            // every ratio is at most the worst float upper bound
            let ln_upper = worst.filter(|&w| w > 0.0).map_or(f64::NEG_INFINITY, |w| {
                (frame.ln_length_upper + Bounds::exact(w).ln_interval().hi).next_up()
            });
            let total = Bounds::of_biguint(&(&prefix_blocks + BigUint::from(n))).mul(ln_rho);
            DeltaReport {
                layer: n,
                ln_delta_upper: ln_upper,
                ln_bound: total.lo.is_finite().then_some(total.lo),
                prefix_by_contraction: by_contraction,
                verdict: prefix.and(ratio_ok),
            }
        })
        .collect()
}

fn prefix_verdict<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    state: &ConstructionState,
    frame: &crate::ifs::PrefixFrame,
    blocks: &BigUint,
    ln_rho: Bounds,
) -> (Verdict, bool) {
    let target = Bounds::of_biguint(blocks).mul(ln_rho);
    if target.lo.is_finite() && frame.ln_length_upper <= target.lo {
        return (Verdict::Pass, false);
    }
    if let crate::ifs::FrameKind::Affine = frame.kind {
        // |F([0,1])| = a^L with a = |f_d([0,1])| ≤ 1, so a^m ≤ ρ and
        // L ≥ m·blocks give a^L ≤ ρ^blocks exactly
        let d = state.first_digit();
        let (lo, hi) = ordered(system.map(d, &S::zero()), system.map(d, &S::one()));
        let slope = hi.rational_upper() - lo.rational_lower();
        let m = state.block_m();
        if slope <= BigRational::one()
            && rpow(&slope, m as u32) <= state.params.rho
            && frame.len >= blocks * BigUint::from(m)
        {
            return (Verdict::Pass, false);
        }
    }
    let m = BigUint::from(state.block_m());
    let verdict = prefix_by_composition(system, state, frame, blocks, target);
    if verdict != Verdict::Indeterminate {
        return (verdict, false);
    }
    // every m consecutive maps contract by ρ and every map is 1-Lipschitz,
    // so a prefix of at least m·blocks digits has length ≤ ρ^blocks
    if state.params.rho <= BigRational::one() && frame.len >= blocks * m {
        return (Verdict::Pass, true);
    }
    (Verdict::Indeterminate, false)
}

fn prefix_by_composition<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    state: &ConstructionState,
    frame: &crate::ifs::PrefixFrame,
    blocks: &BigUint,
    target: Bounds,
) -> Verdict {
    // short prefixes: compose and compare exactly
    let (Some(len), Some(k)) = (frame.len.to_usize(), blocks.to_u32()) else {
        return Verdict::Indeterminate;
    };
    if len > 4096 {
        return Verdict::Indeterminate;
    }
    let digits = vec![state.first_digit(); len];
    let a = compose_unchecked(system, &digits, S::zero());
    let b = compose_unchecked(system, &digits, S::one());
    let (lo, hi) = ordered(a, b);
    let length = hi.rational_upper() - lo.rational_lower();
    if Signed::abs(&length) <= rpow(&state.params.rho, k) {
        Verdict::Pass
    } else if target.hi.is_finite() && frame.ln_length_lower > target.hi {
        Verdict::Fail
    } else {
        Verdict::Indeterminate
    }
}
