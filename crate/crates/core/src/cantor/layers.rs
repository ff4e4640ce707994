//! Layers `B_n` of the construction and their intervals.

use super::ConstructionState;
use crate::error::{Error, Result};
use crate::ifs::{compose_unchecked, ordered, DigitString, Iifs, PrefixFrame};
use crate::scalar::Scalar;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashMap;

/// Which children survive in each family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pruning {
    /// The construction: from layer 2 on, the leftmost and rightmost child
    /// of every parent are removed.
    Standard,
    /// Nothing is removed; used to show the separation check can fail.
    KeepAll,
}

impl Pruning {
    /// Whether layer `layer` removes extreme children.
    pub fn prunes(self, layer: usize) -> bool {
        self == Pruning::Standard && layer >= 2
    }
}

/// One layer element: the digits after the root prefix and
/// `J = f_{tail}([0,1])` with ordered endpoints.
#[derive(Debug, Clone)]
pub struct Node<S> {
    pub tail: Vec<u64>,
    pub lo: S,
    pub hi: S,
}

/// The children of one parent: `nodes[start..end]` of the next layer,
/// ordered left to right in `J` coordinates.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Family {
    pub parent: usize,
    pub start: usize,
    pub end: usize,
    /// Removed block whose interval is leftmost on the real line.
    pub left: Option<Vec<u64>>,
    /// Removed block whose interval is rightmost on the real line.
    pub right: Option<Vec<u64>>,
}

#[derive(Debug, Clone)]
pub struct Layer<S> {
    pub index: usize,
    pub nodes: Vec<Node<S>>,
    /// Empty for the root layer.
    pub families: Vec<Family>,
    /// Only some parents were expanded because the layer exceeded the cap.
    pub sampled: bool,
    /// Window index `j` of each position in the layer's block.
    pub windows: Vec<usize>,
}

/// Layers `0..=depth` together with the root frame.
#[derive(Debug, Clone)]
pub struct LayerTree<S> {
    pub layers: Vec<Layer<S>>,
    pub frame: PrefixFrame,
    pub pruning: Pruning,
    pub cap: usize,
    pub seed: u64,
}

impl<S> LayerTree<S> {
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.nodes.len()).collect()
    }

    pub fn exhaustive(&self) -> bool {
        self.layers.iter().all(|l| !l.sampled)
    }
}

/// Window digits sorted left to right by the position of `f_d([0,1])`.
#[derive(Debug, Clone)]
pub struct WindowOrders {
    orders: Vec<Vec<u64>>,
}

impl WindowOrders {
    /// Sorts every window by exact endpoint comparison and checks that the
    /// images have disjoint interiors.
    pub fn new<S: Scalar>(
        system: &(impl Iifs<S> + ?Sized),
        state: &ConstructionState,
    ) -> Result<Self> {
        let mut orders = Vec::with_capacity(state.windows.len());
        for window in &state.windows {
            let mut images: Vec<(u64, S, S)> = window
                .iter()
                .map(|&d| {
                    let (lo, hi) = ordered(system.map(d, &S::zero()), system.map(d, &S::one()));
                    (d, lo, hi)
                })
                .collect();
            images.sort_by_cached_key(|a| a.1.rational_lower());
            for w in images.windows(2) {
                if !w[0].2.certainly_le(&w[1].1) {
                    return Err(Error::Corrupted(format!(
                        "images of digits {} and {} are not separated",
                        w[0].0, w[1].0
                    )));
                }
            }
            orders.push(images.into_iter().map(|(d, _, _)| d).collect());
        }
        Ok(WindowOrders { orders })
    }

    /// Digits of window `j`, leftmost image first.
    pub fn order(&self, j: usize) -> &[u64] {
        &self.orders[j - 1]
    }
}

/// The block whose image is `inset` places from the left (or right) end of
/// `{f_c̄([0,1]) : c̄ ∈ W_1 × ⋯ × W_m}`.
///
/// Blocks sharing a first digit are contiguous, so the extreme block is
/// found one position at a time, flipping sides after every reversing
/// branch. `inset` moves only the last position, which is exact because
/// each window has at least four digits.
pub fn local_block(
    orders: &[&[u64]],
    reverses: &dyn Fn(u64) -> bool,
    from_left: bool,
    inset: usize,
) -> Vec<u64> {
    let mut flipped = false;
    let mut out = Vec::with_capacity(orders.len());
    for (i, order) in orders.iter().enumerate() {
        let k = if i + 1 == orders.len() { inset } else { 0 };
        let d = if from_left != flipped {
            order[k]
        } else {
            order[order.len() - 1 - k]
        };
        flipped ^= reverses(d);
        out.push(d);
    }
    out
}

/// Every block of a layer with its image, leftmost first.
struct BlockImages<S> {
    blocks: Vec<(Vec<u64>, S, S)>,
}

impl<S: Scalar> BlockImages<S> {
    fn new(system: &(impl Iifs<S> + ?Sized), windows: &[&[u64]]) -> Result<Self> {
        let mut combos: Vec<Vec<u64>> = vec![Vec::new()];
        for w in windows {
            combos = combos
                .into_iter()
                .flat_map(|p| {
                    w.iter().map(move |&d| {
                        let mut q = p.clone();
                        q.push(d);
                        q
                    })
                })
                .collect();
        }
        let mut blocks: Vec<(Vec<u64>, S, S)> = combos
            .into_par_iter()
            .map(|b| {
                let (lo, hi) = ordered(
                    compose_unchecked(system, &b, S::zero()),
                    compose_unchecked(system, &b, S::one()),
                );
                (b, lo, hi)
            })
            .collect();
        blocks.sort_by_cached_key(|a| a.1.rational_lower());
        for w in blocks.windows(2) {
            if !w[0].2.certainly_le(&w[1].1) {
                return Err(Error::Corrupted(format!(
                    "block images {:?} and {:?} overlap",
                    w[0].0, w[1].0
                )));
            }
        }
        Ok(BlockImages { blocks })
    }
}

fn parity_reversed<S: Scalar>(system: &(impl Iifs<S> + ?Sized), digits: &[u64]) -> bool {
    digits.iter().filter(|&&d| system.reverses(d)).count() % 2 == 1
}

/// Children of one parent in `J` order, with the removed extremes.
fn expand<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    parent_index: usize,
    parent: &Node<S>,
    images: &BlockImages<S>,
    prune: bool,
    frame_reversing: bool,
) -> Result<(Vec<Node<S>>, Option<Vec<u64>>, Option<Vec<u64>>)> {
    let flipped = parity_reversed(system, &parent.tail);
    let mut children: Vec<Node<S>> = Vec::with_capacity(images.blocks.len());
    let mut push = |(block, lo, hi): &(Vec<u64>, S, S)| {
        let a = compose_unchecked(system, &parent.tail, lo.clone());
        let b = compose_unchecked(system, &parent.tail, hi.clone());
        let (lo, hi) = ordered(a, b);
        let mut tail = parent.tail.clone();
        tail.extend_from_slice(block);
        children.push(Node { tail, lo, hi });
    };
    if flipped {
        images.blocks.iter().rev().for_each(&mut push);
    } else {
        images.blocks.iter().for_each(&mut push);
    }
    for w in children.windows(2) {
        if !w[0].hi.certainly_le(&w[1].lo) {
            return Err(Error::Corrupted(format!(
                "children {:?} and {:?} of parent {parent_index} are out of order",
                w[0].tail, w[1].tail
            )));
        }
    }
    if !prune {
        return Ok((children, None, None));
    }
    if children.len() < 4 {
        return Err(Error::Corrupted(format!(
            "parent {parent_index} has fewer than four candidate children"
        )));
    }
    let block = |n: &Node<S>| n.tail[parent.tail.len()..].to_vec();
    let last = children.pop().unwrap();
    let first = children.remove(0);
    // J order is real order unless the root prefix map reverses it
    let (left, right) = if frame_reversing {
        (block(&last), block(&first))
    } else {
        (block(&first), block(&last))
    };
    Ok((children, Some(left), Some(right)))
}

/// Builds layers `0..=depth`. Layers that would exceed `cap` intervals are
/// grown from a seeded random subset of their parents and flagged sampled.
pub fn build_layers<S: Scalar>(
    system: &(impl Iifs<S> + ?Sized),
    state: &ConstructionState,
    depth: usize,
    cap: usize,
    seed: u64,
    pruning: Pruning,
) -> Result<LayerTree<S>> {
    if depth > state.max_layer() {
        return Err(Error::DepthOverflow(format!(
            "depth {depth} exceeds the {} layers covered by the built windows",
            state.max_layer()
        )));
    }
    let frame = state.frame(system)?;
    let root = Layer {
        index: 0,
        nodes: vec![Node {
            tail: Vec::new(),
            lo: S::zero(),
            hi: S::one(),
        }],
        families: Vec::new(),
        sampled: false,
        windows: Vec::new(),
    };
    let mut layers = vec![root];
    let mut cache: HashMap<Vec<usize>, BlockImages<S>> = HashMap::new();
    for index in 1..=depth {
        let windows = state.layer_windows(index)?;
        if !cache.contains_key(&windows) {
            let slices: Vec<&[u64]> = windows
                .iter()
                .map(|&j| state.windows[j - 1].as_slice())
                .collect();
            cache.insert(windows.clone(), BlockImages::new(system, &slices)?);
        }
        let images = &cache[&windows];
        let prune = pruning.prunes(index);
        let per_parent = images.blocks.len() - if prune { 2 } else { 0 };
        let parents = &layers[index - 1].nodes;
        let (chosen, sampled): (Vec<usize>, bool) =
            if parents.len().saturating_mul(per_parent) <= cap {
                ((0..parents.len()).collect(), false)
            } else {
                let count = (cap / per_parent.max(1)).clamp(1, parents.len());
                let mut rng = ChaCha8Rng::seed_from_u64(
                    seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
                );
                let mut picked = sample(&mut rng, parents.len(), count).into_vec();
                picked.sort_unstable();
                (picked, true)
            };
        let expanded: Vec<_> = chosen
            .par_iter()
            .map(|&p| expand(system, p, &parents[p], images, prune, frame.reversing))
            .collect::<Result<Vec<_>>>()?;
        let mut nodes = Vec::with_capacity(expanded.len() * per_parent);
        let mut families = Vec::with_capacity(expanded.len());
        for (&parent, (children, left, right)) in chosen.iter().zip(expanded) {
            let start = nodes.len();
            nodes.extend(children);
            families.push(Family {
                parent,
                start,
                end: nodes.len(),
                left,
                right,
            });
        }
        let sampled = sampled || layers[index - 1].sampled;
        layers.push(Layer {
            index,
            nodes,
            families,
            sampled,
            windows,
        });
    }
    Ok(LayerTree {
        layers,
        frame,
        pruning,
        cap,
        seed,
    })
}

/// The digit string of a node, for error messages and witnesses.
pub(crate) fn tail_string(tail: &[u64]) -> String {
    DigitString::new(tail.to_vec())
        .map(|d| d.to_string())
        .unwrap_or_else(|_| "()".into())
}
