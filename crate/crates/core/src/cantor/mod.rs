//! The digit-window Cantor construction inside `S(f, D, φ)` and checks of
//! the separation and mass hypotheses of the mass distribution lemma on its
//! finite layers.
//!
//! Coordinates: every layer interval is `F(J)` where `F = f_{d_1}^{L}` is the
//! constant prefix map (`L = mN_1 - 1`) and `J = f_{tail}([0,1])` is computed
//! exactly. Length ratios inside `F` come from its [`PrefixFrame`], so the
//! astronomically long prefix is never composed.

mod layers;
mod member;
mod sequences;
mod verify;

pub use layers::{
    build_layers, local_block, Family, Layer, LayerTree, Node, Pruning, WindowOrders,
};
pub use member::{sample_member, satisfies_growth_condition, MemberChoice, MemberSample};
pub use sequences::{check_nj, check_rk, choose_nj, choose_rk, NjCheck, RkCheck};
pub use verify::{
    chain_bound, check_delta, check_disjointness, check_tree, mass_verdict, mass_verdict_float,
    verify_mass, verify_separation, ChainBound, DeltaReport, DisjointnessReport, LayerMass,
    LayerSeparation, MassReport, SeparationReport, SeparationWitness, TreeReport,
};

use crate::error::{Error, Result};
use crate::exponent::{DigitSet, XiSequence};
use crate::growth::Growth;
use crate::ifs::{Iifs, PrefixFrame, SystemParams};
use crate::rigor::{f64_down, rational_of, Bounds};
use crate::scalar::Scalar;
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

pub const DEFAULT_EPSILON: f64 = 0.1;
/// Number of `N_j` built by default; windows exist for `j < J_MAX`.
pub const DEFAULT_J_MAX: usize = 5;
/// Largest layer enumerated exhaustively.
pub const LAYER_CAP: usize = 1_000_000;
/// Longest digit-window sum searched when choosing `r_k`.
pub const RK_SEARCH_CAP: u64 = 10_000_000;

/// Constants of one construction. All reals are exact rationals.
#[derive(Debug, Clone, Serialize)]
pub struct ConstructionParams {
    #[serde(serialize_with = "crate::ser::rational")]
    pub s: BigRational,
    #[serde(serialize_with = "crate::ser::rational")]
    pub epsilon: BigRational,
    #[serde(serialize_with = "crate::ser::rational")]
    pub c1: BigRational,
    #[serde(serialize_with = "crate::ser::rational")]
    pub kappa: BigRational,
    #[serde(serialize_with = "crate::ser::rational")]
    pub rho: BigRational,
    pub block_m: usize,
}

impl ConstructionParams {
    pub fn new(
        s: BigRational,
        epsilon: BigRational,
        c1: BigRational,
        kappa: BigRational,
        rho: BigRational,
        block_m: usize,
    ) -> Result<Self> {
        for (name, v) in [
            ("s", &s),
            ("epsilon", &epsilon),
            ("c1", &c1),
            ("kappa", &kappa),
            ("rho", &rho),
        ] {
            if !v.is_positive() {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        if rho >= BigRational::one() {
            return Err(Error::InvalidInput("rho must be below 1".into()));
        }
        if block_m == 0 {
            return Err(Error::InvalidInput(
                "block length must be at least 1".into(),
            ));
        }
        Ok(ConstructionParams {
            s,
            epsilon,
            c1,
            kappa,
            rho,
            block_m,
        })
    }

    /// Defaults `ε = 0.1`, `s = 0.9·s0/(1+ε)²` with the system's `κ`, `ρ`, `m`.
    pub fn for_system(
        params: &SystemParams,
        c1: &BigRational,
        s0: f64,
        s: Option<f64>,
        epsilon: Option<f64>,
    ) -> Result<Self> {
        if s0 <= 0.0 {
            return Err(Error::Infeasible(
                "s0 = 0: nothing to construct, the dimension bound is the trivial 0".into(),
            ));
        }
        let eps = epsilon.unwrap_or(DEFAULT_EPSILON);
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidInput(
                "epsilon must be a positive number".into(),
            ));
        }
        let s = s.unwrap_or(0.9 * s0 / ((1.0 + eps) * (1.0 + eps)));
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidInput("s must be a positive number".into()));
        }
        let built = ConstructionParams::new(
            rational_of(s),
            rational_of(eps),
            c1.clone(),
            params.kappa.clone(),
            params.rho.clone(),
            params.m,
        )?;
        built.check_against(s0)?;
        Ok(built)
    }

    /// `s(1+ε)`, the exponent in the mass condition.
    pub fn exponent(&self) -> BigRational {
        &self.s * (BigRational::one() + &self.epsilon)
    }

    /// Requires `s(1+ε)² < s0`.
    pub fn check_against(&self, s0: f64) -> Result<()> {
        let one_eps = BigRational::one() + &self.epsilon;
        let lhs = &self.s * &one_eps * &one_eps;
        if rational_of(s0) <= lhs {
            return Err(Error::InvalidInput(format!(
                "s(1+eps)^2 = {:.6} is not below the exponent estimate {s0:.6}",
                f64_down(&lhs)
            )));
        }
        Ok(())
    }

    pub(crate) fn one_plus_eps(&self) -> Bounds {
        Bounds::of(&(BigRational::one() + &self.epsilon))
    }

    pub(crate) fn eps_bounds(&self) -> Bounds {
        Bounds::of(&self.epsilon)
    }

    pub fn s_f64(&self) -> f64 {
        self.s.to_f64().unwrap_or(f64::NAN)
    }

    pub fn epsilon_f64(&self) -> f64 {
        self.epsilon.to_f64().unwrap_or(f64::NAN)
    }
}

/// The sequences `r_k`, `N_j` and the digit windows they define.
#[derive(Debug, Clone, Serialize)]
pub struct ConstructionState {
    pub params: ConstructionParams,
    #[serde(skip)]
    pub digits: DigitSet,
    #[serde(skip)]
    pub xi: XiSequence,
    #[serde(skip)]
    pub growth: Growth,
    pub r: Vec<u64>,
    #[serde(serialize_with = "crate::ser::biguints")]
    pub n: Vec<BigUint>,
    /// `windows[j-1] = {d_i : j ≤ i < r_j}` in increasing order.
    pub windows: Vec<Vec<u64>>,
}

impl ConstructionState {
    /// Chooses `r_1..r_{j_max+2}` and `N_1..N_{j_max}` greedily.
    pub fn build(
        digits: &DigitSet,
        xi: &XiSequence,
        growth: &Growth,
        params: &ConstructionParams,
        j_max: usize,
    ) -> Result<Self> {
        if j_max < 2 {
            return Err(Error::InvalidInput(
                "at least two N_j are needed for one window".into(),
            ));
        }
        let r = choose_rk(digits, xi, params, j_max + 2, RK_SEARCH_CAP)?;
        let n = choose_nj(growth, digits, xi, &r, params, j_max)?;
        ConstructionState::from_sequences(digits, xi, growth, params, r, n)
    }

    /// Wraps given sequences without re-deriving them (use [`check_rk`] and
    /// [`check_nj`] to validate).
    pub fn from_sequences(
        digits: &DigitSet,
        xi: &XiSequence,
        growth: &Growth,
        params: &ConstructionParams,
        r: Vec<u64>,
        n: Vec<BigUint>,
    ) -> Result<Self> {
        if n.len() < 2 || r.len() < n.len() {
            return Err(Error::InvalidInput(
                "need at least two N_j and as many r_k".into(),
            ));
        }
        let mut windows = Vec::with_capacity(n.len() - 1);
        for j in 1..n.len() {
            let rj = r[j - 1] as usize;
            if rj < j + 4 {
                return Err(Error::Corrupted(format!(
                    "r_{j} = {rj} leaves fewer than four window digits"
                )));
            }
            windows.push(
                (j..rj)
                    .map(|i| digits.nth_value(i))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Ok(ConstructionState {
            params: params.clone(),
            digits: digits.clone(),
            xi: xi.clone(),
            growth: growth.clone(),
            r,
            n,
            windows,
        })
    }

    pub fn block_m(&self) -> usize {
        self.params.block_m
    }

    /// `d_1`, the digit repeated in the root prefix.
    pub fn first_digit(&self) -> u64 {
        self.digits.min()
    }

    /// `mN_1 - 1`, the length of the root prefix.
    pub fn prefix_len(&self) -> BigUint {
        &self.n[0] * BigUint::from(self.block_m()) - BigUint::one()
    }

    /// The root frame `F = f_{d_1}^{mN_1-1}`.
    pub fn frame<S: Scalar>(&self, system: &(impl Iifs<S> + ?Sized)) -> Result<PrefixFrame> {
        system.prefix_frame(self.first_digit(), &self.prefix_len())
    }

    /// Number of tail positions covered by the stored windows.
    pub fn tail_horizon(&self) -> BigUint {
        let last = self.n.last().unwrap();
        (last - &self.n[0]) * BigUint::from(self.block_m())
    }

    /// The `j` with `m(N_j - N_1) + 1 ≤ p ≤ m(N_{j+1} - N_1)`.
    pub fn window_index(&self, p: &BigUint) -> Result<usize> {
        if p.is_zero() {
            return Err(Error::InvalidInput("tail positions start at 1".into()));
        }
        let m = BigUint::from(self.block_m());
        for j in 1..self.n.len() {
            let upper = (&self.n[j] - &self.n[0]) * &m;
            if p <= &upper {
                return Ok(j);
            }
        }
        Err(Error::DepthOverflow(format!(
            "tail position {p} lies beyond the built windows (horizon {})",
            self.tail_horizon()
        )))
    }

    /// `(l_p, u_p) = (j, r_j)`.
    pub fn bounds_at(&self, p: &BigUint) -> Result<(usize, u64)> {
        let j = self.window_index(p)?;
        Ok((j, self.r[j - 1]))
    }

    /// `D_p`, increasing.
    pub fn window(&self, p: &BigUint) -> Result<&[u64]> {
        Ok(&self.windows[self.window_index(p)? - 1])
    }

    pub fn window_u64(&self, p: u64) -> Result<&[u64]> {
        self.window(&BigUint::from(p))
    }

    /// Window indices `j` of the `m` tail positions in layer `layer ≥ 1`.
    pub fn layer_windows(&self, layer: usize) -> Result<Vec<usize>> {
        let m = self.block_m() as u64;
        ((layer as u64 - 1) * m + 1..=layer as u64 * m)
            .map(|p| self.window_index(&BigUint::from(p)))
            .collect()
    }

    /// Largest layer whose positions all have windows, capped at `usize`.
    pub fn max_layer(&self) -> usize {
        let layers = self.tail_horizon() / BigUint::from(self.block_m());
        layers.to_usize().unwrap_or(usize::MAX)
    }
}
