//! The stages of an experiment and the driver that chains them.

use crate::config::{AxiomConfig, ConstructionConfig, DimensionConfig, ExperimentConfig, ProductConfig};
use crate::report::*;
use iifs::cantor::{
    build_layers, check_delta, check_disjointness, check_nj, check_rk, check_tree, sample_member,
    satisfies_growth_condition, verify_mass, verify_separation, ConstructionParams,
    ConstructionState, MemberChoice, Pruning,
};
use iifs::dimension::{build_cover, critical_exponent_of, slow_growth_sweep, Constraint};
use iifs::exponent::{s0_estimate, tau_estimate, DigitSet, XiSequence};
use iifs::growth::Growth;
use iifs::ifs::{
    estimate_distortion, fit_regularity, random_strings, uniform_grid, verify_contraction,
    verify_open_set, verify_round_trip, Iifs,
};
use iifs::product_sets::{build_zeta, subset_chain_check, ChainOptions, ProductSpec, ZetaOptions};
use iifs::rigor::{f64_down, rational_at_most, Verdict};
use iifs::ser::rational_string;
use iifs::systems::{parse_rational, SystemChoice};
use iifs::{Error, Exact, Interval, Result, Scalar};
use num_rational::BigRational;

/// Exponent estimates below this are treated as `s0 = 0`.
pub const ZERO_EXPONENT: f64 = 1e-3;

pub fn exponent_stage(
    system: &SystemChoice,
    digits: &DigitSet,
    horizon: usize,
) -> Result<ExponentSummary> {
    let xi = system.float().xi();
    let s0 = s0_estimate(digits, &xi, horizon)?;
    let tau = tau_estimate(digits, horizon)?;
    let tau_half = tau.value / 2.0;
    Ok(ExponentSummary {
        xi: xi.label(),
        tau_is_twice_s0: (xi == XiSequence::Power(2)).then(|| tau.value == 2.0 * s0.value),
        s0,
        tau,
        tau_half,
    })
}

fn axioms_in<S: Scalar>(
    system: &dyn Iifs<S>,
    cfg: &AxiomConfig,
    seed: u64,
) -> Result<AxiomSummary> {
    let grid = uniform_grid::<S>(cfg.grid);
    let contraction = verify_contraction(system, &grid, cfg.digit_horizon)?;
    let strings = random_strings(
        cfg.distortion_depth,
        cfg.digit_horizon,
        cfg.distortion_strings,
        seed,
    );
    let distortion = estimate_distortion(system, &strings, &grid)?;
    let open_set = verify_open_set(system, cfg.open_set_depth, cfg.digit_horizon);
    let coded = random_strings(cfg.round_trip_depth, 10, cfg.round_trip_strings, seed);
    let round_trip = verify_round_trip(system, &coded);
    let all = contraction.passes && distortion.passes && open_set.passes && round_trip.passes;
    Ok(AxiomSummary {
        arithmetic: format!("{:?}", S::MODE).to_lowercase(),
        contraction,
        distortion,
        open_set,
        round_trip,
        verdict: if all { Verdict::Pass } else { Verdict::Fail },
    })
}

pub fn axiom_stage(system: &SystemChoice, cfg: &AxiomConfig, seed: u64) -> Result<AxiomSummary> {
    match system.exact() {
        Some(sys) => axioms_in::<Exact>(&*sys, cfg, seed),
        None => axioms_in::<Interval>(&*system.interval(), cfg, seed),
    }
}

/// The regularity constant used by the construction: `1/4` for Gauss
/// (`|I_1(n)| ≥ n⁻²/2` and `κ = 4`), `1` for the affine systems, and the
/// fitted value, rounded down to a rational, otherwise.
pub fn default_c1(system: &SystemChoice, epsilon: f64) -> Result<BigRational> {
    Ok(match system {
        SystemChoice::Gauss => BigRational::new(1.into(), 4.into()),
        SystemChoice::Luroth | SystemChoice::Gls(_) => BigRational::from_integer(1.into()),
        SystemChoice::Quadratic(q) => {
            let fit = fit_regularity::<f64>(q, epsilon, 200, &uniform_grid::<f64>(32))?;
            let (p, d) = rational_at_most(&iifs::rigor::rational_of(fit.c1 * 0.99), 1 << 20);
            BigRational::new(p.into(), d.into())
        }
    })
}

/// `r_k`, `N_j` and windows for the configured system.
pub fn build_state(
    system: &SystemChoice,
    digits: &DigitSet,
    growth: &Growth,
    s0: f64,
    cfg: &ConstructionConfig,
) -> Result<ConstructionState> {
    let float = system.float();
    let params = float.params();
    let c1 = match &cfg.c1 {
        Some(text) => parse_rational(text)
            .ok_or_else(|| Error::InvalidInput(format!("bad c1 '{text}'")))?,
        None => default_c1(system, cfg.epsilon.unwrap_or(iifs::cantor::DEFAULT_EPSILON))?,
    };
    let built = ConstructionParams::for_system(&params, &c1, s0, cfg.s, cfg.epsilon)?;
    ConstructionState::build(digits, &float.xi(), growth, &built, cfg.j_max)
}

fn pruning_of(cfg: &ConstructionConfig) -> Result<Pruning> {
    match cfg.pruning.as_str() {
        "standard" => Ok(Pruning::Standard),
        "keep-all" => Ok(Pruning::KeepAll),
        other => Err(Error::InvalidInput(format!("unknown pruning '{other}'"))),
    }
}

/// One layer interval, in the coordinates of the root block.
#[derive(Debug, Clone)]
pub struct LayerInterval {
    pub layer: usize,
    pub tail: Vec<u64>,
    pub lo: f64,
    pub hi: f64,
}

fn construct_in<S: Scalar>(
    system: &dyn Iifs<S>,
    state: &ConstructionState,
    cfg: &ConstructionConfig,
    seed: u64,
    intervals: Option<&mut Vec<LayerInterval>>,
) -> Result<ConstructionSummary> {
    let p = &state.params;
    let xi = &state.xi;
    let rk_checks = check_rk(&state.digits, xi, p, &state.r)?;
    let nj_checks = check_nj(&state.growth, &state.digits, xi, &state.r, p, &state.n)?;
    let pruning = pruning_of(cfg)?;
    let tree = build_layers::<S>(system, state, cfg.depth, cfg.cap, seed, pruning)?;
    if let Some(out) = intervals {
        for layer in &tree.layers {
            out.extend(layer.nodes.iter().map(|node| LayerInterval {
                layer: layer.index,
                tail: node.tail.clone(),
                lo: node.lo.lower(),
                hi: node.hi.upper(),
            }));
        }
    }
    let tree_report = check_tree(state, &tree)?;
    let disjointness = check_disjointness(&tree);
    let delta = check_delta(system, state, &tree);
    let separation = verify_separation(system, state, &tree, cfg.depth)?;
    let exponent = p.exponent();
    let mass = verify_mass(system, state, &tree, cfg.depth, &exponent)?;

    let mut passed = 0;
    let mut first_failure = None;
    for i in 0..cfg.members {
        let member = sample_member::<S>(
            system,
            state,
            cfg.depth,
            MemberChoice::Random(seed.wrapping_add(i as u64)),
        )?;
        match satisfies_growth_condition(
            &state.digits,
            &state.growth,
            member.prefix_digit,
            &member.prefix_len,
            &member.tail,
            cfg.member_horizon,
        ) {
            Ok(()) => passed += 1,
            Err(pos) => {
                first_failure.get_or_insert((i, pos.to_string()));
            }
        }
    }
    let members = MemberSummary {
        count: cfg.members,
        horizon: cfg.member_horizon,
        passed,
        first_failure,
    };

    let mut verdict = separation.verdict.and(mass.verdict).and(tree_report.verdict());
    for c in &rk_checks {
        verdict = verdict.and(c.verdict);
    }
    for c in &nj_checks {
        verdict = verdict.and(c.verdict());
    }
    for d in &disjointness {
        verdict = verdict.and(d.verdict);
    }
    for d in &delta {
        verdict = verdict.and(d.verdict);
    }
    if members.passed != members.count {
        verdict = verdict.and(Verdict::Fail);
    }
    Ok(ConstructionSummary {
        skipped: None,
        arithmetic: format!("{:?}", S::MODE).to_lowercase(),
        s: rational_string(&p.s),
        epsilon: rational_string(&p.epsilon),
        c1: rational_string(&p.c1),
        exponent: rational_string(&exponent),
        r: state.r.clone(),
        n: state.n.iter().map(|n| n.to_string()).collect(),
        window_sizes: state.windows.iter().map(Vec::len).collect(),
        rk_checks,
        nj_checks,
        pruning: cfg.pruning.clone(),
        layer_sizes: tree.sizes(),
        exhaustive: tree.exhaustive(),
        tree: Some(tree_report),
        disjointness,
        delta,
        separation: Some(separation),
        mass: Some(mass),
        members: Some(members),
        verdict,
    })
}

/// Builds the construction, its layers and every check on them. An
/// estimate `s0 < 10⁻³` is read as `s0 = 0`: the lower bound is then the
/// trivial 0 and nothing is constructed.
pub fn construction_stage(
    system: &SystemChoice,
    digits: &DigitSet,
    growth: &Growth,
    s0: f64,
    cfg: &ConstructionConfig,
    seed: u64,
) -> Result<ConstructionSummary> {
    construction_with_intervals(system, digits, growth, s0, cfg, seed, None)
}

/// [`construction_stage`] that also collects every layer interval.
pub fn construction_with_intervals(
    system: &SystemChoice,
    digits: &DigitSet,
    growth: &Growth,
    s0: f64,
    cfg: &ConstructionConfig,
    seed: u64,
    intervals: Option<&mut Vec<LayerInterval>>,
) -> Result<ConstructionSummary> {
    if s0 < ZERO_EXPONENT {
        return Ok(ConstructionSummary::skipped(format!(
            "s0 estimate {s0:.3e} is zero to working accuracy: dim S(f,D,φ) ≥ 0 holds trivially \
             and no Cantor set is needed"
        )));
    }
    let state = build_state(system, digits, growth, s0, cfg)?;
    match system.exact() {
        Some(sys) => construct_in::<Exact>(&*sys, &state, cfg, seed, intervals),
        None => construct_in::<Interval>(&*system.interval(), &state, cfg, seed, intervals),
    }
}

fn dimension_in<S: Scalar>(
    system: &dyn Iifs<S>,
    digits: &DigitSet,
    cfg: &DimensionConfig,
) -> Result<DimensionSummary> {
    let constraint = Constraint::Digits(DigitSet::finite(cfg.alphabet.clone())?);
    let mut exponents = Vec::new();
    let mut curves = Vec::new();
    for &depth in &cfg.depths {
        let cover = build_cover::<S>(system, &constraint, depth)?;
        exponents.push(critical_exponent_of(&cover, cfg.tolerance)?);
        let points = cfg.curve_points.max(2);
        for k in 0..points {
            let s = k as f64 / (points - 1) as f64;
            curves.push(CurvePoint {
                depth,
                s,
                sum: cover.sum(s),
            });
        }
    }
    let sweep = if cfg.sweep.is_empty() {
        None
    } else {
        let family = cfg
            .sweep
            .iter()
            .map(|g| Growth::parse(g))
            .collect::<Result<Vec<_>>>()?;
        Some(slow_growth_sweep::<S>(
            system,
            digits,
            &family,
            cfg.sweep_depth,
            cfg.tolerance.max(1e-7),
        )?)
    };
    Ok(DimensionSummary {
        alphabet: cfg.alphabet.clone(),
        exponents,
        curves,
        sweep,
    })
}

pub fn dimension_stage(
    system: &SystemChoice,
    digits: &DigitSet,
    cfg: &DimensionConfig,
) -> Result<DimensionSummary> {
    match system.exact() {
        Some(sys) => dimension_in::<Exact>(&*sys, digits, cfg),
        None => dimension_in::<Interval>(&*system.interval(), digits, cfg),
    }
}

pub fn product_stage(spec: &ProductSpec, cfg: &ProductConfig, seed: u64) -> Result<ProductSummary> {
    let zeta_opts = ZetaOptions {
        assume_strict: cfg.assume_strict,
        ..ZetaOptions::default()
    };
    let zeta = build_zeta(spec, cfg.horizon, zeta_opts)?;
    let chain = subset_chain_check(
        spec,
        cfg.horizon,
        cfg.digit_cap,
        ChainOptions {
            samples: cfg.samples,
            seed,
            zeta: zeta_opts,
            ..ChainOptions::default()
        },
    )?;
    let m = spec.m_of_d();
    let verdict = if chain.passed() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(ProductSummary {
        m: spec.m(),
        m_of_d: (m.lo, m.hi),
        zeta,
        chain,
        verdict,
    })
}

/// Runs every configured stage in order. A stage error stops the run and
/// is recorded in the report; it never panics.
pub fn run(config: &ExperimentConfig) -> ExperimentReport {
    let go = || run_stages(config);
    match config.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(go),
            Err(e) => {
                let mut report = ExperimentReport::empty(&config.name);
                report.error = Some(StageError::new(
                    "setup",
                    &Error::InvalidInput(format!("thread pool: {e}")),
                ));
                report.verdict = Verdict::Fail;
                report
            }
        },
        None => go(),
    }
}

fn run_stages(config: &ExperimentConfig) -> ExperimentReport {
    let mut report = ExperimentReport::empty(&config.name);
    report.system = config.system.clone();
    report.digits = config.digits.clone();
    report.growth = config.growth.clone();
    report.seed = config.seed;
    let fail = |report: &mut ExperimentReport, stage: &str, e: Error| {
        report.error = Some(StageError::new(stage, &e));
        report.verdict = Verdict::Fail;
    };
    if let Err(e) = config.validate() {
        fail(&mut report, "config", e);
        return report;
    }
    let system = config.system_choice().expect("validated");
    let digits = config.digit_set().expect("validated");
    let growth = config.growth_fn().expect("validated");

    let exponent = match exponent_stage(&system, &digits, config.exponent.horizon) {
        Ok(e) => e,
        Err(e) => {
            fail(&mut report, "exponent", e);
            return report;
        }
    };
    let s0 = exponent.s0.value;
    report.exponent = Some(exponent);

    if let Some(cfg) = &config.axioms {
        match axiom_stage(&system, cfg, config.seed) {
            Ok(a) => {
                report.verdict = report.verdict.and(a.verdict);
                report.axioms = Some(a);
            }
            Err(e) => {
                fail(&mut report, "axioms", e);
                return report;
            }
        }
    }
    if let Some(cfg) = &config.construction {
        match construction_stage(&system, &digits, &growth, s0, cfg, config.seed) {
            Ok(c) => {
                report.verdict = report.verdict.and(c.verdict);
                report.construction = Some(c);
            }
            Err(e) => {
                fail(&mut report, "construction", e);
                return report;
            }
        }
    }
    if let Some(cfg) = &config.dimension {
        match dimension_stage(&system, &digits, cfg) {
            Ok(d) => report.dimension = Some(d),
            Err(e) => {
                fail(&mut report, "dimension", e);
                return report;
            }
        }
    }
    if let Some(cfg) = &config.product {
        let result = cfg
            .spec(&config.digits)
            .and_then(|spec| product_stage(&spec, cfg, config.seed));
        match result {
            Ok(p) => {
                report.verdict = report.verdict.and(p.verdict);
                report.product = Some(p);
            }
            Err(e) => {
                fail(&mut report, "product", e);
                return report;
            }
        }
    }
    report
}

/// `f64` view of an exact rational, rounded down.
pub fn approx(r: &BigRational) -> f64 {
    f64_down(r)
}
