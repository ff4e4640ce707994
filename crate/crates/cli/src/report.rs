//! Report types and their deterministic JSON form.

use iifs::cantor::{
    DeltaReport, DisjointnessReport, MassReport, NjCheck, RkCheck, SeparationReport, TreeReport,
};
use iifs::dimension::{CriticalExponent, Sweep};
use iifs::exponent::ExponentEstimate;
use iifs::ifs::{ContractionReport, DistortionReport, OpenSetReport, RoundTripReport};
use iifs::product_sets::{ChainReport, ZetaTable};
use iifs::rigor::Verdict;
use iifs::Error;
use serde::Serialize;
use serde_json::Value;

/// Significant digits kept for every float in a report.
pub const FLOAT_DIGITS: usize = 12;

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub system: String,
    pub digits: String,
    pub growth: String,
    pub seed: u64,
    pub exponent: Option<ExponentSummary>,
    pub axioms: Option<AxiomSummary>,
    pub construction: Option<ConstructionSummary>,
    pub dimension: Option<DimensionSummary>,
    pub product: Option<ProductSummary>,
    pub error: Option<StageError>,
    pub verdict: Verdict,
}

impl ExperimentReport {
    pub fn empty(name: &str) -> Self {
        ExperimentReport {
            name: name.into(),
            system: String::new(),
            digits: String::new(),
            growth: String::new(),
            seed: 0,
            exponent: None,
            axioms: None,
            construction: None,
            dimension: None,
            product: None,
            error: None,
            verdict: Verdict::Pass,
        }
    }

    /// 0 pass, 1 verification failure, 2 invalid input, 3 infeasibility.
    pub fn exit_code(&self) -> i32 {
        match (&self.error, self.verdict) {
            (Some(e), _) => e.exit_code,
            (None, Verdict::Pass) => 0,
            (None, _) => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageError {
    pub stage: String,
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl StageError {
    pub fn new(stage: &str, err: &Error) -> Self {
        let kind = match err {
            Error::Infeasible(_) => "infeasible",
            Error::Divergence(_) => "divergence",
            Error::DepthOverflow(_) => "depth-overflow",
            Error::HorizonTooSmall(_) => "horizon-too-small",
            Error::NoCrossing { .. } => "no-crossing",
            Error::Io(_) => "io",
            Error::Corrupted(_) => "corrupted",
            _ => "invalid-input",
        };
        StageError {
            stage: stage.into(),
            kind: kind.into(),
            message: err.to_string(),
            exit_code: exit_code(err),
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_infeasibility() {
        3
    } else {
        2
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentSummary {
    pub xi: String,
    pub s0: ExponentEstimate,
    pub tau: ExponentEstimate,
    /// `τ(D)/2`, the value `s0` must equal when `ξ_n = n²`.
    pub tau_half: f64,
    /// `τ = 2 s0` bit for bit; only meaningful for `ξ_n = n²`.
    pub tau_is_twice_s0: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomSummary {
    pub arithmetic: String,
    pub contraction: ContractionReport,
    pub distortion: DistortionReport,
    pub open_set: OpenSetReport,
    pub round_trip: RoundTripReport,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberSummary {
    pub count: usize,
    pub horizon: u64,
    pub passed: usize,
    /// `(sample, position)` of the first failure.
    pub first_failure: Option<(usize, String)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstructionSummary {
    /// Set when the construction is skipped, with the reason.
    pub skipped: Option<String>,
    pub arithmetic: String,
    pub s: String,
    pub epsilon: String,
    pub c1: String,
    pub exponent: String,
    pub r: Vec<u64>,
    pub n: Vec<String>,
    pub window_sizes: Vec<usize>,
    pub rk_checks: Vec<RkCheck>,
    pub nj_checks: Vec<NjCheck>,
    pub pruning: String,
    pub layer_sizes: Vec<usize>,
    pub exhaustive: bool,
    pub tree: Option<TreeReport>,
    pub disjointness: Vec<DisjointnessReport>,
    pub delta: Vec<DeltaReport>,
    pub separation: Option<SeparationReport>,
    pub mass: Option<MassReport>,
    pub members: Option<MemberSummary>,
    pub verdict: Verdict,
}

impl ConstructionSummary {
    pub fn skipped(reason: String) -> Self {
        ConstructionSummary {
            skipped: Some(reason),
            arithmetic: String::new(),
            s: String::new(),
            epsilon: String::new(),
            c1: String::new(),
            exponent: String::new(),
            r: Vec::new(),
            n: Vec::new(),
            window_sizes: Vec::new(),
            rk_checks: Vec::new(),
            nj_checks: Vec::new(),
            pruning: String::new(),
            layer_sizes: Vec::new(),
            exhaustive: true,
            tree: None,
            disjointness: Vec::new(),
            delta: Vec::new(),
            separation: None,
            mass: None,
            members: None,
            verdict: Verdict::Pass,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub depth: usize,
    pub s: f64,
    pub sum: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionSummary {
    pub alphabet: Vec<u64>,
    pub exponents: Vec<CriticalExponent>,
    pub curves: Vec<CurvePoint>,
    pub sweep: Option<Sweep>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductSummary {
    pub m: usize,
    pub m_of_d: (f64, f64),
    pub zeta: ZetaTable,
    pub chain: ChainReport,
    pub verdict: Verdict,
}

/// Rounds every float to [`FLOAT_DIGITS`] significant digits.
fn fix_floats(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            if let Some(x) = n.as_f64() {
                let rounded: f64 = format!("{:.*e}", FLOAT_DIGITS - 1, x).parse().unwrap_or(x);
                if let Some(r) = serde_json::Number::from_f64(rounded) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(fix_floats),
        Value::Object(map) => map.values_mut().for_each(fix_floats),
        _ => {}
    }
}

/// Pretty JSON with fixed float precision; rationals are already `"p/q"`.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("report serializes");
    fix_floats(&mut v);
    let mut text = serde_json::to_string_pretty(&v).expect("value serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_are_rounded_and_integers_kept() {
        let text = to_json(&serde_json::json!({"a": 0.1 + 0.2, "b": 7u64, "c": [1.0 / 3.0]}));
        assert!(text.contains("0.3,") || text.contains("0.3\n"), "{text}");
        assert!(text.contains("\"b\": 7"));
        assert!(text.contains("0.333333333333"));
        assert!(!text.contains("0.3333333333333"));
    }

    #[test]
    fn exit_codes_follow_error_kinds() {
        assert_eq!(exit_code(&Error::InvalidInput("x".into())), 2);
        assert_eq!(exit_code(&Error::Infeasible("x".into())), 3);
        let mut report = ExperimentReport::empty("t");
        assert_eq!(report.exit_code(), 0);
        report.verdict = Verdict::Indeterminate;
        assert_eq!(report.exit_code(), 1);
        report.error = Some(StageError::new("s0", &Error::Divergence("x".into())));
        assert_eq!(report.exit_code(), 3);
    }
}
