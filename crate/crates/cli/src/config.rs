//! Experiment configuration: one TOML file with nested sections.
//!
//! ```toml
//! name = "gauss-squares"
//! system = "gauss"          # gauss | luroth | quadratic-gauss:p,q | gls:dyadic[:bits] | gls:file=<path>
//! digits = "squares"        # all | squares | cubes | primes | powers:b | arithmetic:a,q | file=<path>
//! growth = "log"            # log | loglog | iterated-log:k | linear:a,b | table:... | file=<path>
//! seed = 1
//!
//! [exponent]
//! horizon = 100000
//!
//! [axioms]                  # optional sections switch stages on
//! [construction]
//! [dimension]
//! alphabet = [1, 2]
//! depths = [8, 12]
//! [product]
//! t = ["1", "1"]
//! g = ["shift:1", "shift:2"]
//! phi = "linear:1,9"
//! horizon = 12
//! digit_cap = 20
//!
//! [output]
//! dir = "out"
//! format = "json"
//! ```
//!
//! Only `IIFS_OUT_DIR` and `IIFS_THREADS` override the file.

use iifs::exponent::DigitSet;
use iifs::growth::Growth;
use iifs::product_sets::{IndexMap, Phi, ProductSpec};
use iifs::systems::{parse_system, SystemChoice};
use iifs::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const ENV_OUT_DIR: &str = "IIFS_OUT_DIR";
pub const ENV_THREADS: &str = "IIFS_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub system: String,
    pub digits: String,
    pub growth: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub exponent: ExponentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axioms: Option<AxiomConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construction: Option<ConstructionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<DimensionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product: Option<ProductConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExponentConfig {
    pub horizon: usize,
}

impl Default for ExponentConfig {
    fn default() -> Self {
        ExponentConfig { horizon: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AxiomConfig {
    /// Points in the sample grid on [0,1].
    pub grid: u64,
    /// Largest digit in contraction and open-set checks.
    pub digit_horizon: u64,
    pub distortion_depth: usize,
    pub distortion_strings: usize,
    pub open_set_depth: usize,
    pub round_trip_depth: usize,
    pub round_trip_strings: usize,
}

impl Default for AxiomConfig {
    fn default() -> Self {
        AxiomConfig {
            grid: 32,
            digit_horizon: 30,
            distortion_depth: 3,
            distortion_strings: 200,
            open_set_depth: 2,
            round_trip_depth: 12,
            round_trip_strings: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstructionConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Rational, e.g. `"1/4"`; the system default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<String>,
    pub j_max: usize,
    /// Layers built and verified.
    pub depth: usize,
    pub cap: usize,
    pub members: usize,
    pub member_horizon: u64,
    /// `standard` or `keep-all`.
    pub pruning: String,
}

impl Default for ConstructionConfig {
    fn default() -> Self {
        ConstructionConfig {
            s: None,
            epsilon: None,
            c1: None,
            j_max: iifs::cantor::DEFAULT_J_MAX,
            depth: 2,
            cap: iifs::cantor::LAYER_CAP,
            members: 100,
            member_horizon: 200,
            pruning: "standard".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DimensionConfig {
    /// Finite digit set whose restricted covers are measured.
    pub alphabet: Vec<u64>,
    pub depths: Vec<usize>,
    pub tolerance: f64,
    /// Points of the cover-sum curve on [0, 1].
    pub curve_points: usize,
    /// Growth functions of the slow-growth sweep (may be empty).
    pub sweep: Vec<String>,
    pub sweep_depth: usize,
}

impl Default for DimensionConfig {
    fn default() -> Self {
        DimensionConfig {
            alphabet: vec![1, 2],
            depths: vec![8, 12],
            tolerance: 1e-9,
            curve_points: 21,
            sweep: Vec::new(),
            sweep_depth: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductConfig {
    pub t: Vec<String>,
    pub g: Vec<String>,
    pub phi: String,
    /// Digit set of the product set; the top-level one when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digits: Option<String>,
    pub horizon: u64,
    pub digit_cap: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub assume_strict: bool,
}

fn default_samples() -> usize {
    iifs::product_sets::DEFAULT_SAMPLES
}

impl ProductConfig {
    pub fn spec(&self, fallback_digits: &str) -> Result<ProductSpec> {
        let t = self
            .t
            .iter()
            .map(|x| ProductSpec::parse_exponents(x).map(|mut v| v.remove(0)))
            .collect::<Result<Vec<_>>>()?;
        let g = self
            .g
            .iter()
            .map(|s| IndexMap::parse(s))
            .collect::<Result<Vec<_>>>()?;
        let digits = DigitSet::parse(self.digits.as_deref().unwrap_or(fallback_digits))?;
        ProductSpec::new(t, g, Phi::parse(&self.phi)?, digits)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".into(),
            format: Format::Json,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidInput(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    /// Applies `IIFS_OUT_DIR` and `IIFS_THREADS` from the process environment.
    pub fn apply_env(&mut self) -> Result<()> {
        self.apply_overrides(|k| std::env::var(k).ok())
    }

    pub fn apply_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(dir) = lookup(ENV_OUT_DIR) {
            self.output.dir = dir;
        }
        if let Some(n) = lookup(ENV_THREADS) {
            let n: usize = n.trim().parse().map_err(|_| {
                Error::InvalidInput(format!("{ENV_THREADS} must be a positive integer"))
            })?;
            if n == 0 {
                return Err(Error::InvalidInput(format!("{ENV_THREADS} must be positive")));
            }
            self.threads = Some(n);
        }
        Ok(())
    }

    pub fn system_choice(&self) -> Result<SystemChoice> {
        parse_system(&self.system)
    }

    pub fn digit_set(&self) -> Result<DigitSet> {
        DigitSet::parse(&self.digits)
    }

    pub fn growth_fn(&self) -> Result<Growth> {
        Growth::parse(&self.growth)
    }

    /// Parses every selector (which also opens every referenced file) and
    /// rejects finite digit sets, since the theory needs an infinite D.
    pub fn validate(&self) -> Result<()> {
        self.system_choice()?;
        self.growth_fn()?;
        if self.digit_set()?.is_finite() {
            return Err(Error::InvalidInput(format!(
                "digit set '{}' is finite; the dimension results need an infinite D",
                self.digits
            )));
        }
        if self.exponent.horizon < 4 {
            return Err(Error::InvalidInput("exponent horizon must be at least 4".into()));
        }
        if let Some(c) = &self.construction {
            if !matches!(c.pruning.as_str(), "standard" | "keep-all") {
                return Err(Error::InvalidInput(format!(
                    "pruning must be 'standard' or 'keep-all', got '{}'",
                    c.pruning
                )));
            }
            if let Some(c1) = &c.c1 {
                iifs::systems::parse_rational(c1)
                    .ok_or_else(|| Error::InvalidInput(format!("bad c1 '{c1}'")))?;
            }
        }
        if let Some(d) = &self.dimension {
            DigitSet::finite(d.alphabet.clone())?;
            for phi in &d.sweep {
                Growth::parse(phi)?;
            }
            if d.depths.is_empty() || d.depths.contains(&0) {
                return Err(Error::InvalidInput("dimension depths must be positive".into()));
            }
        }
        if let Some(p) = &self.product {
            p.spec(&self.digits)?;
        }
        // TOML integers are signed 64-bit
        if i64::try_from(self.seed).is_err() {
            return Err(Error::InvalidInput(format!("seed {} exceeds {}", self.seed, i64::MAX)));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidInput("threads must be positive".into()));
        }
        Ok(())
    }
}
