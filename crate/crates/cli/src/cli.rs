//! Command-line front end. `main` only forwards to [`execute`], so tests
//! can drive every subcommand in process.

use crate::config::{
    AxiomConfig, ConstructionConfig, DimensionConfig, ExperimentConfig, Format, ProductConfig,
};
use crate::pipeline::{self, LayerInterval};
use crate::plot;
use crate::report::{exit_code, to_json, ExperimentReport};
use clap::{Args, Parser, Subcommand};
use iifs::exponent::DigitSet;
use iifs::growth::Growth;
use iifs::rigor::Verdict;
use iifs::systems::parse_system;
use iifs::{Error, Result};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "iifs", version, about = "Digit systems, exceptional sets and their dimensions")]
pub struct Cli {
    /// Seed for every sampled check (0 when absent; overrides the config's for `run`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for output files; results go to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convergence exponent s0(D; ξ) of the system's regularity scale.
    S0(ExponentArgs),
    /// Convergence exponent τ(D) = inf{s : Σ d^{-s} < ∞}.
    Tau(TauArgs),
    /// Build the Cantor construction and verify it.
    Construct(ConstructArgs),
    /// Check the axioms of a system.
    Verify(VerifyArgs),
    /// Critical exponents of restricted covers.
    Dimension(DimensionArgs),
    /// Tabulate ζ for a weighted product spec.
    Zeta(ProductArgs),
    /// Check the inclusion chain for a product spec.
    CheckChain(ChainArgs),
    /// Run a configured experiment.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct ExponentArgs {
    #[arg(long, default_value = "gauss")]
    pub system: String,
    #[arg(long, default_value = "all")]
    pub digits: String,
    #[arg(long, default_value_t = 100_000)]
    pub horizon: usize,
}

#[derive(Debug, Args)]
pub struct TauArgs {
    #[arg(long, default_value = "all")]
    pub digits: String,
    #[arg(long, default_value_t = 100_000)]
    pub horizon: usize,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[arg(long, default_value = "gauss")]
    pub system: String,
    #[arg(long, default_value = "all")]
    pub digits: String,
    /// Growth bound φ: log, loglog, iterated-log:k, linear:a,b, table:..., file=<path>.
    #[arg(long, default_value = "log")]
    pub growth: String,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Regularity constant as a rational, e.g. 1/4.
    #[arg(long)]
    pub c1: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value_t = iifs::cantor::LAYER_CAP)]
    pub cap: usize,
    #[arg(long, default_value_t = iifs::cantor::DEFAULT_J_MAX)]
    pub j_max: usize,
    #[arg(long, default_value_t = 100)]
    pub members: usize,
    #[arg(long, default_value = "standard")]
    pub pruning: String,
    #[arg(long, default_value_t = 100_000)]
    pub horizon: usize,
    /// Also write every layer interval to this CSV file.
    #[arg(long)]
    pub intervals: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value = "gauss")]
    pub system: String,
    #[arg(long, default_value_t = 32)]
    pub grid: u64,
    #[arg(long, default_value_t = 30)]
    pub digit_horizon: u64,
    #[arg(long, default_value_t = 12)]
    pub round_trip_depth: usize,
}

#[derive(Debug, Args)]
pub struct DimensionArgs {
    #[arg(long, default_value = "gauss")]
    pub system: String,
    /// Finite alphabet, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub alphabet: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "8,12")]
    pub depths: Vec<usize>,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Growth functions for a slow-growth sweep over `--digits`.
    #[arg(long, value_delimiter = ';')]
    pub sweep: Vec<String>,
    #[arg(long, default_value = "all")]
    pub digits: String,
    #[arg(long, default_value_t = 6)]
    pub sweep_depth: usize,
}

#[derive(Debug, Args)]
pub struct ProductArgs {
    /// Number of factors; must match the lengths of `--t` and `--g`.
    #[arg(long)]
    pub m: Option<usize>,
    /// Exponents t_i, comma separated rationals.
    #[arg(long, value_delimiter = ',', required = true)]
    pub t: Vec<String>,
    /// Index maps, `;` separated: identity, shift:k, scale:a, affine:a,b, constant:c, table:..., file=<path>.
    #[arg(long, value_delimiter = ';', required = true)]
    pub g: Vec<String>,
    /// Growth bound φ, optionally with `+offset`.
    #[arg(long, default_value = "log")]
    pub phi: String,
    #[arg(long, default_value = "all")]
    pub digits: String,
    #[arg(long, default_value_t = 12)]
    pub horizon: u64,
    #[arg(long)]
    pub assume_strict: bool,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[command(flatten)]
    pub product: ProductArgs,
    #[arg(long, default_value_t = 20)]
    pub digit_cap: u64,
    #[arg(long, default_value_t = iifs::product_sets::DEFAULT_SAMPLES)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub config: PathBuf,
}

/// Parses `args`, runs the command and returns the exit code. Errors are
/// printed to stderr as JSON.
pub fn execute<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let threads = cli.threads;
    let go = || dispatch(&cli);
    let outcome = match threads {
        Some(0) => Err(Error::InvalidInput("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(go)),
        None => go(),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let report = serde_json::json!({
                "error": crate::report::StageError::new("command", &e)
            });
            eprint!("{}", to_json(&report));
            exit_code(&e)
        }
    }
}

fn verdict_code(v: Verdict) -> i32 {
    if v.passed() {
        0
    } else {
        1
    }
}

/// Writes `text` to `<out>/<name>` or stdout.
fn emit_text(out: &Option<PathBuf>, name: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(name), text)?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(cli: &Cli, stem: &str, value: &T) -> Result<()> {
    emit_text(&cli.out, &format!("{stem}.json"), &to_json(value))
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    for row in rows {
        w.write_record(row)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn heads(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn product_config(args: &ProductArgs, digit_cap: u64, samples: usize) -> Result<ProductConfig> {
    if let Some(m) = args.m {
        if m != args.t.len() || m != args.g.len() {
            return Err(Error::InvalidInput(format!(
                "--m {m} but {} exponents and {} index maps were given",
                args.t.len(),
                args.g.len()
            )));
        }
    }
    Ok(ProductConfig {
        t: args.t.clone(),
        g: args.g.clone(),
        phi: args.phi.clone(),
        digits: Some(args.digits.clone()),
        horizon: args.horizon,
        digit_cap,
        samples,
        assume_strict: args.assume_strict,
    })
}

fn write_intervals(path: &Path, rows: &[LayerInterval]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let tail: Vec<String> = r.tail.iter().map(u64::to_string).collect();
            vec![
                r.layer.to_string(),
                tail.join(" "),
                format!("{:e}", r.lo),
                format!("{:e}", r.hi),
            ]
        })
        .collect();
    let text = csv_text(&heads(&["layer", "tail", "lo", "hi"]), &body)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::S0(a) => {
            let system = parse_system(&a.system)?;
            let digits = DigitSet::parse(&a.digits)?;
            let xi = system.float().xi();
            let est = iifs::exponent::s0_estimate(&digits, &xi, a.horizon)?;
            emit_json(cli, "s0", &est)?;
            Ok(0)
        }
        Command::Tau(a) => {
            let digits = DigitSet::parse(&a.digits)?;
            let est = iifs::exponent::tau_estimate(&digits, a.horizon)?;
            emit_json(cli, "tau", &est)?;
            Ok(0)
        }
        Command::Construct(a) => {
            let system = parse_system(&a.system)?;
            let digits = DigitSet::parse(&a.digits)?;
            if digits.is_finite() {
                return Err(Error::InvalidInput("the digit set must be infinite".into()));
            }
            let growth = Growth::parse(&a.growth)?;
            let s0 = iifs::exponent::s0_estimate(&digits, &system.float().xi(), a.horizon)?;
            let cfg = ConstructionConfig {
                s: a.s,
                epsilon: a.epsilon,
                c1: a.c1.clone(),
                j_max: a.j_max,
                depth: a.depth,
                cap: a.cap,
                members: a.members,
                pruning: a.pruning.clone(),
                ..ConstructionConfig::default()
            };
            let mut intervals = Vec::new();
            let summary = pipeline::construction_with_intervals(
                &system,
                &digits,
                &growth,
                s0.value,
                &cfg,
                seed,
                a.intervals.as_ref().map(|_| &mut intervals),
            )?;
            if let Some(path) = &a.intervals {
                write_intervals(path, &intervals)?;
            }
            emit_json(cli, "construction", &summary)?;
            Ok(verdict_code(summary.verdict))
        }
        Command::Verify(a) => {
            let system = parse_system(&a.system)?;
            let cfg = AxiomConfig {
                grid: a.grid,
                digit_horizon: a.digit_horizon,
                round_trip_depth: a.round_trip_depth,
                ..AxiomConfig::default()
            };
            let summary = pipeline::axiom_stage(&system, &cfg, seed)?;
            emit_json(cli, "axioms", &summary)?;
            Ok(verdict_code(summary.verdict))
        }
        Command::Dimension(a) => {
            let system = parse_system(&a.system)?;
            let digits = DigitSet::parse(&a.digits)?;
            let cfg = DimensionConfig {
                alphabet: a.alphabet.clone(),
                depths: a.depths.clone(),
                tolerance: a.tolerance,
                sweep: a.sweep.clone(),
                sweep_depth: a.sweep_depth,
                ..DimensionConfig::default()
            };
            let summary = pipeline::dimension_stage(&system, &digits, &cfg)?;
            match cli.format {
                Format::Json => emit_json(cli, "dimension", &summary)?,
                Format::Csv => {
                    let mut report = ExperimentReport::empty("dimension");
                    report.dimension = Some(summary);
                    let rows = plot::cover_sum_rows(&report);
                    let text = csv_text(&heads(&["depth", "s", "sum"]), &rows)?;
                    emit_text(&cli.out, plot::COVER_SUMS, &text)?;
                }
            }
            Ok(0)
        }
        Command::Zeta(a) => {
            let cfg = product_config(a, 1, 0)?;
            let spec = cfg.spec(&a.digits)?;
            let zeta = iifs::product_sets::build_zeta(
                &spec,
                a.horizon,
                iifs::product_sets::ZetaOptions {
                    assume_strict: a.assume_strict,
                    ..Default::default()
                },
            )?;
            match cli.format {
                Format::Json => emit_json(cli, "zeta", &zeta)?,
                Format::Csv => {
                    let (head, rows) = plot::zeta_rows(&zeta);
                    emit_text(&cli.out, plot::ZETA, &csv_text(&head, &rows)?)?;
                }
            }
            Ok(0)
        }
        Command::CheckChain(a) => {
            let cfg = product_config(&a.product, a.digit_cap, a.samples)?;
            let spec = cfg.spec(&a.product.digits)?;
            let summary = pipeline::product_stage(&spec, &cfg, seed)?;
            emit_json(cli, "chain", &summary.chain)?;
            Ok(verdict_code(summary.verdict))
        }
        Command::Run(a) => {
            let mut config = ExperimentConfig::load(&a.config)?;
            config.apply_env()?;
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            if cli.threads.is_some() {
                config.threads = None;
            }
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(&config.output.dir));
            let format = if cli.format == Format::Csv {
                Format::Csv
            } else {
                config.output.format
            };
            let report = pipeline::run(&config);
            write_run(&report, &out, format)?;
            Ok(report.exit_code())
        }
    }
}

/// Writes `report.json` and, for CSV output, the plot series.
pub fn write_run(report: &ExperimentReport, dir: &Path, format: Format) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), to_json(report))?;
    if format == Format::Csv {
        plot::emit_plot_data(report, dir)?;
    }
    Ok(())
}
