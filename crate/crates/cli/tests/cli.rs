use iifs_cli::cli::execute;
use iifs_cli::config::{ExperimentConfig, Format, ENV_OUT_DIR, ENV_THREADS};
use iifs_cli::pipeline::run;
use iifs_cli::plot::{self, emit_plot_data};
use iifs_cli::report::{to_json, ExperimentReport};
use iifs::rigor::Verdict;
use proptest::prelude::*;
use std::collections::HashMap;
use std::path::{Path, PathBuf};

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn bundled(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&config_dir().join(format!("{name}.toml"))).unwrap()
}

const LUROTH: &str = r#"
name = "small"
system = "luroth"
digits = "all"
growth = "log"
seed = 3

[axioms]
digit_horizon = 10
distortion_strings = 20
round_trip_strings = 20

[dimension]
alphabet = [2, 3]
depths = [3, 5]
sweep = ["log", "loglog"]
sweep_depth = 4
"#;

fn header_of(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn every_bundled_config_loads_and_round_trips() {
    let mut seen = 0;
    for entry in std::fs::read_dir(config_dir()).unwrap() {
        let path = entry.unwrap().path();
        let config = ExperimentConfig::load(&path).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&config.to_toml().unwrap()).unwrap(), config, "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 8);
}

#[test]
fn environment_overrides_only_output_and_threads() {
    let mut config = ExperimentConfig::from_toml(LUROTH).unwrap();
    let env: HashMap<&str, &str> = [(ENV_OUT_DIR, "/tmp/elsewhere"), (ENV_THREADS, "3")].into();
    config.apply_overrides(|k| env.get(k).map(|v| v.to_string())).unwrap();
    assert_eq!(config.output.dir, "/tmp/elsewhere");
    assert_eq!(config.threads, Some(3));
    assert_eq!(config.system, "luroth");

    let bad: HashMap<&str, &str> = [(ENV_THREADS, "0")].into();
    assert!(config.apply_overrides(|k| bad.get(k).map(|v| v.to_string())).is_err());
}

#[test]
fn unknown_keys_and_finite_digit_sets_are_rejected() {
    assert!(ExperimentConfig::from_toml(&format!("{LUROTH}\nbogus = 1\n")).is_err());
    let mut config = ExperimentConfig::from_toml(LUROTH).unwrap();
    config.seed = u64::MAX;
    assert!(config.validate().is_err());
    let finite = LUROTH.replace("digits = \"all\"", "digits = \"list:1,2,3\"");
    let err = ExperimentConfig::from_toml(&finite).unwrap_err();
    assert!(err.to_string().contains("infinite"), "{err}");
}

#[test]
fn missing_referenced_files_fail_at_load() {
    let text = LUROTH.replace("digits = \"all\"", "digits = \"file=/nonexistent/digits.txt\"");
    assert!(ExperimentConfig::from_toml(&text).is_err());
}

#[test]
fn zero_exponent_skips_the_construction() {
    let report = run(&bundled("powers-of-two"));
    assert!(report.error.is_none());
    let s0 = report.exponent.as_ref().unwrap().s0.value;
    assert!(s0 < 1e-3);
    let construction = report.construction.unwrap();
    assert!(construction.skipped.unwrap().contains("trivially"));
    assert!(construction.layer_sizes.is_empty());
    assert_eq!(report.verdict, Verdict::Pass);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let config = ExperimentConfig::from_toml(LUROTH).unwrap();
    let a = to_json(&run(&config));
    let b = to_json(&run(&config));
    assert_eq!(a, b);
    let mut threaded = config.clone();
    threaded.threads = Some(2);
    assert_eq!(a, to_json(&run(&threaded)));
}

#[test]
fn rationals_are_strings_in_reports() {
    let report = run(&bundled("product-consecutive"));
    let json: serde_json::Value = serde_json::from_str(&to_json(&report)).unwrap();
    // φ′ = φ − (H − n)δ with H = 12 and δ = 1/24
    assert_eq!(json["product"]["zeta"]["phi"]["delta"], "1/24");
    assert_eq!(json["product"]["zeta"]["phi"]["values"][0], "229/24");
}

#[test]
fn empty_report_gives_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let files = emit_plot_data(&ExperimentReport::empty("nothing"), dir.path()).unwrap();
    assert_eq!(files.len(), 4);
    for f in &files {
        assert_eq!(std::fs::read_to_string(f).unwrap().lines().count(), 1, "{}", f.display());
    }
    assert_eq!(header_of(&dir.path().join(plot::COVER_SUMS)), "depth,s,sum");
    assert_eq!(header_of(&dir.path().join(plot::CRITICAL_EXPONENTS)), "depth,exponent,lo,hi");
}

#[test]
fn sweep_csv_has_one_series_per_growth_function() {
    let report = run(&ExperimentConfig::from_toml(LUROTH).unwrap());
    let dir = tempfile::tempdir().unwrap();
    emit_plot_data(&report, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join(plot::SWEEP)).unwrap();
    let phis: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(phis, ["log", "loglog"]);
    let sums = std::fs::read_to_string(dir.path().join(plot::COVER_SUMS)).unwrap();
    assert_eq!(sums.lines().count(), 1 + 2 * 21);
}

#[test]
fn zeta_csv_has_a_column_per_factor() {
    let report = run(&bundled("product-consecutive"));
    let dir = tempfile::tempdir().unwrap();
    emit_plot_data(&report, dir.path()).unwrap();
    let path = dir.path().join(plot::ZETA);
    assert_eq!(header_of(&path), "n,zeta_1,zeta_2,zeta");
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1 + 12);
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        assert_eq!(v[2], v[0].min(v[1]), "{line}");
    }
}

#[test]
fn run_writes_report_and_plot_files() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("small.toml");
    std::fs::write(&config_path, LUROTH).unwrap();
    let out = dir.path().join("out");
    let code = execute([
        "iifs",
        "run",
        config_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(code, 0);
    assert!(out.join("report.json").exists());
    assert!(out.join(plot::COVER_SUMS).exists());
}

#[test]
fn exit_codes_follow_the_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(execute(["iifs", "tau", "--digits", "squares", "--horizon", "1000", "--out", out]), 0);
    assert!(dir.path().join("tau.json").exists());
    // invalid input
    assert_eq!(execute(["iifs", "s0", "--system", "nope", "--out", out]), 2);
    assert_eq!(execute(["iifs", "construct", "--digits", "list:1,2", "--out", out]), 2);
    assert_eq!(execute(["iifs", "--threads", "0", "tau", "--out", out]), 2);
    // a growth bound that never exceeds the window digits
    assert_eq!(execute(["iifs", "construct", "--growth", "constant:5", "--out", out]), 3);
    let cfg = dir.path().join("finite.toml");
    std::fs::write(&cfg, LUROTH.replace("digits = \"all\"", "digits = \"list:1,2\"")).unwrap();
    assert_eq!(execute(["iifs", "run", cfg.to_str().unwrap(), "--out", out]), 2);
}

#[test]
fn zeta_subcommand_checks_factor_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let ok = ["iifs", "zeta", "--m", "2", "--t", "1,1", "--g", "shift:1;shift:2", "--phi", "linear:1,9", "--out", out];
    assert_eq!(execute(ok), 0);
    let text = std::fs::read_to_string(dir.path().join("zeta.json")).unwrap();
    assert!(text.contains("\"components\""));
    let bad = ["iifs", "zeta", "--m", "3", "--t", "1,1", "--g", "shift:1;shift:2", "--out", out];
    assert_eq!(execute(bad), 2);
    let csv = ["iifs", "zeta", "--t", "1", "--g", "identity", "--phi", "linear:1,3", "--format", "csv", "--out", out];
    assert_eq!(execute(csv), 0);
    assert_eq!(header_of(&dir.path().join(plot::ZETA)), "n,zeta_1,zeta");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn configs_round_trip(seed in 0..=i64::MAX as u64, horizon in 4usize..1_000_000, threads in proptest::option::of(1usize..64),
                          name in "[a-z][a-z0-9-]{0,12}", csv in any::<bool>()) {
        let mut config = ExperimentConfig::from_toml(LUROTH).unwrap();
        config.seed = seed;
        config.name = name;
        config.exponent.horizon = horizon;
        config.threads = threads;
        config.output.format = if csv { Format::Csv } else { Format::Json };
        prop_assert_eq!(ExperimentConfig::from_toml(&config.to_toml().unwrap()).unwrap(), config);
    }
}
