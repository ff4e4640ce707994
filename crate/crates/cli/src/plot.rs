//! CSV series for external plotting. Every file is written even when the
//! report has nothing for it, so a missing stage gives a header-only file.

use crate::report::ExperimentReport;
use iifs::product_sets::ZetaTable;
use iifs::{Error, Result};
use std::path::{Path, PathBuf};

pub const COVER_SUMS: &str = "cover_sums.csv";
pub const CRITICAL_EXPONENTS: &str = "critical_exponents.csv";
pub const SWEEP: &str = "sweep.csv";
pub const ZETA: &str = "zeta.csv";

fn io(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(format!("{}: {e}", path.display())))
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    w.write_record(header).map_err(|e| io(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

fn num(x: f64) -> String {
    format!("{:.*e}", crate::report::FLOAT_DIGITS - 1, x)
        .parse::<f64>()
        .map(|v| v.to_string())
        .unwrap_or_else(|_| x.to_string())
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Cover sum against `s` per depth.
pub fn cover_sum_rows(report: &ExperimentReport) -> Vec<Vec<String>> {
    report
        .dimension
        .iter()
        .flat_map(|d| &d.curves)
        .map(|p| vec![p.depth.to_string(), num(p.s), num(p.sum)])
        .collect()
}

/// Critical exponent against depth, with the final bisection bracket.
pub fn exponent_rows(report: &ExperimentReport) -> Vec<Vec<String>> {
    report
        .dimension
        .iter()
        .flat_map(|d| &d.exponents)
        .map(|e| vec![e.depth.to_string(), num(e.value), num(e.lo), num(e.hi)])
        .collect()
}

/// One row per growth function of the sweep.
pub fn sweep_rows(report: &ExperimentReport) -> Vec<Vec<String>> {
    report
        .dimension
        .iter()
        .filter_map(|d| d.sweep.as_ref())
        .flat_map(|s| {
            s.rows
                .iter()
                .map(move |r| vec![r.phi.clone(), s.depth.to_string(), num(r.exponent)])
        })
        .collect()
}

/// Columns `n, zeta_1..zeta_m, zeta`; an absent table gives `n, zeta`.
pub fn zeta_table(report: &ExperimentReport) -> (Vec<String>, Vec<Vec<String>>) {
    match &report.product {
        Some(p) => zeta_rows(&p.zeta),
        None => (header(&["n", "zeta"]), Vec::new()),
    }
}

/// `ζ_i(n)` and `ζ(n)` at their certified lower ends.
pub fn zeta_rows(table: &ZetaTable) -> (Vec<String>, Vec<Vec<String>>) {
    let mut head = vec!["n".to_string()];
    head.extend(table.components.iter().map(|c| format!("zeta_{}", c.i)));
    head.push("zeta".into());
    let rows = (0..table.zeta.len())
        .map(|k| {
            let mut row = vec![(k + 1).to_string()];
            row.extend(table.components.iter().map(|c| num(c.values[k].lo)));
            row.push(num(table.zeta[k].lo));
            row
        })
        .collect();
    (head, rows)
}

/// Writes the four series into `dir` and returns their paths.
pub fn emit_plot_data(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let (zeta_head, zeta_rows) = zeta_table(report);
    let files = [
        (COVER_SUMS, header(&["depth", "s", "sum"]), cover_sum_rows(report)),
        (
            CRITICAL_EXPONENTS,
            header(&["depth", "exponent", "lo", "hi"]),
            exponent_rows(report),
        ),
        (SWEEP, header(&["phi", "depth", "exponent"]), sweep_rows(report)),
        (ZETA, zeta_head, zeta_rows),
    ];
    let mut written = Vec::new();
    for (name, head, rows) in files {
        let path = dir.join(name);
        write_rows(&path, &head, &rows)?;
        written.push(path);
    }
    Ok(written)
}
