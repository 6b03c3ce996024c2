//! Row formats shared by the subcommands.

use std::io::Write;

use occupancy_core::scan::{BoundReport, ScanConfig};
use serde_json::{json, Value};

use crate::args::Format;
use crate::error::CliResult;

pub const SCAN_CSV_VERSION: &str = "# occupancy-scan v1";
pub const SCAN_SCHEMA: &str = "occupancy-scan v1";

/// Column order of the scan CSV.
pub const SCAN_COLUMNS: [&str; 14] = [
    "n",
    "m",
    "d",
    "mode",
    "mu",
    "sigma2",
    "r",
    "d_k",
    "d_k_se",
    "d_k_times_r",
    "d_k_times_sigma",
    "lower_bound",
    "domain",
    "error",
];

pub fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Largest finite value in a column, if any.
fn column_max(rows: &[BoundReport], f: impl Fn(&BoundReport) -> Option<f64>) -> Option<f64> {
    rows.iter().filter_map(&f).filter(|v| v.is_finite()).reduce(f64::max)
}

pub fn scan_summary(rows: &[BoundReport]) -> Value {
    json!({
        "rows": rows.len(),
        "errors": rows.iter().filter(|r| r.error.is_some()).count(),
        "max_d_k_times_r": column_max(rows, |r| r.d_k_times_r),
        "max_d_k_times_sigma": column_max(rows, |r| r.d_k_times_sigma),
        "lower_bound_violations": rows.iter().filter(|r| r.lower_bound_holds() == Some(false)).count(),
    })
}

/// Writes scan rows in grid order. The CSV starts with a version comment and ends
/// with a summary comment.
pub fn emit_scan<W: Write>(rows: &[BoundReport], cfg: &ScanConfig, format: Format, mut out: W) -> CliResult<()> {
    match format {
        Format::Csv => {
            writeln!(out, "{SCAN_CSV_VERSION} d={} seed={} mc_samples={}", cfg.grid.d, cfg.seed, cfg.mc_samples)?;
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(SCAN_COLUMNS)?;
            for r in rows {
                w.write_record([
                    r.n.to_string(),
                    r.m.to_string(),
                    r.d.to_string(),
                    r.mode.to_string(),
                    opt(r.mu),
                    opt(r.sigma2),
                    opt(r.r),
                    opt(r.d_k),
                    opt(r.d_k_se),
                    opt(r.d_k_times_r),
                    opt(r.d_k_times_sigma),
                    opt(r.lower_bound),
                    r.domain.clone().unwrap_or_default(),
                    r.error.clone().unwrap_or_default(),
                ])?;
            }
            w.flush()?;
            drop(w);
            let s = scan_summary(rows);
            writeln!(
                out,
                "# rows={} errors={} max_d_k_times_r={} max_d_k_times_sigma={} lower_bound_violations={}",
                s["rows"], s["errors"], s["max_d_k_times_r"], s["max_d_k_times_sigma"], s["lower_bound_violations"]
            )?;
        }
        Format::Json => {
            let doc = json!({
                "schema": SCAN_SCHEMA,
                "d": cfg.grid.d,
                "seed": cfg.seed,
                "mc_samples": cfg.mc_samples,
                "rows": rows,
                "summary": scan_summary(rows),
            });
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

/// A flat table with a header row.
pub fn emit_table<W: Write>(header: &[&str], rows: &[Vec<String>], mut out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_json<W: Write>(doc: &Value, mut out: W) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut out, doc)?;
    writeln!(out)?;
    Ok(())
}
