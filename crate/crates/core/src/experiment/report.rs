//! Human-readable summary, JSON and SVG output for a result record.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use super::record::{Prediction, ResultRecord, RunStatus, RESULT_FILE};
use super::svg;
use crate::error::Result;

pub const SUMMARY_FILE: &str = "summary.txt";

fn fmt_value(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.4e}")
    } else {
        format!("{v:.6}")
    }
}

/// One table per claim with its rows and PASS/FAIL lines, then the overall verdict.
pub fn summary_text(record: &ResultRecord) -> String {
    let cfg = &record.config;
    let mut out = String::new();
    let _ = writeln!(out, "experiment: {}", cfg.kind().name());
    let _ = writeln!(out, "model: {}", cfg.experiment.model);
    let _ = writeln!(out, "labels: {:?}", cfg.ensemble.labels);
    let _ = writeln!(out, "trials: {}, master seed: {}", cfg.trials(), cfg.ensemble.master_seed);
    let _ = writeln!(out, "schema version: {}, artifact version: {}", record.schema_version, record.artifact_version);
    if let Some(t) = record.wall_clock_seconds {
        let _ = writeln!(out, "wall clock: {t:.2} s");
    }
    if record.status == RunStatus::Failed {
        let _ = writeln!(out, "status: FAILED RUN ({})", record.failure.as_deref().unwrap_or("unknown error"));
    }
    for table in record.tables() {
        let _ = writeln!(out, "\n== {table} ==");
        let rows: Vec<_> = record.rows.iter().filter(|r| r.table == table).collect();
        if !rows.is_empty() {
            let _ = writeln!(
                out,
                "{:>5}  {:<52} {:>14} {:>12} {:>14} {:>10}",
                "N", "quantity", "empirical", "SE", "prediction", "ratio"
            );
            for r in rows {
                let prediction = match &r.prediction {
                    Prediction::Value(v) => fmt_value(*v),
                    Prediction::NotApplicable(reason) => reason.clone(),
                };
                let _ = writeln!(
                    out,
                    "{:>5}  {:<52} {:>14} {:>12} {:>14} {:>10}",
                    r.label.map_or("-".into(), |n| n.to_string()),
                    r.quantity,
                    fmt_value(r.empirical),
                    r.std_error.map_or("-".into(), fmt_value),
                    prediction,
                    r.ratio.map_or("-".into(), |v| format!("{v:.4}"))
                );
            }
        }
        for c in record.checks.iter().filter(|c| c.table == table) {
            let _ = writeln!(out, "{}  {}: {}", c.verdict(), c.claim, c.detail);
        }
    }
    if !record.skipped.is_empty() {
        let _ = writeln!(out, "\nskipped:");
        for s in &record.skipped {
            let _ = writeln!(out, "  N = {}: {}", s.label, s.reason);
        }
    }
    let _ = writeln!(out, "\nOVERALL: {}", if record.all_passed() { "PASS" } else { "FAIL" });
    out
}

/// Writes `result.json`, `summary.txt` and every plot of `record` into `dir`.
pub fn emit_report(record: &ResultRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    record.write(dir)?;
    written.push(dir.join(RESULT_FILE));
    let summary = dir.join(SUMMARY_FILE);
    std::fs::write(&summary, summary_text(record))?;
    written.push(summary);
    for plot in &record.plots {
        let path = dir.join(&plot.file);
        std::fs::write(&path, svg::render(plot))?;
        written.push(path);
    }
    Ok(written)
}
