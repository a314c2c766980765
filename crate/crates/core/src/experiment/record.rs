//! Persisted result of one experiment run (`result.json`, schema version 1).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const RESULT_FILE: &str = "result.json";

/// Theoretical value for a summary row, or the reason there is none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prediction {
    Value(f64),
    /// Rendered as `"n/a: <reason>"`.
    NotApplicable(String),
}

impl Prediction {
    pub fn na(reason: &str) -> Self {
        Prediction::NotApplicable(format!("n/a: {reason}"))
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Prediction::Value(v) => Some(*v),
            Prediction::NotApplicable(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// Claim table the row belongs to.
    pub table: String,
    pub label: Option<u32>,
    pub quantity: String,
    pub empirical: f64,
    pub std_error: Option<f64>,
    pub prediction: Prediction,
    /// `empirical / prediction` when the prediction is a nonzero value.
    pub ratio: Option<f64>,
}

impl SummaryRow {
    pub fn new(table: &str, label: Option<u32>, quantity: &str, empirical: f64, prediction: Prediction) -> Self {
        let ratio = prediction.value().filter(|p| *p != 0.0).map(|p| empirical / p).filter(|r| r.is_finite());
        Self {
            table: table.into(),
            label,
            quantity: quantity.into(),
            empirical,
            std_error: None,
            prediction,
            ratio,
        }
    }

    pub fn with_se(mut self, se: f64) -> Self {
        self.std_error = se.is_finite().then_some(se);
        self
    }
}

/// One PASS/FAIL line; informational checks are reported but never fail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub table: String,
    pub claim: String,
    pub passed: bool,
    pub informational: bool,
    pub detail: String,
}

impl Check {
    pub fn new(table: &str, claim: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            table: table.into(),
            claim: claim.into(),
            passed,
            informational: false,
            detail: detail.into(),
        }
    }

    pub fn info(table: &str, claim: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            informational: true,
            passed: true,
            ..Self::new(table, claim, true, detail)
        }
    }

    pub fn verdict(&self) -> &'static str {
        match (self.informational, self.passed) {
            (true, _) => "INFO",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub label: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesStyle {
    Line,
    Points,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub style: SeriesStyle,
    pub points: Vec<[f64; 2]>,
}

impl Series {
    pub fn new(name: impl Into<String>, style: SeriesStyle, points: impl IntoIterator<Item = [f64; 2]>) -> Self {
        Self {
            name: name.into(),
            style,
            points: points.into_iter().filter(|p| p[0].is_finite() && p[1].is_finite()).collect(),
        }
    }
}

/// Data behind one SVG file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plot {
    pub file: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub artifact_version: String,
    pub config: ExperimentConfig,
    /// Omitted when the run is bit-reproducible, so repeated runs match byte for byte.
    pub wall_clock_seconds: Option<f64>,
    pub status: RunStatus,
    /// Failure marker: the error that stopped a partial run.
    pub failure: Option<String>,
    pub rows: Vec<SummaryRow>,
    pub checks: Vec<Check>,
    pub skipped: Vec<SkipEntry>,
    pub plots: Vec<Plot>,
    /// Data files written next to `result.json`.
    pub files: Vec<String>,
}

impl ResultRecord {
    pub fn new(config: ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            artifact_version: ARTIFACT_VERSION.into(),
            config,
            wall_clock_seconds: None,
            status: RunStatus::Complete,
            failure: None,
            rows: Vec::new(),
            checks: Vec::new(),
            skipped: Vec::new(),
            plots: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Complete, and every non-informational check passed.
    pub fn all_passed(&self) -> bool {
        self.status == RunStatus::Complete && self.checks.iter().all(|c| c.informational || c.passed)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.informational && !c.passed)
    }

    /// Tables in first-appearance order across rows and checks.
    pub fn tables(&self) -> Vec<String> {
        let mut tables: Vec<String> = Vec::new();
        for t in self.rows.iter().map(|r| &r.table).chain(self.checks.iter().map(|c| &c.table)) {
            if !tables.contains(t) {
                tables.push(t.clone());
            }
        }
        tables
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join(RESULT_FILE), self.to_json()?)?;
        Ok(())
    }

    /// Reads `result.json` from a result directory (or the file itself).
    pub fn read(path: &Path) -> Result<Self> {
        let file = if path.is_dir() { path.join(RESULT_FILE) } else { path.to_path_buf() };
        Ok(serde_json::from_str(&std::fs::read_to_string(file)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prediction_serializes_as_number_or_reason() {
        let row = SummaryRow::new("t", Some(3), "q", 2.0, Prediction::Value(4.0));
        assert_eq!(row.ratio, Some(0.5));
        let json = serde_json::to_string(&row).unwrap();
        assert!(json.contains("\"prediction\":4.0"), "{json}");
        let na = SummaryRow::new("t", None, "q", 2.0, Prediction::na("bounded only"));
        let json = serde_json::to_string(&na).unwrap();
        assert!(json.contains("\"n/a: bounded only\""), "{json}");
        assert_eq!(serde_json::from_str::<SummaryRow>(&json).unwrap(), na);
        assert!(SummaryRow::new("t", None, "q", 2.0, Prediction::Value(0.0)).ratio.is_none());
    }

    #[test]
    fn informational_checks_never_fail() {
        let c = Check::info("t", "deviation", "0.3");
        assert_eq!(c.verdict(), "INFO");
        let cfg = ExperimentConfig::from_toml_str("[experiment]\nkind = \"gk_lemma\"\nmodel = \"circle\"\n").unwrap();
        let mut r = ResultRecord::new(cfg);
        r.checks.push(c);
        assert!(r.all_passed());
        r.checks.push(Check::new("t", "bound", false, ""));
        assert!(!r.all_passed());
        assert_eq!(r.failed_checks().count(), 1);
    }
}
