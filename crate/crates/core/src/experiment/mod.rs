//! Configuration-driven experiment runs.
//!
//! A run reads an [`ExperimentConfig`], validates it before any computation,
//! evaluates one experiment kind and persists a [`ResultRecord`] with CSV
//! data, SVG plots and a PASS/FAIL summary in the output directory.

pub mod config;
pub mod record;
pub mod report;
pub mod run;
pub mod svg;

pub use config::{ExperimentConfig, ExperimentKind, Thresholds, WindowKind, OUTPUT_DIR_ENV};
pub use record::{Check, Prediction, ResultRecord, RunStatus, SummaryRow, RESULT_FILE, SCHEMA_VERSION};
pub use report::{emit_report, summary_text, SUMMARY_FILE};
pub use run::{run_experiment, ROOT_HEADER, SLICE_HEADER, TRIAL_HEADER};
