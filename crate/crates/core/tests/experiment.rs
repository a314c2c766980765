//! End-to-end experiment runs on small configurations.

use std::fs;
use std::path::Path;

use rwaves_core::experiment::{
    emit_report, run_experiment, summary_text, ExperimentConfig, ResultRecord, RunStatus, ROOT_HEADER, SLICE_HEADER,
    TRIAL_HEADER,
};

fn config(text: &str, dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml_str(text).unwrap();
    cfg.run.output_dir = dir.to_path_buf();
    cfg
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

const SMALL_DENSITY: &str = "
[experiment]
kind = \"real_density\"
model = \"sphere2\"
[ensemble]
labels = [4, 6]
trials = 40
master_seed = 11
";

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    files(dir).into_iter().map(|n| (n.clone(), fs::read(dir.join(&n)).unwrap())).collect()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    run_experiment(&config(SMALL_DENSITY, a.path())).unwrap();
    let first = snapshot(a.path());
    run_experiment(&config(SMALL_DENSITY, a.path())).unwrap();
    assert_eq!(first, snapshot(a.path()));
    // the worker pool size changes nothing but the recorded thread count
    let mut threaded = config(SMALL_DENSITY, c.path());
    threaded.run.threads = 3;
    run_experiment(&threaded).unwrap();
    for (name, bytes) in first.iter().filter(|(n, _)| n.ends_with(".csv")) {
        assert_eq!(bytes, &fs::read(c.path().join(name)).unwrap(), "{name}");
    }
    let mut ra = ResultRecord::read(a.path()).unwrap();
    let rc = ResultRecord::read(c.path()).unwrap();
    ra.config.run.threads = 3;
    ra.config.run.output_dir = rc.config.run.output_dir.clone();
    assert_eq!(ra, rc);
}

#[test]
fn record_layout_and_csv_headers() {
    let dir = tempfile::tempdir().unwrap();
    let record = run_experiment(&config(SMALL_DENSITY, dir.path())).unwrap();
    assert_eq!(record.schema_version, 1);
    assert!(record.wall_clock_seconds.is_none());
    assert_eq!(record.status, RunStatus::Complete);
    assert_eq!(header(&dir.path().join("trials.csv")), TRIAL_HEADER.join(","));
    assert_eq!(header(&dir.path().join("trials.csv")), "N,trial,X_psi,total_measure,seed");
    let rows = fs::read_to_string(dir.path().join("trials.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 2 * 40);
    for plot in &record.plots {
        let svg = fs::read_to_string(dir.path().join(&plot.file)).unwrap();
        assert!(svg.contains(r#"version="1.1""#));
    }
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("result.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    for row in json["rows"].as_array().unwrap() {
        let p = &row["prediction"];
        assert!(p.is_number() || p.as_str().is_some_and(|s| s.starts_with("n/a: ")), "{row}");
    }
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("== uniformity =="));
    assert!(summary.contains("OVERALL:"));
}

#[test]
fn timing_is_recorded_only_without_bit_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(SMALL_DENSITY, dir.path());
    cfg.run.bit_reproducible = false;
    let record = run_experiment(&cfg).unwrap();
    assert!(record.wall_clock_seconds.is_some_and(|t| t >= 0.0));
}

#[test]
fn rerun_from_embedded_config_reproduces_record() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&config(SMALL_DENSITY, a.path())).unwrap();
    let mut again = ExperimentConfig::load(&a.path().join("result.json")).unwrap();
    assert_eq!(again.run.output_dir, a.path());
    again.run.output_dir = b.path().to_path_buf();
    run_experiment(&again).unwrap();
    let ra = ResultRecord::read(a.path()).unwrap();
    let mut rb = ResultRecord::read(b.path()).unwrap();
    rb.config.run.output_dir = ra.config.run.output_dir.clone();
    assert_eq!(ra, rb);
    assert_eq!(fs::read(a.path().join("trials.csv")).unwrap(), fs::read(b.path().join("trials.csv")).unwrap());
}

#[test]
fn report_regeneration_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&config(SMALL_DENSITY, dir.path())).unwrap();
    let before = fs::read(dir.path().join("result.json")).unwrap();
    let record = ResultRecord::read(dir.path()).unwrap();
    emit_report(&record, dir.path()).unwrap();
    assert_eq!(before, fs::read(dir.path().join("result.json")).unwrap());
}

#[test]
fn invalid_config_starts_no_compute() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let text = "[experiment]\nkind = \"real_density\"\nmodel = \"sphere2\"\n[ensemble]\nlabels = [40]\n[run]\nresolution = 8\n";
    let err = run_experiment(&config(text, &out)).unwrap_err();
    assert!(err.to_string().contains("4N rule"), "{err}");
    assert!(!out.exists());
}

#[test]
fn failing_run_persists_partial_record() {
    let dir = tempfile::tempdir().unwrap();
    // bands 1..=3 are all empty on the torus
    let text = "[experiment]\nkind = \"strong_law\"\nmodel = \"torus2\"\n[ensemble]\nlabels = [3]\n";
    let err = run_experiment(&config(text, dir.path())).unwrap_err();
    let record = ResultRecord::read(dir.path()).unwrap();
    assert_eq!(record.status, RunStatus::Failed);
    assert_eq!(record.failure.as_deref(), Some(err.to_string().as_str()));
    assert_eq!(record.skipped.len(), 3);
    assert!(!record.all_passed());
    assert!(summary_text(&record).contains("FAILED RUN"));
}

#[test]
fn strong_law_report_has_running_average_plot() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[experiment]\nkind = \"strong_law\"\nmodel = \"sphere2\"\n[ensemble]\nlabels = [12]\n";
    let record = run_experiment(&config(text, dir.path())).unwrap();
    assert!(dir.path().join("running_average.svg").exists());
    assert!(summary_text(&record).contains("final Cauchy-tail ratio"));
    assert_eq!(header(&dir.path().join("trials.csv")), TRIAL_HEADER.join(","));
}

#[test]
fn gk_closed_form_rows_are_informational() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[experiment]\nkind = \"gk_lemma\"\nmodel = \"circle\"\n[ensemble]\nlabels = [6]\ntrials = 1000\n";
    let record = run_experiment(&config(text, dir.path())).unwrap();
    let closed: Vec<_> = record.checks.iter().filter(|c| c.table == "closed_form").collect();
    assert_eq!(closed.len(), 10);
    assert!(closed.iter().all(|c| c.informational && c.verdict() == "INFO"));
    assert!(summary_text(&record).contains("== closed_form =="));
}

#[test]
fn circle_current_writes_root_csv() {
    let dir = tempfile::tempdir().unwrap();
    let text = "
[experiment]
kind = \"circle_current\"
model = \"circle\"
[ensemble]
labels = [5, 10]
trials = 4
[complex]
calibration_label = 12
calibration_trials = 4
";
    let record = run_experiment(&config(text, dir.path())).unwrap();
    let path = dir.path().join("roots.csv");
    assert_eq!(header(&path), ROOT_HEADER.join(","));
    let lines = fs::read_to_string(&path).unwrap().lines().count();
    assert_eq!(lines, 1 + 4 * (10 + 20 + 24));
    assert!(record.checks.iter().any(|c| c.claim.contains("2N = 20 roots") && c.passed));
    assert!(dir.path().join("root_clouds.svg").exists());
}

#[test]
fn torus_slice_writes_grid_csv() {
    let dir = tempfile::tempdir().unwrap();
    let text = "
[experiment]
kind = \"torus_slice_current\"
model = \"torus2\"
[ensemble]
labels = [12, 13]
[complex]
slice = { x1 = 0.2, s_start = 0.0, s_count = 3, t_max = 0.3, step = 0.05 }
wall_label = 12
wall_half_width = 0.05
off_axis = [0.1, 0.3]
";
    let record = run_experiment(&config(text, dir.path())).unwrap();
    assert_eq!(record.skipped.len(), 1);
    let path = dir.path().join("slice_N12.csv");
    assert_eq!(header(&path), SLICE_HEADER.join(","));
    assert_eq!(header(&path), "x,y,log_pi_over_N,discrete_laplacian");
    assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 1 + 3 * 13);
}

#[test]
fn growth_run_matches_acceptance_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[experiment]\nkind = \"complex_growth\"\nmodel = \"sphere2\"\n[complex]\nsqrt_rho = [0.15]\nbase_point = [1.0, 0.5]\n";
    let record = run_experiment(&config(text, dir.path())).unwrap();
    assert!(record.all_passed(), "{}", summary_text(&record));
    let slope = record.rows.iter().find(|r| r.quantity.contains("vs 2 sqrt_rho")).unwrap();
    assert!((slope.empirical - 0.3).abs() < 0.01);
    assert_eq!(header(&dir.path().join("growth.csv")), "N,sqrt_rho,log_pi_over_N");
}
