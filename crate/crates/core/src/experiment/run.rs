//! Experiment runners. Each one fills summary rows, PASS/FAIL checks, plots
//! and CSV files of a [`ResultRecord`].

use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{ExperimentConfig, ExperimentKind};
use super::record::{Check, Plot, Prediction, ResultRecord, RunStatus, Series, SeriesStyle, SkipEntry, SummaryRow};
use super::report::emit_report;
use crate::complex::{
    circle_root_clouds, current_pairing, expected_log_modulus, log_growth_rate, torus_slice_current, RootCloud,
    SliceCurrent, CURRENT_CONSTANT, ROOT_RESIDUAL_BOUND,
};
use crate::error::{Error, Result};
use crate::kac_rice::window_density;
use crate::manifold::{build_mesh, ModelKind};
use crate::nodal::{mc_expected_statistics, strong_law_run, window_frequency, TestFunction};
use crate::numerics::special::EULER_GAMMA;
use crate::spectral::{enumerate_basis, Trig};

pub const TRIAL_HEADER: [&str; 5] = ["N", "trial", "X_psi", "total_measure", "seed"];
pub const ROOT_HEADER: [&str; 5] = ["N", "trial", "root_theta", "root_y", "residual"];
pub const SLICE_HEADER: [&str; 4] = ["x", "y", "log_pi_over_N", "discrete_laplacian"];

/// Validates `config`, runs it on a worker pool of `run.threads` threads and
/// writes `result.json`, CSV files, SVG plots and `summary.txt` to the output
/// directory. A failing run still persists its partial record, marked failed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultRecord> {
    config.validate()?;
    let dir = config.output_dir();
    std::fs::create_dir_all(&dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.run.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("run.threads: {e}")))?;
    let mut record = ResultRecord::new(config.clone());
    let start = Instant::now();
    log::info!("running {} on the {} into {}", config.kind().name(), config.experiment.model, dir.display());
    let outcome = pool.install(|| {
        let mut run = Run {
            cfg: config,
            dir: &dir,
            record: &mut record,
        };
        match config.kind() {
            ExperimentKind::RealDensity | ExperimentKind::VarianceScan => real_density(&mut run),
            ExperimentKind::StrongLaw => strong_law(&mut run),
            ExperimentKind::ComplexGrowth => complex_growth(&mut run),
            ExperimentKind::GkLemma => gk_lemma(&mut run),
            ExperimentKind::CircleCurrent => circle_current(&mut run),
            ExperimentKind::TorusSliceCurrent => torus_slice(&mut run),
        }
    });
    if !config.run.bit_reproducible {
        record.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
    }
    if let Err(e) = &outcome {
        log::error!("run failed: {e}");
        record.status = RunStatus::Failed;
        record.failure = Some(e.to_string());
    }
    emit_report(&record, &dir)?;
    outcome.map(|_| record)
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    dir: &'a Path,
    record: &'a mut ResultRecord,
}

impl Run<'_> {
    fn row(&mut self, row: SummaryRow) {
        self.record.rows.push(row);
    }

    fn check(&mut self, check: Check) {
        log::info!("{} {}: {}", check.verdict(), check.claim, check.detail);
        self.record.checks.push(check);
    }

    fn skip(&mut self, label: u32, reason: impl Into<String>) {
        self.record.skipped.push(SkipEntry {
            label,
            reason: reason.into(),
        });
    }

    fn plot(&mut self, file: &str, title: &str, x_label: &str, y_label: &str, series: Vec<Series>) {
        self.record.plots.push(Plot {
            file: file.into(),
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series,
        });
    }

    fn csv(&mut self, name: &str, header: &[&str]) -> Result<csv::Writer<File>> {
        let path: PathBuf = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        self.record.files.push(name.into());
        Ok(w)
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Rounding allowance for statistics that vanish identically by symmetry.
fn rounding_floor(scale: f64) -> f64 {
    1e-12 * scale.abs()
}

fn at(label: u32) -> impl Fn(Error) -> Error {
    move |e| e.at(format!("N = {label}"))
}

/// Short name of a test function for tables and plot legends.
pub fn describe(psi: &TestFunction) -> String {
    let t = |trig: &Trig| match trig {
        Trig::Cos => "cos",
        Trig::Sin => "sin",
    };
    match psi {
        TestFunction::Constant { value } => format!("const {value}"),
        TestFunction::Fourier { k, trig } => format!("{}({},{})", t(trig), k[0], k[1]),
        TestFunction::SphericalHarmonic { degree, order, trig } => format!("Y[{degree},{order},{}]", t(trig)),
    }
}

fn real_density(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let model = cfg.model()?;
    let th = &cfg.thresholds;
    let torus = model.kind() == ModelKind::Torus2;
    let psis = cfg.test_functions();
    let trials = cfg.trials();
    let seed = cfg.ensemble.master_seed;
    let checks_density = cfg.kind() == ExperimentKind::RealDensity;
    let mut main_csv = run.csv("trials.csv", &TRIAL_HEADER)?;
    let mut psi_csvs = (1..psis.len())
        .map(|k| run.csv(&format!("trials_psi{k}.csv"), &TRIAL_HEADER))
        .collect::<Result<Vec<_>>>()?;
    let bias_tol = if torus { th.torus_density_constancy } else { th.density_bias };
    let mut normalized: Vec<(u32, f64, f64, f64)> = Vec::new();
    let mut variances: Vec<(u32, f64)> = Vec::new();
    for &n in &cfg.ensemble.labels {
        let window = cfg.window(n);
        let basis = match enumerate_basis(&model, window) {
            Ok(b) => b,
            Err(Error::EmptyWindow { .. }) => {
                run.skip(n, format!("{window} is empty"));
                continue;
            }
            Err(e) => return Err(e.at(format!("N = {n}"))),
        };
        let spec = cfg.ensemble_spec(n)?;
        let mesh = build_mesh(&model, cfg.resolution(n)).map_err(at(n))?;
        log::info!("N = {n}: {} trials on a mesh of resolution {}", trials, mesh.resolution());
        let series = mc_expected_statistics(&spec, &psis, trials, &mesh).map_err(at(n))?;
        let lambda = window_frequency(&model, window).map_err(at(n))?;
        let predicted = window_density(&model, window).map_err(at(n))?.density * model.volume();
        let s1 = &series[0];
        for r in &s1.records {
            main_csv.write_record([n.to_string(), r.trial.to_string(), num(r.x_psi), num(r.total_measure), seed.to_string()])?;
        }
        for (w, s) in psi_csvs.iter_mut().zip(&series[1..]) {
            for r in &s.records {
                w.write_record([n.to_string(), r.trial.to_string(), num(r.x_psi), num(r.total_measure), seed.to_string()])?;
            }
        }
        run.row(SummaryRow::new("kac_rice", Some(n), "nodal measure", s1.mean, Prediction::Value(predicted)).with_se(s1.std_error));
        run.row(
            SummaryRow::new("density", Some(n), "measure / lambda", s1.mean / lambda, Prediction::Value(predicted / lambda))
                .with_se(s1.std_error / lambda),
        );
        let var = s1.variance / (lambda * lambda);
        run.row(SummaryRow::new("variance", Some(n), "Var(measure / lambda)", var, Prediction::na("only boundedness is predicted")));
        variances.push((n, var));
        for (psi, s) in psis[1..].iter().zip(&series[1..]) {
            run.row(SummaryRow::new("uniformity", Some(n), &format!("X_psi {}", describe(psi)), s.mean, Prediction::Value(0.0)).with_se(s.std_error));
        }
        let eligible = !torus || basis.dim() >= th.min_lattice_points;
        if !eligible {
            run.skip(n, format!("{} lattice points, below the minimum of {}", basis.dim(), th.min_lattice_points));
        }
        if !checks_density {
            continue;
        }
        if eligible {
            normalized.push((n, s1.mean / lambda, s1.std_error / lambda, predicted / lambda));
            let allowed = (th.density_se * s1.std_error).max(bias_tol * predicted);
            let dev = (s1.mean - predicted).abs();
            run.check(Check::new(
                "kac_rice",
                format!("N = {n}: MC mean matches Kac-Rice within max({} SE, {bias_tol})", th.density_se),
                dev <= allowed,
                format!("mean {:.6}, predicted {:.6}, deviation {:.3e}, allowed {:.3e}", s1.mean, predicted, dev, allowed),
            ));
        }
        for (psi, s) in psis[1..].iter().zip(&series[1..]) {
            let bound = th.uniformity_se * s.std_error + rounding_floor(s1.mean);
            run.check(Check::new(
                "uniformity",
                format!("N = {n}: |mean X_psi| ≤ {} SE for {}", th.uniformity_se, describe(psi)),
                s.mean.abs() <= bound,
                format!("mean {:.4e}, bound {:.4e}", s.mean, bound),
            ));
        }
    }
    main_csv.flush()?;
    for w in psi_csvs.iter_mut() {
        w.flush()?;
    }
    if checks_density {
        let tol = if torus { th.torus_density_constancy } else { th.density_constancy };
        if normalized.len() >= 2 {
            let lo = normalized.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
            let hi = normalized.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
            let spread = hi / lo - 1.0;
            run.check(Check::new(
                "density",
                format!("measure / lambda constant across N within {tol}"),
                spread <= tol,
                format!("range [{lo:.5}, {hi:.5}], relative spread {spread:.4}"),
            ));
        } else {
            run.check(Check::info("density", "measure / lambda constant across N", "n/a: fewer than two eligible labels"));
        }
    } else {
        let first = variances.first().map_or(f64::NAN, |v| v.1);
        let worst = variances.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
        run.check(Check::new(
            "variance",
            format!("no variance exceeds {} times the first", th.variance_growth),
            variances.len() >= 2 && worst <= th.variance_growth * first,
            format!(
                "variances {}",
                variances.iter().map(|(n, v)| format!("N={n}: {v:.4e}")).collect::<Vec<_>>().join(", ")
            ),
        ));
    }
    let rows = |q: &str| -> Vec<[f64; 2]> {
        run.record
            .rows
            .iter()
            .filter(|r| r.quantity == q)
            .map(|r| [r.label.unwrap_or(0) as f64, r.empirical])
            .collect()
    };
    let empirical = rows("measure / lambda");
    let variance_points = rows("Var(measure / lambda)");
    let predicted: Vec<[f64; 2]> = run
        .record
        .rows
        .iter()
        .filter(|r| r.quantity == "measure / lambda")
        .filter_map(|r| r.prediction.value().map(|p| [r.label.unwrap_or(0) as f64, p]))
        .collect();
    run.plot(
        "density_vs_n.svg",
        "Nodal measure per unit frequency",
        "N",
        "measure / lambda",
        vec![
            Series::new("Monte Carlo", SeriesStyle::Points, empirical),
            Series::new("Kac-Rice", SeriesStyle::Line, predicted),
        ],
    );
    run.plot(
        "variance_vs_n.svg",
        "Variance of the normalized measure",
        "N",
        "Var(measure / lambda)",
        vec![Series::new("Monte Carlo", SeriesStyle::Points, variance_points)],
    );
    Ok(())
}

fn strong_law(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let model = cfg.model()?;
    let th = &cfg.thresholds;
    let k_max = cfg.ensemble.labels[0];
    let psis = cfg.test_functions();
    let seed = cfg.ensemble.master_seed;
    let runs = strong_law_run(&model, k_max, &psis, cfg.ensemble.normalization, seed, cfg.run.resolution_factor)
        .map_err(|e| e.at(format!("K = {k_max}")))?;
    let main = &runs[0];
    for &n in &main.skipped {
        run.skip(n, "empty band");
    }
    if main.bands.len() < 2 {
        return Err(Error::InvalidArgument(format!("only {} nonempty bands up to K = {k_max}", main.bands.len())));
    }
    let mut w = run.csv("trials.csv", &TRIAL_HEADER)?;
    for (i, &n) in main.bands.iter().enumerate() {
        let x = main.normalized[i] * main.frequencies[i];
        w.write_record([n.to_string(), n.to_string(), num(x), num(main.measures[i]), seed.to_string()])?;
    }
    w.flush()?;
    let last_band = *main.bands.last().unwrap();
    let window = cfg.window(last_band);
    let limit = window_density(&model, window)?.density * model.volume() / window_frequency(&model, window)?;
    let mut series = Vec::new();
    for (psi, r) in psis.iter().zip(&runs) {
        let k = r.running.len();
        let final_avg = r.running[k - 1];
        let se = r.pooled_std_error();
        let name = describe(psi);
        let prediction = if psi.is_mean_zero() { Prediction::Value(0.0) } else { Prediction::Value(limit) };
        run.row(SummaryRow::new("strong_law", Some(k_max), &format!("R_K {name}"), final_avg, prediction).with_se(se));
        if psi.is_mean_zero() {
            let bound = th.strong_law_se * se + rounding_floor(limit);
            run.check(Check::new(
                "strong_law",
                format!("|R_K| ≤ {} pooled SE for {name}", th.strong_law_se),
                final_avg.abs() <= bound,
                format!("R_K = {final_avg:.4e}, bound {bound:.4e}"),
            ));
        } else {
            let tail = r.cauchy_tail_ratio();
            run.row(SummaryRow::new(
                "strong_law",
                Some(k_max),
                &format!("Cauchy tail |R_K - R_K/2| / R_K {name}"),
                tail,
                Prediction::na("tends to zero"),
            ));
            run.check(Check::new(
                "strong_law",
                format!("Cauchy tail ratio ≤ {} for {name}", th.strong_law_cauchy),
                tail <= th.strong_law_cauchy,
                format!("final Cauchy-tail ratio {tail:.5} (R_K = {final_avg:.5}, R_K/2 = {:.5})", r.running_at(k / 2)),
            ));
        }
        series.push(Series::new(
            name,
            SeriesStyle::Line,
            r.bands.iter().zip(&r.running).map(|(&n, &v)| [n as f64, v]),
        ));
    }
    run.plot("running_average.svg", "Running averages R_K", "K", "R_K", series);
    Ok(())
}

fn complex_growth(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let model = cfg.model()?;
    let th = &cfg.thresholds;
    let labels = &cfg.ensemble.labels;
    let n_max = *labels.iter().max().unwrap() as f64;
    let mut w = run.csv("growth.csv", &["N", "sqrt_rho", "log_pi_over_N"])?;
    let mut series = Vec::new();
    for &r in &cfg.complex.sqrt_rho {
        let zeta = cfg.growth_point(r);
        let fit = log_growth_rate(&model, labels, &zeta).map_err(|e| e.at(format!("sqrt_rho = {r}")))?;
        if series.is_empty() {
            for &n in &fit.skipped {
                run.skip(n, "empty band");
            }
        }
        for &(n, v) in &fit.points {
            w.write_record([n.to_string(), num(r), num(v)])?;
        }
        run.row(SummaryRow::new("growth", None, &format!("slope at sqrt_rho = {r} vs 2 sqrt_rho"), fit.slope, Prediction::Value(2.0 * r)));
        run.row(SummaryRow::new("growth", None, &format!("slope at sqrt_rho = {r} vs sqrt_rho"), fit.slope, Prediction::Value(r)));
        run.row(SummaryRow::new("growth", None, &format!("fit residual at sqrt_rho = {r}"), fit.residual, Prediction::na("fit diagnostic")));
        let dev = (fit.slope - 2.0 * r).abs();
        run.check(Check::new(
            "growth",
            format!("slope equals 2 sqrt_rho within {} at sqrt_rho = {r}", th.slope_tolerance),
            dev <= th.slope_tolerance,
            format!("slope {:.5}, deviation {dev:.2e}, residual {:.2e}", fit.slope, fit.residual),
        ));
        run.check(Check::new(
            "growth",
            format!("comparison sandwich holds at every N for sqrt_rho = {r}"),
            fit.sandwich_ok,
            format!("{} windows", fit.points.len()),
        ));
        run.check(Check::info(
            "growth",
            format!("slope against the sqrt_rho convention at sqrt_rho = {r}"),
            format!("slope / sqrt_rho = {:.4}", if r > 0.0 { fit.slope / r } else { f64::NAN }),
        ));
        let [s, a, b] = fit.coefficients;
        series.push(Series::new(format!("sqrt_rho {r}"), SeriesStyle::Points, fit.points.iter().map(|&(n, v)| [n as f64, v])));
        series.push(Series::new(
            format!("fit {r}"),
            SeriesStyle::Line,
            fit.points.iter().map(|&(n, _)| {
                let x = n as f64;
                [x, s + a / x + b * x.ln() / x]
            }),
        ));
        series.push(Series::new(format!("2 sqrt_rho {r}"), SeriesStyle::Line, [[labels[0] as f64, 2.0 * r], [n_max, 2.0 * r]]));
    }
    w.flush()?;
    run.plot("slope_fit.svg", "Growth of (1/N) log Pi", "N", "(1/N) log Pi", series);
    Ok(())
}

fn gk_lemma(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let th = &cfg.thresholds;
    let label = cfg.ensemble.labels[0];
    let spec = cfg.ensemble_spec(label)?;
    let real_value = -(EULER_GAMMA + std::f64::consts::LN_2);
    let mut w = run.csv(
        "gk_points.csv",
        &["point", "x0", "x1", "y0", "y1", "sqrt_rho", "mc_mean_log_sq", "std_error", "difference", "g_factor", "g_closed"],
    )?;
    let mut scatter = Vec::new();
    for (i, zeta) in cfg.complex.tube_points.iter().enumerate() {
        let stats = expected_log_modulus(&spec, zeta, cfg.trials()).map_err(|e| e.at(format!("tube point {i}")))?;
        w.write_record([
            i.to_string(),
            num(zeta.x[0]),
            num(zeta.x[1]),
            num(zeta.y[0]),
            num(zeta.y[1]),
            num(stats.sqrt_rho),
            num(stats.mc_mean_log_sq),
            num(stats.std_error),
            num(stats.difference),
            num(stats.g_factor),
            num(stats.g_closed),
        ])?;
        let name = format!("point {i} (sqrt_rho {:.3})", stats.sqrt_rho);
        run.row(
            SummaryRow::new("log_modulus", Some(label), &format!("{name}: E log|f|^2 - log sigma^2 - log Pi"), stats.difference, Prediction::Value(stats.g_factor))
                .with_se(stats.std_error),
        );
        run.row(SummaryRow::new("closed_form", Some(label), &format!("{name}: closed-form G"), stats.g_closed, Prediction::Value(stats.g_factor)));
        let dev = (stats.difference - stats.g_factor).abs();
        run.check(Check::new(
            "log_modulus",
            format!("{name}: MC agrees with quadrature G within {} SE", th.gk_se),
            stats.agrees_within(th.gk_se),
            format!("difference {:.5}, G {:.5}, deviation {dev:.2e}, SE {:.2e}", stats.difference, stats.g_factor, stats.std_error),
        ));
        run.check(Check::new(
            "log_modulus",
            format!("{name}: |G| ≤ {}", th.g_bound),
            stats.g_factor.is_finite() && stats.g_factor.abs() <= th.g_bound,
            format!("G = {:.5}", stats.g_factor),
        ));
        if zeta.is_real() {
            let q = (stats.g_factor - real_value).abs();
            run.check(Check::new(
                "real_point",
                format!("{name}: quadrature G equals -(gamma + log 2) within {}", th.real_point_tolerance),
                q <= th.real_point_tolerance,
                format!("G = {:.8}, expected {real_value:.8}", stats.g_factor),
            ));
            let m = (stats.difference - real_value).abs();
            let allowed = th.real_point_tolerance + th.gk_se * stats.std_error;
            run.check(Check::new(
                "real_point",
                format!("{name}: MC value equals -(gamma + log 2) within tolerance plus {} SE", th.gk_se),
                m <= allowed,
                format!("MC {:.5}, deviation {m:.2e}, allowed {allowed:.2e}", stats.difference),
            ));
        }
        run.check(Check::info(
            "closed_form",
            format!("{name}: closed form minus quadrature"),
            format!("{:+.5}", stats.g_closed - stats.g_factor),
        ));
        scatter.push([stats.g_factor, stats.difference]);
    }
    w.flush()?;
    let (lo, hi) = scatter.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p[0]), h.max(p[0])));
    run.plot(
        "gk_scatter.svg",
        "Monte Carlo log modulus against quadrature G",
        "G (quadrature)",
        "E log|f|^2 - log sigma^2 - log Pi",
        vec![
            Series::new("tube points", SeriesStyle::Points, scatter),
            Series::new("diagonal", SeriesStyle::Line, [[lo, lo], [hi, hi]]),
        ],
    );
    Ok(())
}

fn circle_current(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let th = &cfg.thresholds;
    let c = &cfg.complex;
    let bump = c.bump;
    let mut w = run.csv("roots.csv", &ROOT_HEADER)?;
    let write_clouds = |w: &mut csv::Writer<File>, clouds: &[RootCloud]| -> Result<()> {
        for cloud in clouds {
            for (root, res) in cloud.roots.iter().zip(&cloud.residuals) {
                w.write_record([cloud.label.to_string(), cloud.trial.to_string(), num(root.0), num(root.1), num(*res)])?;
            }
        }
        Ok(())
    };
    let calibration_spec = cfg.ensemble_spec(c.calibration_label)?;
    let calibration = circle_root_clouds(&calibration_spec, c.calibration_trials).map_err(at(c.calibration_label))?;
    let reference = current_pairing(&calibration, &bump, Some(CURRENT_CONSTANT));
    let c_star = reference.calibrated_constant();
    run.row(
        SummaryRow::new("calibration", Some(c.calibration_label), "calibrated current constant", c_star, Prediction::Value(CURRENT_CONSTANT))
            .with_se(reference.std_error / reference.integral),
    );
    let mut fractions = Vec::new();
    let mut ratio_points = Vec::new();
    let mut clouds_plot = Vec::new();
    for &n in &cfg.ensemble.labels {
        let spec = cfg.ensemble_spec(n)?;
        let clouds = circle_root_clouds(&spec, cfg.trials()).map_err(at(n))?;
        write_clouds(&mut w, &clouds)?;
        let expected = 2 * n as usize;
        let bad_counts = clouds.iter().filter(|c| c.count() != expected).count();
        let defect = clouds.iter().map(|c| c.conjugation_defect()).fold(0.0, f64::max);
        let residual = clouds.iter().flat_map(|c| c.residuals.iter().copied()).fold(0.0, f64::max);
        let fraction = clouds.iter().map(|c| c.fraction_within(th.root_fraction_y)).sum::<f64>() / clouds.len() as f64;
        let mean_count = clouds.iter().map(|c| c.count() as f64).sum::<f64>() / clouds.len() as f64;
        fractions.push((n, fraction));
        run.row(SummaryRow::new("roots", Some(n), "roots per sample", mean_count, Prediction::Value(expected as f64)));
        run.row(SummaryRow::new("roots", Some(n), "conjugation defect", defect, Prediction::Value(0.0)));
        run.row(SummaryRow::new("roots", Some(n), "max relative residual", residual, Prediction::na("numerical diagnostic")));
        run.row(SummaryRow::new(
            "concentration",
            Some(n),
            &format!("fraction with |y| < {}", th.root_fraction_y),
            fraction,
            Prediction::na("tends to 1"),
        ));
        run.check(Check::new(
            "roots",
            format!("N = {n}: every sample has 2N = {expected} roots"),
            bad_counts == 0,
            format!("{bad_counts} of {} samples differ", clouds.len()),
        ));
        run.check(Check::new(
            "roots",
            format!("N = {n}: roots are conjugation symmetric within {:.0e}", th.conjugation_tolerance),
            defect <= th.conjugation_tolerance,
            format!("max defect {defect:.2e}, max residual {residual:.2e} (bound {ROOT_RESIDUAL_BOUND:.0e})"),
        ));
        let analytic = current_pairing(&clouds, &bump, Some(CURRENT_CONSTANT));
        let calibrated = current_pairing(&clouds, &bump, Some(c_star));
        run.row(
            SummaryRow::new("pairing", Some(n), "pairing vs analytic constant", analytic.empirical, Prediction::Value(analytic.predicted.unwrap()))
                .with_se(analytic.std_error),
        );
        run.row(
            SummaryRow::new("pairing", Some(n), "pairing vs calibrated constant", calibrated.empirical, Prediction::Value(calibrated.predicted.unwrap()))
                .with_se(calibrated.std_error),
        );
        let ratio = calibrated.ratio().unwrap();
        run.check(Check::new(
            "pairing",
            format!("N = {n}: calibrated pairing ratio in [{}, {}]", th.pairing_low, th.pairing_high),
            (th.pairing_low..=th.pairing_high).contains(&ratio),
            format!("ratio {ratio:.4} (analytic-constant ratio {:.4})", analytic.ratio().unwrap()),
        ));
        ratio_points.push([n as f64, ratio]);
        if let Some(first) = clouds.first() {
            clouds_plot.push(Series::new(format!("N = {n}"), SeriesStyle::Points, first.roots.iter().map(|r| [r.0, r.1])));
        }
    }
    write_clouds(&mut w, &calibration)?;
    w.flush()?;
    let (n0, f0) = fractions[0];
    run.check(Check::new(
        "concentration",
        format!("N = {n0}: fraction with |y| < {} is at least {}", th.root_fraction_y, th.root_fraction),
        f0 >= th.root_fraction,
        format!("fraction {f0:.4}"),
    ));
    let increasing = fractions.windows(2).all(|p| p[1].1 > p[0].1);
    run.check(Check::new(
        "concentration",
        "fraction increases with N",
        increasing,
        fractions.iter().map(|(n, f)| format!("N={n}: {f:.4}")).collect::<Vec<_>>().join(", "),
    ));
    run.plot("root_clouds.svg", "Complex zeros in the strip (first sample)", "theta", "y", clouds_plot);
    run.plot(
        "pairing_ratio.svg",
        "Calibrated current pairing ratio",
        "N",
        "empirical / predicted",
        vec![
            Series::new("ratio", SeriesStyle::Points, ratio_points.clone()),
            Series::new("1", SeriesStyle::Line, ratio_points.iter().map(|p| [p[0], 1.0])),
        ],
    );
    Ok(())
}

fn torus_slice(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let model = cfg.model()?;
    let th = &cfg.thresholds;
    let c = &cfg.complex;
    let [lo, hi] = c.off_axis;
    let mut off_axis = Vec::new();
    let mut profiles = Vec::new();
    let mut wall: Option<(u32, f64)> = None;
    let record_slice = |run: &mut Run, slice: &SliceCurrent| -> Result<()> {
        let n = slice.label;
        let mut w = run.csv(&format!("slice_N{n}.csv"), &SLICE_HEADER)?;
        for j in 1..slice.t.len() - 1 {
            for i in 1..slice.s.len() - 1 {
                w.write_record([num(slice.s[i]), num(slice.t[j]), num(slice.u[j][i]), num(slice.laplacian[j][i])])?;
            }
        }
        w.flush()?;
        Ok(())
    };
    for &n in &cfg.ensemble.labels {
        let slice = match torus_slice_current(&model, n, &c.slice) {
            Ok(s) => s,
            Err(Error::EmptyWindow { .. }) => {
                run.skip(n, "empty band");
                continue;
            }
            Err(e) => return Err(e.at(format!("N = {n}"))),
        };
        record_slice(run, &slice)?;
        let m = slice.off_axis_max(lo, hi);
        let mass = slice.wall_mass(c.wall_half_width);
        let sym = slice.symmetry_defect();
        off_axis.push((n, m));
        run.row(SummaryRow::new("off_axis", Some(n), &format!("max |discrete Laplacian| for {lo} ≤ |t| ≤ {hi}"), m, Prediction::Value(0.0)));
        run.row(SummaryRow::new("wall_mass", Some(n), "wall mass", mass, Prediction::Value(th.wall_mass)));
        run.row(SummaryRow::new("symmetry", Some(n), "t to -t defect", sym, Prediction::Value(0.0)));
        run.check(Check::new(
            "symmetry",
            format!("N = {n}: Laplacian symmetric under t to -t within {:.0e}", th.symmetry_tolerance),
            sym <= th.symmetry_tolerance,
            format!("defect {sym:.2e}"),
        ));
        if n == c.wall_label {
            wall = Some((n, mass));
        }
        let cols = (slice.s.len() - 2) as f64;
        profiles.push(Series::new(
            format!("N = {n}"),
            SeriesStyle::Line,
            (1..slice.t.len() - 1).map(|j| [slice.t[j], slice.laplacian[j][1..slice.s.len() - 1].iter().sum::<f64>() / cols]),
        ));
    }
    if wall.is_none() {
        let slice = torus_slice_current(&model, c.wall_label, &c.slice).map_err(at(c.wall_label))?;
        record_slice(run, &slice)?;
        let mass = slice.wall_mass(c.wall_half_width);
        run.row(SummaryRow::new("wall_mass", Some(c.wall_label), "wall mass", mass, Prediction::Value(th.wall_mass)));
        wall = Some((c.wall_label, mass));
    }
    let decreasing = off_axis.len() >= 2 && off_axis.windows(2).all(|p| p[1].1 < p[0].1);
    run.check(Check::new(
        "off_axis",
        format!("off-axis Laplacian maximum decreases with N over {lo} ≤ |t| ≤ {hi}"),
        decreasing,
        off_axis.iter().map(|(n, m)| format!("N={n}: {m:.4e}")).collect::<Vec<_>>().join(", "),
    ));
    let (wn, mass) = wall.unwrap();
    let dev = (mass - th.wall_mass).abs() / th.wall_mass;
    run.check(Check::new(
        "wall_mass",
        format!("N = {wn}: wall mass = {} within {}", th.wall_mass, th.wall_mass_tolerance),
        dev <= th.wall_mass_tolerance,
        format!("mass {mass:.4}, relative deviation {dev:.4}"),
    ));
    run.plot("slice_laplacian.svg", "Slice Laplacian of (1/N) log Pi, averaged over s", "t", "discrete Laplacian", profiles);
    run.plot(
        "off_axis_vs_n.svg",
        "Off-axis Laplacian maximum",
        "N",
        "max |discrete Laplacian|",
        vec![Series::new("off-axis max", SeriesStyle::Points, off_axis.iter().map(|&(n, m)| [n as f64, m]))],
    );
    Ok(())
}
