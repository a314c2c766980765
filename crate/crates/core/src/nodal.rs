//! Real nodal sets: extraction on meshes, linear statistics and Monte Carlo runs.
//!
//! Edge crossings are located from sign information and ratios of vertex
//! values, then snapped to a dyadic grid along the edge. Multiplying a wave by
//! `t > 0` perturbs vertex values only at the rounding level, so the snapped
//! crossings (and everything computed from them) come out bit-identical.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Ensemble, EnsembleSpec, Normalization, WaveSample};
use crate::error::{Error, Result};
use crate::manifold::{build_mesh, ChartPoint, ManifoldModel, Mesh, ModelKind, MIN_RESOLUTION};
use crate::numerics::special::normalized_legendre_degree;
use crate::spectral::{enumerate_basis, FrequencyWindow, Trig};

/// Minimum mesh resolution per unit of window label.
pub const RESOLUTION_FACTOR: usize = 4;
/// Circle zeros are bracketed on a grid this many times finer than the mesh.
pub const CIRCLE_OVERSAMPLE: usize = 16;
/// Circle zeros are bisected until the bracket is below this width.
pub const CIRCLE_ROOT_TOL: f64 = 1e-10;
/// Edge crossings are snapped to multiples of `2^-SNAP_BITS` of the edge.
const SNAP_BITS: i32 = 24;
pub const MIN_TRIALS: u64 = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: ChartPoint,
    pub end: ChartPoint,
    /// Metric length.
    pub length: f64,
}

impl Segment {
    pub fn midpoint(&self) -> ChartPoint {
        [0.5 * (self.start[0] + self.end[0]), 0.5 * (self.start[1] + self.end[1])]
    }
}

/// Zero set of a wave: isolated zeros on the circle, polyline segments on
/// surfaces. Chart coordinates may sit one period past the fundamental domain
/// for segments crossing a periodic seam.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalSet {
    pub zeros: Vec<f64>,
    pub segments: Vec<Segment>,
    /// Zero count (circle) or total metric length (surfaces).
    pub total_measure: f64,
}

/// Smallest admissible resolution for `window`.
pub fn required_resolution(window: FrequencyWindow) -> usize {
    (RESOLUTION_FACTOR * window.label() as usize).max(MIN_RESOLUTION)
}

/// Extracts the zero set of `sample` on `mesh`.
pub fn extract_nodal(sample: &WaveSample, mesh: &Mesh) -> Result<NodalSet> {
    let window = sample.basis().window();
    let required = RESOLUTION_FACTOR * window.label() as usize;
    if mesh.resolution() < required {
        return Err(Error::ResolutionTooCoarse {
            resolution: mesh.resolution(),
            frequency: window.label(),
            required,
        });
    }
    if mesh.kind() != sample.basis().model().kind() {
        return Err(Error::InvalidArgument(format!(
            "mesh for {} used with a {} sample",
            mesh.kind(),
            sample.basis().model().kind()
        )));
    }
    Ok(match mesh.kind() {
        ModelKind::Circle => circle_zeros(sample, mesh),
        _ => marching_squares(sample, mesh),
    })
}

fn circle_zeros(sample: &WaveSample, mesh: &Mesh) -> NodalSet {
    let n = mesh.resolution() * CIRCLE_OVERSAMPLE;
    let step = std::f64::consts::TAU / n as f64;
    let value = |theta: f64| sample.eval(&[theta, 0.0]).0;
    let positive: Vec<bool> = (0..n).map(|i| value(i as f64 * step) >= 0.0).collect();
    let mut zeros = Vec::new();
    for i in 0..n {
        let s0 = positive[i];
        if s0 == positive[(i + 1) % n] {
            continue;
        }
        let (mut lo, mut hi) = (i as f64 * step, (i + 1) as f64 * step);
        while hi - lo > CIRCLE_ROOT_TOL {
            let mid = 0.5 * (lo + hi);
            if (value(mid) >= 0.0) == s0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        zeros.push(0.5 * (lo + hi));
    }
    NodalSet {
        total_measure: zeros.len() as f64,
        zeros,
        segments: Vec::new(),
    }
}

/// Crossing fraction along an edge from `fa` to `fb` (opposite signs).
fn edge_fraction(fa: f64, fb: f64) -> f64 {
    let t = fa / (fa - fb);
    let scale = (1u64 << SNAP_BITS) as f64;
    ((t * scale).round() / scale).clamp(0.0, 1.0)
}

fn grid_to_chart(mesh: &Mesh, col: f64, row: f64) -> ChartPoint {
    let (c, r) = (col * mesh.col_coord(1), row * mesh.row_coord(1));
    match mesh.kind() {
        ModelKind::Sphere2 => [r, c],
        _ => [c, r],
    }
}

fn metric_length(kind: ModelKind, a: &ChartPoint, b: &ChartPoint) -> f64 {
    let d0 = b[0] - a[0];
    let d1 = b[1] - a[1];
    match kind {
        ModelKind::Sphere2 => {
            let s = (0.5 * (a[0] + b[0])).sin();
            d0.hypot(s * d1)
        }
        _ => d0.hypot(d1),
    }
}

fn marching_squares(sample: &WaveSample, mesh: &Mesh) -> NodalSet {
    let values = sample.on_mesh(mesh);
    let kind = mesh.kind();
    let cols = mesh.cols();
    let mut segments = Vec::new();
    for j in 0..mesh.cell_rows() {
        for i in 0..cols {
            let f = |c: usize, r: usize| values[mesh.vertex_index(c, r)];
            let (f00, f10, f11, f01) = (f(i, j), f(i + 1, j), f(i + 1, j + 1), f(i, j + 1));
            let s = [f00 >= 0.0, f10 >= 0.0, f11 >= 0.0, f01 >= 0.0];
            // crossings in grid coordinates, canonical orientation: increasing col/row
            let (ic, jr) = (i as f64, j as f64);
            let bottom = (s[0] != s[1]).then(|| (ic + edge_fraction(f00, f10), jr));
            let right = (s[1] != s[2]).then(|| (ic + 1.0, jr + edge_fraction(f10, f11)));
            let top = (s[3] != s[2]).then(|| (ic + edge_fraction(f01, f11), jr + 1.0));
            let left = (s[0] != s[3]).then(|| (ic, jr + edge_fraction(f00, f01)));
            let crossings: Vec<(f64, f64)> = [bottom, right, top, left].into_iter().flatten().collect();
            let mut push = |p: (f64, f64), q: (f64, f64)| {
                let a = grid_to_chart(mesh, p.0, p.1);
                let b = grid_to_chart(mesh, q.0, q.1);
                segments.push(Segment {
                    start: a,
                    end: b,
                    length: metric_length(kind, &a, &b),
                });
            };
            match crossings.len() {
                2 => push(crossings[0], crossings[1]),
                4 => {
                    let (b, r, t, l) = (bottom.unwrap(), right.unwrap(), top.unwrap(), left.unwrap());
                    let center = grid_to_chart(mesh, ic + 0.5, jr + 0.5);
                    let center_positive = sample.eval(&center).0 >= 0.0;
                    if center_positive == s[0] {
                        // corners 00 and 11 joined through the center
                        push(b, r);
                        push(t, l);
                    } else {
                        push(b, l);
                        push(r, t);
                    }
                }
                _ => {}
            }
        }
    }
    NodalSet {
        zeros: Vec::new(),
        total_measure: segments.iter().map(|s| s.length).sum(),
        segments,
    }
}

/// Test functions for linear statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TestFunction {
    Constant { value: f64 },
    /// `cos(2π k·x)` / `sin(2π k·x)` on the torus, `cos(k₀θ)` / `sin(k₀θ)` on the circle.
    Fourier { k: [i64; 2], trig: Trig },
    /// Unnormalized real harmonic `P̄_ℓ^m(cos θ)·cos(mφ)` (or `sin`) on the sphere.
    SphericalHarmonic { degree: u32, order: u32, trig: Trig },
}

impl TestFunction {
    pub const ONE: TestFunction = TestFunction::Constant { value: 1.0 };

    pub fn supports(&self, kind: ModelKind) -> bool {
        match self {
            TestFunction::Constant { .. } => true,
            TestFunction::Fourier { .. } => kind != ModelKind::Sphere2,
            TestFunction::SphericalHarmonic { order, degree, .. } => kind == ModelKind::Sphere2 && order <= degree,
        }
    }

    pub fn is_mean_zero(&self) -> bool {
        match *self {
            TestFunction::Constant { value } => value == 0.0,
            TestFunction::Fourier { k, trig } => k != [0, 0] || trig == Trig::Sin,
            TestFunction::SphericalHarmonic { degree, trig, order } => degree > 0 || (trig == Trig::Sin && order == 0),
        }
    }

    pub fn eval(&self, kind: ModelKind, x: &ChartPoint) -> f64 {
        let trig = |t: Trig, arg: f64| match t {
            Trig::Cos => arg.cos(),
            Trig::Sin => arg.sin(),
        };
        match *self {
            TestFunction::Constant { value } => value,
            TestFunction::Fourier { k, trig: t } => match kind {
                ModelKind::Circle => trig(t, k[0] as f64 * x[0]),
                _ => trig(t, std::f64::consts::TAU * (k[0] as f64 * x[0] + k[1] as f64 * x[1])),
            },
            TestFunction::SphericalHarmonic { degree, order, trig: t } => {
                let (s, c) = x[0].sin_cos();
                let p = normalized_legendre_degree(degree as usize, c, s, false)[order as usize];
                p * trig(t, order as f64 * x[1])
            }
        }
    }
}

/// `X_ψ = ∫_Z ψ`: midpoint rule over segments, or a sum over circle zeros.
pub fn linear_statistic<F: Fn(&ChartPoint) -> f64>(nodal: &NodalSet, psi: F) -> f64 {
    let on_zeros: f64 = nodal.zeros.iter().map(|&t| psi(&[t, 0.0])).sum();
    let on_segments: f64 = nodal.segments.iter().map(|s| psi(&s.midpoint()) * s.length).sum();
    on_zeros + on_segments
}

/// One Monte Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub x_psi: f64,
    pub total_measure: f64,
}

/// Per-trial values of a statistic with their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticSeries {
    pub label: u32,
    pub records: Vec<TrialRecord>,
    pub mean: f64,
    pub std_error: f64,
    pub variance: f64,
}

/// Mean, standard error and sample variance.
pub fn summarize(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN, f64::NAN);
    }
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (variance / n).sqrt(), variance)
}

impl StatisticSeries {
    pub fn from_records(label: u32, records: Vec<TrialRecord>) -> Self {
        let values: Vec<f64> = records.iter().map(|r| r.x_psi).collect();
        let (mean, std_error, variance) = summarize(&values);
        Self {
            label,
            records,
            mean,
            std_error,
            variance,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.x_psi).collect()
    }
}

/// Samples `trials` waves and returns one series per test function.
///
/// Trials run in parallel; results are collected in trial order, so the
/// summaries are independent of scheduling.
pub fn mc_expected_statistics(
    spec: &EnsembleSpec,
    psis: &[TestFunction],
    trials: u64,
    mesh: &Mesh,
) -> Result<Vec<StatisticSeries>> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo runs need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let kind = spec.model.kind();
    if let Some(bad) = psis.iter().find(|p| !p.supports(kind)) {
        return Err(Error::InvalidArgument(format!("test function {bad:?} is not defined on {kind}")));
    }
    let ensemble = Ensemble::new(spec)?;
    let per_trial: Vec<Vec<TrialRecord>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let nodal = extract_nodal(&ensemble.sample(t), mesh)?;
            Ok(psis
                .iter()
                .map(|psi| TrialRecord {
                    trial: t,
                    x_psi: linear_statistic(&nodal, |x| psi.eval(kind, x)),
                    total_measure: nodal.total_measure,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let label = spec.window.label();
    Ok((0..psis.len())
        .map(|k| StatisticSeries::from_records(label, per_trial.iter().map(|r| r[k]).collect()))
        .collect())
}

pub fn mc_expected_statistic(
    spec: &EnsembleSpec,
    psi: TestFunction,
    trials: u64,
    mesh: &Mesh,
) -> Result<StatisticSeries> {
    Ok(mc_expected_statistics(spec, &[psi], trials, mesh)?.remove(0))
}

/// Strong-law run over bands `1..=K` for one test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongLawRun {
    pub psi: TestFunction,
    /// Bands that were sampled.
    pub bands: Vec<u32>,
    /// Bands skipped because their window is empty.
    pub skipped: Vec<u32>,
    /// Window frequency `λ_n` per sampled band.
    pub frequencies: Vec<f64>,
    /// Nodal measure per sampled band.
    pub measures: Vec<f64>,
    /// `X_ψ(f_n) / λ_n` per sampled band.
    pub normalized: Vec<f64>,
    /// Running averages `R_K` over the sampled bands.
    pub running: Vec<f64>,
}

impl StrongLawRun {
    /// Standard error of the final running average from the spread of the
    /// per-band values.
    pub fn pooled_std_error(&self) -> f64 {
        summarize(&self.normalized).1
    }

    /// Running average after the first `k` sampled bands.
    pub fn running_at(&self, k: usize) -> f64 {
        self.running[k - 1]
    }

    /// `|R_K − R_{K/2}| / |R_K|` over the sampled bands.
    pub fn cauchy_tail_ratio(&self) -> f64 {
        let k = self.running.len();
        let last = self.running[k - 1];
        (last - self.running[k / 2 - 1]).abs() / last.abs()
    }
}

/// Representative frequency of a window: root mean square of its eigenvalues.
pub fn window_frequency(model: &ManifoldModel, window: FrequencyWindow) -> Result<f64> {
    let basis = enumerate_basis(model, window)?;
    let n = basis.dim() as f64;
    Ok((basis.entries().iter().map(|e| e.frequency * e.frequency).sum::<f64>() / n).sqrt())
}

/// One independent sample per band `Band(n)`, `n = 1..=k_max`, on a mesh of
/// resolution `resolution_factor · n`; sample `n` uses trial stream `n` of
/// `master_seed`. Every test function is evaluated on the same samples.
pub fn strong_law_run(
    model: &ManifoldModel,
    k_max: u32,
    psis: &[TestFunction],
    normalization: Normalization,
    master_seed: u64,
    resolution_factor: usize,
) -> Result<Vec<StrongLawRun>> {
    if let Some(bad) = psis.iter().find(|p| !p.supports(model.kind())) {
        return Err(Error::InvalidArgument(format!("test function {bad:?} is not defined on {}", model.kind())));
    }
    type BandOutcome = Option<(f64, f64, Vec<f64>)>;
    let outcomes: Vec<Result<BandOutcome>> = (1..=k_max)
        .into_par_iter()
        .map(|n| {
            let window = FrequencyWindow::Band(n);
            let spec = EnsembleSpec {
                model: *model,
                window,
                normalization,
                master_seed,
            };
            let ensemble = match Ensemble::new(&spec) {
                Ok(e) => e,
                Err(Error::EmptyWindow { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let resolution = (resolution_factor * n as usize).max(MIN_RESOLUTION);
            let mesh = build_mesh(model, resolution)?;
            let nodal = extract_nodal(&ensemble.sample(n as u64), &mesh)?;
            let lambda = window_frequency(model, window)?;
            let values = psis
                .iter()
                .map(|psi| linear_statistic(&nodal, |x| psi.eval(model.kind(), x)))
                .collect();
            Ok(Some((lambda, nodal.total_measure, values)))
        })
        .collect();
    let mut runs: Vec<StrongLawRun> = psis
        .iter()
        .map(|&psi| StrongLawRun {
            psi,
            bands: Vec::new(),
            skipped: Vec::new(),
            frequencies: Vec::new(),
            measures: Vec::new(),
            normalized: Vec::new(),
            running: Vec::new(),
        })
        .collect();
    for (n, outcome) in (1..=k_max).zip(outcomes) {
        match outcome? {
            Some((lambda, measure, values)) => {
                for (run, v) in runs.iter_mut().zip(values) {
                    run.bands.push(n);
                    run.frequencies.push(lambda);
                    run.measures.push(measure);
                    run.normalized.push(v / lambda);
                    let k = run.normalized.len() as f64;
                    let previous = run.running.last().copied().unwrap_or(0.0);
                    run.running.push(previous + (v / lambda - previous) / k);
                }
            }
            None => {
                log::info!("strong-law run: band {n} is empty on {}, skipped", model.kind());
                for run in runs.iter_mut() {
                    run.skipped.push(n);
                }
            }
        }
    }
    Ok(runs)
}
