//! Experiment configuration: a TOML file with `[experiment]`, `[ensemble]`,
//! `[run]`, `[thresholds]` and `[complex]` sections.
//!
//! Parsing fills kind-specific defaults, so the resolved configuration stored
//! in a result record is explicit and reproduces the run on its own.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::complex::{SliceGrid, StripBump, MIN_LOG_MODULUS_TRIALS, OVERFLOW_EXPONENT};
use crate::ensemble::{EnsembleSpec, Normalization};
use crate::error::{Error, Result};
use crate::manifold::{sqrt_rho, ManifoldModel, ModelKind, TubePoint, MAX_EXPERIMENT_TUBE_RADIUS, MIN_RESOLUTION};
use crate::nodal::{TestFunction, MIN_TRIALS, RESOLUTION_FACTOR};
use crate::spectral::{enumerate_basis, FrequencyWindow, Trig};

/// Environment variable overriding `run.output_dir`.
pub const OUTPUT_DIR_ENV: &str = "RWAVES_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RealDensity,
    StrongLaw,
    VarianceScan,
    ComplexGrowth,
    GkLemma,
    CircleCurrent,
    TorusSliceCurrent,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::RealDensity => "real_density",
            ExperimentKind::StrongLaw => "strong_law",
            ExperimentKind::VarianceScan => "variance_scan",
            ExperimentKind::ComplexGrowth => "complex_growth",
            ExperimentKind::GkLemma => "gk_lemma",
            ExperimentKind::CircleCurrent => "circle_current",
            ExperimentKind::TorusSliceCurrent => "torus_slice_current",
        }
    }

    fn supports(&self, kind: ModelKind) -> bool {
        match self {
            ExperimentKind::CircleCurrent => kind == ModelKind::Circle,
            ExperimentKind::TorusSliceCurrent => kind == ModelKind::Torus2,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Band,
    Cutoff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub model: ModelKind,
    #[serde(default = "default_tube_radius")]
    pub tube_radius: f64,
}

fn default_tube_radius() -> f64 {
    MAX_EXPERIMENT_TUBE_RADIUS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    /// `band` (default) or `cutoff`.
    pub window: Option<WindowKind>,
    #[serde(default)]
    pub normalization: Normalization,
    /// Window labels `N`; for `strong_law` the single entry is `K`.
    #[serde(default)]
    pub labels: Vec<u32>,
    pub trials: Option<u64>,
    #[serde(default)]
    pub master_seed: u64,
    /// Mean-zero test functions for uniformity checks and strong-law runs.
    pub test_functions: Option<Vec<TestFunction>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Mesh resolution is `resolution_factor · N` unless `resolution` is set.
    #[serde(default = "default_resolution_factor")]
    pub resolution_factor: usize,
    /// Fixed mesh resolution for every label.
    pub resolution: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_true")]
    pub bit_reproducible: bool,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            resolution_factor: default_resolution_factor(),
            resolution: None,
            output_dir: default_output_dir(),
            bit_reproducible: true,
            threads: default_threads(),
        }
    }
}

fn default_resolution_factor() -> usize {
    RESOLUTION_FACTOR
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("rwaves-output")
}

fn default_true() -> bool {
    true
}

fn default_threads() -> usize {
    1
}

/// PASS/FAIL tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Relative spread of `mean / λ` across labels (circle and sphere).
    pub density_constancy: f64,
    /// Relative spread and bias tolerance on the torus.
    pub torus_density_constancy: f64,
    /// Torus bands with fewer lattice points are excluded from density checks.
    pub min_lattice_points: usize,
    /// Relative bias floor of the Kac-Rice comparison.
    pub density_bias: f64,
    /// Kac-Rice comparison passes within `max(k SE, bias)`.
    pub density_se: f64,
    pub uniformity_se: f64,
    /// No variance may exceed this multiple of the first one.
    pub variance_growth: f64,
    pub strong_law_cauchy: f64,
    pub strong_law_se: f64,
    pub slope_tolerance: f64,
    pub gk_se: f64,
    pub g_bound: f64,
    pub real_point_tolerance: f64,
    pub root_fraction: f64,
    pub root_fraction_y: f64,
    pub conjugation_tolerance: f64,
    pub pairing_low: f64,
    pub pairing_high: f64,
    pub wall_mass: f64,
    pub wall_mass_tolerance: f64,
    pub symmetry_tolerance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            density_constancy: 0.03,
            torus_density_constancy: 0.05,
            min_lattice_points: 6,
            density_bias: 0.015,
            density_se: 3.0,
            uniformity_se: 3.0,
            variance_growth: 2.0,
            strong_law_cauchy: 0.05,
            strong_law_se: 3.0,
            slope_tolerance: 0.01,
            gk_se: 3.0,
            g_bound: 3.0,
            real_point_tolerance: 1e-3,
            root_fraction: 0.90,
            root_fraction_y: 0.25,
            conjugation_tolerance: 1e-8,
            pairing_low: 0.95,
            pairing_high: 1.05,
            wall_mass: 4.0,
            wall_mass_tolerance: 0.10,
            symmetry_tolerance: 1e-8,
        }
    }
}

/// Parameters of the complexified experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplexSection {
    /// Tube depths for growth fits.
    pub sqrt_rho: Vec<f64>,
    /// Real part of the growth-fit tube point.
    pub base_point: [f64; 2],
    /// Angle of the imaginary displacement on the torus, in radians.
    pub direction: f64,
    /// Tube points for the log-modulus check (generated when empty).
    pub tube_points: Vec<TubePoint>,
    /// Label and trial count of the current-constant calibration.
    pub calibration_label: u32,
    pub calibration_trials: u64,
    pub bump: StripBump,
    pub slice: SliceGrid,
    /// Label at which the slice wall mass is asserted.
    pub wall_label: u32,
    pub wall_half_width: f64,
    /// `|t|` range of the off-axis Laplacian maximum.
    pub off_axis: [f64; 2],
}

impl Default for ComplexSection {
    fn default() -> Self {
        Self {
            sqrt_rho: vec![0.1, 0.2],
            base_point: [0.9, 0.4],
            direction: 0.3,
            tube_points: Vec::new(),
            calibration_label: 160,
            calibration_trials: 40,
            bump: StripBump::default(),
            slice: SliceGrid::default(),
            wall_label: 100,
            wall_half_width: 0.05,
            off_axis: [0.1, 0.3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub complex: ComplexSection,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

impl ExperimentConfig {
    /// Parses a TOML config and fills kind-specific defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut config: Self = toml::from_str(text)?;
        config.resolve_defaults();
        Ok(config)
    }

    /// Reads a TOML config, or the config embedded in a `result.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let config = value
                .get("config")
                .ok_or_else(|| invalid(format!("{} has no embedded config", path.display())))?;
            let mut config: Self = serde_json::from_value(config.clone())?;
            config.resolve_defaults();
            Ok(config)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.kind
    }

    pub fn model(&self) -> Result<ManifoldModel> {
        ManifoldModel::new(self.experiment.model, self.experiment.tube_radius)
    }

    /// Output directory, overridden by `RWAVES_OUTPUT_DIR` when set.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.run.output_dir.clone(),
        }
    }

    pub fn trials(&self) -> u64 {
        self.ensemble.trials.unwrap_or(0)
    }

    pub fn window(&self, label: u32) -> FrequencyWindow {
        match self.ensemble.window {
            Some(WindowKind::Cutoff) => FrequencyWindow::Cutoff(label as f64),
            _ => FrequencyWindow::Band(label),
        }
    }

    pub fn ensemble_spec(&self, label: u32) -> Result<EnsembleSpec> {
        Ok(EnsembleSpec {
            model: self.model()?,
            window: self.window(label),
            normalization: self.ensemble.normalization,
            master_seed: self.ensemble.master_seed,
        })
    }

    /// Mesh resolution used for label `N`.
    pub fn resolution(&self, label: u32) -> usize {
        self.run
            .resolution
            .unwrap_or((self.run.resolution_factor * label as usize).max(MIN_RESOLUTION))
    }

    /// Test functions evaluated alongside the constant one.
    pub fn test_functions(&self) -> Vec<TestFunction> {
        let mut psis = vec![TestFunction::ONE];
        psis.extend(self.ensemble.test_functions.iter().flatten().copied());
        psis
    }

    /// Imaginary displacement of depth `r` used by growth fits.
    pub fn growth_point(&self, r: f64) -> TubePoint {
        let y = match self.experiment.model {
            ModelKind::Torus2 => [r * self.complex.direction.cos(), r * self.complex.direction.sin()],
            _ => [r, 0.0],
        };
        let x = match self.experiment.model {
            ModelKind::Circle => [self.complex.base_point[0], 0.0],
            _ => self.complex.base_point,
        };
        TubePoint::new(x, y)
    }

    fn resolve_defaults(&mut self) {
        let kind = self.experiment.kind;
        let model = self.experiment.model;
        let ens = &mut self.ensemble;
        if ens.window.is_none() {
            ens.window = Some(match kind {
                ExperimentKind::CircleCurrent => WindowKind::Cutoff,
                _ => WindowKind::Band,
            });
        }
        if ens.labels.is_empty() {
            ens.labels = match (kind, model) {
                (ExperimentKind::RealDensity | ExperimentKind::VarianceScan, ModelKind::Torus2) => vec![40, 50, 80, 100],
                (ExperimentKind::RealDensity | ExperimentKind::VarianceScan, _) => vec![10, 20, 40],
                (ExperimentKind::StrongLaw, _) => vec![60],
                (ExperimentKind::ComplexGrowth, _) => (40..=200).collect(),
                (ExperimentKind::GkLemma, ModelKind::Torus2) => vec![12],
                (ExperimentKind::GkLemma, _) => vec![10],
                (ExperimentKind::CircleCurrent, _) => vec![20, 40, 80],
                (ExperimentKind::TorusSliceCurrent, _) => vec![50, 100, 200],
            };
        }
        if ens.trials.is_none() {
            ens.trials = Some(match kind {
                ExperimentKind::GkLemma => 4000,
                ExperimentKind::StrongLaw | ExperimentKind::ComplexGrowth | ExperimentKind::TorusSliceCurrent => 1,
                _ => 200,
            });
        }
        if ens.test_functions.is_none() {
            ens.test_functions = Some(match kind {
                ExperimentKind::RealDensity | ExperimentKind::StrongLaw => default_mean_zero(model),
                _ => Vec::new(),
            });
        }
        if kind == ExperimentKind::GkLemma && self.complex.tube_points.is_empty() {
            self.complex.tube_points = default_tube_points(model);
        }
    }

    /// Checks every parameter against the module preconditions.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind();
        let model = self.model().map_err(|e| invalid(e.to_string()))?;
        if !kind.supports(model.kind()) {
            return Err(invalid(format!("{} is not available on the {}", kind.name(), model.kind())));
        }
        if model.tube_radius() > MAX_EXPERIMENT_TUBE_RADIUS {
            return Err(invalid(format!(
                "tube_radius {} exceeds the experiment cap {MAX_EXPERIMENT_TUBE_RADIUS}",
                model.tube_radius()
            )));
        }
        let labels = &self.ensemble.labels;
        if labels.is_empty() || labels.contains(&0) {
            return Err(invalid("ensemble.labels must be a nonempty list of positive integers"));
        }
        if self.run.threads == 0 {
            return Err(invalid("run.threads must be at least 1"));
        }
        let trials = self.trials();
        match kind {
            ExperimentKind::RealDensity | ExperimentKind::VarianceScan if trials < MIN_TRIALS => {
                return Err(invalid(format!("{} needs at least {MIN_TRIALS} trials, got {trials}", kind.name())));
            }
            ExperimentKind::CircleCurrent if trials < 2 || self.complex.calibration_trials < 2 => {
                return Err(invalid("circle_current needs at least 2 trials and 2 calibration trials"));
            }
            ExperimentKind::GkLemma if trials < MIN_LOG_MODULUS_TRIALS => {
                return Err(invalid(format!(
                    "gk_lemma needs at least {MIN_LOG_MODULUS_TRIALS} trials, got {trials}"
                )));
            }
            _ => {}
        }
        if matches!(kind, ExperimentKind::RealDensity | ExperimentKind::VarianceScan | ExperimentKind::StrongLaw) {
            if self.run.resolution_factor < RESOLUTION_FACTOR {
                return Err(invalid(format!(
                    "run.resolution_factor {} violates the 4N rule (resolution at least {RESOLUTION_FACTOR}·N)",
                    self.run.resolution_factor
                )));
            }
            let top = match kind {
                ExperimentKind::StrongLaw => labels[0],
                _ => *labels.iter().max().unwrap(),
            };
            let resolution = self.resolution(top);
            let required = RESOLUTION_FACTOR * top as usize;
            if resolution < required {
                return Err(invalid(format!(
                    "resolution {resolution} with N = {top} violates the 4N rule: at least {required} is required"
                )));
            }
            if resolution < MIN_RESOLUTION {
                return Err(invalid(format!("resolution {resolution} is below the minimum of {MIN_RESOLUTION}")));
            }
            let psis = self.test_functions();
            if let Some(bad) = psis.iter().find(|p| !p.supports(model.kind())) {
                return Err(invalid(format!("test function {bad:?} is not defined on the {}", model.kind())));
            }
            if let Some(bad) = psis[1..].iter().find(|p| !p.is_mean_zero()) {
                return Err(invalid(format!("test function {bad:?} is not mean-zero")));
            }
        }
        if kind == ExperimentKind::StrongLaw && (labels.len() != 1 || labels[0] < 2) {
            return Err(invalid("strong_law takes a single label K ≥ 2 in ensemble.labels"));
        }
        if kind == ExperimentKind::CircleCurrent && self.ensemble.window != Some(WindowKind::Cutoff) {
            return Err(invalid("circle_current uses cutoff windows"));
        }
        let t = &self.thresholds;
        let positive = [
            t.density_constancy,
            t.torus_density_constancy,
            t.density_bias,
            t.density_se,
            t.uniformity_se,
            t.variance_growth,
            t.strong_law_cauchy,
            t.strong_law_se,
            t.slope_tolerance,
            t.gk_se,
            t.g_bound,
            t.real_point_tolerance,
            t.root_fraction_y,
            t.conjugation_tolerance,
            t.wall_mass_tolerance,
            t.symmetry_tolerance,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("every threshold must be positive and finite"));
        }
        if !(t.pairing_low < t.pairing_high) || !(0.0..=1.0).contains(&t.root_fraction) {
            return Err(invalid("pairing bounds must be increasing and root_fraction must lie in [0, 1]"));
        }
        self.validate_complex(&model)
    }

    fn validate_complex(&self, model: &ManifoldModel) -> Result<()> {
        let c = &self.complex;
        let labels = &self.ensemble.labels;
        let top = *labels.iter().max().unwrap() as f64;
        let guard = |r: f64, n: f64| {
            let g = 2.0 * (n + 1.0) * r;
            if g > OVERFLOW_EXPONENT {
                Err(invalid(format!("2(N+1)sqrt(rho) = {g} with N = {n} exceeds the log-space guard 600")))
            } else {
                Ok(())
            }
        };
        match self.kind() {
            ExperimentKind::ComplexGrowth => {
                if c.sqrt_rho.is_empty() {
                    return Err(invalid("complex.sqrt_rho must not be empty"));
                }
                if labels.len() < 3 {
                    return Err(invalid("complex_growth needs at least 3 labels for the slope fit"));
                }
                for &r in &c.sqrt_rho {
                    if !(r >= 0.0 && r <= model.tube_radius()) {
                        return Err(invalid(format!(
                            "sqrt_rho {r} lies outside the tube of radius {}",
                            model.tube_radius()
                        )));
                    }
                    let zeta = self.growth_point(r);
                    sqrt_rho(model, &zeta).map_err(|e| invalid(e.to_string()))?;
                    guard(r, top)?;
                }
            }
            ExperimentKind::GkLemma => {
                let window = self.window(labels[0]);
                enumerate_basis(model, window).map_err(|e| invalid(format!("N = {}: {e}", labels[0])))?;
                for zeta in &c.tube_points {
                    let r = sqrt_rho(model, zeta).map_err(|e| invalid(format!("tube point {zeta:?}: {e}")))?;
                    guard(r, top)?;
                }
            }
            ExperimentKind::CircleCurrent => {
                if c.calibration_label == 0 {
                    return Err(invalid("complex.calibration_label must be positive"));
                }
                let b = &c.bump;
                if !(0.0 < b.plateau && b.plateau < b.support && b.support <= model.tube_radius()) {
                    return Err(invalid("bump needs 0 < plateau < support ≤ tube_radius"));
                }
                if !(b.amplitude.abs() < 1.0) {
                    return Err(invalid("bump amplitude must lie in (-1, 1)"));
                }
            }
            ExperimentKind::TorusSliceCurrent => {
                let g = &c.slice;
                if !(g.step > 0.0 && g.t_max > 0.0 && g.s_count >= 1) {
                    return Err(invalid("slice grid needs positive step, t_max and s_count"));
                }
                if g.t_max + g.step > model.tube_radius() {
                    return Err(invalid(format!(
                        "slice t_max + step = {} lies outside the tube of radius {}",
                        g.t_max + g.step,
                        model.tube_radius()
                    )));
                }
                if !(c.off_axis[0] < c.off_axis[1] && c.off_axis[1] <= g.t_max) {
                    return Err(invalid("complex.off_axis must be an increasing range within the slice"));
                }
                guard(g.t_max + g.step, top.max(c.wall_label as f64))?;
            }
            _ => {}
        }
        Ok(())
    }
}

fn default_mean_zero(model: ModelKind) -> Vec<TestFunction> {
    match model {
        ModelKind::Circle => vec![
            TestFunction::Fourier { k: [1, 0], trig: Trig::Cos },
            TestFunction::Fourier { k: [2, 0], trig: Trig::Sin },
            TestFunction::Fourier { k: [3, 0], trig: Trig::Cos },
        ],
        ModelKind::Torus2 => vec![
            TestFunction::Fourier { k: [1, 0], trig: Trig::Cos },
            TestFunction::Fourier { k: [0, 1], trig: Trig::Sin },
            TestFunction::Fourier { k: [1, 1], trig: Trig::Cos },
        ],
        // odd degrees integrate to zero over every antipodally symmetric nodal set
        ModelKind::Sphere2 => vec![
            TestFunction::SphericalHarmonic { degree: 2, order: 0, trig: Trig::Cos },
            TestFunction::SphericalHarmonic { degree: 2, order: 1, trig: Trig::Cos },
            TestFunction::SphericalHarmonic { degree: 4, order: 2, trig: Trig::Sin },
        ],
    }
}

/// Ten tube points: one real point, then increasing depth in turning
/// directions. Coordinates are short decimals so the TOML snapshot is exact.
fn default_tube_points(model: ModelKind) -> Vec<TubePoint> {
    let dec = |hundredths: i64| hundredths as f64 / 100.0;
    (0..10i64)
        .map(|i| {
            let r = dec(4 * i);
            let a = 0.7 * i as f64;
            // direction rounded to two decimals per component
            let (c, s) = (dec((100.0 * r * a.cos()).round() as i64), dec((100.0 * r * a.sin()).round() as i64));
            match model {
                ModelKind::Circle => TubePoint::new([dec(30 + 50 * i), 0.0], [r, 0.0]),
                ModelKind::Torus2 => TubePoint::new([dec(10 + 7 * i), dec(20 + 5 * i)], [c, s]),
                ModelKind::Sphere2 => TubePoint::new([dec(40 + 20 * i), dec(30 + 50 * i)], [r, 0.0]),
            }
        })
        .collect()
}
