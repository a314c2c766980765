//! Analytic continuation into the Grauert tube: complexified waves and
//! kernels, the logarithmic growth law, the log-modulus decomposition and
//! complex zeros on the circle and on torus slices.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Ensemble, EnsembleSpec, WaveSample};
use crate::error::{Error, Result};
use crate::manifold::{sqrt_rho, ManifoldModel, ModelKind, TubePoint};
use crate::numerics::special::ln_legendre_p_ge1;
use crate::numerics::{log_sum_exp, tanh_sinh, EULER_GAMMA};
use crate::spectral::{enumerate_basis, EigenBasis, EigenLabel, FrequencyWindow, Trig};

/// Largest admissible exponent `2 (N+1) sqrt(rho)`.
pub const OVERFLOW_EXPONENT: f64 = 600.0;

fn overflow_guard(window: FrequencyWindow, sqrt_rho: f64) -> Result<()> {
    let exponent = 2.0 * (window.label() as f64 + 1.0) * sqrt_rho;
    if exponent > OVERFLOW_EXPONENT {
        return Err(Error::Overflow(exponent));
    }
    Ok(())
}

/// A complex number stored as `ln|z|` and `arg z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogComplex {
    pub log_abs: f64,
    pub phase: f64,
}

impl LogComplex {
    pub fn from_complex(z: Complex64) -> Self {
        Self {
            log_abs: z.norm().ln(),
            phase: z.arg(),
        }
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::from_polar(self.log_abs.exp(), self.phase)
    }
}

/// Value of the analytic continuation of `sample` at `ζ`, in log form.
pub fn complexify_wave(sample: &WaveSample, zeta: &TubePoint) -> Result<LogComplex> {
    let basis = sample.basis();
    let r = sqrt_rho(basis.model(), zeta)?;
    overflow_guard(basis.window(), r)?;
    Ok(LogComplex::from_complex(sample.eval_complex(zeta)))
}

/// `log Π(ζ, ζ̄)` and its damped counterpart `log P(ζ, ζ̄)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexKernelValue {
    pub log_pi: f64,
    /// `log Σ e^{-2 sqrt(rho) λ_j} |φ_j(ζ)|²`.
    pub log_damped: f64,
    pub label: u32,
    pub sqrt_rho: f64,
    /// Lowest and highest frequency in the window.
    pub frequency_range: (f64, f64),
    /// Sphere only: the continued addition theorem `Σ (2ℓ+1)/(4π) P_ℓ(cosh 2 sqrt(rho))`, in log form.
    pub closed_form_log_pi: Option<f64>,
}

impl ComplexKernelValue {
    /// Checks `P e^{2 λ_min sqrt(rho)} ≤ Π ≤ P e^{2 λ_max sqrt(rho)}` up to
    /// rounding (relative slack `1e-12`).
    pub fn sandwich_holds(&self) -> bool {
        let (lo, hi) = self.frequency_range;
        let slack = 1e-12 * (1.0 + self.log_pi.abs());
        let lower = self.log_damped + 2.0 * lo * self.sqrt_rho;
        let upper = self.log_damped + 2.0 * hi * self.sqrt_rho;
        lower - slack <= self.log_pi && self.log_pi <= upper + slack
    }
}

/// Complexified projector kernel on the diagonal, computed in log space.
pub fn complexified_projector(
    model: &ManifoldModel,
    window: FrequencyWindow,
    zeta: &TubePoint,
) -> Result<ComplexKernelValue> {
    let basis = enumerate_basis(model, window)?;
    complexified_projector_for(&basis, zeta)
}

pub fn complexified_projector_for(basis: &EigenBasis, zeta: &TubePoint) -> Result<ComplexKernelValue> {
    let model = basis.model();
    let r = sqrt_rho(model, zeta)?;
    overflow_guard(basis.window(), r)?;
    let values = basis.eval_complex(zeta);
    let log_terms: Vec<f64> = values.iter().map(|v| 2.0 * v.norm().ln()).collect();
    let damped: Vec<f64> = log_terms
        .iter()
        .zip(basis.entries())
        .map(|(t, e)| t - 2.0 * r * e.frequency)
        .collect();
    let closed_form_log_pi = (model.kind() == ModelKind::Sphere2 && basis.entries().len() == enumerate_basis(model, basis.window())?.dim())
        .then(|| {
            let x = (2.0 * r).cosh();
            let terms: Vec<f64> = sphere_degrees(basis)
                .into_iter()
                .map(|l| ((2 * l + 1) as f64 / (4.0 * PI)).ln() + ln_legendre_p_ge1(l as usize, x))
                .collect();
            log_sum_exp(&terms)
        });
    Ok(ComplexKernelValue {
        log_pi: log_sum_exp(&log_terms),
        log_damped: log_sum_exp(&damped),
        label: basis.window().label(),
        sqrt_rho: r,
        frequency_range: basis.frequency_range(),
        closed_form_log_pi,
    })
}

fn sphere_degrees(basis: &EigenBasis) -> Vec<u32> {
    let mut degrees: Vec<u32> = basis
        .entries()
        .iter()
        .map(|e| match e.label {
            EigenLabel::Sphere { degree, .. } => degree,
            _ => 0,
        })
        .collect();
    degrees.dedup();
    degrees
}

/// `(1/N) log Π` along a sequence of windows with a fitted limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// `(N, (1/N) log Π)` for every nonempty window.
    pub points: Vec<(u32, f64)>,
    /// Bands skipped because their window is empty.
    pub skipped: Vec<u32>,
    /// Fitted limit `s` in `(1/N) log Π ≈ s + a/N + b ln(N)/N`.
    pub slope: f64,
    pub coefficients: [f64; 3],
    /// Root mean square of the fit residuals.
    pub residual: f64,
    pub sqrt_rho: f64,
    /// Whether every point satisfied the comparison sandwich.
    pub sandwich_ok: bool,
}

/// Evaluates `(1/N) log Π_{Band(N)}(ζ, ζ̄)` for each label and fits the limit.
pub fn log_growth_rate(model: &ManifoldModel, labels: &[u32], zeta: &TubePoint) -> Result<GrowthFit> {
    let r = sqrt_rho(model, zeta)?;
    let values: Vec<(u32, Result<ComplexKernelValue>)> = labels
        .par_iter()
        .map(|&n| (n, complexified_projector(model, FrequencyWindow::Band(n), zeta)))
        .collect();
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    let mut sandwich_ok = true;
    for (n, v) in values {
        match v {
            Ok(v) => {
                sandwich_ok &= v.sandwich_holds();
                points.push((n, v.log_pi / n as f64));
            }
            Err(Error::EmptyWindow { .. }) => skipped.push(n),
            Err(e) => return Err(e),
        }
    }
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "growth fit needs at least 3 nonempty windows, got {}",
            points.len()
        )));
    }
    let design = DMatrix::from_fn(points.len(), 3, |i, j| {
        let n = points[i].0 as f64;
        match j {
            0 => 1.0,
            1 => 1.0 / n,
            _ => n.ln() / n,
        }
    });
    let rhs = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let fitted = &design * &coef;
    let residual = ((&rhs - fitted).norm_squared() / points.len() as f64).sqrt();
    Ok(GrowthFit {
        points,
        skipped,
        slope: coef[0],
        coefficients: [coef[0], coef[1], coef[2]],
        residual,
        sqrt_rho: r,
        sandwich_ok,
    })
}

/// Real and imaginary parts `U + iV = Φ(ζ)/|Φ(ζ)|` of the normalized
/// complexified basis vector.
pub fn unit_frame(basis: &EigenBasis, zeta: &TubePoint) -> (Vec<f64>, Vec<f64>) {
    let values = basis.eval_complex(zeta);
    let norm = values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    values.iter().map(|v| (v.re / norm, v.im / norm)).unzip()
}

/// Gram invariants `(|U|², |V|², ⟨U, V⟩)`.
pub fn frame_gram(u: &[f64], v: &[f64]) -> (f64, f64, f64) {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    (dot(u, u), dot(v, v), dot(u, v))
}

fn gram_eigenvalues(p: f64, q: f64, r: f64) -> (f64, f64) {
    let mean = 0.5 * (p + q);
    let half_gap = (0.5 * (p - q)).hypot(r);
    ((mean + half_gap).max(0.0), (mean - half_gap).max(0.0))
}

/// `G = E log|⟨a, U + iV⟩|²` for `a ~ N(0, I)`, by quadrature.
///
/// `(⟨a,U⟩, ⟨a,V⟩)` is a planar Gaussian whose covariance has eigenvalues
/// `μ₁ ≥ μ₂`; in polar coordinates `G = E log χ²₂ + (1/2π)∫ log(μ₁cos²t + μ₂sin²t) dt`.
/// The angular integral has a logarithmic singularity when `μ₂ = 0`, which
/// tanh-sinh handles at the interval ends.
pub fn g_factor_quadrature(u: &[f64], v: &[f64]) -> f64 {
    let (p, q, r) = frame_gram(u, v);
    let (m1, m2) = gram_eigenvalues(p, q, r);
    let angular = |t: f64| {
        let (s, c) = t.sin_cos();
        (m1 * c * c + m2 * s * s).ln()
    };
    // quarter period [0, π/2], split so the possible singularity at π/2 sits
    // on a left endpoint
    let half = tanh_sinh(|t| angular(PI / 2.0 - t), 0.0, PI / 4.0, 1e-12)
        + tanh_sinh(angular, 0.0, PI / 4.0, 1e-12);
    let log_chi2_mean = 2f64.ln() - EULER_GAMMA;
    log_chi2_mean + 2.0 * half / PI
}

/// Closed-form evaluation of the same expectation:
/// `G = log 2 − γ + 2 log((√μ₁ + √μ₂)/2)`.
pub fn g_factor_exact(u: &[f64], v: &[f64]) -> f64 {
    let (p, q, r) = frame_gram(u, v);
    let (m1, m2) = gram_eigenvalues(p, q, r);
    2f64.ln() - EULER_GAMMA + 2.0 * (0.5 * (m1.sqrt() + m2.sqrt())).ln()
}

/// `Γ'(1/2) = -√π (γ + 2 log 2)`.
pub const DIGAMMA_HALF_TIMES_GAMMA_HALF: f64 = -3.480_230_906_913_262;

/// Candidate closed form `Γ'(1/2) + Γ(1/2) log max{‖U + JV‖², ‖U − JV‖²}`,
/// where `J` is the quarter turn in the plane spanned by `U` and `V`, so that
/// `‖U ± JV‖² = 1 ± 2 sqrt(|U|²|V|² − ⟨U,V⟩²)`. Recorded for comparison
/// against [`g_factor_quadrature`]; it does not reproduce it.
pub fn g_factor_closed(u: &[f64], v: &[f64]) -> f64 {
    DIGAMMA_HALF_TIMES_GAMMA_HALF + PI.sqrt() * closed_form_max_term(u, v).ln()
}

/// `max{‖U + JV‖², ‖U − JV‖²}`.
pub fn closed_form_max_term(u: &[f64], v: &[f64]) -> f64 {
    let (p, q, r) = frame_gram(u, v);
    let area = (p * q - r * r).max(0.0).sqrt();
    p + q + 2.0 * area
}

/// Monte Carlo check of the log-modulus decomposition at one tube point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogModulusStats {
    pub zeta: TubePoint,
    pub sqrt_rho: f64,
    /// Monte Carlo `E log|f(ζ)|²`.
    pub mc_mean_log_sq: f64,
    pub std_error: f64,
    pub trials: u64,
    pub log_pi: f64,
    /// `log σ²` of the coefficient convention.
    pub log_variance: f64,
    /// `mc_mean_log_sq − log σ² − log Π`.
    pub difference: f64,
    pub g_factor: f64,
    pub g_closed: f64,
    /// `(|U|², |V|², ⟨U, V⟩)`.
    pub gram: (f64, f64, f64),
}

impl LogModulusStats {
    /// `|difference − G| ≤ k · SE`.
    pub fn agrees_within(&self, k: f64) -> bool {
        (self.difference - self.g_factor).abs() <= k * self.std_error
    }
}

pub const MIN_LOG_MODULUS_TRIALS: u64 = 1000;

pub fn expected_log_modulus(spec: &EnsembleSpec, zeta: &TubePoint, trials: u64) -> Result<LogModulusStats> {
    if trials < MIN_LOG_MODULUS_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "log-modulus estimates need at least {MIN_LOG_MODULUS_TRIALS} trials, got {trials}"
        )));
    }
    let ensemble = Ensemble::new(spec)?;
    let basis = ensemble.basis();
    let kernel = complexified_projector_for(basis, zeta)?;
    let phi = basis.eval_complex(zeta);
    let logs: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let c = ensemble.sample(t).coefficients;
            let f: Complex64 = phi.iter().zip(&c).map(|(p, c)| p * *c).sum();
            f.norm_sqr().ln()
        })
        .collect();
    let (mean, std_error, _) = crate::nodal::summarize(&logs);
    let (u, v) = unit_frame(basis, zeta);
    let log_variance = ensemble.variance().ln();
    Ok(LogModulusStats {
        zeta: *zeta,
        sqrt_rho: kernel.sqrt_rho,
        mc_mean_log_sq: mean,
        std_error,
        trials,
        log_pi: kernel.log_pi,
        log_variance,
        difference: mean - log_variance - kernel.log_pi,
        g_factor: g_factor_quadrature(&u, &v),
        g_closed: g_factor_closed(&u, &v),
        gram: frame_gram(&u, &v),
    })
}

/// Complex zeros of a circle wave in strip coordinates `ζ = θ + iy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootCloud {
    pub label: u32,
    pub trial: u64,
    /// `(θ, y)` with `θ ∈ [0, 2π)`.
    pub roots: Vec<(f64, f64)>,
    /// `|Q(w)| / Σ|q_k||w|^k` at each polished root.
    pub residuals: Vec<f64>,
}

impl RootCloud {
    pub fn count(&self) -> usize {
        self.roots.len()
    }

    pub fn fraction_within(&self, y_max: f64) -> f64 {
        self.roots.iter().filter(|r| r.1.abs() < y_max).count() as f64 / self.count() as f64
    }

    /// Largest distance from a root's mirror image `θ − iy` to the nearest root.
    pub fn conjugation_defect(&self) -> f64 {
        let dist = |a: &(f64, f64), b: &(f64, f64)| {
            let dt = (a.0 - b.0).rem_euclid(TAU);
            dt.min(TAU - dt).hypot(a.1 - b.1)
        };
        self.roots
            .iter()
            .map(|r| {
                let mirror = (r.0, -r.1);
                self.roots.iter().map(|s| dist(&mirror, s)).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
}

/// Relative bound on the polished residual `|Q(w)| / Σ|q_k||w|^k`.
pub const ROOT_RESIDUAL_BOUND: f64 = 1e-8;

/// Coefficients of `Q` with `f(ζ) = e^{-iNζ} Q(e^{iζ})`, lowest degree first.
pub fn circle_polynomial(sample: &WaveSample) -> Result<Vec<Complex64>> {
    let basis = sample.basis();
    if basis.model().kind() != ModelKind::Circle {
        return Err(Error::InvalidArgument("complex roots need a circle sample".into()));
    }
    let n_max = basis
        .entries()
        .iter()
        .map(|e| match e.label {
            EigenLabel::Circle { n, .. } => n as usize,
            _ => 0,
        })
        .max()
        .unwrap_or(0);
    let mut q = vec![Complex64::new(0.0, 0.0); 2 * n_max + 1];
    let scale = 0.5 / PI.sqrt();
    for (e, &c) in basis.entries().iter().zip(&sample.coefficients) {
        match e.label {
            EigenLabel::Constant => q[n_max] += c / (2.0 * PI).sqrt(),
            EigenLabel::Circle { n, trig } => {
                let n = n as usize;
                // cos nζ = (w^n + w^-n)/2, sin nζ = (w^n - w^-n)/(2i)
                let (hi, lo) = match trig {
                    Trig::Cos => (Complex64::new(c, 0.0), Complex64::new(c, 0.0)),
                    Trig::Sin => (Complex64::new(0.0, -c), Complex64::new(0.0, c)),
                };
                q[n_max + n] += hi * scale;
                q[n_max - n] += lo * scale;
            }
            _ => unreachable!(),
        }
    }
    Ok(q)
}

fn horner(q: &[Complex64], w: Complex64) -> (Complex64, Complex64, f64) {
    let mut value = Complex64::new(0.0, 0.0);
    let mut deriv = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    let r = w.norm();
    for c in q.iter().rev() {
        deriv = deriv * w + value;
        value = value * w + c;
        scale = scale * r + c.norm();
    }
    (value, deriv, scale)
}

/// One Newton step and the relative residual `|Q(w)| / Σ|q_k||w|^k`.
///
/// Outside the unit disk both are computed on the reversed polynomial at
/// `1/w`, which keeps `|w|^degree` from overflowing.
fn polish(q: &[Complex64], w: Complex64) -> (Complex64, f64) {
    if w.norm() <= 1.0 {
        let (value, deriv, _) = horner(q, w);
        let next = if deriv.norm() > 0.0 { w - value / deriv } else { w };
        let (value, _, scale) = horner(q, next);
        (next, value.norm() / scale)
    } else {
        let reversed: Vec<Complex64> = q.iter().rev().copied().collect();
        let v = w.inv();
        let (value, deriv, _) = horner(&reversed, v);
        let next = if deriv.norm() > 0.0 { v - value / deriv } else { v };
        let (value, _, scale) = horner(&reversed, next);
        (next.inv(), value.norm() / scale)
    }
}

/// Roots of a polynomial (lowest degree first) from companion-matrix
/// eigenvalues, each polished by one Newton step.
pub fn polynomial_roots(q: &[Complex64]) -> Result<Vec<Complex64>> {
    let norm = q.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let threshold = 1e-14 * norm;
    let mut lo = 0;
    let mut hi = q.len();
    while hi > lo && q[hi - 1].norm() <= threshold {
        hi -= 1;
    }
    while lo < hi && q[lo].norm() <= threshold {
        lo += 1;
    }
    if hi - lo != q.len() {
        log::warn!(
            "polynomial degree reduced from {} to {} by negligible end coefficients",
            q.len().saturating_sub(1),
            (hi - lo).saturating_sub(1)
        );
    }
    let core = &q[lo..hi];
    let degree = core.len().saturating_sub(1);
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = core[degree];
    let companion = DMatrix::from_fn(degree, degree, |i, j| {
        if i == 0 {
            -core[degree - 1 - j] / lead
        } else if i == j + 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let eigen = nalgebra::Schur::try_new(companion, 1e-15, 10_000 * degree)
        .and_then(|s| s.eigenvalues())
        .ok_or(Error::EigenFailure(degree))?;
    Ok(eigen.iter().map(|w| polish(core, *w).0).collect())
}

fn relative_residual(q: &[Complex64], w: Complex64) -> f64 {
    if w.norm() <= 1.0 {
        let (value, _, scale) = horner(q, w);
        value.norm() / scale
    } else {
        let reversed: Vec<Complex64> = q.iter().rev().copied().collect();
        let (value, _, scale) = horner(&reversed, w.inv());
        value.norm() / scale
    }
}

/// Complex zeros of the continuation of a circle sample.
pub fn circle_complex_roots(sample: &WaveSample, trial: u64) -> Result<RootCloud> {
    let q = circle_polynomial(sample)?;
    let roots = polynomial_roots(&q)?;
    let mut cloud = RootCloud {
        label: sample.basis().window().label(),
        trial,
        roots: Vec::with_capacity(roots.len()),
        residuals: Vec::with_capacity(roots.len()),
    };
    for w in roots {
        let residual = relative_residual(&q, w);
        if !(residual <= ROOT_RESIDUAL_BOUND) {
            return Err(Error::RootResidual {
                residual,
                bound: ROOT_RESIDUAL_BOUND,
            });
        }
        cloud.roots.push((w.arg().rem_euclid(TAU), -w.norm().ln()));
        cloud.residuals.push(residual);
    }
    cloud.roots.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(cloud)
}

/// Root clouds of `trials` independent samples.
pub fn circle_root_clouds(spec: &EnsembleSpec, trials: u64) -> Result<Vec<RootCloud>> {
    let ensemble = Ensemble::new(spec)?;
    (0..trials)
        .into_par_iter()
        .map(|t| circle_complex_roots(&ensemble.sample(t), t))
        .collect()
}

/// Smooth test function on the strip,
/// `ψ(θ, y) = (1 + a cos θ) · χ(|y|)`, with `χ = 1` on `[0, plateau]`,
/// decreasing smoothly to `0` at `support`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripBump {
    pub amplitude: f64,
    pub plateau: f64,
    pub support: f64,
}

impl Default for StripBump {
    fn default() -> Self {
        Self {
            amplitude: 0.5,
            plateau: 0.4,
            support: 0.5,
        }
    }
}

fn smooth_step(t: f64) -> f64 {
    // 0 for t ≤ 0, 1 for t ≥ 1, C^∞ in between
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let a = f(t);
    let b = f(1.0 - t);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

impl StripBump {
    pub fn profile(&self, y: f64) -> f64 {
        smooth_step((self.support - y.abs()) / (self.support - self.plateau))
    }

    pub fn eval(&self, theta: f64, y: f64) -> f64 {
        (1.0 + self.amplitude * theta.cos()) * self.profile(y)
    }

    /// `∫∫ |y| Δψ dθ dy`, by quadrature with a finite-difference Laplacian.
    pub fn abs_y_laplacian_integral(&self) -> f64 {
        let h = 1e-4;
        let chi_yy = |y: f64| (self.profile(y + h) - 2.0 * self.profile(y) + self.profile(y - h)) / (h * h);
        // θ-integral of (1 + a cos θ) is 2π; of its θ-second derivative, 0
        let theta_mass = TAU;
        let half = tanh_sinh(|y| y * chi_yy(y), self.plateau, self.support, 1e-10);
        2.0 * theta_mass * half
    }
}

/// Empirical and predicted pairing of the normalized zero current with a test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentPairing {
    pub label: u32,
    /// Trial mean of `(1/N) Σ_roots ψ(root)`.
    pub empirical: f64,
    pub std_error: f64,
    /// `∫∫ |y| Δψ`.
    pub integral: f64,
    /// `c* · integral`, when a constant is supplied.
    pub predicted: Option<f64>,
}

impl CurrentPairing {
    pub fn ratio(&self) -> Option<f64> {
        self.predicted.map(|p| self.empirical / p)
    }

    /// Constant `c*` that makes the prediction match this pairing.
    pub fn calibrated_constant(&self) -> f64 {
        self.empirical / self.integral
    }
}

/// Trial mean and standard error of `(1/N) Σ_roots ψ(root)`.
pub fn empirical_pairing<F: Fn(f64, f64) -> f64>(clouds: &[RootCloud], psi: F) -> (f64, f64) {
    let values: Vec<f64> = clouds
        .iter()
        .map(|c| c.roots.iter().map(|r| psi(r.0, r.1)).sum::<f64>() / c.label as f64)
        .collect();
    let (mean, se, _) = crate::nodal::summarize(&values);
    (mean, se)
}

pub fn current_pairing(clouds: &[RootCloud], psi: &StripBump, c_star: Option<f64>) -> CurrentPairing {
    let (empirical, std_error) = empirical_pairing(clouds, |t, y| psi.eval(t, y));
    let integral = psi.abs_y_laplacian_integral();
    CurrentPairing {
        label: clouds.first().map_or(0, |c| c.label),
        empirical,
        std_error,
        integral,
        predicted: c_star.map(|c| c * integral),
    }
}

/// Limiting constant of the zero current against `∫∫|y|Δψ`: the normalized
/// current `(1/N)[Z]` tends to `(1/2π) Δ|y|`, whose mass per unit `θ` is `1/π`.
pub const CURRENT_CONSTANT: f64 = 1.0 / TAU;

/// Grid in one complex torus slice `ζ = (x₁, s + i t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceGrid {
    /// Fixed real first coordinate.
    pub x1: f64,
    pub s_start: f64,
    pub s_count: usize,
    /// Imaginary parts run over `-t_max..=t_max`.
    pub t_max: f64,
    pub step: f64,
}

impl Default for SliceGrid {
    fn default() -> Self {
        Self {
            x1: 0.1234,
            s_start: 0.0,
            s_count: 9,
            t_max: 0.35,
            step: 0.01,
        }
    }
}

/// `(1/N) log Π` on a slice grid and its discrete Laplacian in `(s, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceCurrent {
    pub label: u32,
    pub grid: SliceGrid,
    /// Real parts, including one padding point at each end.
    pub s: Vec<f64>,
    /// Imaginary parts, including one padding point at each end.
    pub t: Vec<f64>,
    /// `u[j][i] = (1/N) log Π(x₁, s_i + i t_j)`.
    pub u: Vec<Vec<f64>>,
    /// Five-point Laplacian at interior nodes, indexed like `u` (zero on the padding).
    pub laplacian: Vec<Vec<f64>>,
}

impl SliceCurrent {
    /// Mass `Σ Δu · h` over `|t| ≤ half_width`, averaged over the interior `s` nodes.
    pub fn wall_mass(&self, half_width: f64) -> f64 {
        let h = self.grid.step;
        let cols = self.s.len() - 2;
        let mut total = 0.0;
        for j in 1..self.t.len() - 1 {
            if self.t[j].abs() <= half_width + 1e-12 {
                total += (1..=cols).map(|i| self.laplacian[j][i]).sum::<f64>() * h;
            }
        }
        total / cols as f64
    }

    /// Largest `|Δu|` over interior nodes with `lo ≤ |t| ≤ hi`.
    pub fn off_axis_max(&self, lo: f64, hi: f64) -> f64 {
        let mut m: f64 = 0.0;
        for j in 1..self.t.len() - 1 {
            let t = self.t[j].abs();
            if t >= lo - 1e-12 && t <= hi + 1e-12 {
                for i in 1..self.s.len() - 1 {
                    m = m.max(self.laplacian[j][i].abs());
                }
            }
        }
        m
    }

    /// Largest `|Δu(s, t) − Δu(s, −t)|`.
    pub fn symmetry_defect(&self) -> f64 {
        let rows = self.t.len();
        let mut m: f64 = 0.0;
        for j in 1..rows - 1 {
            for i in 1..self.s.len() - 1 {
                m = m.max((self.laplacian[j][i] - self.laplacian[rows - 1 - j][i]).abs());
            }
        }
        m
    }
}

/// Evaluates `(1/N) log Π_{Band(N)}` on a torus slice and its discrete Laplacian.
pub fn torus_slice_current(model: &ManifoldModel, label: u32, grid: &SliceGrid) -> Result<SliceCurrent> {
    if model.kind() != ModelKind::Torus2 {
        return Err(Error::InvalidArgument("slice currents are defined on the torus".into()));
    }
    if grid.t_max + grid.step > model.tube_radius() {
        return Err(Error::OutsideTube {
            sqrt_rho: grid.t_max + grid.step,
            tube_radius: model.tube_radius(),
        });
    }
    let basis = enumerate_basis(model, FrequencyWindow::Band(label))?;
    let h = grid.step;
    let half = (grid.t_max / h).round() as i64;
    let s: Vec<f64> = (-1..=grid.s_count as i64).map(|i| grid.s_start + i as f64 * h).collect();
    let t: Vec<f64> = (-(half + 1)..=half + 1).map(|j| j as f64 * h).collect();
    let n = label as f64;
    let u: Vec<Vec<f64>> = t
        .par_iter()
        .map(|&tj| {
            s.iter()
                .map(|&si| {
                    let zeta = TubePoint::new([grid.x1, si], [0.0, tj]);
                    complexified_projector_for(&basis, &zeta).map(|v| v.log_pi / n)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut laplacian = vec![vec![0.0; s.len()]; t.len()];
    for j in 1..t.len() - 1 {
        for i in 1..s.len() - 1 {
            laplacian[j][i] = (u[j][i + 1] + u[j][i - 1] + u[j + 1][i] + u[j - 1][i] - 4.0 * u[j][i]) / (h * h);
        }
    }
    Ok(SliceCurrent {
        label,
        grid: *grid,
        s,
        t,
        u,
        laplacian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_wave, Normalization};
    use crate::spectral::projector_jet;
    use crate::spectral::JetMethod;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn single(model: ManifoldModel, window: FrequencyWindow, label: EigenLabel, c: f64) -> WaveSample {
        let full = enumerate_basis(&model, window).unwrap();
        let entry = *full.entries().iter().find(|e| e.label == label).unwrap();
        let basis = EigenBasis::with_entries(&model, window, vec![entry]).unwrap();
        WaveSample::new(Arc::new(basis), vec![c]).unwrap()
    }

    #[test]
    fn complexified_circle_mode() {
        let n = 7;
        let s = single(ManifoldModel::circle(), FrequencyWindow::Band(n), EigenLabel::Circle { n, trig: Trig::Cos }, PI.sqrt());
        let y = 0.3;
        let v = complexify_wave(&s, &TubePoint::new([0.0, 0.0], [y, 0.0])).unwrap();
        assert_relative_eq!(v.log_abs, (n as f64 * y).cosh().ln(), max_relative = 1e-13);
        assert!(v.phase.abs() < 1e-14);
    }

    #[test]
    fn complexified_torus_mode() {
        let k = [2i64, -1];
        let w = FrequencyWindow::Band(14);
        let s = single(ManifoldModel::torus(), w, EigenLabel::Torus { k, trig: Trig::Cos }, 1.0);
        let zeta = TubePoint::new([0.31, 0.77], [0.05, -0.12]);
        let v = complexify_wave(&s, &zeta).unwrap();
        let a = TAU * (k[0] as f64 * zeta.x[0] + k[1] as f64 * zeta.x[1]);
        let b = TAU * (k[0] as f64 * zeta.y[0] + k[1] as f64 * zeta.y[1]);
        let expect = 2.0 * (a.cos().powi(2) * b.cosh().powi(2) + a.sin().powi(2) * b.sinh().powi(2));
        assert_relative_eq!(2.0 * v.log_abs, expect.ln(), max_relative = 1e-12);
    }

    #[test]
    fn continuation_restricts_to_real_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (model, window) in [
            (ManifoldModel::circle(), FrequencyWindow::Cutoff(9.0)),
            (ManifoldModel::torus(), FrequencyWindow::Band(25)),
            (ManifoldModel::sphere(), FrequencyWindow::Band(11)),
        ] {
            let spec = EnsembleSpec { model, window, normalization: Normalization::UnitEnergy, master_seed: 8 };
            for t in 0..34 {
                let s = sample_wave(&spec, t).unwrap();
                let x = [rng.random_range(0.1..3.0), rng.random_range(0.0..6.0)];
                let real = s.eval(&x).0;
                let cplx = complexify_wave(&s, &TubePoint::real(x)).unwrap().to_complex();
                assert!((cplx.re - real).abs() < 1e-12 * (1.0 + real.abs()) && cplx.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn real_point_kernel_matches_jet() {
        for (model, window, x) in [
            (ManifoldModel::sphere(), FrequencyWindow::Band(9), [0.8, 2.0]),
            (ManifoldModel::torus(), FrequencyWindow::Band(50), [0.2, 0.9]),
            (ManifoldModel::circle(), FrequencyWindow::Cutoff(12.0), [1.0, 0.0]),
        ] {
            let v = complexified_projector(&model, window, &TubePoint::real(x)).unwrap();
            let a = projector_jet(&model, window, &x, JetMethod::DirectSum).unwrap().a;
            assert_relative_eq!(v.log_pi, a.ln(), max_relative = 1e-10, epsilon = 1e-12);
            assert!(v.sandwich_holds());
        }
    }

    #[test]
    fn sphere_closed_form_kernel() {
        let sphere = ManifoldModel::sphere();
        for (n, s) in [(30u32, 0.1), (5, 0.3), (100, 0.2)] {
            let zeta = TubePoint::new([1.1, 0.4], [s, 0.0]);
            let v = complexified_projector(&sphere, FrequencyWindow::Band(n), &zeta).unwrap();
            assert_relative_eq!(v.sqrt_rho, s, max_relative = 1e-12);
            assert_relative_eq!(v.log_pi, v.closed_form_log_pi.unwrap(), max_relative = 1e-9);
            assert!(v.sandwich_holds());
        }
        // a generic direction with both angles complexified
        let zeta = TubePoint::new([0.7, 2.0], [0.05, 0.08]);
        let v = complexified_projector(&sphere, FrequencyWindow::Band(20), &zeta).unwrap();
        assert_relative_eq!(v.log_pi, v.closed_form_log_pi.unwrap(), max_relative = 1e-9);
    }

    #[test]
    fn torus_kernel_max_term_bounds() {
        let torus = ManifoldModel::torus();
        let n = 100;
        let zeta = TubePoint::new([0.3, 0.6], [0.12, 0.16]);
        let v = complexified_projector(&torus, FrequencyWindow::Band(n), &zeta).unwrap();
        let r = v.sqrt_rho;
        assert!(v.log_pi >= v.log_damped + 2.0 * n as f64 * r - 1e-9);
        assert!(v.log_pi <= v.log_damped + 2.0 * (n + 1) as f64 * r + 1e-9);
        // Π = Σ_{half lattice} 2 cosh(4π k·y), independent of x
        let basis = enumerate_basis(&torus, FrequencyWindow::Band(n)).unwrap();
        let mut pi = 0.0;
        for e in basis.entries() {
            if let EigenLabel::Torus { k, trig: Trig::Cos } = e.label {
                let ky = k[0] as f64 * zeta.y[0] + k[1] as f64 * zeta.y[1];
                pi += 2.0 * (2.0 * TAU * ky).cosh();
            }
        }
        assert_relative_eq!(v.log_pi, pi.ln(), max_relative = 1e-12);
    }

    #[test]
    fn overflow_guard_trips() {
        let circle = ManifoldModel::new(ModelKind::Circle, 2.0).unwrap();
        let r = complexified_projector(&circle, FrequencyWindow::Band(400), &TubePoint::new([0.0, 0.0], [1.0, 0.0]));
        assert!(matches!(r, Err(Error::Overflow(_))));
    }

    #[test]
    fn growth_rate_examples() {
        let torus = ManifoldModel::torus();
        let labels: Vec<u32> = (40..=200).collect();
        let real = log_growth_rate(&torus, &labels, &TubePoint::real([0.2, 0.3])).unwrap();
        assert!(real.slope.abs() < 0.02, "{}", real.slope);

        let sphere = ManifoldModel::sphere();
        let zeta = TubePoint::new([0.9, 0.0], [0.15, 0.0]);
        let fit = log_growth_rate(&sphere, &[40, 60, 80, 100, 140, 200], &zeta).unwrap();
        assert!((fit.slope - 0.3).abs() < 0.01, "{}", fit.slope);
        assert!(fit.sandwich_ok);
        assert!(fit.slope <= 2.0 * fit.sqrt_rho + 2.0 / 200.0);
    }

    #[test]
    fn g_factor_examples() {
        let s = 0.5f64.sqrt();
        let balanced = g_factor_quadrature(&[s, 0.0], &[0.0, s]);
        assert!((balanced + EULER_GAMMA).abs() < 1e-10, "{balanced}");
        let real = g_factor_quadrature(&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]);
        assert!((real + EULER_GAMMA + 2f64.ln()).abs() < 1e-8, "{real}");
        // closed form at V = 0 gives Γ'(1/2), not the quadrature value
        assert_relative_eq!(g_factor_closed(&[1.0, 0.0], &[0.0, 0.0]), DIGAMMA_HALF_TIMES_GAMMA_HALF, max_relative = 1e-14);
        assert_relative_eq!(DIGAMMA_HALF_TIMES_GAMMA_HALF, -PI.sqrt() * (EULER_GAMMA + 2.0 * 2f64.ln()), max_relative = 1e-14);
    }

    #[test]
    fn g_factor_monte_carlo_oracle() {
        let u = [0.8, 0.1, -0.2];
        let v = [0.3, 0.35, 0.2];
        let norm = (frame_gram(&u, &v).0 + frame_gram(&u, &v).1).sqrt();
        let (u, v): (Vec<f64>, Vec<f64>) = u.iter().zip(&v).map(|(a, b)| (a / norm, b / norm)).unzip();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let draws = 400_000;
        let vals: Vec<f64> = (0..draws)
            .map(|_| {
                let a: Vec<f64> = (0..3).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
                let x: f64 = a.iter().zip(&u).map(|(a, u)| a * u).sum();
                let y: f64 = a.iter().zip(&v).map(|(a, v)| a * v).sum();
                (x * x + y * y).ln()
            })
            .collect();
        let (mean, se, _) = crate::nodal::summarize(&vals);
        let g = g_factor_quadrature(&u, &v);
        assert!((mean - g).abs() < 4.0 * se, "{mean} vs {g}");
        assert!((g - g_factor_exact(&u, &v)).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn g_factor_quadrature_matches_exact(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0) {
            let norm = (a * a + b * b + c * c + d * d).sqrt();
            prop_assume!(norm > 1e-3);
            let u = [a / norm, b / norm];
            let v = [c / norm, d / norm];
            let g = g_factor_quadrature(&u, &v);
            prop_assert!((g - g_factor_exact(&u, &v)).abs() < 1e-6);
            prop_assert!(g.abs() <= 3.0);
            // rotation invariance
            let (s, co) = (0.7f64).sin_cos();
            let rot = |x: [f64; 2]| [co * x[0] - s * x[1], s * x[0] + co * x[1]];
            prop_assert!((g_factor_quadrature(&rot(u), &rot(v)) - g).abs() < 1e-8);
            let m = closed_form_max_term(&u, &v);
            prop_assert!((1.0 - 1e-12..=3.0).contains(&m));
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            prop_assert!((g_factor_closed(&u, &neg) - g_factor_closed(&u, &v)).abs() < 1e-14);
        }
    }

    #[test]
    fn log_modulus_at_real_point() {
        let spec = EnsembleSpec {
            model: ManifoldModel::sphere(),
            window: FrequencyWindow::Band(6),
            normalization: Normalization::PaperDensity,
            master_seed: 12,
        };
        let stats = expected_log_modulus(&spec, &TubePoint::real([1.0, 1.0]), 20_000).unwrap();
        assert!((stats.gram.1).abs() < 1e-24);
        assert!((stats.g_factor + EULER_GAMMA + 2f64.ln()).abs() < 1e-8);
        assert!(stats.agrees_within(3.0), "{stats:?}");
        assert!(expected_log_modulus(&spec, &TubePoint::real([1.0, 1.0]), 999).is_err());
    }

    #[test]
    fn log_modulus_normalization_shift() {
        let mut spec = EnsembleSpec {
            model: ManifoldModel::torus(),
            window: FrequencyWindow::Band(50),
            normalization: Normalization::PaperDensity,
            master_seed: 3,
        };
        let zeta = TubePoint::new([0.1, 0.2], [0.05, 0.0]);
        let halved = expected_log_modulus(&spec, &zeta, 2000).unwrap();
        spec.normalization = Normalization::UnitEnergy;
        let unit = expected_log_modulus(&spec, &zeta, 2000).unwrap();
        assert_relative_eq!(unit.mc_mean_log_sq - halved.mc_mean_log_sq, 2f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(unit.difference, halved.difference, max_relative = 1e-12);
    }

    #[test]
    fn single_pair_circle_roots_are_real() {
        for n in [3u32, 10, 25] {
            let basis = Arc::new(enumerate_basis(&ManifoldModel::circle(), FrequencyWindow::Band(n)).unwrap());
            let s = WaveSample::new(basis, vec![0.7, -1.3]).unwrap();
            let cloud = circle_complex_roots(&s, 0).unwrap();
            assert_eq!(cloud.count(), 2 * n as usize);
            for r in &cloud.roots {
                assert!(r.1.abs() <= 1e-8, "{r:?}");
            }
        }
    }

    #[test]
    fn perturbed_cosine_roots() {
        // f = cos ζ + ε: w² + 2ε w + 1 = 0 with w = e^{iζ}
        let eps = 0.05;
        let basis = Arc::new(enumerate_basis(&ManifoldModel::circle(), FrequencyWindow::Cutoff(1.0)).unwrap());
        let labels: Vec<_> = basis.entries().iter().map(|e| e.label).collect();
        let coeffs: Vec<f64> = labels
            .iter()
            .map(|l| match l {
                EigenLabel::Constant => eps * (2.0 * PI).sqrt(),
                EigenLabel::Circle { trig: Trig::Cos, .. } => PI.sqrt(),
                _ => 0.0,
            })
            .collect();
        let cloud = circle_complex_roots(&WaveSample::new(basis, coeffs).unwrap(), 0).unwrap();
        let disc = Complex64::new(eps * eps - 1.0, 0.0).sqrt();
        let mut expect: Vec<(f64, f64)> = [-eps + disc, -eps - disc]
            .iter()
            .map(|w| (w.arg().rem_euclid(TAU), -w.norm().ln()))
            .collect();
        expect.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (r, e) in cloud.roots.iter().zip(&expect) {
            assert!((r.0 - e.0).abs() < 1e-12 && (r.1 - e.1).abs() < 1e-12);
        }
        assert!((expect[0].0 - PI / 2.0 - eps).abs() < 1e-3);
    }

    #[test]
    fn generic_cloud_properties() {
        let spec = EnsembleSpec {
            model: ManifoldModel::circle(),
            window: FrequencyWindow::Cutoff(20.0),
            normalization: Normalization::PaperDensity,
            master_seed: 99,
        };
        let clouds = circle_root_clouds(&spec, 40).unwrap();
        let mut inside = 0.0;
        for c in &clouds {
            assert_eq!(c.count(), 40);
            assert!(c.conjugation_defect() < 1e-8);
            inside += c.fraction_within(0.25) / clouds.len() as f64;
        }
        assert!(inside >= 0.88, "{inside}");
        // odd test function pairs to zero by symmetry
        let (odd, _) = empirical_pairing(&clouds, |_, y| y.clamp(-0.5, 0.5));
        assert!(odd.abs() < 1e-8);
        // ψ ≡ 1 near the axis picks up the (1/N)·2N mass minus escaped roots
        let (all, _) = empirical_pairing(&clouds, |_, _| 1.0);
        assert_relative_eq!(all, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn bump_laplacian_integral_identity() {
        // ∫∫|y|Δψ = 2 ∫ ψ(θ, 0) dθ
        let bump = StripBump::default();
        assert_relative_eq!(bump.abs_y_laplacian_integral(), 2.0 * TAU, max_relative = 1e-6);
        assert_eq!(bump.eval(1.0, 0.6), 0.0);
        assert_eq!(bump.profile(0.3), 1.0);
    }

    #[test]
    fn slice_current_of_exact_wall() {
        let torus = ManifoldModel::torus();
        let grid = SliceGrid::default();
        let cur = torus_slice_current(&torus, 100, &grid).unwrap();
        let mass = cur.wall_mass(0.05);
        assert!((mass - 4.0).abs() < 0.4, "{mass}");
        assert!(cur.symmetry_defect() < 1e-8);
    }
}
