//! Gaussian random waves `f = Σ c_j φ_j` with i.i.d. centered coefficients.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{ChartPoint, ManifoldModel, Mesh, TubePoint};
use crate::spectral::{enumerate_basis, field_on_mesh, EigenBasis, FrequencyWindow};

/// Coefficient variance convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `σ² = 1/(2d)`, the explicit Gaussian density `(d/π)^{d/2} e^{-d|c|²}`.
    #[default]
    PaperDensity,
    /// `σ² = 1/d`, so that `E⟨f, f⟩ = 1`.
    UnitEnergy,
}

impl Normalization {
    pub fn variance(&self, dim: usize) -> f64 {
        match self {
            Normalization::PaperDensity => 1.0 / (2.0 * dim as f64),
            Normalization::UnitEnergy => 1.0 / dim as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub model: ManifoldModel,
    pub window: FrequencyWindow,
    pub normalization: Normalization,
    pub master_seed: u64,
}

/// An ensemble with its enumerated basis, ready to draw samples.
///
/// Trial `i` draws from the ChaCha stream `i` of the master seed, so a sample
/// depends only on `(master_seed, trial_index)` and never on the order or
/// thread in which trials run.
#[derive(Debug, Clone)]
pub struct Ensemble {
    basis: Arc<EigenBasis>,
    normalization: Normalization,
    master_seed: u64,
}

impl Ensemble {
    pub fn new(spec: &EnsembleSpec) -> Result<Self> {
        let basis = enumerate_basis(&spec.model, spec.window)?;
        Ok(Self::from_basis(basis, spec.normalization, spec.master_seed))
    }

    pub fn from_basis(basis: EigenBasis, normalization: Normalization, master_seed: u64) -> Self {
        Self {
            basis: Arc::new(basis),
            normalization,
            master_seed,
        }
    }

    pub fn basis(&self) -> &Arc<EigenBasis> {
        &self.basis
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Per-coefficient variance `σ²`.
    pub fn variance(&self) -> f64 {
        self.normalization.variance(self.basis.dim())
    }

    pub fn sample(&self, trial_index: u64) -> WaveSample {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(trial_index);
        let sigma = self.variance().sqrt();
        let coefficients = (0..self.basis.dim())
            .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        WaveSample {
            coefficients,
            basis: Arc::clone(&self.basis),
        }
    }
}

/// Draws trial `trial_index` of the ensemble described by `spec`.
pub fn sample_wave(spec: &EnsembleSpec, trial_index: u64) -> Result<WaveSample> {
    Ok(Ensemble::new(spec)?.sample(trial_index))
}

/// A random wave: coefficients over a shared basis.
#[derive(Debug, Clone)]
pub struct WaveSample {
    pub coefficients: Vec<f64>,
    basis: Arc<EigenBasis>,
}

impl WaveSample {
    pub fn new(basis: Arc<EigenBasis>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != basis.dim() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for a basis of dimension {}",
                coefficients.len(),
                basis.dim()
            )));
        }
        Ok(Self { coefficients, basis })
    }

    pub fn basis(&self) -> &Arc<EigenBasis> {
        &self.basis
    }

    /// The same wave multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|c| c * t).collect(),
            basis: Arc::clone(&self.basis),
        }
    }

    /// Value and orthonormal-frame gradient at `x`.
    pub fn eval(&self, x: &ChartPoint) -> (f64, [f64; 2]) {
        let vals = self.basis.eval(x);
        let mut value = 0.0;
        let mut grad = [0.0; 2];
        for ((c, v), g) in self.coefficients.iter().zip(&vals.values).zip(&vals.gradients) {
            value += c * v;
            grad[0] += c * g[0];
            grad[1] += c * g[1];
        }
        (value, grad)
    }

    /// Value of the analytic continuation at `ζ`.
    pub fn eval_complex(&self, zeta: &TubePoint) -> Complex64 {
        self.basis
            .eval_complex(zeta)
            .iter()
            .zip(&self.coefficients)
            .map(|(phi, c)| phi * *c)
            .sum()
    }

    /// Values at every vertex of `mesh`.
    pub fn on_mesh(&self, mesh: &Mesh) -> Vec<f64> {
        field_on_mesh(&self.basis, &self.coefficients, mesh)
    }
}

/// Evaluates `sample` at `x`: value and gradient.
pub fn eval_wave(sample: &WaveSample, x: &ChartPoint) -> (f64, [f64; 2]) {
    sample.eval(x)
}

/// Monte Carlo estimate of `E[f(x) f(y)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

pub const MIN_COVARIANCE_TRIALS: u64 = 1000;

pub fn empirical_covariance(
    ensemble: &Ensemble,
    x: &ChartPoint,
    y: &ChartPoint,
    trials: u64,
) -> Result<CovarianceEstimate> {
    if trials < MIN_COVARIANCE_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "empirical covariance needs at least {MIN_COVARIANCE_TRIALS} trials, got {trials}"
        )));
    }
    let vx = ensemble.basis().eval(x).values;
    let vy = ensemble.basis().eval(y).values;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for t in 0..trials {
        let s = ensemble.sample(t);
        let fx: f64 = s.coefficients.iter().zip(&vx).map(|(c, v)| c * v).sum();
        let fy: f64 = s.coefficients.iter().zip(&vy).map(|(c, v)| c * v).sum();
        let p = fx * fy;
        sum += p;
        sum_sq += p * p;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean) * n / (n - 1.0);
    Ok(CovarianceEstimate {
        mean,
        std_error: (var.max(0.0) / n).sqrt(),
        trials,
    })
}
