//! Expected zero density from a kernel jet.
//!
//! For a centered Gaussian field with `Var f(x) = A`, `Cov(f, ∇f) = B` and
//! `Cov(∇f) = C`, the expected `(m-1)`-measure of `{f = 0}` per unit volume is
//!
//! ```text
//! K₁ = p_{f(x)}(0) · E[‖∇f(x)‖ | f(x) = 0] = (2πA)^{-1/2} · E‖N(0, Λ)‖,
//! Λ = C - B Bᵀ / A.
//! ```

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{ChartPoint, ManifoldModel, Mesh, ModelKind};
use crate::numerics::{elliptic_e, tanh_sinh};
use crate::spectral::{enumerate_basis, jet_direct, FrequencyWindow, KernelJet};

/// How `E‖N(0, Λ)‖` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    ClosedForm1D,
    ClosedForm2D,
    Quadrature,
    MonteCarlo,
}

/// Number of draws used by [`NormMethod::MonteCarlo`].
pub const MONTE_CARLO_DRAWS: usize = 1_000_000;
const MONTE_CARLO_SEED: u64 = 0x6b61_6372_6963_65;

#[derive(Debug, Clone, PartialEq)]
pub struct KacRiceResult {
    pub lambda: DMatrix<f64>,
    /// Expected zero measure per unit volume.
    pub density: f64,
    pub method: NormMethod,
}

/// Conditional gradient covariance `Λ = C - B Bᵀ / A`, symmetrized.
///
/// Eigenvalues below `-1e-12 · max(1, tr C)` are rejected; smaller negative
/// parts are rounding and get clamped to zero.
pub fn lambda_matrix(jet: &KernelJet) -> Result<DMatrix<f64>> {
    if !(jet.a > 0.0) {
        return Err(Error::DegenerateField(jet.a));
    }
    let m = jet.dim;
    let raw = DMatrix::from_fn(m, m, |i, j| {
        let cij = 0.5 * (jet.c[i][j] + jet.c[j][i]);
        cij - jet.b[i] * jet.b[j] / jet.a
    });
    let tol = 1e-12 * jet.trace_c().abs().max(1.0);
    match m {
        1 => {
            let v = raw[(0, 0)];
            if v < -tol {
                return Err(Error::NotPositiveSemidefinite(v));
            }
            Ok(DMatrix::from_element(1, 1, v.max(0.0)))
        }
        _ => {
            let (vals, vecs) = sym2_eigen(&raw);
            if vals[1] < -tol {
                return Err(Error::NotPositiveSemidefinite(vals[1]));
            }
            if vals[1] >= 0.0 {
                return Ok(raw);
            }
            // drop the rounding-level negative direction
            let v = vecs[0];
            let l = vals[0].max(0.0);
            Ok(DMatrix::from_fn(2, 2, |i, j| l * v[i] * v[j]))
        }
    }
}

/// Eigenvalues (descending) and unit eigenvectors of a symmetric 2×2 matrix.
fn sym2_eigen(m: &DMatrix<f64>) -> ([f64; 2], [[f64; 2]; 2]) {
    let (p, q, r) = (m[(0, 0)], m[(1, 1)], 0.5 * (m[(0, 1)] + m[(1, 0)]));
    let mean = 0.5 * (p + q);
    let half_gap = (0.5 * (p - q)).hypot(r);
    let vals = [mean + half_gap, mean - half_gap];
    let angle = 0.5 * (2.0 * r).atan2(p - q);
    let (s, c) = angle.sin_cos();
    (vals, [[c, s], [-s, c]])
}

/// `E‖Z‖` for `Z ~ N(0, Λ)`.
pub fn gaussian_norm_mean(lambda: &DMatrix<f64>, method: NormMethod) -> Result<f64> {
    let m = lambda.nrows();
    if m == 1 {
        let v = lambda[(0, 0)].max(0.0);
        return Ok(match method {
            NormMethod::MonteCarlo => norm_mean_monte_carlo(&[v, 0.0], MONTE_CARLO_DRAWS, MONTE_CARLO_SEED).0,
            // half-normal mean
            _ => (2.0 * v / PI).sqrt(),
        });
    }
    let (vals, _) = sym2_eigen(lambda);
    let a = vals[0].max(0.0);
    let b = vals[1].max(0.0);
    Ok(match method {
        NormMethod::ClosedForm1D => {
            return Err(Error::InvalidArgument(
                "one-dimensional closed form requested for a 2×2 covariance".into(),
            ))
        }
        NormMethod::ClosedForm2D => {
            if a == 0.0 {
                0.0
            } else {
                (2.0 * a / PI).sqrt() * elliptic_e(1.0 - b / a)
            }
        }
        NormMethod::Quadrature => {
            // E‖Z‖ = E[R] · (1/2π)∫ sqrt(a cos²t + b sin²t) dt with R ~ chi(2)
            let quarter = tanh_sinh(
                |t: f64| {
                    let (s, c) = t.sin_cos();
                    (a * c * c + b * s * s).sqrt()
                },
                0.0,
                FRAC_PI_2,
                1e-13 * a.sqrt().max(1e-300),
            );
            (PI / 2.0).sqrt() * 4.0 * quarter / (2.0 * PI)
        }
        NormMethod::MonteCarlo => norm_mean_monte_carlo(&[a, b], MONTE_CARLO_DRAWS, MONTE_CARLO_SEED).0,
    })
}

/// Monte Carlo mean and standard error of `sqrt(a X² + b Y²)`.
pub fn norm_mean_monte_carlo(eigenvalues: &[f64; 2], draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sa, sb) = (eigenvalues[0].sqrt(), eigenvalues[1].sqrt());
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        let r = (sa * x).hypot(sb * y);
        sum += r;
        sum_sq += r * r;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean) * n / (n - 1.0);
    (mean, (var.max(0.0) / n).sqrt())
}

/// Kac-Rice density with the closed form matching the jet's dimension.
pub fn density(jet: &KernelJet) -> Result<KacRiceResult> {
    let method = if jet.dim == 1 {
        NormMethod::ClosedForm1D
    } else {
        NormMethod::ClosedForm2D
    };
    density_with(jet, method)
}

pub fn density_with(jet: &KernelJet, method: NormMethod) -> Result<KacRiceResult> {
    let lambda = lambda_matrix(jet)?;
    let norm = gaussian_norm_mean(&lambda, method)?;
    Ok(KacRiceResult {
        density: norm / (2.0 * PI * jet.a).sqrt(),
        lambda,
        method,
    })
}

/// Reference point used for the (point independent) density on each model.
pub fn reference_point(kind: ModelKind) -> ChartPoint {
    match kind {
        ModelKind::Circle => [0.0, 0.0],
        ModelKind::Torus2 => [0.0, 0.0],
        ModelKind::Sphere2 => [FRAC_PI_2, 0.0],
    }
}

/// Kac-Rice density of a window, from the direct jet at the reference point.
pub fn window_density(model: &ManifoldModel, window: FrequencyWindow) -> Result<KacRiceResult> {
    let basis = enumerate_basis(model, window)?;
    density(&jet_direct(&basis, &reference_point(model.kind())))
}

/// `∫ K₁ ψ dV` by cell-center quadrature on `mesh`.
///
/// All three models are homogeneous and every window is invariant under the
/// isometry group, so `K₁` is constant and is evaluated once.
pub fn expected_measure<F: Fn(&ChartPoint) -> f64>(
    model: &ManifoldModel,
    window: FrequencyWindow,
    mesh: &Mesh,
    psi: F,
) -> Result<f64> {
    let k1 = window_density(model, window)?.density;
    Ok(k1 * integrate_on_mesh(mesh, psi))
}

/// `∫ ψ dV` by cell-center quadrature.
pub fn integrate_on_mesh<F: Fn(&ChartPoint) -> f64>(mesh: &Mesh, psi: F) -> f64 {
    mesh.cells().iter().map(|c| psi(&c.center) * c.area).sum()
}
