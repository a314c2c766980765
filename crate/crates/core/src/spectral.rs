//! Explicit orthonormal eigenbases and spectral projector kernels.
//!
//! Eigenfunctions are the trigonometric modes on the circle and torus and the
//! real spherical harmonics on the sphere. Gradients are reported in the
//! metric-orthonormal frame (`∂_θ`, `(1/sin θ) ∂_φ` on the sphere), so the
//! covariance blocks can be compared directly with `(λ²/m) A · I`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{ChartPoint, Mesh, ManifoldModel, ModelKind, TubePoint};
use crate::numerics::special::{legendre_p, legendre_row, normalized_legendre_degree};

/// Frequency window of an ensemble.
///
/// `Band(N)` is `[N, N+1]` on the torus. On the circle and the sphere, whose
/// spectra come in clusters, it is the single cluster of degree `N`
/// (frequency `N` and `sqrt(N(N+1))` respectively). `Cutoff(λ)` collects every
/// frequency `≤ λ`, the constant included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyWindow {
    Band(u32),
    Cutoff(f64),
}

impl FrequencyWindow {
    /// The integer label `N` used for the resolution rule and growth rates.
    pub fn label(&self) -> u32 {
        match *self {
            FrequencyWindow::Band(n) => n,
            FrequencyWindow::Cutoff(l) => l.max(0.0).ceil() as u32,
        }
    }
}

impl fmt::Display for FrequencyWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrequencyWindow::Band(n) => write!(f, "band({n})"),
            FrequencyWindow::Cutoff(l) => write!(f, "cutoff({l})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Trig {
    Cos,
    Sin,
}

/// Model-specific index of an eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EigenLabel {
    /// `1 / sqrt(Vol)`.
    Constant,
    /// `cos(nθ)/√π` or `sin(nθ)/√π`.
    Circle { n: u32, trig: Trig },
    /// `√2 cos(2π k·x)` or `√2 sin(2π k·x)`, `k` in the half-lattice.
    Torus { k: [i64; 2], trig: Trig },
    /// Real spherical harmonic of the given degree and order `m ≥ 0`
    /// (`order = 0` carries `Trig::Cos`).
    Sphere { degree: u32, order: u32, trig: Trig },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenEntry {
    pub frequency: f64,
    pub label: EigenLabel,
}

/// Orthonormal eigenbasis of a frequency window.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    model: ManifoldModel,
    window: FrequencyWindow,
    entries: Vec<EigenEntry>,
}

/// Values and orthonormal-frame gradients of every basis function at a point.
#[derive(Debug, Clone)]
pub struct BasisValues {
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
}

impl EigenBasis {
    /// A basis made of an explicit subset of a window's eigenfunctions, such
    /// as a single lattice pair on the torus (every torus band holds at least
    /// two pairs because of the lattice's 4-fold symmetry).
    pub fn with_entries(
        model: &ManifoldModel,
        window: FrequencyWindow,
        entries: Vec<EigenEntry>,
    ) -> Result<Self> {
        let full = enumerate_basis(model, window)?;
        if entries.is_empty() {
            return Err(Error::EmptyWindow {
                model: model.kind().to_string(),
                window: window.to_string(),
            });
        }
        if let Some(bad) = entries.iter().find(|e| !full.entries.contains(e)) {
            return Err(Error::InvalidArgument(format!(
                "{:?} is not an eigenfunction of {} on {}",
                bad.label,
                window,
                model.kind()
            )));
        }
        Ok(Self {
            model: *model,
            window,
            entries,
        })
    }

    pub fn model(&self) -> &ManifoldModel {
        &self.model
    }

    pub fn window(&self) -> FrequencyWindow {
        self.window
    }

    pub fn entries(&self) -> &[EigenEntry] {
        &self.entries
    }

    /// Dimension `d` of the window's eigenspace.
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Smallest and largest frequency present.
    pub fn frequency_range(&self) -> (f64, f64) {
        self.entries.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), e| {
            (lo.min(e.frequency), hi.max(e.frequency))
        })
    }

    /// Degrees present in a sphere basis, ascending.
    fn sphere_degrees(&self) -> Vec<u32> {
        let mut degrees: Vec<u32> = self
            .entries
            .iter()
            .map(|e| match e.label {
                EigenLabel::Sphere { degree, .. } => degree,
                _ => 0,
            })
            .collect();
        degrees.dedup();
        degrees
    }

    /// Evaluates every basis function and its gradient at `x`.
    pub fn eval(&self, x: &ChartPoint) -> BasisValues {
        let d = self.dim();
        let mut values = Vec::with_capacity(d);
        let mut gradients = Vec::with_capacity(d);
        match self.model.kind() {
            ModelKind::Circle => {
                let theta = x[0];
                let norm = 1.0 / PI.sqrt();
                for e in &self.entries {
                    let (v, g) = match e.label {
                        EigenLabel::Constant => (1.0 / (2.0 * PI).sqrt(), 0.0),
                        EigenLabel::Circle { n, trig } => {
                            let nf = n as f64;
                            let (s, c) = (nf * theta).sin_cos();
                            match trig {
                                Trig::Cos => (norm * c, -norm * nf * s),
                                Trig::Sin => (norm * s, norm * nf * c),
                            }
                        }
                        _ => unreachable!("non-circle label in circle basis"),
                    };
                    values.push(v);
                    gradients.push([g, 0.0]);
                }
            }
            ModelKind::Torus2 => {
                for e in &self.entries {
                    match e.label {
                        EigenLabel::Constant => {
                            values.push(1.0);
                            gradients.push([0.0, 0.0]);
                        }
                        EigenLabel::Torus { k, trig } => {
                            let w = [2.0 * PI * k[0] as f64, 2.0 * PI * k[1] as f64];
                            let (s, c) = (w[0] * x[0] + w[1] * x[1]).sin_cos();
                            let (v, dphase) = match trig {
                                Trig::Cos => (SQRT_2 * c, -SQRT_2 * s),
                                Trig::Sin => (SQRT_2 * s, SQRT_2 * c),
                            };
                            values.push(v);
                            gradients.push([dphase * w[0], dphase * w[1]]);
                        }
                        _ => unreachable!("non-torus label in torus basis"),
                    }
                }
            }
            ModelKind::Sphere2 => {
                let (theta, phi) = (x[0], x[1]);
                let rows: Vec<(u32, _)> = self
                    .sphere_degrees()
                    .into_iter()
                    .map(|deg| (deg, legendre_row(deg as usize, theta)))
                    .collect();
                let row_of = |deg: u32| &rows.iter().find(|(d, _)| *d == deg).unwrap().1;
                for e in &self.entries {
                    let (degree, order, trig) = match e.label {
                        EigenLabel::Constant => (0, 0, Trig::Cos),
                        EigenLabel::Sphere { degree, order, trig } => (degree, order, trig),
                        _ => unreachable!("non-sphere label in sphere basis"),
                    };
                    let row = row_of(degree);
                    let m = order as usize;
                    if m == 0 {
                        values.push(row.value[0]);
                        gradients.push([row.d_theta[0], 0.0]);
                        continue;
                    }
                    let mf = m as f64;
                    let (s, c) = (mf * phi).sin_cos();
                    let (v, g) = match trig {
                        Trig::Cos => (
                            SQRT_2 * row.value[m] * c,
                            [SQRT_2 * row.d_theta[m] * c, -SQRT_2 * mf * row.over_sin[m] * s],
                        ),
                        Trig::Sin => (
                            SQRT_2 * row.value[m] * s,
                            [SQRT_2 * row.d_theta[m] * s, SQRT_2 * mf * row.over_sin[m] * c],
                        ),
                    };
                    values.push(v);
                    gradients.push(g);
                }
            }
        }
        BasisValues { values, gradients }
    }

    /// Analytic continuation of every basis function to the tube point `ζ`.
    pub fn eval_complex(&self, zeta: &TubePoint) -> Vec<Complex64> {
        match self.model.kind() {
            ModelKind::Circle => {
                let z = Complex64::new(zeta.x[0], zeta.y[0]);
                let norm = 1.0 / PI.sqrt();
                self.entries
                    .iter()
                    .map(|e| match e.label {
                        EigenLabel::Constant => Complex64::new(1.0 / (2.0 * PI).sqrt(), 0.0),
                        EigenLabel::Circle { n, trig } => {
                            let arg = z * n as f64;
                            match trig {
                                Trig::Cos => arg.cos() * norm,
                                Trig::Sin => arg.sin() * norm,
                            }
                        }
                        _ => unreachable!(),
                    })
                    .collect()
            }
            ModelKind::Torus2 => self
                .entries
                .iter()
                .map(|e| match e.label {
                    EigenLabel::Constant => Complex64::new(1.0, 0.0),
                    EigenLabel::Torus { k, trig } => {
                        let w = [2.0 * PI * k[0] as f64, 2.0 * PI * k[1] as f64];
                        let arg = Complex64::new(
                            w[0] * zeta.x[0] + w[1] * zeta.x[1],
                            w[0] * zeta.y[0] + w[1] * zeta.y[1],
                        );
                        match trig {
                            Trig::Cos => arg.cos() * SQRT_2,
                            Trig::Sin => arg.sin() * SQRT_2,
                        }
                    }
                    _ => unreachable!(),
                })
                .collect(),
            ModelKind::Sphere2 => {
                let t = Complex64::new(zeta.x[0], zeta.y[0]);
                let p = Complex64::new(zeta.x[1], zeta.y[1]);
                let (ct, st) = (t.cos(), t.sin());
                let rows: Vec<(u32, Vec<Complex64>)> = self
                    .sphere_degrees()
                    .into_iter()
                    .map(|deg| (deg, normalized_legendre_degree(deg as usize, ct, st, false)))
                    .collect();
                let row_of = |deg: u32| &rows.iter().find(|(d, _)| *d == deg).unwrap().1;
                self.entries
                    .iter()
                    .map(|e| {
                        let (degree, order, trig) = match e.label {
                            EigenLabel::Constant => (0, 0, Trig::Cos),
                            EigenLabel::Sphere { degree, order, trig } => (degree, order, trig),
                            _ => unreachable!(),
                        };
                        let value = row_of(degree)[order as usize];
                        if order == 0 {
                            return value;
                        }
                        let arg = p * order as f64;
                        match trig {
                            Trig::Cos => value * arg.cos() * SQRT_2,
                            Trig::Sin => value * arg.sin() * SQRT_2,
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Enumerates the eigenbasis of `window` on `model`.
pub fn enumerate_basis(model: &ManifoldModel, window: FrequencyWindow) -> Result<EigenBasis> {
    let mut entries = Vec::new();
    let include_constant = matches!(window, FrequencyWindow::Cutoff(l) if l >= 0.0)
        || window == FrequencyWindow::Band(0);
    if include_constant {
        entries.push(EigenEntry {
            frequency: 0.0,
            label: EigenLabel::Constant,
        });
    }
    match model.kind() {
        ModelKind::Circle => {
            let ns: Vec<u32> = match window {
                FrequencyWindow::Band(0) => vec![],
                FrequencyWindow::Band(n) => vec![n],
                FrequencyWindow::Cutoff(l) => (1..=l.max(0.0).floor() as u32).collect(),
            };
            for n in ns {
                for trig in [Trig::Cos, Trig::Sin] {
                    entries.push(EigenEntry {
                        frequency: n as f64,
                        label: EigenLabel::Circle { n, trig },
                    });
                }
            }
        }
        ModelKind::Torus2 => {
            let (lo, hi) = match window {
                FrequencyWindow::Band(n) => (n as f64, n as f64 + 1.0),
                FrequencyWindow::Cutoff(l) => (f64::MIN_POSITIVE, l),
            };
            for k in half_lattice_in_annulus(lo, hi) {
                let frequency = 2.0 * PI * ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
                for trig in [Trig::Cos, Trig::Sin] {
                    entries.push(EigenEntry {
                        frequency,
                        label: EigenLabel::Torus { k, trig },
                    });
                }
            }
        }
        ModelKind::Sphere2 => {
            let degrees: Vec<u32> = match window {
                FrequencyWindow::Band(0) => vec![],
                FrequencyWindow::Band(n) => vec![n],
                FrequencyWindow::Cutoff(l) => (1..)
                    .take_while(|&deg: &u32| sphere_frequency(deg) <= l)
                    .collect(),
            };
            for degree in degrees {
                let frequency = sphere_frequency(degree);
                entries.push(EigenEntry {
                    frequency,
                    label: EigenLabel::Sphere {
                        degree,
                        order: 0,
                        trig: Trig::Cos,
                    },
                });
                for order in 1..=degree {
                    for trig in [Trig::Cos, Trig::Sin] {
                        entries.push(EigenEntry {
                            frequency,
                            label: EigenLabel::Sphere { degree, order, trig },
                        });
                    }
                }
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyWindow {
            model: model.kind().to_string(),
            window: window.to_string(),
        });
    }
    Ok(EigenBasis {
        model: *model,
        window,
        entries,
    })
}

/// `sqrt(N(N+1))`, the frequency of degree-`N` spherical harmonics.
pub fn sphere_frequency(degree: u32) -> f64 {
    let n = degree as f64;
    (n * (n + 1.0)).sqrt()
}

/// Half-lattice vectors (`k₁ > 0`, or `k₁ = 0` and `k₂ > 0`) with
/// `2π|k| ∈ [lo, hi]`, ordered by `|k|²` then lexicographically.
pub fn half_lattice_in_annulus(lo: f64, hi: f64) -> Vec<[i64; 2]> {
    let r_lo = lo / (2.0 * PI);
    let r_hi = hi / (2.0 * PI);
    let bound = r_hi.floor() as i64 + 1;
    let mut out = Vec::new();
    for k1 in 0..=bound {
        for k2 in -bound..=bound {
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            let r = ((k1 * k1 + k2 * k2) as f64).sqrt();
            if r >= r_lo && r <= r_hi {
                out.push([k1, k2]);
            }
        }
    }
    out.sort_by_key(|k| (k[0] * k[0] + k[1] * k[1], k[0], k[1]));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JetMethod {
    DirectSum,
    ClosedForm,
}

/// Covariance blocks of `(f, ∇f)` at a point for unit coefficient variance:
/// `A = Π(x,x)`, `B = d_x Π(x,y)|_{x=y}`, `C = d_x ⊗ d_y Π(x,y)|_{x=y}`.
/// One-dimensional jets use only `b[0]` and `c[0][0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelJet {
    pub dim: usize,
    pub a: f64,
    pub b: [f64; 2],
    pub c: [[f64; 2]; 2],
}

impl KernelJet {
    /// Jet of the ensemble with coefficient variance `sigma2`.
    pub fn scaled(&self, sigma2: f64) -> Self {
        let mut out = *self;
        out.a *= sigma2;
        for i in 0..2 {
            out.b[i] *= sigma2;
            for j in 0..2 {
                out.c[i][j] *= sigma2;
            }
        }
        out
    }

    /// The `(m+1) × (m+1)` covariance matrix `[[A, B], [Bᵀ, C]]`.
    pub fn block_matrix(&self) -> DMatrix<f64> {
        let m = self.dim;
        DMatrix::from_fn(m + 1, m + 1, |i, j| match (i, j) {
            (0, 0) => self.a,
            (0, j) => self.b[j - 1],
            (i, 0) => self.b[i - 1],
            (i, j) => self.c[i - 1][j - 1],
        })
    }

    pub fn trace_c(&self) -> f64 {
        (0..self.dim).map(|i| self.c[i][i]).sum()
    }
}

/// Computes the projector jet at `x` by summing over the basis or, where
/// available, from the closed form.
pub fn projector_jet(
    model: &ManifoldModel,
    window: FrequencyWindow,
    x: &ChartPoint,
    method: JetMethod,
) -> Result<KernelJet> {
    let basis = enumerate_basis(model, window)?;
    match method {
        JetMethod::DirectSum => Ok(jet_direct(&basis, x)),
        JetMethod::ClosedForm => jet_closed_form(&basis),
    }
}

/// Direct summation `Σφ², Σφ dφ, Σ dφ ⊗ dφ` over a basis.
pub fn jet_direct(basis: &EigenBasis, x: &ChartPoint) -> KernelJet {
    let vals = basis.eval(x);
    let dim = basis.model().dim();
    let mut jet = KernelJet {
        dim,
        a: 0.0,
        b: [0.0; 2],
        c: [[0.0; 2]; 2],
    };
    for (v, g) in vals.values.iter().zip(&vals.gradients) {
        jet.a += v * v;
        for i in 0..dim {
            jet.b[i] += v * g[i];
            for j in 0..dim {
                jet.c[i][j] += g[i] * g[j];
            }
        }
    }
    jet
}

/// Closed-form jets: sphere bands via the addition theorem, torus windows via
/// the lattice sum (which is point independent).
pub fn jet_closed_form(basis: &EigenBasis) -> Result<KernelJet> {
    let window = basis.window();
    match (basis.model().kind(), window) {
        (ModelKind::Sphere2, FrequencyWindow::Band(n)) => {
            let nf = n as f64;
            let a = (2.0 * nf + 1.0) / (4.0 * PI);
            let c = nf * (nf + 1.0) * (2.0 * nf + 1.0) / (8.0 * PI);
            Ok(KernelJet {
                dim: 2,
                a,
                b: [0.0; 2],
                c: [[c, 0.0], [0.0, c]],
            })
        }
        (ModelKind::Torus2, _) => {
            let mut jet = KernelJet {
                dim: 2,
                a: basis.dim() as f64,
                b: [0.0; 2],
                c: [[0.0; 2]; 2],
            };
            for e in basis.entries() {
                if let EigenLabel::Torus { k, trig: Trig::Cos } = e.label {
                    // cos and sin partners together contribute 2 (2π)² k kᵀ
                    let w = [2.0 * PI * k[0] as f64, 2.0 * PI * k[1] as f64];
                    for i in 0..2 {
                        for j in 0..2 {
                            jet.c[i][j] += 2.0 * w[i] * w[j];
                        }
                    }
                }
            }
            Ok(jet)
        }
        (kind, window) => Err(Error::MethodMismatch {
            method: "closed_form".into(),
            model: kind.to_string(),
            window: window.to_string(),
        }),
    }
}

/// Off-diagonal projector kernel `Π(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub direct: f64,
    /// Sphere only: `Σ_ℓ (2ℓ+1)/(4π) P_ℓ(cos γ(x, y))`.
    pub closed_form: Option<f64>,
}

pub fn projector_offdiag(
    model: &ManifoldModel,
    window: FrequencyWindow,
    x: &ChartPoint,
    y: &ChartPoint,
) -> Result<KernelValue> {
    let basis = enumerate_basis(model, window)?;
    let vx = basis.eval(x).values;
    let vy = basis.eval(y).values;
    let direct = vx.iter().zip(&vy).map(|(a, b)| a * b).sum();
    let closed_form = (model.kind() == ModelKind::Sphere2).then(|| {
        let cos_gamma = x[0].cos() * y[0].cos() + x[0].sin() * y[0].sin() * (x[1] - y[1]).cos();
        let cos_gamma = cos_gamma.clamp(-1.0, 1.0);
        basis
            .sphere_degrees()
            .iter()
            .map(|&l| (2 * l + 1) as f64 / (4.0 * PI) * legendre_p(l as usize, cos_gamma))
            .sum()
    });
    Ok(KernelValue { direct, closed_form })
}

/// Evaluates `Σ c_j φ_j` at every vertex of `mesh`, using the tensor
/// structure of each model's grid.
pub fn field_on_mesh(basis: &EigenBasis, coefficients: &[f64], mesh: &Mesh) -> Vec<f64> {
    assert_eq!(coefficients.len(), basis.dim());
    assert_eq!(mesh.kind(), basis.model().kind());
    match mesh.kind() {
        ModelKind::Circle => mesh
            .vertices()
            .iter()
            .map(|x| {
                basis
                    .eval(x)
                    .values
                    .iter()
                    .zip(coefficients)
                    .map(|(v, c)| v * c)
                    .sum()
            })
            .collect(),
        ModelKind::Torus2 => torus_field_on_mesh(basis, coefficients, mesh),
        ModelKind::Sphere2 => sphere_field_on_mesh(basis, coefficients, mesh),
    }
}

fn torus_field_on_mesh(basis: &EigenBasis, coefficients: &[f64], mesh: &Mesh) -> Vec<f64> {
    let (cols, rows) = (mesh.cols(), mesh.rows());
    let mut constant = 0.0;
    // (k, a - i b) per lattice vector
    let mut modes: Vec<([i64; 2], Complex64)> = Vec::new();
    for (e, &c) in basis.entries().iter().zip(coefficients) {
        match e.label {
            EigenLabel::Constant => constant += c,
            EigenLabel::Torus { k, trig } => {
                let slot = match modes.iter().position(|(kk, _)| *kk == k) {
                    Some(p) => p,
                    None => {
                        modes.push((k, Complex64::new(0.0, 0.0)));
                        modes.len() - 1
                    }
                };
                match trig {
                    Trig::Cos => modes[slot].1.re += c,
                    Trig::Sin => modes[slot].1.im -= c,
                }
            }
            _ => unreachable!(),
        }
    }
    let phase = |k: i64, coord: f64| Complex64::from_polar(1.0, 2.0 * PI * k as f64 * coord);
    let mut out = vec![constant; cols * rows];
    for (k, amp) in modes {
        let col_factor: Vec<Complex64> = (0..cols).map(|i| phase(k[0], mesh.col_coord(i))).collect();
        for j in 0..rows {
            let row_factor = amp * phase(k[1], mesh.row_coord(j)) * SQRT_2;
            let line = &mut out[j * cols..(j + 1) * cols];
            for (o, cf) in line.iter_mut().zip(&col_factor) {
                *o += (row_factor * cf).re;
            }
        }
    }
    out
}

fn sphere_field_on_mesh(basis: &EigenBasis, coefficients: &[f64], mesh: &Mesh) -> Vec<f64> {
    let (cols, rows) = (mesh.cols(), mesh.rows());
    let degrees = basis.sphere_degrees();
    let max_order = degrees.iter().copied().max().unwrap_or(0) as usize;
    let mut constant = 0.0;
    // coefficient per (degree index, order) for cos and sin parts
    let mut cos_coef = vec![vec![0.0; max_order + 1]; degrees.len()];
    let mut sin_coef = vec![vec![0.0; max_order + 1]; degrees.len()];
    for (e, &c) in basis.entries().iter().zip(coefficients) {
        match e.label {
            EigenLabel::Constant => constant += c / (4.0 * PI).sqrt(),
            EigenLabel::Sphere { degree, order, trig } => {
                let di = degrees.iter().position(|&d| d == degree).unwrap();
                let scale = if order == 0 { 1.0 } else { SQRT_2 };
                match trig {
                    Trig::Cos => cos_coef[di][order as usize] += scale * c,
                    Trig::Sin => sin_coef[di][order as usize] += scale * c,
                }
            }
            _ => unreachable!(),
        }
    }
    let trig_table: Vec<(Vec<f64>, Vec<f64>)> = (0..=max_order)
        .map(|m| {
            (0..cols)
                .map(|i| (m as f64 * mesh.col_coord(i)).sin_cos())
                .map(|(s, c)| (c, s))
                .unzip()
        })
        .collect();
    let mut out = vec![0.0; cols * rows];
    let mut g = vec![0.0; max_order + 1];
    let mut h = vec![0.0; max_order + 1];
    for j in 0..rows {
        let theta = mesh.row_coord(j);
        let (st, ct) = theta.sin_cos();
        g.iter_mut().for_each(|v| *v = 0.0);
        h.iter_mut().for_each(|v| *v = 0.0);
        for (di, &deg) in degrees.iter().enumerate() {
            let p = normalized_legendre_degree(deg as usize, ct, st, false);
            for m in 0..=deg as usize {
                g[m] += p[m] * cos_coef[di][m];
                h[m] += p[m] * sin_coef[di][m];
            }
        }
        let line = &mut out[j * cols..(j + 1) * cols];
        for (i, o) in line.iter_mut().enumerate() {
            let mut v = constant + g[0];
            for m in 1..=max_order {
                v += g[m] * trig_table[m].0[i] + h[m] * trig_table[m].1[i];
            }
            *o = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{build_mesh, sphere_embedding};

    fn brute_force_torus_count(lo: f64, hi: f64) -> usize {
        // all lattice points (full lattice) with 2π|k| in [lo, hi]
        let mut count = 0;
        for k1 in -10i64..=10 {
            for k2 in -10i64..=10 {
                let f = 2.0 * PI * ((k1 * k1 + k2 * k2) as f64).sqrt();
                if (k1, k2) != (0, 0) && f >= lo && f <= hi {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn torus_band_dimension_matches_brute_force() {
        for n in [7u32, 13, 20, 31, 40] {
            match enumerate_basis(&ManifoldModel::torus(), FrequencyWindow::Band(n)) {
                Ok(b) => assert_eq!(b.dim(), brute_force_torus_count(n as f64, n as f64 + 1.0)),
                Err(Error::EmptyWindow { .. }) => {
                    assert_eq!(brute_force_torus_count(n as f64, n as f64 + 1.0), 0)
                }
                Err(e) => panic!("{e}"),
            }
        }
        // Band(20): |k| ∈ [3.183, 3.342] has no lattice points (|k|² ∈ [10.13, 11.17])
        assert!(matches!(
            enumerate_basis(&ManifoldModel::torus(), FrequencyWindow::Band(20)),
            Err(Error::EmptyWindow { .. })
        ));
    }

    #[test]
    fn sphere_and_circle_dimensions() {
        let b = enumerate_basis(&ManifoldModel::sphere(), FrequencyWindow::Band(10)).unwrap();
        assert_eq!(b.dim(), 21);
        for n in [1u32, 4, 9] {
            let b = enumerate_basis(&ManifoldModel::circle(), FrequencyWindow::Cutoff(n as f64)).unwrap();
            assert_eq!(b.dim(), 2 * n as usize + 1);
            assert_eq!(b.entries()[0].label, EigenLabel::Constant);
        }
        let b = enumerate_basis(&ManifoldModel::sphere(), FrequencyWindow::Cutoff(sphere_frequency(3))).unwrap();
        assert_eq!(b.dim(), 16);
    }

    #[test]
    fn basis_evaluation_examples() {
        let circle = enumerate_basis(&ManifoldModel::circle(), FrequencyWindow::Band(3)).unwrap();
        let v = circle.eval(&[0.0, 0.0]);
        assert!((v.values[0] - 1.0 / PI.sqrt()).abs() < 1e-15);
        assert_eq!(v.gradients[0][0], 0.0);

        let sphere = enumerate_basis(&ManifoldModel::sphere(), FrequencyWindow::Band(1)).unwrap();
        let v = sphere.eval(&[0.0, 0.0]);
        let sum: f64 = v.values.iter().map(|x| x * x).sum();
        assert!((sum - 3.0 / (4.0 * PI)).abs() < 1e-15);

        let torus = enumerate_basis(&ManifoldModel::torus(), FrequencyWindow::Band(6)).unwrap();
        let idx = torus
            .entries()
            .iter()
            .position(|e| e.label == EigenLabel::Torus { k: [1, 0], trig: Trig::Cos })
            .unwrap();
        let v = torus.eval(&[0.25, 0.0]);
        assert!(v.values[idx].abs() < 1e-15);
        assert!((v.gradients[idx][0] + 2.0 * PI * SQRT_2).abs() < 1e-12);
        assert_eq!(v.gradients[idx][1], 0.0);
    }

    #[test]
    fn sphere_gram_matrix_is_identity() {
        let model = ManifoldModel::sphere();
        let basis = enumerate_basis(&model, FrequencyWindow::Cutoff(sphere_frequency(3))).unwrap();
        let mesh = build_mesh(&model, 256).unwrap();
        let d = basis.dim();
        let mut gram = vec![0.0; d * d];
        for cell in mesh.cells() {
            let v = basis.eval(&cell.center).values;
            for i in 0..d {
                for j in 0..d {
                    gram[i * d + j] += cell.area * v[i] * v[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i * d + j] - target).abs() < 1e-4, "({i},{j}) {}", gram[i * d + j]);
            }
        }
    }

    #[test]
    fn torus_gram_matrix_is_identity() {
        let model = ManifoldModel::torus();
        let basis = enumerate_basis(&model, FrequencyWindow::Cutoff(15.0)).unwrap();
        let mesh = build_mesh(&model, 32).unwrap();
        let d = basis.dim();
        for i in 0..d {
            for j in 0..d {
                let g: f64 = mesh
                    .cells()
                    .iter()
                    .map(|c| {
                        let v = basis.eval(&c.center).values;
                        c.area * v[i] * v[j]
                    })
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((g - target).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-6;
        let cases = [
            (ManifoldModel::sphere(), FrequencyWindow::Band(7), [1.0, 2.0]),
            (ManifoldModel::torus(), FrequencyWindow::Band(12), [0.3, 0.8]),
            (ManifoldModel::circle(), FrequencyWindow::Cutoff(5.0), [2.2, 0.0]),
        ];
        for (model, window, x) in cases {
            let basis = enumerate_basis(&model, window).unwrap();
            let v = basis.eval(&x);
            for axis in 0..model.dim() {
                let mut xp = x;
                let mut xm = x;
                xp[axis] += h;
                xm[axis] -= h;
                let (vp, vm) = (basis.eval(&xp).values, basis.eval(&xm).values);
                // orthonormal frame: the φ-component is (1/sin θ) ∂_φ
                let metric = if model.kind() == ModelKind::Sphere2 && axis == 1 {
                    x[0].sin()
                } else {
                    1.0
                };
                for j in 0..basis.dim() {
                    let fd = (vp[j] - vm[j]) / (2.0 * h) / metric;
                    assert!((v.gradients[j][axis] - fd).abs() < 1e-6 * (1.0 + fd.abs()));
                }
            }
        }
    }

    #[test]
    fn sphere_jets_direct_equal_closed_form() {
        let model = ManifoldModel::sphere();
        for n in [1u32, 5, 30, 100] {
            let closed = projector_jet(&model, FrequencyWindow::Band(n), &[0.0, 0.0], JetMethod::ClosedForm).unwrap();
            for x in [[0.0, 0.0], [0.4, 1.0], [2.0, 5.5], [PI, 0.3]] {
                let direct = projector_jet(&model, FrequencyWindow::Band(n), &x, JetMethod::DirectSum).unwrap();
                assert!((direct.a - closed.a).abs() <= 1e-10 * closed.a);
                for i in 0..2 {
                    assert!(direct.b[i].abs() <= 1e-10 * closed.a.sqrt() * closed.c[0][0].sqrt());
                    for j in 0..2 {
                        assert!((direct.c[i][j] - closed.c[i][j]).abs() <= 1e-10 * closed.c[0][0]);
                    }
                }
            }
        }
    }

    #[test]
    fn torus_jet_properties() {
        let model = ManifoldModel::torus();
        let window = FrequencyWindow::Band(40);
        let basis = enumerate_basis(&model, window).unwrap();
        let closed = jet_closed_form(&basis).unwrap();
        let direct = jet_direct(&basis, &[0.123, 0.77]);
        assert!(direct.b[0].abs() < 1e-10 && direct.b[1].abs() < 1e-10);
        assert_eq!(closed.b, [0.0, 0.0]);
        let sum_lambda_sq: f64 = basis.entries().iter().map(|e| e.frequency * e.frequency).sum();
        assert!((closed.trace_c() - sum_lambda_sq).abs() < 1e-9 * sum_lambda_sq);
        assert!((direct.trace_c() - sum_lambda_sq).abs() < 1e-9 * sum_lambda_sq);
        assert!((direct.a - basis.dim() as f64).abs() < 1e-12);
    }

    #[test]
    fn circle_closed_form_is_rejected() {
        let r = projector_jet(&ManifoldModel::circle(), FrequencyWindow::Band(3), &[0.0, 0.0], JetMethod::ClosedForm);
        assert!(matches!(r, Err(Error::MethodMismatch { .. })));
    }

    #[test]
    fn offdiag_examples() {
        let sphere = ManifoldModel::sphere();
        let n = 7;
        let same = projector_offdiag(&sphere, FrequencyWindow::Band(n), &[0.5, 1.0], &[0.5, 1.0]).unwrap();
        assert!((same.direct - 15.0 / (4.0 * PI)).abs() < 1e-12);
        let anti = projector_offdiag(&sphere, FrequencyWindow::Band(n), &[0.5, 1.0], &[PI - 0.5, 1.0 + PI]).unwrap();
        assert!((anti.direct + 15.0 / (4.0 * PI)).abs() < 1e-12);
        assert!((anti.closed_form.unwrap() - anti.direct).abs() < 1e-12);

        // window holding only k = (1, 0): Band(6) has 2π ∈ [6, 7]
        let torus = ManifoldModel::torus();
        let basis = enumerate_basis(&torus, FrequencyWindow::Band(6)).unwrap();
        assert_eq!(basis.dim(), 4); // k = (1,0) and (0,1)
        let single = EigenBasis::with_entries(&torus, FrequencyWindow::Band(6), basis.entries()[2..].to_vec()).unwrap();
        assert_eq!(single.entries()[0].label, EigenLabel::Torus { k: [1, 0], trig: Trig::Cos });
        let (vx, vy) = (single.eval(&[0.5, 0.0]).values, single.eval(&[0.0, 0.0]).values);
        let v: f64 = vx.iter().zip(&vy).map(|(a, b)| a * b).sum();
        assert!((v + 2.0).abs() < 1e-12);
        assert!(EigenBasis::with_entries(&torus, FrequencyWindow::Band(7), basis.entries()[2..].to_vec()).is_err());
    }

    #[test]
    fn field_on_mesh_matches_pointwise() {
        for (model, window, res) in [
            (ManifoldModel::sphere(), FrequencyWindow::Cutoff(sphere_frequency(4)), 16),
            (ManifoldModel::torus(), FrequencyWindow::Cutoff(20.0), 12),
            (ManifoldModel::circle(), FrequencyWindow::Cutoff(4.0), 16),
        ] {
            let basis = enumerate_basis(&model, window).unwrap();
            let coeffs: Vec<f64> = (0..basis.dim()).map(|j| ((j * 7 + 3) % 11) as f64 - 5.0).collect();
            let mesh = build_mesh(&model, res).unwrap();
            let grid = field_on_mesh(&basis, &coeffs, &mesh);
            for (x, g) in mesh.vertices().iter().zip(&grid) {
                let direct: f64 = basis.eval(x).values.iter().zip(&coeffs).map(|(v, c)| v * c).sum();
                assert!((direct - g).abs() < 1e-11, "{:?} {x:?}", model.kind());
            }
        }
    }

    #[test]
    fn complex_evaluation_restricts_to_real() {
        for (model, window) in [
            (ManifoldModel::sphere(), FrequencyWindow::Cutoff(sphere_frequency(5))),
            (ManifoldModel::torus(), FrequencyWindow::Band(12)),
            (ManifoldModel::circle(), FrequencyWindow::Cutoff(6.0)),
        ] {
            let basis = enumerate_basis(&model, window).unwrap();
            let x = [0.7, 2.1];
            let real = basis.eval(&x).values;
            let cplx = basis.eval_complex(&TubePoint::real(x));
            for (r, c) in real.iter().zip(&cplx) {
                assert!((r - c.re).abs() < 1e-12 && c.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sphere_complex_addition_theorem() {
        let model = ManifoldModel::sphere();
        let n = 12u32;
        let basis = enumerate_basis(&model, FrequencyWindow::Band(n)).unwrap();
        let z = TubePoint::new([0.9, 0.4], [0.15, -0.05]);
        let e = sphere_embedding(&z);
        let inner: f64 = e.iter().map(|c| c.norm_sqr()).sum();
        let direct: f64 = basis.eval_complex(&z).iter().map(|c| c.norm_sqr()).sum();
        let closed = (2 * n + 1) as f64 / (4.0 * PI) * legendre_p(n as usize, inner);
        assert!((direct - closed).abs() < 1e-10 * closed);
    }
}
