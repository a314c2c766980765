//! Model manifolds (circle, flat torus, round sphere), their meshes, and the
//! Grauert-tube exhaustion `sqrt(rho)` on each complexification.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on tube radii accepted by experiments.
pub const MAX_EXPERIMENT_TUBE_RADIUS: f64 = 0.5;

/// Smallest mesh resolution accepted by [`build_mesh`].
pub const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Circle,
    Torus2,
    Sphere2,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Circle => "circle",
            ModelKind::Torus2 => "torus2",
            ModelKind::Sphere2 => "sphere2",
        })
    }
}

/// One of the three model manifolds.
///
/// The torus is the unit square `[0,1)²` with the flat metric (volume 1); the
/// circle has length `2π`; the sphere is the unit round sphere (area `4π`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldModel {
    kind: ModelKind,
    tube_radius: f64,
}

impl ManifoldModel {
    pub fn new(kind: ModelKind, tube_radius: f64) -> Result<Self> {
        if !(tube_radius > 0.0 && tube_radius.is_finite()) {
            return Err(Error::InvalidTubeRadius(tube_radius));
        }
        Ok(Self { kind, tube_radius })
    }

    pub fn circle() -> Self {
        Self::new(ModelKind::Circle, MAX_EXPERIMENT_TUBE_RADIUS).unwrap()
    }

    pub fn torus() -> Self {
        Self::new(ModelKind::Torus2, MAX_EXPERIMENT_TUBE_RADIUS).unwrap()
    }

    pub fn sphere() -> Self {
        Self::new(ModelKind::Sphere2, MAX_EXPERIMENT_TUBE_RADIUS).unwrap()
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::Circle => 1,
            ModelKind::Torus2 | ModelKind::Sphere2 => 2,
        }
    }

    pub fn volume(&self) -> f64 {
        match self.kind {
            ModelKind::Circle => 2.0 * PI,
            ModelKind::Torus2 => 1.0,
            ModelKind::Sphere2 => 4.0 * PI,
        }
    }

    pub fn tube_radius(&self) -> f64 {
        self.tube_radius
    }
}

/// Chart coordinates: `[θ, 0]` on the circle, `[x₁, x₂]` on the torus,
/// `[θ, φ]` (colatitude, longitude) on the sphere.
pub type ChartPoint = [f64; 2];

/// A point of the complexified manifold, `ζ = x + i y` in chart coordinates.
///
/// On the sphere both chart angles are complexified, `θ + i y₀` and `φ + i y₁`,
/// and the point is the image in the complex quadric `{z ∈ ℂ³ : z·z = 1}`.
/// A purely imaginary colatitude shift `y = (s, 0)` moves along a complexified
/// meridian and gives `sqrt(rho) = |s|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubePoint {
    pub x: ChartPoint,
    pub y: [f64; 2],
}

impl TubePoint {
    pub fn new(x: ChartPoint, y: [f64; 2]) -> Self {
        Self { x, y }
    }

    pub fn real(x: ChartPoint) -> Self {
        Self { x, y: [0.0, 0.0] }
    }

    pub fn is_real(&self) -> bool {
        self.y == [0.0, 0.0]
    }
}

/// Embedding of a complexified sphere chart point into `ℂ³`.
pub fn sphere_embedding(zeta: &TubePoint) -> [Complex64; 3] {
    let t = Complex64::new(zeta.x[0], zeta.y[0]);
    let p = Complex64::new(zeta.x[1], zeta.y[1]);
    let (st, ct) = (t.sin(), t.cos());
    [st * p.cos(), st * p.sin(), ct]
}

/// `sqrt(rho)` without the tube-membership check.
pub fn sqrt_rho_unchecked(kind: ModelKind, zeta: &TubePoint) -> f64 {
    match kind {
        ModelKind::Circle => zeta.y[0].abs(),
        ModelKind::Torus2 => zeta.y[0].hypot(zeta.y[1]),
        ModelKind::Sphere2 => {
            // ⟨ζ, ζ̄⟩ = 1 + ε with ε = 2 sinh²s + 2 (sin²θ + sinh²s) sinh²v,
            // written out to keep precision for small imaginary parts
            let (theta, s, v) = (zeta.x[0], zeta.y[0], zeta.y[1]);
            let sh_s = s.sinh();
            let sh_v = v.sinh();
            let eps = 2.0 * sh_s * sh_s
                + 2.0 * (theta.sin().powi(2) + sh_s * sh_s) * sh_v * sh_v;
            // acosh(1 + ε) / 2
            0.5 * (eps + (eps * (2.0 + eps)).sqrt()).ln_1p()
        }
    }
}

/// Grauert-tube exhaustion `sqrt(rho)(ζ)`: `|y|` on the circle and torus and
/// `acosh(⟨ζ, ζ̄⟩) / 2` on the sphere. Errors outside the model's tube.
pub fn sqrt_rho(model: &ManifoldModel, zeta: &TubePoint) -> Result<f64> {
    let value = sqrt_rho_unchecked(model.kind, zeta);
    if value > model.tube_radius * (1.0 + 1e-12) {
        return Err(Error::OutsideTube {
            sqrt_rho: value,
            tube_radius: model.tube_radius,
        });
    }
    Ok(value)
}

/// A cell of a [`Mesh`]: vertex indices (2 on the circle, 4 elsewhere),
/// chart-coordinate center and metric measure.
#[derive(Debug, Clone)]
pub struct Cell {
    pub vertices: Vec<usize>,
    pub center: ChartPoint,
    pub area: f64,
}

/// Structured mesh of the chart domain.
///
/// Vertices are laid out row-major, `index = row * cols + col`. Columns are
/// periodic on every model; rows are periodic on the torus and run pole to
/// pole (inclusive) on the sphere.
#[derive(Debug, Clone)]
pub struct Mesh {
    kind: ModelKind,
    resolution: usize,
    cols: usize,
    rows: usize,
    col_step: f64,
    row_step: f64,
    vertices: Vec<ChartPoint>,
    cells: Vec<Cell>,
}

impl Mesh {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Number of vertex columns (periodic direction).
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of vertex rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn vertices(&self) -> &[ChartPoint] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    /// Column coordinate (`x₁`, `θ` on the circle, `φ` on the sphere) of
    /// column `i`, not wrapped: `i = cols` gives the period.
    pub fn col_coord(&self, i: usize) -> f64 {
        i as f64 * self.col_step
    }

    /// Row coordinate (`x₂` on the torus, `θ` on the sphere), not wrapped.
    pub fn row_coord(&self, j: usize) -> f64 {
        j as f64 * self.row_step
    }

    /// Vertex index of grid position `(col, row)`, wrapping periodic directions.
    pub fn vertex_index(&self, col: usize, row: usize) -> usize {
        let row = match self.kind {
            ModelKind::Torus2 => row % self.rows,
            _ => row,
        };
        row * self.cols + col % self.cols
    }

    /// Number of cell rows (`rows - 1` on the sphere, `rows` on the torus).
    pub fn cell_rows(&self) -> usize {
        match self.kind {
            ModelKind::Sphere2 => self.rows - 1,
            _ => self.rows,
        }
    }

    /// Largest cell diameter in the metric (chord through opposite corners,
    /// measured with the metric at the cell center).
    pub fn max_cell_diameter(&self) -> f64 {
        match self.kind {
            ModelKind::Circle => self.col_step,
            ModelKind::Torus2 => self.col_step.hypot(self.row_step),
            ModelKind::Sphere2 => {
                // widest cells sit at the equator
                self.row_step.hypot(self.col_step)
            }
        }
    }
}

/// Builds the structured mesh of `model` at `resolution`.
///
/// Circle: `resolution` intervals. Torus: `resolution × resolution` squares.
/// Sphere: `resolution` colatitude bands by `2·resolution` longitudes, with
/// exact cell areas `(cos θ_j − cos θ_{j+1}) Δφ`.
pub fn build_mesh(model: &ManifoldModel, resolution: usize) -> Result<Mesh> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidResolution {
            resolution,
            minimum: MIN_RESOLUTION,
        });
    }
    let kind = model.kind();
    let mesh = match kind {
        ModelKind::Circle => {
            let step = 2.0 * PI / resolution as f64;
            let vertices = (0..resolution).map(|i| [i as f64 * step, 0.0]).collect();
            let cells = (0..resolution)
                .map(|i| Cell {
                    vertices: vec![i, (i + 1) % resolution],
                    center: [(i as f64 + 0.5) * step, 0.0],
                    area: step,
                })
                .collect();
            Mesh {
                kind,
                resolution,
                cols: resolution,
                rows: 1,
                col_step: step,
                row_step: 0.0,
                vertices,
                cells,
            }
        }
        ModelKind::Torus2 => {
            let n = resolution;
            let step = 1.0 / n as f64;
            let mut vertices = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    vertices.push([i as f64 * step, j as f64 * step]);
                }
            }
            let mut cells = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    let idx = |c: usize, r: usize| (r % n) * n + c % n;
                    cells.push(Cell {
                        vertices: vec![idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)],
                        center: [(i as f64 + 0.5) * step, (j as f64 + 0.5) * step],
                        area: step * step,
                    });
                }
            }
            Mesh {
                kind,
                resolution,
                cols: n,
                rows: n,
                col_step: step,
                row_step: step,
                vertices,
                cells,
            }
        }
        ModelKind::Sphere2 => {
            let n_theta = resolution;
            let n_phi = 2 * resolution;
            let d_theta = PI / n_theta as f64;
            let d_phi = 2.0 * PI / n_phi as f64;
            let mut vertices = Vec::with_capacity((n_theta + 1) * n_phi);
            for j in 0..=n_theta {
                for i in 0..n_phi {
                    vertices.push([j as f64 * d_theta, i as f64 * d_phi]);
                }
            }
            let mut cells = Vec::with_capacity(n_theta * n_phi);
            for j in 0..n_theta {
                let (t0, t1) = (j as f64 * d_theta, (j + 1) as f64 * d_theta);
                let area = (t0.cos() - t1.cos()) * d_phi;
                for i in 0..n_phi {
                    let idx = |c: usize, r: usize| r * n_phi + c % n_phi;
                    cells.push(Cell {
                        vertices: vec![idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)],
                        center: [0.5 * (t0 + t1), (i as f64 + 0.5) * d_phi],
                        area,
                    });
                }
            }
            Mesh {
                kind,
                resolution,
                cols: n_phi,
                rows: n_theta + 1,
                col_step: d_phi,
                row_step: d_theta,
                vertices,
                cells,
            }
        }
    };
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volumes_and_dimensions() {
        assert_eq!(ManifoldModel::circle().volume(), 2.0 * PI);
        assert_eq!(ManifoldModel::torus().volume(), 1.0);
        assert_eq!(ManifoldModel::sphere().volume(), 4.0 * PI);
        assert_eq!(ManifoldModel::circle().dim(), 1);
        assert_eq!(ManifoldModel::sphere().dim(), 2);
        assert!(ManifoldModel::new(ModelKind::Torus2, 0.0).is_err());
    }

    #[test]
    fn mesh_examples() {
        let torus = build_mesh(&ManifoldModel::torus(), 100).unwrap();
        assert_eq!(torus.cells().len(), 100 * 100);
        assert!((torus.total_area() - 1.0).abs() < 1e-9);

        let sphere = build_mesh(&ManifoldModel::sphere(), 64).unwrap();
        assert!((sphere.total_area() - 4.0 * PI).abs() < 1e-6);

        let circle = build_mesh(&ManifoldModel::circle(), 16).unwrap();
        assert_eq!(circle.cells().len(), 16);
        for c in circle.cells() {
            assert!((c.area - 2.0 * PI / 16.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mesh_rejects_coarse_resolution() {
        assert!(matches!(
            build_mesh(&ManifoldModel::torus(), 7),
            Err(Error::InvalidResolution { .. })
        ));
    }

    #[test]
    fn mesh_area_for_all_resolutions() {
        for model in [ManifoldModel::circle(), ManifoldModel::torus(), ManifoldModel::sphere()] {
            for res in [8, 9, 17, 33, 64] {
                let mesh = build_mesh(&model, res).unwrap();
                let rel = (mesh.total_area() - model.volume()).abs() / model.volume();
                assert!(rel < 1e-5, "{:?} res {res}", model.kind());
                assert!(mesh.max_cell_diameter() <= 2.0 * PI * 1.5 / res as f64);
            }
        }
    }

    #[test]
    fn sqrt_rho_examples() {
        let torus = ManifoldModel::torus();
        let z = TubePoint::new([0.3, 0.7], [0.1, 0.0]);
        assert!((sqrt_rho(&torus, &z).unwrap() - 0.1).abs() < 1e-15);
        for model in [ManifoldModel::circle(), torus, ManifoldModel::sphere()] {
            assert_eq!(sqrt_rho(&model, &TubePoint::real([0.4, 1.2])).unwrap(), 0.0);
        }
        // sphere point with ⟨ζ, ζ̄⟩ = cosh(0.2)
        let z = TubePoint::new([0.8, 2.0], [0.1, 0.0]);
        let e = sphere_embedding(&z);
        let norm_sq: f64 = e.iter().map(|c| c.norm_sqr()).sum();
        assert!((norm_sq - 0.2f64.cosh()).abs() < 1e-14);
        assert!((sqrt_rho(&ManifoldModel::sphere(), &z).unwrap() - 0.1).abs() < 1e-14);
    }

    #[test]
    fn sphere_sqrt_rho_matches_embedding_for_general_points() {
        let z = TubePoint::new([1.1, 0.4], [0.07, -0.12]);
        let e = sphere_embedding(&z);
        let norm_sq: f64 = e.iter().map(|c| c.norm_sqr()).sum();
        let quadric: Complex64 = e.iter().map(|c| c * c).sum();
        assert!((quadric - 1.0).norm() < 1e-14);
        let expected = 0.5 * norm_sq.acosh();
        assert!((sqrt_rho_unchecked(ModelKind::Sphere2, &z) - expected).abs() < 1e-12);
    }

    #[test]
    fn sqrt_rho_outside_tube_is_rejected() {
        let model = ManifoldModel::new(ModelKind::Torus2, 0.2).unwrap();
        let z = TubePoint::new([0.0, 0.0], [0.3, 0.0]);
        assert!(matches!(sqrt_rho(&model, &z), Err(Error::OutsideTube { .. })));
    }

    proptest::proptest! {
        #[test]
        fn torus_sqrt_rho_is_homogeneous(y0 in -0.3f64..0.3, y1 in -0.3f64..0.3, t in 0.0f64..1.0) {
            let a = sqrt_rho_unchecked(ModelKind::Torus2, &TubePoint::new([0.1, 0.2], [t * y0, t * y1]));
            let b = sqrt_rho_unchecked(ModelKind::Torus2, &TubePoint::new([0.1, 0.2], [y0, y1]));
            proptest::prop_assert!((a - t * b).abs() < 1e-14);
        }

        #[test]
        fn sqrt_rho_positive_off_real_points(s in 1e-6f64..0.4, theta in 0.01f64..3.1) {
            for kind in [ModelKind::Circle, ModelKind::Torus2, ModelKind::Sphere2] {
                let z = TubePoint::new([theta, 0.5], [s, 0.0]);
                proptest::prop_assert!(sqrt_rho_unchecked(kind, &z) > 0.0);
            }
        }
    }
}
