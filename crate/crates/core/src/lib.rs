//! Gaussian random waves on the circle, the flat torus and the round sphere.
//!
//! The crate samples random eigenfunction combinations from band and cutoff
//! ensembles, extracts their real nodal sets, predicts nodal densities from
//! the exact spectral projector kernels through the Kac-Rice formula, and
//! studies zeros of the analytic continuations in the Grauert tube.
//!
//! Modules follow the pipeline:
//!
//! * [`manifold`]: model manifolds, meshes, tube points and `sqrt(rho)`.
//! * [`spectral`]: eigenbases, projector jets and kernels.
//! * [`ensemble`]: seeded Gaussian sampling of random waves.
//! * [`kac_rice`]: conditional covariance and expected zero density.
//! * [`nodal`]: nodal-set extraction, linear statistics, Monte Carlo runs.
//! * [`complex`]: complexified kernels, log-modulus law, complex zeros.
//! * [`experiment`]: configuration-driven runs, result records and reports.

pub mod complex;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod kac_rice;
pub mod manifold;
pub mod nodal;
pub mod numerics;
pub mod spectral;

pub use error::{Error, Result};
pub use manifold::{build_mesh, sqrt_rho, ChartPoint, ManifoldModel, Mesh, ModelKind, TubePoint};
pub use nodal::{extract_nodal, linear_statistic, NodalSet, StatisticSeries, TestFunction};
pub use kac_rice::{density, expected_measure, KacRiceResult, NormMethod};
pub use complex::{circle_complex_roots, complexified_projector, ComplexKernelValue, LogModulusStats, RootCloud};
pub use ensemble::{sample_wave, Ensemble, EnsembleSpec, Normalization, WaveSample};
pub use spectral::{enumerate_basis, projector_jet, EigenBasis, FrequencyWindow, JetMethod, KernelJet};



pub use experiment::{emit_report, run_experiment, ExperimentConfig, ExperimentKind, ResultRecord};
