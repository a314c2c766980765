//! Shared fixtures for the criterion benchmarks.

use std::sync::Arc;

use rwaves_core::nodal::required_resolution;
use rwaves_core::{
    build_mesh, enumerate_basis, sample_wave, EnsembleSpec, FrequencyWindow, ManifoldModel, Mesh, Normalization,
    WaveSample,
};

/// A fixed sample and a mesh at the minimal admissible resolution.
pub fn wave_fixture(model: ManifoldModel, window: FrequencyWindow) -> (WaveSample, Mesh) {
    let spec = EnsembleSpec {
        model,
        window,
        normalization: Normalization::PaperDensity,
        master_seed: 1,
    };
    let sample = sample_wave(&spec, 0).expect("fixture window is nonempty");
    let mesh = build_mesh(&model, required_resolution(window)).expect("fixture resolution is valid");
    (sample, mesh)
}

/// The basis of a window, shared so benches time evaluation rather than enumeration.
pub fn basis_fixture(model: ManifoldModel, window: FrequencyWindow) -> Arc<rwaves_core::EigenBasis> {
    Arc::new(enumerate_basis(&model, window).expect("fixture window is nonempty"))
}
