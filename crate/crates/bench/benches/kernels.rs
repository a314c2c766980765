//! Spectral kernel jets and complexified projectors.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rwaves_bench::basis_fixture;
use rwaves_core::complex::complexified_projector_for;
use rwaves_core::spectral::jet_direct;
use rwaves_core::{density, FrequencyWindow, ManifoldModel, TubePoint};

fn jets(c: &mut Criterion) {
    let mut group = c.benchmark_group("jet_direct");
    for (name, model, window) in [
        ("sphere", ManifoldModel::sphere(), FrequencyWindow::Band(100)),
        ("torus", ManifoldModel::torus(), FrequencyWindow::Band(100)),
    ] {
        let basis = basis_fixture(model, window);
        group.bench_function(BenchmarkId::new(name, 100), |b| {
            b.iter(|| density(&jet_direct(&basis, black_box(&[1.1, 0.4]))).unwrap().density)
        });
    }
    group.finish();
}

fn complexified(c: &mut Criterion) {
    let mut group = c.benchmark_group("complexified_projector");
    for n in [50u32, 200] {
        let basis = basis_fixture(ManifoldModel::sphere(), FrequencyWindow::Band(n));
        let zeta = TubePoint::new([1.1, 0.4], [0.2, 0.0]);
        group.bench_function(BenchmarkId::new("sphere", n), |b| {
            b.iter(|| complexified_projector_for(&basis, black_box(&zeta)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, jets, complexified);
criterion_main!(benches);
