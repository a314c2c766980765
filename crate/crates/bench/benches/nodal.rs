//! Nodal set extraction on the minimal admissible meshes.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rwaves_bench::wave_fixture;
use rwaves_core::{circle_complex_roots, extract_nodal, FrequencyWindow, ManifoldModel};

fn extraction(c: &mut Criterion) {
    let mut group = c.benchmark_group("extract_nodal");
    group.sample_size(20);
    for (name, model, n) in [("sphere", ManifoldModel::sphere(), 20u32), ("sphere", ManifoldModel::sphere(), 40), ("torus", ManifoldModel::torus(), 50)] {
        let (sample, mesh) = wave_fixture(model, FrequencyWindow::Band(n));
        group.bench_function(BenchmarkId::new(name, n), |b| b.iter(|| extract_nodal(black_box(&sample), &mesh).unwrap().total_measure));
    }
    group.finish();
}

fn circle_roots(c: &mut Criterion) {
    let mut group = c.benchmark_group("circle_complex_roots");
    for n in [20u32, 80] {
        let (sample, _) = wave_fixture(ManifoldModel::circle(), FrequencyWindow::Cutoff(n as f64));
        group.bench_function(BenchmarkId::new("cutoff", n), |b| b.iter(|| circle_complex_roots(black_box(&sample), 0).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, extraction, circle_roots);
criterion_main!(benches);
