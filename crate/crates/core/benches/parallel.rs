//! Parallel vs sequential execution of the data-parallel stages.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use morphcloud::holefill::{fill_holes, HoleFillConfig};
use morphcloud::par::{with_execution, Execution};
use morphcloud::quality::local_eigen_features;
use morphcloud::synthetic::Ellipsoid;
use morphcloud::{morph_pair, project, CanonicalView};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn view(size: usize) -> CanonicalView {
    CanonicalView {
        width: size,
        height: size,
        scale: size as f64 * 0.43,
        cx: size as f64 / 2.0,
        cy: size as f64 / 2.0,
        ..CanonicalView::default()
    }
}

fn stages(c: &mut Criterion) {
    let v = view(256);
    let (a, b) = (Ellipsoid::new(1.0, 0.9, 0.8, 1), Ellipsoid::new(0.9, 1.0, 0.7, 2));
    let (pa, pb) = (a.sampled_cloud(&v, 2), b.sampled_cloud(&v, 2));
    let (la, lb) = (a.landmarks(&v), b.landmarks(&v));
    let morph = morph_pair(&pa, &pb, &la, &lb, &v, 0.5).unwrap();

    let mut group = c.benchmark_group("stages");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new("project", name), &mode, |bench, &m| {
            bench.iter(|| with_execution(m, || project(&pa, &v).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("morph_pair", name), &mode, |bench, &m| {
            bench.iter(|| with_execution(m, || morph_pair(&pa, &pb, &la, &lb, &v, 0.5).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("eigen_features", name), &mode, |bench, &m| {
            bench.iter(|| with_execution(m, || local_eigen_features(&morph, 30).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("fill_holes", name), &mode, |bench, &m| {
            bench.iter(|| with_execution(m, || fill_holes(&morph, &v, &HoleFillConfig::default()).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);
