use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sparsedisc::sls::{locality_mask, synthesize, DeltaConstraint, NormKind, SolverSettings};
use sparsedisc::{expm, project_a, SupportMask, DEFAULT_ACCURACY};
use sparsedisc_bench::{banded, chain_plant};

fn bench_expm(c: &mut Criterion) {
    let mut group = c.benchmark_group("expm");
    for n in [16, 64, 128] {
        let a = banded(n, 2) * 0.2;
        group.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| {
            b.iter(|| expm(black_box(a), DEFAULT_ACCURACY).unwrap())
        });
    }
    group.finish();
}

fn bench_project(c: &mut Criterion) {
    let mut group = c.benchmark_group("project_a");
    for n in [16, 64, 128] {
        let a = banded(n, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| {
            b.iter(|| project_a(black_box(a), 0.2).unwrap())
        });
    }
    group.finish();
}

fn bench_synthesize(c: &mut Criterion) {
    let mut group = c.benchmark_group("synthesize");
    group.sample_size(10);
    for n in [8, 16] {
        let plant = chain_plant(n);
        let adj = SupportMask::from_fn(n, n, |i, j| i.abs_diff(j) <= 1);
        let loc = locality_mask(&adj, &SupportMask::identity(n), 1, 4).unwrap();
        let settings = SolverSettings::default();
        group.bench_with_input(BenchmarkId::new("exact", n), &n, |b, _| {
            b.iter(|| {
                synthesize(&plant, &loc, 0.0, DeltaConstraint::Residual(NormKind::L1), &settings)
                    .unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("l1_cap", n), &n, |b, _| {
            b.iter(|| {
                synthesize(&plant, &loc, 0.2, DeltaConstraint::Residual(NormKind::L1), &settings)
                    .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_expm, bench_project, bench_synthesize);
criterion_main!(benches);
