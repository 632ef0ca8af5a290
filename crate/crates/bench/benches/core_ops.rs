use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use nalgebra::DVector;
use volterra_bench::{convolution_kernel, mesh, smooth_path};
use volterra_core::inclusion::{sample_funnel, SetField};
use volterra_core::kernel::catalog;
use volterra_core::mesh::Path;
use volterra_core::operator::{apply_volterra, invert_volterra};
use volterra_core::set::ConvexSet;
use volterra_core::solver::{solve_equation, SolverConfig};
use volterra_core::GrowthData;

fn bench_apply(c: &mut Criterion) {
    let kernel = convolution_kernel();
    let mut group = c.benchmark_group("apply_volterra");
    for n in [101usize, 401, 1001] {
        let m = mesh(n);
        let w = smooth_path(&m);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| apply_volterra(black_box(&kernel), black_box(&w)).unwrap())
        });
    }
    group.finish();
}

fn bench_invert(c: &mut Criterion) {
    let kernel = convolution_kernel();
    let mut group = c.benchmark_group("invert_volterra");
    for n in [101usize, 401] {
        let m = mesh(n);
        let y = apply_volterra(&kernel, &smooth_path(&m)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| invert_volterra(black_box(&kernel), black_box(&y)).unwrap())
        });
    }
    group.finish();
}

fn bench_solve(c: &mut Criterion) {
    let kernel = catalog("identity", 1.0, 1).unwrap();
    let cfg = SolverConfig::default();
    let mut group = c.benchmark_group("solve_exp_growth");
    group.sample_size(20);
    for n in [101usize, 401] {
        let m = mesh(n);
        let h = Path::from_scalar_fn(m.clone(), |_| 1.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                solve_equation(
                    black_box(&kernel),
                    &|_t, v: &DVector<f64>| v.clone(),
                    black_box(&h),
                    &cfg,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn bench_funnel(c: &mut Criterion) {
    let kernel = catalog("identity", 1.0, 1).unwrap();
    let m = mesh(101);
    let h = Path::zero(m.clone());
    let field = SetField::constant(
        "interval[-1,1]",
        ConvexSet::interval(-1.0, 1.0).unwrap(),
        GrowthData::constant(m.len(), 1.0, 0.0, 1.0).unwrap(),
    )
    .unwrap();
    let cfg = SolverConfig::default();
    let mut group = c.benchmark_group("sample_funnel");
    group.sample_size(10);
    group.bench_function("32_samples_n101", |b| {
        b.iter(|| sample_funnel(black_box(&kernel), &field, &h, 32, 1, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_apply, bench_invert, bench_solve, bench_funnel);
criterion_main!(benches);
