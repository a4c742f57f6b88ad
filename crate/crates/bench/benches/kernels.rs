use std::hint::black_box;

use covlab_core::matrixlab::{build_h, eigenvalues_sym, empirical_stieltjes, wishart_h};
use covlab_core::montecarlo::expansion_report;
use covlab_core::rng::stream;
use covlab_core::{
    expansion_prediction, semicircle_stieltjes, variance_functional, ComplexPoint, DataMatrix,
    EnsembleConfig, EntryDistribution, ModelTag, QuadratureSpec, RunOptions, TestFunction,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn analytic(c: &mut Criterion) {
    let z = ComplexPoint::new(0.3, 0.01);
    c.bench_function("semicircle_stieltjes", |b| {
        b.iter(|| semicircle_stieltjes(black_box(z)))
    });
    c.bench_function("expansion_prediction", |b| {
        b.iter(|| expansion_prediction(black_box(z), 64, 4096, -2.0))
    });
    let phi = TestFunction::builtin("tanh").unwrap();
    let mut group = c.benchmark_group("variance_functional");
    for order in [50, 200, 400] {
        let quad = QuadratureSpec::new(order, 1e-8).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(order), &quad, |b, &q| {
            b.iter(|| variance_functional(&phi, 0.0, q))
        });
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("h_spectrum");
    group.sample_size(20);
    let (n, m) = (64, 4096);
    group.bench_function("direct_gaussian", |b| {
        let mut rng = stream(1, 0);
        let dist = EntryDistribution::gaussian();
        b.iter(|| {
            let y = DataMatrix::sample(m, n, &dist, None, &mut rng).unwrap();
            eigenvalues_sym(&build_h(&y), ModelTag::SampleCov).unwrap()
        })
    });
    group.bench_function("bartlett_gaussian", |b| {
        let mut rng = stream(1, 1);
        b.iter(|| {
            eigenvalues_sym(&wishart_h(m, n, &mut rng).unwrap(), ModelTag::SampleCov).unwrap()
        })
    });
    group.finish();

    let mut rng = stream(2, 0);
    let s = eigenvalues_sym(&wishart_h(4096, 64, &mut rng).unwrap(), ModelTag::SampleCov).unwrap();
    let z = ComplexPoint::imaginary(2.0);
    c.bench_function("empirical_stieltjes", |b| {
        b.iter(|| empirical_stieltjes(black_box(&s), z))
    });
}

fn ensemble(c: &mut Criterion) {
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    let z = ComplexPoint::imaginary(2.0);
    for (name, dist) in [
        ("gaussian", EntryDistribution::gaussian()),
        ("rademacher", EntryDistribution::rademacher()),
    ] {
        let cfg = EnsembleConfig::new(32, 1024, dist).with_replicas(64);
        group.bench_function(name, |b| {
            b.iter(|| expansion_report(&cfg, z, &RunOptions::with_threads(1)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, analytic, sampling, ensemble);
criterion_main!(benches);
