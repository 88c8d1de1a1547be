use std::hint::black_box;

use covcal::models::ising::{log_partition, simulate_field, Boundary, IsingModel};
use covcal::models::TemperedNormal;
use covcal::regression::fit;
use covcal::rng::{auxiliary_rng, replicate_rng};
use covcal::{run_proposal_bank, run_regression_bank, CalibrationConfig, DistanceKind, Model, SetSource};
use criterion::{criterion_group, criterion_main, Criterion};

fn partition(c: &mut Criterion) {
    let mut g = c.benchmark_group("log_partition");
    for n in [4, 8, 12] {
        g.bench_function(format!("free N={n}"), |b| {
            b.iter(|| log_partition(black_box(n), Boundary::Free, 0.8))
        });
    }
    g.bench_function("periodic N=8", |b| {
        b.iter(|| log_partition(black_box(8), Boundary::Periodic, 0.8))
    });
    g.finish();
}

fn gibbs(c: &mut Criterion) {
    c.bench_function("gibbs N=4 2000 sweeps", |b| {
        let mut rng = replicate_rng(1, 0);
        b.iter(|| simulate_field(4, Boundary::Free, black_box(0.8), 2000, &mut rng))
    });
}

fn banks(c: &mut Criterion) {
    let mut g = c.benchmark_group("banks");
    g.sample_size(10);
    let normal = TemperedNormal::new(0.5).unwrap();
    let cfg = CalibrationConfig {
        replicates: 10_000,
        rho: 0.3,
        ..CalibrationConfig::default()
    };
    g.bench_function("normal IS M=10000", |b| {
        b.iter(|| run_proposal_bank(&normal, &1.0, &cfg, DistanceKind::Summary).unwrap())
    });
    let sampled = CalibrationConfig {
        replicates: 2000,
        posterior_draws: 500,
        set_source: SetSource::Samples,
        ..cfg.clone()
    };
    g.bench_function("normal curve bank M=2000 J=500", |b| {
        b.iter(|| run_proposal_bank(&normal, &1.0, &sampled, DistanceKind::KsSamples).unwrap())
    });

    let ising = IsingModel::new(4).unwrap();
    let y = ising.simulate(0.8, &mut auxiliary_rng(1, 1)).unwrap();
    let small = CalibrationConfig {
        alpha: 0.95,
        replicates: 500,
        rho: 0.05,
        ..CalibrationConfig::default()
    };
    g.bench_function("ising IS M=500 ks", |b| {
        b.iter(|| run_proposal_bank(&ising, &y, &small, DistanceKind::KsGrid).unwrap())
    });
    g.finish();
}

fn regression(c: &mut Criterion) {
    let model = TemperedNormal::new(0.0).unwrap();
    let bank = run_regression_bank(
        &model,
        &CalibrationConfig {
            replicates: 10_000,
            ..CalibrationConfig::default()
        },
    )
    .unwrap();
    let (covered, summaries) = (bank.covered(), bank.summaries());
    let mut g = c.benchmark_group("regression");
    g.sample_size(10);
    g.bench_function("cv fit M=10000 k=10", |b| {
        b.iter(|| fit(&covered, &summaries, 10).unwrap())
    });
    g.finish();
}

criterion_group!(benches, partition, gibbs, banks, regression);
criterion_main!(benches);
