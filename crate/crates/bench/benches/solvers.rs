use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use magnus_lq::models::quadrotor_benchmark;
use magnus_lq::nonlinear::{solve_taylor, LoopOptions, NonlinearProblem};
use magnus_lq::riccati::solve_riccati;
use magnus_lq::{numerics, Family, IntegratorSpec, LtvProblem, Matrix};

fn expm(c: &mut Criterion) {
    let m = Matrix::from_fn(12, 12, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5);
    c.bench_function("expm 12x12", |b| b.iter(|| numerics::expm(black_box(&m)).unwrap()));
}

fn riccati_sweep(c: &mut Criterion) {
    let (model, grid, x0) = quadrotor_benchmark();
    let prob = LtvProblem::constant(
        model.sdre_a(0.0, &x0),
        model.sdre_b(0.0, &x0),
        model.q(0.0, &x0),
        model.r(0.0, &x0),
    )
    .unwrap();
    let pf = Matrix::zeros(6, 6);
    let mut group = c.benchmark_group("quadrotor riccati sweep");
    for f in [Family::Magnus2Trapezoidal, Family::Magnus4Gauss, Family::RkImplicitMidpoint] {
        let spec = IntegratorSpec::new(f);
        group.bench_function(f.name(), |b| b.iter(|| solve_riccati(&prob, &grid, &spec, &pf).unwrap()));
    }
    group.finish();
}

fn taylor_magnus(c: &mut Criterion) {
    let (model, grid, x0) = quadrotor_benchmark();
    let spec = IntegratorSpec::new(Family::Magnus2Trapezoidal);
    let mut group = c.benchmark_group("quadrotor");
    group.sample_size(10);
    group.bench_function("taylor magnus2-trapezoidal", |b| {
        b.iter(|| solve_taylor(&model, &grid, &x0, &spec, &LoopOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, expm, riccati_sweep, taylor_magnus);
criterion_main!(benches);
