use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use std::hint::black_box;

use kpplab_bench::{algebraic_profile, algebraic_state, far_field, logistic, tridiagonal_system};
use kpplab_core::fronts::solve_profile;
use kpplab_core::levelsets::state_crossings;
use kpplab_core::solver::step;
use kpplab_core::tridiag;

fn bench_tridiag(c: &mut Criterion) {
    let mut g = c.benchmark_group("tridiag");
    for n in [1_000, 10_000, 100_000] {
        let (lower, diag, upper, rhs) = tridiagonal_system(n);
        let mut scratch = vec![0.0; n];
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter_batched_ref(
                || rhs.clone(),
                |r| tridiag::solve(&lower, &diag, &upper, r, &mut scratch),
                BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

fn bench_step(c: &mut Criterion) {
    let p = algebraic_profile();
    let nl = logistic();
    let far = far_field(&p, &nl);
    let mut g = c.benchmark_group("strang_step");
    for n in [1_600, 6_400] {
        let state = algebraic_state(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter_batched_ref(
                || state.clone(),
                |s| step(s, 1e-2, &nl, &far, true).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

fn bench_front(c: &mut Criterion) {
    let nl = logistic();
    c.bench_function("solve_profile c=2.5", |b| {
        b.iter(|| solve_profile(black_box(2.5), &nl).unwrap())
    });
}

fn bench_crossings(c: &mut Criterion) {
    let state = algebraic_state(6_400);
    c.bench_function("state_crossings n=6400", |b| {
        b.iter(|| state_crossings(black_box(&state), 0.5))
    });
}

criterion_group!(
    benches,
    bench_tridiag,
    bench_step,
    bench_front,
    bench_crossings
);
criterion_main!(benches);
