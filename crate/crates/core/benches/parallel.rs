//! Sequential against data-parallel execution on the heavy loops.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cvbell::bell::{optimize_angles, sweep_r0, AngleMode, OptimizerSettings, SweepSettings};
use cvbell::fock::circle_state_coeffs;
use cvbell::homodyne::{outcome_gram, BlockSolver, LocalOscillator};
use cvbell::lhv::{max_exact_lhv_s, random_angles};
use cvbell::quadrature::Outcome;
use cvbell::sampling::sample_sign_probability;
use cvbell::Execution;

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("sweep_r0");
    let settings = SweepSettings::new(0.01, 2.0, 0.01, AngleMode::Paper);
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| b.iter(|| sweep_r0(black_box(&settings), exec).unwrap()));
    }
    g.finish();
}

fn optimizer(c: &mut Criterion) {
    let mut g = c.benchmark_group("optimize_angles");
    g.sample_size(10);
    let state = circle_state_coeffs(1.1, 1e-12).unwrap();
    let settings = OptimizerSettings::default();
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| b.iter(|| optimize_angles(black_box(&state), &settings, exec).unwrap()));
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut g = c.benchmark_group("sign_probability_mc");
    g.sample_size(10);
    let state = circle_state_coeffs(1.1, 1e-12).unwrap();
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| {
            b.iter(|| sample_sign_probability(black_box(&state), 0.7, Outcome::Plus, Outcome::Plus, 100_000, 3, exec).unwrap())
        });
    }
    g.finish();
}

fn homodyne(c: &mut Criterion) {
    let mut g = c.benchmark_group("homodyne_gram");
    g.sample_size(10);
    let state = circle_state_coeffs(1.1, 1e-12).unwrap();
    let lo = LocalOscillator::new(10.0).unwrap();
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::new(name, "E=10"), &lo, |b, lo| {
            b.iter(|| outcome_gram(state.cutoff(), lo, BlockSolver::Analytic, exec).unwrap())
        });
    }
    g.finish();
}

fn lhv_scan(c: &mut Criterion) {
    let mut g = c.benchmark_group("lhv_angle_scan");
    let state = circle_state_coeffs(1.1, 1e-12).unwrap();
    let angles = random_angles(10_000, 5);
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| b.iter(|| max_exact_lhv_s(black_box(&state), &angles, exec)));
    }
    g.finish();
}

criterion_group!(benches, sweep, optimizer, monte_carlo, homodyne, lhv_scan);
criterion_main!(benches);
