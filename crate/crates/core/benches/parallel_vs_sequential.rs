use std::hint::black_box;

use biased_bb84::bb84sim::{simulate_with, ProtocolConfig};
use biased_bb84::channel::QubitChannel;
use biased_bb84::keyrate::{linspace, sweep};
use biased_bb84::Execution;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn bench_sweep(c: &mut Criterion) {
    let grid = linspace(0.0, 1.0, 64);
    let mut group = c.benchmark_group("sweep_64");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sweep(black_box(&grid), exec).unwrap())
        });
    }
    group.finish();
}

fn bench_simulate(c: &mut Criterion) {
    let ch = QubitChannel::amplitude_damping(0.2).unwrap();
    let cfg = ProtocolConfig::new(0.5, 0.5, 2_000_000, 1).unwrap();
    let mut group = c.benchmark_group("simulate_2e6");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simulate_with(&ch, black_box(&cfg), exec))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_sweep, bench_simulate);
criterion_main!(benches);
