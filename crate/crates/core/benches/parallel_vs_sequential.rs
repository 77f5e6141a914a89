use std::hint::black_box;

use arb_core::exec::Exec;
use arb_core::oracle::oracle_check;
use arb_core::simulate::{run_many, Mode, RunConfig};
use arb_core::synth::{synthetic_prices, SynthConfig};
use chrono::{Duration, NaiveDate};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn modes() -> [(&'static str, Exec); 2] {
    [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)]
}

fn oracle_batch(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle_check_16");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(oracle_check(7, 16, exec)))
        });
    }
    g.finish();
}

fn window_sweep(c: &mut Criterion) {
    let start = NaiveDate::from_ymd_opt(2022, 1, 1).unwrap();
    let series = synthetic_prices("DE", start, 10, &SynthConfig::default(), 3).unwrap();
    let end = start + Duration::days(9);
    let configs: Vec<RunConfig> = [1, 2, 3, 4]
        .into_iter()
        .map(|l| RunConfig::new(Mode::Predictive, l, start, end))
        .collect();
    let mut g = c.benchmark_group("sweep_4_windows_10_days");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(run_many(&configs, &series, exec)))
        });
    }
    g.finish();
}

criterion_group!(benches, oracle_batch, window_sweep);
criterion_main!(benches);
