use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use lngplan::generator::{generate_instance, GeneratorParams};
use lngplan::parallel::Parallelism;
use lngplan::pipeline::{default_grid, Evaluator, RunConfig};
use lngplan::trips::{generate_trips_with, TripConfig};
use lngplan::ttopt::{optimize, TtOptions};

const MODES: [Parallelism; 2] = [Parallelism::Sequential, Parallelism::Parallel];

fn trip_generation(c: &mut Criterion) {
    let inst = generate_instance(1, &GeneratorParams::default()).expect("instance");
    let mut g = c.benchmark_group("trip_generation");
    g.sample_size(10);
    for mode in MODES {
        let cfg = TripConfig {
            max_idle_days: Some(30.0),
            parallelism: mode,
        };
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &cfg, |b, cfg| {
            b.iter(|| black_box(generate_trips_with(&inst, cfg).len()))
        });
    }
    g.finish();
}

fn tuning_batches(c: &mut Criterion) {
    let params = GeneratorParams {
        n_vessels: 2,
        n_buy: 12,
        n_sell: 40,
        horizon_days: 300,
        ..GeneratorParams::default()
    };
    let inst = generate_instance(2, &params).expect("instance");
    let run = RunConfig::default();
    let trips = generate_trips_with(&inst, &TripConfig::default());
    let grid = default_grid(&inst, &trips, &run.tuning);
    let mut g = c.benchmark_group("tuning_batches");
    g.sample_size(10);
    for mode in MODES {
        let opts = TtOptions {
            budget: 16,
            rank: 1,
            seed: 0,
            parallelism: mode,
        };
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &opts, |b, opts| {
            b.iter(|| {
                // A fresh evaluator per iteration so the cache does not hide the work.
                let eval = Evaluator::new(&inst, &trips, &run);
                black_box(optimize(|o, r| eval.evaluate(o, r).map(|e| e.profit), &grid, opts).best_value)
            })
        });
    }
    g.finish();
}

criterion_group!(benches, trip_generation, tuning_batches);
criterion_main!(benches);
