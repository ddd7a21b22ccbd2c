//! Multi-seed sweep throughput: rayon fan-out (`run_seeds`, default
//! `parallel` feature) against the sequential reference path. Build with
//! `--no-default-features` to measure the fallback dispatch too.

use std::collections::BTreeMap;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use hiermon::scenario::Scenario;
use hiermon::sweep::{run_seeds, run_seeds_sequential};

fn reference_scenario() -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/paper-7node.toml");
    Scenario::load(&path, &BTreeMap::new()).expect("bundled scenario loads")
}

fn bench_sweep(c: &mut Criterion) {
    let scenario = reference_scenario();
    let mut group = c.benchmark_group("seed-sweep");
    group.sample_size(10);
    for seeds in [4usize, 16] {
        let seed_list: Vec<u64> = (1..=seeds as u64).collect();
        group.bench_with_input(
            BenchmarkId::new("parallel", seeds),
            &seed_list,
            |b, seed_list| {
                b.iter(|| run_seeds(&scenario, seed_list, None).unwrap());
            },
        );
        group.bench_with_input(
            BenchmarkId::new("sequential", seeds),
            &seed_list,
            |b, seed_list| {
                b.iter(|| run_seeds_sequential(&scenario, seed_list, None).unwrap());
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);
