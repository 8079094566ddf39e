use criterion::{criterion_group, criterion_main, Criterion};
use pedwarn_bench::small_city;
use pedwarn_core::geometry::{line_of_sight, Point};
use pedwarn_core::{simulate, Algorithm, AlgorithmConfig, ChannelConfig, SyntheticParams};
use std::hint::black_box;

fn bench_simulate(c: &mut Criterion) {
    let (map, trace) = small_city();
    let algs: Vec<AlgorithmConfig> = Algorithm::ALL.iter().map(|&a| AlgorithmConfig::new(a, 70.0, 10.0)).collect();
    c.bench_function("simulate_small_city", |b| {
        b.iter(|| simulate(black_box(&trace), &map, &ChannelConfig::default(), &algs, 1).unwrap())
    });
}

fn bench_generate(c: &mut Criterion) {
    let params = SyntheticParams { blocks_x: 2, blocks_y: 2, duration: 60.0, ..SyntheticParams::default() };
    c.bench_function("generate_60s", |b| b.iter(|| pedwarn_core::trace::generate_synthetic(black_box(&params)).unwrap()));
}

fn bench_los(c: &mut Criterion) {
    let (map, _) = small_city();
    let p = Point::new(-20.0, 1.5);
    let q = Point::new(160.0, 80.0);
    c.bench_function("los_indexed", |b| b.iter(|| map.line_of_sight(black_box(p), black_box(q))));
    c.bench_function("los_linear", |b| {
        b.iter(|| line_of_sight(black_box(p), black_box(q), map.buildings().iter().map(|b| &b.footprint)))
    });
}

criterion_group!(benches, bench_simulate, bench_generate, bench_los);
criterion_main!(benches);
