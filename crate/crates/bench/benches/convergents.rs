use std::hint::black_box;

use cfreq_core::cf::{basic_interval, convergents};
use cfreq_core::markov::CylinderGeometry;
use cfreq_core::CylinderWord;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn words(c: &mut Criterion) {
    let mut g = c.benchmark_group("convergents");
    for len in [10usize, 100, 1000] {
        let digits: Vec<u64> = (0..len as u64).map(|i| 1 + (i * 7919) % 100).collect();
        let w = CylinderWord::from_small(&digits).unwrap();
        g.bench_with_input(BenchmarkId::new("all", len), &w, |b, w| {
            b.iter(|| convergents(black_box(w)))
        });
        g.bench_with_input(BenchmarkId::new("interval", len), &w, |b, w| {
            b.iter(|| basic_interval(black_box(w)))
        });
    }
    g.finish();
}

fn geometry(c: &mut Criterion) {
    let mut g = c.benchmark_group("cylinder_geometry");
    g.sample_size(10);
    for (n, k) in [(20u64, 2usize), (10, 4), (5, 6)] {
        let alphabet: Vec<u64> = (1..=n).collect();
        g.bench_function(format!("N{n}_k{k}"), |b| {
            b.iter(|| CylinderGeometry::new(black_box(&alphabet), k))
        });
    }
    g.finish();
}

criterion_group!(benches, words, geometry);
criterion_main!(benches);
