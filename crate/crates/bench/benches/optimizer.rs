use std::hint::black_box;

use cfreq_core::markov::FrequencyVector;
use cfreq_core::optimizer::{solve_alpha, SolverOptions, VariationalProblem};
use criterion::{criterion_group, criterion_main, Criterion};

fn gauss_cells(c: &mut Criterion) {
    let g = FrequencyVector::gauss();
    let mut group = c.benchmark_group("solve_alpha_gauss");
    group.sample_size(10);
    for (n, k) in [(5u64, 2usize), (10, 2), (20, 2), (5, 3), (10, 3)] {
        let p = VariationalProblem::new(&g, n, k, SolverOptions::default()).unwrap();
        group.bench_function(format!("N{n}_k{k}"), |b| {
            b.iter(|| solve_alpha(black_box(&p)))
        });
    }
    group.finish();
}

criterion_group!(benches, gauss_cells);
criterion_main!(benches);
