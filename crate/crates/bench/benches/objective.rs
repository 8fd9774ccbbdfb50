use std::hint::black_box;

use chansim_bench::{extreme, fixture};
use chansim_core::ansatz::extreme_choi;
use chansim_core::channel::trace_distance;
use chansim_core::circuit::synthesize;
use chansim_core::decompose::surrogate::Surrogate;
use chansim_core::decompose::FlatObjective;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn objective(c: &mut Criterion) {
    let mut g = c.benchmark_group("objective");
    for d in 2..5 {
        let f = fixture(d, 1);
        let obj = FlatObjective::new(&f.target, d).unwrap();
        g.bench_with_input(BenchmarkId::new("trace_distance", d), &f.flat, |b, x| {
            b.iter(|| obj.eval(black_box(x)))
        });
        let sur = Surrogate::new(&f.target, d).unwrap();
        g.bench_with_input(
            BenchmarkId::new("surrogate_gradient", d),
            &f.flat,
            |b, x| b.iter(|| sur.value_and_gradient(black_box(x))),
        );
    }
    g.finish();
}

fn components(c: &mut Criterion) {
    let mut g = c.benchmark_group("component");
    for d in 2..5 {
        let p = extreme(d, 2);
        g.bench_with_input(BenchmarkId::new("extreme_choi", d), &p, |b, p| {
            b.iter(|| extreme_choi(black_box(p)))
        });
        g.bench_with_input(BenchmarkId::new("synthesize", d), &p, |b, p| {
            b.iter(|| synthesize(black_box(p)))
        });
        let f = fixture(d, 3);
        let m = extreme_choi(&p).unwrap();
        g.bench_with_input(BenchmarkId::new("choi_trace_distance", d), &m, |b, m| {
            b.iter(|| trace_distance(black_box(f.target.matrix()), black_box(m.matrix())))
        });
    }
    g.finish();
}

criterion_group!(benches, objective, components);
criterion_main!(benches);
