use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use phieq::equilibrium::safe_best_response;
use phieq::polymatrix::player_regret;
use phieq::qvi::{flatten, qvi_gap};
use phieq::reduction::reduce;
use phieq::{lp_solve, ProductStrategy};
use phieq_bench::{dense_lp, polymatrix, reduced, reduced_qvi, tilted};

fn lp(c: &mut Criterion) {
    let mut group = c.benchmark_group("lp_solve");
    for (n, m) in [(4, 6), (16, 24), (36, 40)] {
        let lp = dense_lp(n, m);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{m}")), &lp, |b, lp| {
            b.iter(|| lp_solve(black_box(lp)).unwrap())
        });
    }
    group.finish();
}

fn safe_response(c: &mut Criterion) {
    let mut group = c.benchmark_group("safe_best_response");
    for (n, k) in [(2, 2), (3, 3)] {
        let inst = reduced(n, k, 11);
        let z = tilted(2 * n, k).to_mixture();
        group.bench_function(format!("left player n={n} k={k}"), |b| {
            b.iter(|| safe_best_response(&inst.game, 0, black_box(&z), &inst.deviations, 0.0).unwrap())
        });
    }
    group.finish();
}

fn gap(c: &mut Criterion) {
    let mut group = c.benchmark_group("qvi_gap");
    for (n, k) in [(2, 2), (3, 2), (2, 3)] {
        let qvi = reduced_qvi(n, k, 5);
        let z = flatten(&ProductStrategy::uniform(2 * n, k));
        group.bench_function(format!("reduced n={n} k={k}"), |b| b.iter(|| qvi_gap(&qvi, black_box(&z)).unwrap()));
    }
    group.finish();
}

fn reduction(c: &mut Criterion) {
    let g = polymatrix(8, 4, 3);
    c.bench_function("reduce n=8 k=4", |b| b.iter(|| reduce(black_box(&g), 0.5).unwrap()));
}

fn regret(c: &mut Criterion) {
    let g = polymatrix(12, 4, 9);
    let x = tilted(12, 4);
    c.bench_function("player_regret n=12 k=4", |b| {
        b.iter(|| (0..12).map(|i| player_regret(&g, black_box(&x), i).unwrap()).fold(0.0, f64::max))
    });
}

criterion_group!(benches, lp, safe_response, gap, reduction, regret);
criterion_main!(benches);
