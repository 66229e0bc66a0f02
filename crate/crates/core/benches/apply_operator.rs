use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use exterior_decay::config::RunConfig;
use exterior_decay::par;
use exterior_decay::solver::{self, SolverConfig};

fn mode() -> &'static str {
    if par::is_parallel() {
        "parallel"
    } else {
        "sequential"
    }
}

fn discretization(nodes: usize) -> exterior_decay::discretization::Discretization {
    let mut cfg = RunConfig::canonical();
    cfg.grid.n = nodes;
    cfg.discretization().unwrap()
}

fn apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_operator");
    for nodes in [1024, 4096, 16384] {
        let disc = discretization(nodes);
        let b = disc.alpha.clone();
        group.bench_with_input(BenchmarkId::new(mode(), nodes), &nodes, |bch, _| {
            bch.iter(|| solver::apply_operator(&disc, &b).unwrap())
        });
        if par::is_parallel() {
            // the same code path confined to one worker
            group.bench_with_input(BenchmarkId::new("one-worker", nodes), &nodes, |bch, _| {
                par::with_threads(1, || bch.iter(|| solver::apply_operator(&disc, &b).unwrap()))
            });
        }
    }
    group.finish();
}

fn picard(c: &mut Criterion) {
    let mut group = c.benchmark_group("picard_solve");
    group.sample_size(10);
    let cfg = SolverConfig::default();
    for nodes in [1024, 4096] {
        let disc = discretization(nodes);
        group.bench_with_input(BenchmarkId::new(mode(), nodes), &nodes, |bch, _| {
            bch.iter(|| solver::picard_solve(&disc, &cfg).unwrap())
        });
        if par::is_parallel() {
            group.bench_with_input(BenchmarkId::new("one-worker", nodes), &nodes, |bch, _| {
                par::with_threads(1, || bch.iter(|| solver::picard_solve(&disc, &cfg).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, apply, picard);
criterion_main!(benches);
