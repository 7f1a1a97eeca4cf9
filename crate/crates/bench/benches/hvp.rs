use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use v2xpos_bench::{mixed_scenario, oracle_scenario};
use v2xpos_core::hvp::{
    classify_and_solve, solve_linear, solve_trajectory, ClassifyConfig, SolveOptions,
    TrajectorySearch,
};

fn bench_solve_linear(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_linear");
    for n in [3usize, 6] {
        let (scenario, paths) = oracle_scenario(n);
        let opts = SolveOptions::default();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| solve_linear(&paths, scenario.anchor, &opts).unwrap())
        });
    }
    group.finish();
}

fn bench_solve_trajectory(c: &mut Criterion) {
    let (scenario, paths) = oracle_scenario(3);
    let opts = SolveOptions::default();
    let search = TrajectorySearch {
        d1_min_m: 1.0,
        d1_max_m: 2000.0,
        grid: 4096,
        tolerance_m: 1e-3,
    };
    c.bench_function("solve_trajectory/grid4096", |b| {
        b.iter(|| solve_trajectory(&paths, scenario.anchor, &search, &opts).unwrap())
    });
}

fn bench_classify(c: &mut Criterion) {
    let (scenario, paths) = mixed_scenario();
    let cfg = ClassifyConfig::default();
    let map = scenario.scatterer_map();
    c.bench_function("classify_and_solve/3+2", |b| {
        b.iter(|| classify_and_solve(&paths, scenario.anchor, &cfg, Some(&map)).unwrap())
    });
}

criterion_group!(benches, bench_solve_linear, bench_solve_trajectory, bench_classify);
criterion_main!(benches);
