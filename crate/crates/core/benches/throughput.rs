//! Sequential vs rayon throughput on the data-parallel hot spots.
//!
//! `cargo bench -p wgqed-core` times both paths in one run; with
//! `--no-default-features` the library's parallel helpers fall back to plain
//! iteration and the "parallel" rows measure that build instead.

use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wgqed::analysis::{fit_relaxation_with, run_sweep, FitModel, SolverPair, SweepConfig};
use wgqed::dynamics::uniform_grid;
use wgqed::kernels::alpha_discrete;
use wgqed::model::ModelParams;
use wgqed::par;

fn mode() -> &'static str {
    if par::is_parallel() {
        "rayon"
    } else {
        "sequential-build"
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get()).max(2)
}

fn kernel_table(c: &mut Criterion) {
    let p = ModelParams::standard(2048, vec![0], 50.0);
    let grid = uniform_grid(10.0, 0.01);
    let separations: Vec<i64> = (0..32).collect();
    let mut g = c.benchmark_group("kernel_table");
    g.sample_size(10);
    g.bench_function("sequential", |b| {
        b.iter(|| separations.iter().map(|&l| alpha_discrete(&p, l, &grid).unwrap()).collect::<Vec<_>>())
    });
    g.bench_function(mode(), |b| {
        b.iter(|| par::with_workers(workers(), || par::map(&separations, |&l| alpha_discrete(&p, l, &grid).unwrap())))
    });
    g.finish();
}

fn multistart_fit(c: &mut Criterion) {
    let t = uniform_grid(60.0, 0.05);
    let y: Vec<f64> = t
        .iter()
        .map(|&t| 0.6 * (2.0 * t).cos() * (-0.05 * t).exp() + 0.1 * ((-0.5 * t).exp() - 1.0) + 0.4)
        .collect();
    let mut g = c.benchmark_group("multistart_fit");
    g.sample_size(10);
    for w in [1, workers()] {
        g.bench_with_input(BenchmarkId::new(mode(), format!("{w} workers")), &w, |b, &w| {
            b.iter(|| par::with_workers(w, || fit_relaxation_with(FitModel::Full, black_box(&t), &y, 1.0).unwrap()))
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let model = ModelParams::standard(200, vec![0], 50.0);
    let mut cfg = SweepConfig::new(model, vec![1, 2, 3, 4], vec![49.0, 50.5, 51.0, 52.0], SolverPair::Tcl2VsEd);
    cfg.t_max = 5.0;
    let mut g = c.benchmark_group("sweep_4x4");
    g.sample_size(10).measurement_time(Duration::from_secs(20));
    for w in [1, workers()] {
        g.bench_with_input(BenchmarkId::new(mode(), format!("{w} workers")), &w, |b, &w| {
            let mut cfg = cfg.clone();
            cfg.workers = w;
            b.iter(|| run_sweep(&cfg, None, false).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, kernel_table, multistart_fit, sweep);
criterion_main!(benches);
