//! Ensemble throughput with the rayon pool against a plain sequential loop.
//!
//! `cargo bench --bench ensemble` compares both in one run; building with
//! `--no-default-features` makes the library side sequential as well.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use strelcast::bayes::{gibbs_run, predictive_draws, McmcConfig, ModelConfig, Variant};
use strelcast::par;
use strelcast::pipeline::SyntheticSpec;
use strelcast::strel::{monitor, monitor_ensemble, Mode, PropertyParams};
use strelcast::{SpatialGrid, StaticLabels, Trace};

fn random_ensemble(n_traces: usize, grid: &SpatialGrid, horizon: usize) -> Vec<Trace> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..n_traces)
        .map(|_| {
            let n = grid.n_locations() * (horizon + 1);
            let values = (0..n).map(|_| rng.random_range(300.0..700.0)).collect();
            Trace::new(grid.n_locations(), horizon + 1, values).unwrap()
        })
        .collect()
}

fn bench_monitor(c: &mut Criterion) {
    let grid = SpatialGrid::queen(21, 21).unwrap();
    let mut labels = StaticLabels::new();
    labels.insert("hospital", [24, 110, 220, 330, 416]);
    let formulas = PropertyParams::default().formulas().unwrap();
    let traces = random_ensemble(100, &grid, 4);

    let mut group = c.benchmark_group("monitor_ensemble");
    group.sample_size(10);
    for (name, f) in &formulas {
        group.bench_with_input(BenchmarkId::new("parallel", name), f, |b, f| {
            b.iter(|| monitor_ensemble(f, &traces, &grid, &labels, Mode::Robustness).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", name), f, |b, f| {
            b.iter(|| {
                traces
                    .iter()
                    .map(|t| monitor(f, t, &grid, &labels, Mode::Robustness).unwrap())
                    .collect::<Vec<_>>()
            })
        });
    }
    group.finish();
}

fn bench_predictive(c: &mut Criterion) {
    let mut spec = SyntheticSpec::default_7x7();
    spec.n_times = 200;
    let (panel, gs) = spec.generate().unwrap();
    let (grid, _) = gs.build().unwrap();
    let cfg = ModelConfig {
        mcmc: McmcConfig {
            iters: 1200,
            burnin: 200,
            thin: 1,
            keep_latent: false,
        },
        ..ModelConfig::new(Variant::CarAr, spec.frequencies.clone())
    };
    let fit = gibbs_run(&panel, &grid, &cfg).unwrap();

    let mut group = c.benchmark_group("predictive_draws");
    group.sample_size(10);
    group.bench_function("parallel", |b| b.iter(|| predictive_draws(&fit, 6, 1).unwrap()));
    group.bench_function("sequential", |b| {
        b.iter(|| par::with_workers(1, || predictive_draws(&fit, 6, 1).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_monitor, bench_predictive);
criterion_main!(benches);
