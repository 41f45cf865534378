use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gvr_core::experiments::occupancy_training;
use gvr_core::game::make_random_its_matrix;
use gvr_core::graph::{build_graph_with, GraphOptions, QProvider};
use gvr_core::learners::{stn_occupancy_experiment, GvrConfig};
use gvr_core::par::Exec;

const BACKENDS: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn graphs(c: &mut Criterion) {
    let mut group = c.benchmark_group("transition_graph");
    for (n, m) in [(3, 5), (4, 4)] {
        let game = make_random_its_matrix(n, m, 7.8, 6.0, -20.0, 6.0, 0).unwrap().0;
        for (label, exec) in BACKENDS {
            let opts = GraphOptions { exec, ..GraphOptions::default() };
            group.bench_with_input(BenchmarkId::new(label, format!("{m}^{n}")), &game, |b, g| {
                b.iter(|| build_graph_with(g, 0.2, QProvider::its(0.1, 0.1), &opts).unwrap())
            });
        }
    }
    group.finish();
}

fn occupancy(c: &mut Criterion) {
    let mut group = c.benchmark_group("stn_occupancy");
    group.sample_size(10);
    let games: Vec<_> = (0..2).map(|s| make_random_its_matrix(4, 3, 7.8, 6.0, -20.0, 6.0, s).unwrap().0).collect();
    let cfg = GvrConfig { iterations: 200, ..occupancy_training() };
    for (label, exec) in BACKENDS {
        group.bench_function(label, |b| {
            b.iter(|| stn_occupancy_experiment(&games, &[0.2, 0.8], 8, &cfg, 0, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, graphs, occupancy);
criterion_main!(benches);
