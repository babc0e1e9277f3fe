use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use vvot::bl::d_bl;
use vvot::dynamic::prox_perspective;
use vvot::lifted::{lot_embed, sample_reference, SimplexCost};
use vvot::pde;
use vvot::static_ot::{d_w_matrix, triangle_failure_witness, w2w, WitnessSearch};
use vvot::{w_dynamic, wg_dynamic, wg_two_node, GridConfig, Interpolation, SolverConfig, WeightedGraph};
use vvot_bench::instance;

fn closed_forms(c: &mut Criterion) {
    let f = Interpolation::Geometric;
    c.bench_function("wg_two_node geometric", |b| b.iter(|| wg_two_node(&f, 1.0, black_box(0.1), black_box(0.9))));
    c.bench_function("triangle_failure_witness", |b| {
        b.iter(|| triangle_failure_witness(&f, 1.0, &WitnessSearch::default()))
    });
    c.bench_function("prox_perspective", |b| b.iter(|| prox_perspective(black_box(&[0.7, -0.2]), black_box(-0.3), 0.5)));
}

fn static_metrics(c: &mut Criterion) {
    let (g, mu, nu) = instance(7001, 4);
    let d_w = d_w_matrix(&g, &Interpolation::Geometric, 16, &SolverConfig::default()).unwrap();
    c.bench_function("w2w 4 atoms, 3 species", |b| b.iter(|| w2w(&mu, &nu, &d_w)));
    c.bench_function("d_bl 4 atoms, 3 species", |b| b.iter(|| d_bl(&mu, &nu)));
    let reference = sample_reference(64, 3, 1, 7).unwrap();
    c.bench_function("lot_embed 64 reference atoms", |b| b.iter(|| lot_embed(&reference, &mu, SimplexCost::Euclidean)));
}

fn dynamic_solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("dynamic");
    group.sample_size(10);
    let g = WeightedGraph::two_node(1.0).unwrap();
    let cfg = SolverConfig::default();
    group.bench_function("wg_dynamic arithmetic T=64", |b| {
        b.iter(|| wg_dynamic(&g, &Interpolation::Arithmetic, &[1.0, 0.0], &[0.0, 1.0], 64, &cfg))
    });
    let (g, mu, nu) = instance(7000, 4);
    let grid = GridConfig::new(-1.25, 1.25, 16).unwrap();
    let cfg = SolverConfig { max_iter: 2000, tol: 1e-6, ..SolverConfig::default() };
    group.bench_function("w_dynamic 16 cells x 8 steps", |b| {
        b.iter(|| w_dynamic(&g, &Interpolation::Geometric, &mu, &nu, &grid, 8, &cfg))
    });
    group.finish();
}

fn pde_steps(c: &mut Criterion) {
    let cfg = pde::confinement_case(3, 1.0);
    let state = pde::bump_state(&cfg);
    c.bench_function("pde step 40 cells, 3 species", |b| b.iter(|| pde::step(&state, &cfg)));
}

criterion_group!(benches, closed_forms, static_metrics, dynamic_solvers, pde_steps);
criterion_main!(benches);
