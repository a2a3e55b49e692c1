use criterion::{black_box, criterion_group, criterion_main, Criterion};
use lsmm::linear::{dominant_params, dominant_reduction_pipeline, error_bound, index_J, solve_pi};
use lsmm::series::{assemble_nonlinear_family, solve_pde_series};
use lsmm::sim::{simulate_interconnection, DrivenSystem};
use lsmm::{Row, SimConfig, StateSpace};
use lsmm_bench::{fss, inverter};

fn linear(c: &mut Criterion) {
    let (sys, g) = fss();
    let model = dominant_reduction_pipeline(&sys, &g, 10).unwrap();
    c.bench_function("fss/solve_pi", |b| {
        b.iter(|| solve_pi(black_box(&sys), &g).unwrap())
    });
    c.bench_function("fss/dominant_pipeline", |b| {
        b.iter(|| dominant_reduction_pipeline(black_box(&sys), &g, 10).unwrap())
    });
    c.bench_function("fss/index_J", |b| {
        b.iter(|| index_J(black_box(&sys), &g, &model).unwrap())
    });
    c.bench_function("fss/error_bound", |b| {
        b.iter(|| error_bound(black_box(&sys), &g, &model).unwrap())
    });
}

fn nonlinear(c: &mut Criterion) {
    let (field, h, g) = inverter();
    c.bench_function("inverter/pde_series_d3", |b| {
        b.iter(|| solve_pde_series(black_box(&field), &h, &g, 3).unwrap())
    });
    let sol = solve_pde_series(&field, &h, &g, 3).unwrap();
    let (a, bv) = field.linearization();
    let mut out = Row::zeros(a.nrows());
    out[a.nrows() - 1] = 1.0;
    let sys = StateSpace::new(a, bv, out).unwrap();
    let params = dominant_params(&sys, &g, 4).unwrap();
    c.bench_function("inverter/assemble_nonlinear", |b| {
        b.iter(|| assemble_nonlinear_family(&g, black_box(&sol.mu), &params).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let (field, _, g) = inverter();
    let (a, bv) = field.linearization();
    let mut out = Row::zeros(a.nrows());
    out[a.nrows() - 1] = 1.0;
    let sys = StateSpace::new(a, bv, out).unwrap();
    let cfg = SimConfig {
        t_final: 50.0,
        ..SimConfig::default()
    };
    let systems: [&dyn DrivenSystem; 1] = [&sys];
    c.bench_function("inverter/simulate_linearization_50s", |b| {
        b.iter(|| simulate_interconnection(&g, black_box(&systems), &cfg).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = linear, nonlinear, simulation
}
criterion_main!(benches);
