use criterion::{black_box, criterion_group, criterion_main, Criterion};
use stvs_core::case::{ieee39, parse_scenarios, FaultScenario};
use stvs_core::indexes::monitored_indexes;
use stvs_core::network::StageTag;
use stvs_core::powerflow::initial_flux;
use stvs_core::simulate::SimOptions;
use stvs_core::solve_power_flow;
use stvs_core::study::Study;

fn scenario() -> FaultScenario {
    parse_scenarios(include_str!("../../core/data/scenarios/flt_1727.json")).unwrap().remove(0)
}

fn pipeline(c: &mut Criterion) {
    let case = ieee39();
    let sc = scenario();
    let study = Study::new(case.clone()).unwrap();

    c.bench_function("initial_flux", |b| {
        b.iter(|| initial_flux(black_box(0.7), black_box(0.25), black_box(1.03), 1.7, 0.3))
    });
    c.bench_function("power_flow_ieee39", |b| b.iter(|| solve_power_flow(black_box(&case)).unwrap()));
    c.bench_function("r_matrix_fault_stage", |b| b.iter(|| study.r_matrix(Some(&sc), StageTag::Flt).unwrap()));
    c.bench_function("analytic_solution", |b| b.iter(|| study.analytic(&sc).unwrap()));
    // The security check path: indexes only, no time simulation.
    c.bench_function("monitored_indexes", |b| b.iter(|| monitored_indexes(&study, &sc).unwrap()));

    let mut g = c.benchmark_group("simulation");
    g.sample_size(10);
    let opts = SimOptions {
        t_end: 0.6,
        ..SimOptions::default()
    };
    g.bench_function("fault_run_0.6s", |b| b.iter(|| study.simulate(Some(&sc), &opts).unwrap()));
    g.finish();
}

criterion_group!(benches, pipeline);
criterion_main!(benches);
