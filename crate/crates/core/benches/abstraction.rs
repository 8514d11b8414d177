use std::sync::Arc;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ssabs_bdd::BddManager;
use ssabs_core::abstraction::{AbstractionProblem, Execution, Options};
use ssabs_core::encoding::BitOrder;
use ssabs_core::models::TrafficNetwork;
use ssabs_core::reach::{BoundaryRule, InputMode, Method, OverapproxScheme};
use ssabs_core::synthesis::*;

fn corridor(blocks: usize) -> OverapproxScheme {
    let net = TrafficNetwork::corridor(blocks);
    let states = net.state_grid(10).unwrap();
    let inputs = net.input_grid();
    OverapproxScheme::new(Arc::new(net), Method::Corner, states, inputs)
        .unwrap()
        .with_input_mode(InputMode::Centers)
        .with_boundary(BoundaryRule::Interior)
}

fn executions() -> Vec<(&'static str, Execution)> {
    let mut out = vec![("sequential", Execution::Sequential)];
    if cfg!(feature = "parallel") {
        out.push(("parallel", Execution::Parallel));
    }
    out
}

fn batched_evaluation(c: &mut Criterion) {
    let mut group = c.benchmark_group("overapprox_batches");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    for blocks in [2, 3] {
        let mgr = BddManager::new();
        let p = AbstractionProblem::new(&mgr, corridor(blocks), BitOrder::MsbFirst).unwrap();
        for (name, execution) in executions() {
            let opts = Options {
                execution,
                ..Options::default()
            };
            group.bench_with_input(BenchmarkId::new(name, 3 * blocks), &opts, |b, opts| {
                b.iter(|| p.ssa(opts).unwrap().stats.evals)
            });
        }
    }
    group.finish();
}

fn simulation_seeds(c: &mut Criterion) {
    let mgr = BddManager::new();
    let p = AbstractionProblem::new(&mgr, corridor(2), BitOrder::MsbFirst).unwrap();
    let t = p.ssa(&Options::default()).unwrap().transitions;
    let states = p.scheme().states();
    let spec = SafetySpec::upper_bound(states, 8.0);
    let safe = safe_set(&spec, states, p.encoding()).unwrap();
    let table = synthesize_safety(p.encoding(), &t, &safe).unwrap().table(p.encoding());
    let plant = Plant {
        model: p.scheme().model().as_ref(),
        states,
        inputs: p.scheme().inputs(),
        spec: &spec,
    };
    let cfg = SimulationConfig {
        steps: 200,
        input_policy: InputPolicy::Random,
        disturbance: DisturbancePolicy::Random,
        seed: 0,
    };
    let seeds: Vec<u64> = (0..64).collect();

    let mut group = c.benchmark_group("simulation_seeds");
    group.sample_size(10);
    for (name, execution) in executions() {
        group.bench_function(name, |b| {
            b.iter(|| plant.closed_loop_seeds(&table, &seeds, &cfg, execution).unwrap().len())
        });
    }
    group.finish();
}

criterion_group!(benches, batched_evaluation, simulation_seeds);
criterion_main!(benches);
