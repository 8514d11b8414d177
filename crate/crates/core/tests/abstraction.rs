mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssabs_bdd::{BddManager, BigUint};
use ssabs_core::abstraction::{enumerate_transitions, Algorithm, Options, Transition};
use ssabs_core::depgraph::Dependency;
use ssabs_core::models::RandomSystem;
use ssabs_core::reach::{BoundaryRule, Method, OverapproxScheme};

use common::*;

#[test]
fn projected_sweep_matches_brute_force_on_random_systems() {
    for seed in 0..60 {
        let mgr = BddManager::new();
        let p = problem(&mgr, random_scheme(seed));
        let bfa = p.bfa(&Options::sequential()).unwrap();
        let ssa = p.ssa(&Options::default()).unwrap();
        assert_eq!(bfa.transitions, ssa.transitions, "seed {seed}");
        assert_eq!(bfa.stats.transitions, ssa.stats.transitions);
    }
}

#[test]
fn projected_sweep_matches_brute_force_on_small_corridor() {
    for rule in [BoundaryRule::Inclusive, BoundaryRule::Interior] {
        let mgr = BddManager::new();
        let p = problem(&mgr, corridor_scheme(1, rule));
        let bfa = p.run(Algorithm::Bfa, &Options::default()).unwrap();
        let ssa = p.run(Algorithm::Ssa, &Options::sequential()).unwrap();
        assert_eq!(bfa.transitions, ssa.transitions);
        assert_eq!(bfa.stats.method, "bfa");
        assert_eq!(ssa.stats.method, "ssa");
    }
}

#[test]
fn corridor_transitions_match_explicit_oracle() {
    for rule in [BoundaryRule::Inclusive, BoundaryRule::Interior] {
        let scheme = corridor_scheme(1, rule);
        let oracle = corner_oracle(&scheme);
        let mgr = BddManager::new();
        let p = problem(&mgr, scheme);
        let r = p.ssa(&Options::default()).unwrap();
        let decoded: BTreeSet<Transition> = enumerate_transitions(p.encoding(), &r.transitions, 1 << 20)
            .unwrap()
            .into_iter()
            .collect();
        assert_eq!(decoded.len(), oracle.len());
        assert!(decoded == oracle, "{rule:?}");
        assert_eq!(r.stats.transitions, oracle.len().to_string());
    }
}

#[test]
fn random_transitions_match_explicit_oracle() {
    for seed in 100..130 {
        let scheme = random_scheme(seed);
        let oracle = corner_oracle(&scheme);
        let mgr = BddManager::new();
        let p = problem(&mgr, scheme);
        let r = p.bfa(&Options::default()).unwrap();
        let decoded: BTreeSet<Transition> = enumerate_transitions(p.encoding(), &r.transitions, 1 << 20)
            .unwrap()
            .into_iter()
            .collect();
        assert!(decoded == oracle, "seed {seed}");
    }
}

#[test]
fn evaluation_counters_follow_closed_forms() {
    // x1 <- {x1, x3, u1, u2}, x2 <- {x2, x3, u1, u2}, x3 <- {x3, u1, u2}
    let deps = vec![
        Dependency::new(vec![0, 2], vec![0, 1]),
        Dependency::new(vec![1, 2], vec![0, 1]),
        Dependency::new(vec![2], vec![0, 1]),
    ];
    let sys = RandomSystem::with_dependencies(3, 2, &deps, 4);
    let (states, inputs) = sys.grids(&[4, 4, 4], &[4, 4]).unwrap();
    let scheme = OverapproxScheme::new(Arc::new(sys), Method::Corner, states, inputs).unwrap();
    let mgr = BddManager::new();
    let p = problem(&mgr, scheme);
    let bfa = p.bfa(&Options::default()).unwrap();
    assert_eq!(bfa.stats.o_calls, 4u64.pow(5));
    assert_eq!(bfa.stats.evals, 3 * 4u64.pow(5));
    assert_eq!(bfa.stats.evals, 3072);
    let ssa = p.ssa(&Options::default()).unwrap();
    assert_eq!(ssa.stats.o_calls, 0);
    assert_eq!(ssa.stats.evals, 4u64.pow(4) + 4u64.pow(4) + 4u64.pow(3));
    assert_eq!(ssa.stats.evals, 576);
    assert_eq!(bfa.transitions, ssa.transitions);
}

#[test]
fn counters_match_projected_grid_sizes_on_random_systems() {
    for seed in 200..240 {
        let scheme = random_scheme(seed);
        let sc = scheme.states().counts();
        let ic = scheme.inputs().counts();
        let expected: u64 = scheme
            .projections()
            .iter()
            .map(|p| {
                let a: usize = p.state_dims().iter().map(|&d| sc[d]).product();
                let b: usize = p.input_dims().iter().map(|&d| ic[d]).product();
                (a * b) as u64
            })
            .sum();
        let full = (sc.iter().product::<usize>() * ic.iter().product::<usize>()) as u64;
        let n = sc.len() as u64;
        let mgr = BddManager::new();
        let p = problem(&mgr, scheme);
        assert_eq!(p.ssa(&Options::default()).unwrap().stats.evals, expected);
        let bfa = p.bfa(&Options::default()).unwrap();
        assert_eq!(bfa.stats.o_calls, full);
        assert_eq!(bfa.stats.evals, n * full);
    }
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let mgr = BddManager::new();
    let p = problem(&mgr, corridor_scheme(2, BoundaryRule::Interior));
    let small_batches = Options {
        batch_size: 97,
        ..Options::sequential()
    };
    let a = p.ssa(&small_batches).unwrap();
    let b = p.ssa(&Options::default()).unwrap();
    assert_eq!(a.transitions, b.transitions);
    assert_eq!(a.stats.evals, b.stats.evals);
}

#[test]
fn expired_deadline_times_out() {
    let mgr = BddManager::new();
    let p = problem(&mgr, corridor_scheme(2, BoundaryRule::Interior));
    let opts = Options {
        batch_size: 16,
        deadline: Some(std::time::Instant::now()),
        ..Options::default()
    };
    assert!(matches!(
        p.bfa(&opts),
        Err(ssabs_core::abstraction::AbstractionError::Timeout { .. })
    ));
}

#[test]
fn bicycle_coarse_grid_agrees() {
    let mgr = BddManager::new();
    let p = problem(&mgr, bicycle_scheme([10, 10, 10], [3, 3]));
    let bfa = p.bfa(&Options::default()).unwrap();
    let ssa = p.ssa(&Options::default()).unwrap();
    assert_eq!(bfa.transitions, ssa.transitions);
    assert!(ssa.stats.evals < bfa.stats.evals);
}

#[test]
fn sampled_transitions_land_in_abstract_successors() {
    let schemes = vec![
        ("corridor", corridor_scheme(2, BoundaryRule::Interior)),
        ("corridor-inclusive", corridor_scheme(2, BoundaryRule::Inclusive)),
        ("bicycle", bicycle_scheme([12, 12, 12], [4, 4])),
        ("random", random_scheme(7)),
    ];
    for (name, scheme) in schemes {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = scheme.model().clone();
        let n = scheme.n();
        let mut next = vec![0.0; n];
        let mut violations = 0;
        for _ in 0..2000 {
            let q: Vec<usize> = scheme.states().counts().iter().map(|&c| rng.gen_range(0..c)).collect();
            let u: Vec<usize> = scheme.inputs().counts().iter().map(|&c| rng.gen_range(0..c)).collect();
            let x: Vec<f64> = q
                .iter()
                .enumerate()
                .map(|(d, &k)| {
                    let (a, b) = scheme.states().cell_bounds(d, k);
                    rng.gen_range(a..b)
                })
                .collect();
            let uv: Vec<f64> = u
                .iter()
                .enumerate()
                .map(|(d, &k)| {
                    let (a, b) = scheme.inputs().cell_bounds(d, k);
                    match scheme.input_mode() {
                        ssabs_core::reach::InputMode::Centers => 0.5 * (a + b),
                        ssabs_core::reach::InputMode::Cells => rng.gen_range(a..=b),
                    }
                })
                .collect();
            let d: Vec<f64> = (0..n)
                .map(|i| {
                    let dbar = model.disturbance_bound(i);
                    if dbar > 0.0 {
                        rng.gen_range(0.0..=dbar)
                    } else {
                        0.0
                    }
                })
                .collect();
            model.eval(&x, &uv, &d, &mut next);
            let full = scheme.full_overapprox(&q, &u).unwrap();
            let composed = scheme.composed_overapprox(&q, &u).unwrap();
            assert_eq!(full, composed);
            if !scheme.covers(full.as_ref(), &next) {
                violations += 1;
            }
        }
        assert_eq!(violations, 0, "{name}");
    }
}

#[test]
fn stats_serialize_with_decimal_counts() {
    let mgr = BddManager::new();
    let p = problem(&mgr, corridor_scheme(1, BoundaryRule::Interior));
    let r = p.ssa(&Options::default()).unwrap();
    let json = serde_json::to_value(&r.stats).unwrap();
    assert_eq!(json["method"], "ssa");
    assert_eq!(json["n"], 3);
    assert_eq!(json["grid"]["inputs"], serde_json::json!([2]));
    let count: BigUint = json["transitions"].as_str().unwrap().parse().unwrap();
    assert!(count > BigUint::from(2000u32));
}
