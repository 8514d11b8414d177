mod common;

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssabs_bdd::{Bdd, BddManager, BigUint};
use ssabs_core::abstraction::{enumerate_transitions, Execution, Options, Transition};
use ssabs_core::depgraph::Dependency;
use ssabs_core::encoding::{BitOrder, Encoding};
use ssabs_core::reach::BoundaryRule;
use ssabs_core::synthesis::*;

use common::*;

fn relation(enc: &Encoding, ts: &[Transition]) -> Bdd {
    let mgr = enc.manager();
    let mut t = mgr.mk_false();
    for tr in ts {
        let c = mgr.and_all([&enc.state_cell(&tr.state), &enc.input_cell(&tr.input), &enc.next_cell(&tr.next)]);
        t = mgr.or(&t, &c);
    }
    t
}

fn holds(enc: &Encoding, f: &Bdd, q: &[usize], u: &[usize]) -> bool {
    let mgr = enc.manager();
    !mgr.and_all([f, &enc.state_cell(q), &enc.input_cell(u)]).is_false()
}

fn holds_state(enc: &Encoding, f: &Bdd, q: &[usize]) -> bool {
    !enc.manager().and(f, &enc.state_cell(q)).is_false()
}

/// Six cells on a line; input 0 moves up one cell (none from the top),
/// input 1 may stay or move down one cell.
fn shift_system(mgr: &BddManager) -> (Encoding, Vec<Transition>) {
    let enc = Encoding::new(mgr, &[6], &[2], &[Dependency::new(vec![0], vec![0])], BitOrder::MsbFirst).unwrap();
    let mut ts = Vec::new();
    for q in 0..6 {
        if q < 5 {
            ts.push(Transition { state: vec![q], input: vec![0], next: vec![q + 1] });
        }
        ts.push(Transition { state: vec![q], input: vec![1], next: vec![q] });
        if q > 0 {
            ts.push(Transition { state: vec![q], input: vec![1], next: vec![q - 1] });
        }
    }
    (enc, ts)
}

#[test]
fn pre_on_shift_map() {
    let mgr = BddManager::new();
    let (enc, ts) = shift_system(&mgr);
    let t = relation(&enc, &ts);
    let z = mgr.in_range(enc.state_block(0), 0, 3).unwrap();
    let p = pre(&enc, &t, &z).unwrap();
    for q in 0..6 {
        assert_eq!(holds(&enc, &p, &[q], &[0]), q <= 2, "q {q} up");
        assert_eq!(holds(&enc, &p, &[q], &[1]), q <= 3, "q {q} down");
    }
    // pairs without successors never count, even when z is everything
    let all = pre(&enc, &t, &mgr.mk_true()).unwrap();
    assert!(!holds(&enc, &all, &[5], &[0]));
}

#[test]
fn shift_map_invariant_is_whole_safe_set() {
    let mgr = BddManager::new();
    let (enc, ts) = shift_system(&mgr);
    let t = relation(&enc, &ts);
    let safe = mgr.in_range(enc.state_block(0), 2, 4).unwrap();
    let c = synthesize_safety(&enc, &t, &safe).unwrap();
    // from 2 input 1 may drop to 1, so 2 only keeps input 0; 4 only input 1
    assert_eq!(c.invariant_count(&enc), BigUint::from(3u32));
    assert_eq!(c.allowed_inputs(&enc, &[2]).unwrap(), vec![vec![0]]);
    assert_eq!(c.allowed_inputs(&enc, &[3]).unwrap(), vec![vec![0], vec![1]]);
    assert_eq!(c.allowed_inputs(&enc, &[4]).unwrap(), vec![vec![1]]);
    assert!(c.allowed_inputs(&enc, &[5]).unwrap().is_empty());
    assert_eq!(c.pair_count(&enc), BigUint::from(4u32));
    assert!(c.is_sound(&enc, &t).unwrap());
}

#[test]
fn shift_map_shrinks_to_empty_when_nothing_is_invariant() {
    let mgr = BddManager::new();
    let (enc, ts) = shift_system(&mgr);
    // drop the stay transitions: every input now leaves a singleton
    let ts: Vec<Transition> = ts.into_iter().filter(|t| t.state != t.next).collect();
    let t = relation(&enc, &ts);
    let safe = mgr.in_range(enc.state_block(0), 3, 3).unwrap();
    let c = synthesize_safety(&enc, &t, &safe).unwrap();
    assert!(c.invariant.is_false());
    assert!(c.allowed.is_false());
    assert_eq!(c.iterations, 2);
}

#[test]
fn stationary_safe_set_converges_in_one_update() {
    let mgr = BddManager::new();
    let (enc, ts) = shift_system(&mgr);
    let t = relation(&enc, &ts);
    let safe = mgr.in_range(enc.state_block(0), 0, 5).unwrap();
    let c = synthesize_safety(&enc, &t, &safe).unwrap();
    assert_eq!(c.iterations, 1);
    assert_eq!(c.invariant, safe);
}

fn random_spec(scheme: &ssabs_core::reach::OverapproxScheme, rng: &mut ChaCha8Rng) -> (SafetySpec, Vec<(usize, usize)>) {
    let states = scheme.states();
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    let mut cells = Vec::new();
    for (d, &c) in states.counts().iter().enumerate() {
        let a = rng.gen_range(0..c);
        let b = rng.gen_range(a..c);
        lo.push(states.cell_bounds(d, a).0);
        hi.push(states.cell_bounds(d, b).1);
        cells.push((a, b));
    }
    (SafetySpec::new(lo, hi), cells)
}

#[test]
fn synthesis_matches_explicit_fixed_point() {
    for seed in 0..40 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let scheme = random_scheme(seed);
        let (spec, cells) = random_spec(&scheme, &mut rng);
        let states = scheme.states().clone();
        assert_eq!(spec.admissible_cells(&states).unwrap(), cells);
        let mgr = BddManager::new();
        let p = problem(&mgr, scheme);
        let t = p.ssa(&Options::default()).unwrap().transitions;
        let enc = p.encoding();
        let ts = enumerate_transitions(enc, &t, 1 << 20).unwrap();
        let inside = |q: &[usize]| q.iter().zip(&cells).all(|(&k, &(a, b))| a <= k && k <= b);
        let expected = explicit_safety(&ts, inside);

        let safe = safe_set(&spec, &states, enc).unwrap();
        let c = synthesize_safety(enc, &t, &safe).unwrap();
        let ic = p.scheme().inputs().counts();
        for q in all_indices(&states.counts()) {
            assert_eq!(holds_state(enc, &c.invariant, &q), expected.contains(&q), "seed {seed} q {q:?}");
            for u in all_indices(&ic) {
                let succ: Vec<&Vec<usize>> = ts
                    .iter()
                    .filter(|tr| tr.state == q && tr.input == u)
                    .map(|tr| &tr.next)
                    .collect();
                let ok = expected.contains(&q) && !succ.is_empty() && succ.iter().all(|x| expected.contains(*x));
                assert_eq!(holds(enc, &c.allowed, &q, &u), ok, "seed {seed} q {q:?} u {u:?}");
            }
        }
        assert_eq!(c.invariant_count(enc), BigUint::from(expected.len()));
        assert!(c.is_sound(enc, &t).unwrap());
    }
}

#[test]
fn invariant_shrinks_monotonically() {
    let mgr = BddManager::new();
    let p = problem(&mgr, corridor_scheme(2, BoundaryRule::Interior));
    let t = p.ssa(&Options::default()).unwrap().transitions;
    let enc = p.encoding();
    let states = p.scheme().states().clone();
    let safe = safe_set(&SafetySpec::upper_bound(&states, 8.0), &states, enc).unwrap();
    let mut prev = safe.clone();
    let mut seen = 0;
    let c = synthesize_safety_with(enc, &t, &safe, None, |k, w| {
        assert_eq!(k, seen + 1);
        seen = k;
        assert!(mgr.and(w, &mgr.not(&prev)).is_false());
        prev = w.clone();
    })
    .unwrap();
    assert_eq!(seen, c.iterations);
    assert_eq!(prev, c.invariant);
    assert!(!c.invariant.is_false());
    assert!(c.is_sound(enc, &t).unwrap());
}

#[test]
fn corridor_overflowing_cell_has_no_input() {
    let mgr = BddManager::new();
    let p = problem(&mgr, corridor_scheme(1, BoundaryRule::Interior));
    let t = p.ssa(&Options::default()).unwrap().transitions;
    let enc = p.encoding();
    let states = p.scheme().states().clone();
    let spec = SafetySpec::upper_bound(&states, 8.0);
    let c = synthesize_safety(enc, &t, &safe_set(&spec, &states, enc).unwrap()).unwrap();
    assert!(c.allowed_inputs(enc, &[9, 0, 0]).unwrap().is_empty());
    assert!(c.pair_count(enc) > BigUint::from(0u32));
    let table = c.table(enc);
    for q in all_indices(&states.counts()) {
        assert_eq!(table.allowed_inputs(&q), c.allowed_inputs(enc, &q).unwrap(), "{q:?}");
        if q.iter().any(|&k| k >= 8) {
            assert!(!table.contains(&q));
        }
    }
}

#[test]
fn spec_validation() {
    let states = corridor_scheme(1, BoundaryRule::Interior).states().clone();
    assert!(matches!(
        SafetySpec::upper_bound(&states, 0.5).admissible_cells(&states),
        Err(SynthesisError::EmptySafeSet { dim: 0 })
    ));
    assert!(matches!(
        SafetySpec::new(vec![0.0], vec![8.0]).admissible_cells(&states),
        Err(SynthesisError::SpecDimension { expected: 3, got: 1 })
    ));
    let cells = SafetySpec::upper_bound(&states, 8.0).admissible_cells(&states).unwrap();
    assert_eq!(cells, vec![(0, 7); 3]);
    let whole = SafetySpec::whole(&states).admissible_cells(&states).unwrap();
    assert_eq!(whole, vec![(0, 9); 3]);
}

#[test]
fn closed_loop_stays_safe_and_parallel_matches_sequential() {
    let scheme = corridor_scheme(2, BoundaryRule::Interior);
    let mgr = BddManager::new();
    let p = problem(&mgr, scheme);
    let scheme = p.scheme();
    let t = p.ssa(&Options::default()).unwrap().transitions;
    let enc = p.encoding();
    let states = scheme.states();
    let spec = SafetySpec::upper_bound(states, 8.0);
    let c = synthesize_safety(enc, &t, &safe_set(&spec, states, enc).unwrap()).unwrap();
    let table = c.table(enc);
    let plant = Plant {
        model: scheme.model().as_ref(),
        states,
        inputs: scheme.inputs(),
        spec: &spec,
    };
    let seeds: Vec<u64> = (0..24).collect();
    for input_policy in [InputPolicy::First, InputPolicy::Random] {
        for disturbance in [DisturbancePolicy::Random, DisturbancePolicy::WorstCorner, DisturbancePolicy::Zero] {
            let cfg = SimulationConfig { steps: 150, input_policy, disturbance, seed: 0 };
            let par = plant.closed_loop_seeds(&table, &seeds, &cfg, Execution::default()).unwrap();
            let seq = plant.closed_loop_seeds(&table, &seeds, &cfg, Execution::Sequential).unwrap();
            assert_eq!(par, seq);
            for tr in &par {
                assert!(tr.is_safe(), "{input_policy:?} {disturbance:?}");
                assert_eq!(tr.states.len(), 151);
                let distinct: HashSet<Vec<usize>> = tr.states.iter().map(|x| states.index_of(x).unwrap()).collect();
                assert!(distinct.iter().all(|q| table.contains(q)));
            }
        }
    }
}

#[test]
fn closed_loop_rejects_uncontrolled_start() {
    let scheme = corridor_scheme(1, BoundaryRule::Interior);
    let mgr = BddManager::new();
    let p = problem(&mgr, scheme);
    let scheme = p.scheme();
    let t = p.ssa(&Options::default()).unwrap().transitions;
    let enc = p.encoding();
    let spec = SafetySpec::upper_bound(scheme.states(), 8.0);
    let c = synthesize_safety(enc, &t, &safe_set(&spec, scheme.states(), enc).unwrap()).unwrap();
    let plant = Plant {
        model: scheme.model().as_ref(),
        states: scheme.states(),
        inputs: scheme.inputs(),
        spec: &spec,
    };
    let cfg = SimulationConfig {
        steps: 10,
        input_policy: InputPolicy::First,
        disturbance: DisturbancePolicy::Zero,
        seed: 1,
    };
    assert!(matches!(
        plant.closed_loop(&c.table(enc), &[9.5, 0.5, 0.5], &cfg),
        Err(SynthesisError::InitialOutside)
    ));
    let open = plant.open_loop(&[0], &[9.5, 0.5, 0.5], &cfg).unwrap();
    assert_eq!(open.violation, Some(0));
}

#[test]
fn report_round_trips() {
    let mgr = BddManager::new();
    let p = problem(&mgr, corridor_scheme(1, BoundaryRule::Interior));
    let r = p.ssa(&Options::default()).unwrap();
    let enc = p.encoding();
    let states = p.scheme().states().clone();
    let spec = SafetySpec::upper_bound(&states, 8.0);
    let c = synthesize_safety(enc, &r.transitions, &safe_set(&spec, &states, enc).unwrap()).unwrap();
    let report = c.report(enc, &spec, 0.25);
    assert!(report.matches(&r.stats));
    assert_eq!(report.pairs, c.pair_count(enc).to_string());
    let back: ControllerReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(back, report);
}
