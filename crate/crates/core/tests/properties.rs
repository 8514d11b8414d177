mod common;

use proptest::prelude::*;
use ssabs_bdd::BddManager;
use ssabs_core::abstraction::{transitions_of, AbstractionProblem, Options};
use ssabs_core::encoding::BitOrder;
use ssabs_core::synthesis::{safe_set, synthesize_safety, SafetySpec};

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sweep_and_brute_force_agree(seed in any::<u64>()) {
        let mgr = BddManager::new();
        let p = problem(&mgr, random_scheme(seed));
        let bfa = p.bfa(&Options::sequential()).unwrap();
        let ssa = p.ssa(&Options::default()).unwrap();
        prop_assert!(bfa.transitions == ssa.transitions);
    }

    #[test]
    fn transition_count_ignores_bit_order(seed in any::<u64>()) {
        let counts: Vec<_> = [BitOrder::MsbFirst, BitOrder::LsbFirst]
            .into_iter()
            .map(|order| {
                let mgr = BddManager::new();
                let p = AbstractionProblem::new(&mgr, random_scheme(seed), order).unwrap();
                let r = p.ssa(&Options::default()).unwrap();
                transitions_of(p.encoding(), &r.transitions)
            })
            .collect();
        prop_assert_eq!(&counts[0], &counts[1]);
    }

    #[test]
    fn controller_is_sound_and_stays_in_safe_set(seed in any::<u64>(), cut in 0.0f64..1.0) {
        let scheme = random_scheme(seed);
        let states = scheme.states().clone();
        let lo: Vec<f64> = (0..states.dim()).map(|d| states.cell_bounds(d, 0).0).collect();
        let hi: Vec<f64> = (0..states.dim())
            .map(|d| {
                let top = states.cell_bounds(d, states.counts()[d] - 1).1;
                lo[d] + cut * (top - lo[d])
            })
            .collect();
        let spec = SafetySpec::new(lo, hi);
        let mgr = BddManager::new();
        let p = problem(&mgr, scheme);
        let t = p.ssa(&Options::default()).unwrap().transitions;
        let enc = p.encoding();
        let safe = match safe_set(&spec, &states, enc) {
            Ok(s) => s,
            Err(_) => return Ok(()),
        };
        let c = synthesize_safety(enc, &t, &safe).unwrap();
        prop_assert!(mgr.and(&c.invariant, &safe) == c.invariant);
        prop_assert!(c.is_sound(enc, &t).unwrap());
        let table = c.table(enc);
        for q in all_indices(&states.counts()) {
            let allowed = c.allowed_inputs(enc, &q).unwrap();
            prop_assert_eq!(table.contains(&q), !allowed.is_empty());
            prop_assert_eq!(table.allowed_inputs(&q), allowed);
        }
    }
}
