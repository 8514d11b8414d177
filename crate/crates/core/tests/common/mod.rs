//! Problem builders and explicit oracles shared by the integration tests.
//! The oracles enumerate transitions directly from model evaluations and
//! plain index arithmetic, without touching decision diagrams.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssabs_bdd::BddManager;
use ssabs_core::abstraction::{AbstractionProblem, Transition};
use ssabs_core::encoding::BitOrder;
use ssabs_core::geometry::BoxPartition;
use ssabs_core::models::{Bicycle, BicycleBound, Integrator, RandomSystem, TrafficNetwork};
use ssabs_core::reach::{BoundaryRule, InputMode, Method, OverapproxScheme};

pub fn corridor_scheme(blocks: usize, rule: BoundaryRule) -> OverapproxScheme {
    let net = TrafficNetwork::corridor(blocks);
    let states = net.state_grid(10).unwrap();
    let inputs = net.input_grid();
    OverapproxScheme::new(Arc::new(net), Method::Corner, states, inputs)
        .unwrap()
        .with_input_mode(InputMode::Centers)
        .with_boundary(rule)
}

pub fn bicycle_scheme(cells: [usize; 3], input_cells: [usize; 2]) -> OverapproxScheme {
    let tau = 0.3;
    let model = Bicycle::new(tau, Integrator::Exact).unwrap();
    let (states, inputs) = Bicycle::grids(
        Bicycle::default_state_domain(),
        cells,
        Bicycle::default_input_domain(),
        input_cells,
    )
    .unwrap();
    OverapproxScheme::new(
        Arc::new(model),
        Method::Bound(Arc::new(BicycleBound::new(tau))),
        states,
        inputs,
    )
    .unwrap()
    .with_input_mode(InputMode::Centers)
}

/// Random sparse monotone system with at most 4 states, 2 inputs and 5
/// cells per dimension, all drawn from `seed`.
pub fn random_scheme(seed: u64) -> OverapproxScheme {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=4);
    let m = rng.gen_range(1..=2);
    let max_deps = rng.gen_range(1..=n + m);
    let sys = RandomSystem::generate(n, m, max_deps, seed);
    let sc: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=5)).collect();
    let ic: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=5)).collect();
    let (states, inputs) = sys.grids(&sc, &ic).unwrap();
    let rule = if rng.gen_bool(0.5) {
        BoundaryRule::Inclusive
    } else {
        BoundaryRule::Interior
    };
    OverapproxScheme::new(Arc::new(sys), Method::Corner, states, inputs)
        .unwrap()
        .with_boundary(rule)
}

pub fn problem(mgr: &BddManager, scheme: OverapproxScheme) -> AbstractionProblem {
    AbstractionProblem::new(mgr, scheme, BitOrder::MsbFirst).unwrap()
}

/// Row-major list of all index vectors of a grid.
pub fn all_indices(counts: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &c in counts {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..c).map(move |k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect();
    }
    out
}

fn cuts(p: &BoxPartition, dim: usize) -> Vec<f64> {
    let mut c: Vec<f64> = (0..p.counts()[dim]).map(|k| p.cell_bounds(dim, k).0).collect();
    c.push(p.cell_bounds(dim, p.counts()[dim] - 1).1);
    c
}

/// Cells of `[lo, hi]` along one dimension by scanning the cut list.
fn cells_hit(c: &[f64], lo: f64, hi: f64, rule: BoundaryRule) -> Option<(usize, usize)> {
    let cells = c.len() - 1;
    if hi < c[0] || lo > c[cells] {
        return None;
    }
    let first = (0..cells).rev().find(|&k| c[k] <= lo).unwrap_or(0);
    let mut last = (0..cells).rev().find(|&k| c[k] <= hi).unwrap_or(0);
    if rule == BoundaryRule::Interior && last > first && hi > lo && hi == c[last] {
        last -= 1;
    }
    Some((first, last))
}

/// Explicit corner-rule enumeration of every transition of a monotone model.
pub fn corner_oracle(scheme: &OverapproxScheme) -> BTreeSet<Transition> {
    let model = scheme.model();
    let (states, inputs) = (scheme.states(), scheme.inputs());
    let n = model.state_dim();
    let dbar: Vec<f64> = (0..n).map(|i| model.disturbance_bound(i)).collect();
    let zero = vec![0.0; n];
    let state_cuts: Vec<Vec<f64>> = (0..n).map(|d| cuts(states, d)).collect();
    let mut out = BTreeSet::new();
    for q in all_indices(&states.counts()) {
        let xlo: Vec<f64> = q.iter().enumerate().map(|(d, &k)| state_cuts[d][k]).collect();
        let xhi: Vec<f64> = q.iter().enumerate().map(|(d, &k)| state_cuts[d][k + 1]).collect();
        'inputs: for u in all_indices(&inputs.counts()) {
            let bounds: Vec<(f64, f64)> = u.iter().enumerate().map(|(d, &k)| inputs.cell_bounds(d, k)).collect();
            let (ulo, uhi): (Vec<f64>, Vec<f64>) = match scheme.input_mode() {
                InputMode::Centers => bounds.iter().map(|b| (0.5 * (b.0 + b.1), 0.5 * (b.0 + b.1))).unzip(),
                InputMode::Cells => bounds.iter().copied().unzip(),
            };
            let mut ranges = Vec::with_capacity(n);
            for i in 0..n {
                let low = model.eval_coord_split(i, &xlo, &xhi, &ulo, &zero);
                let high = model.eval_coord_split(i, &xhi, &xlo, &uhi, &dbar);
                match cells_hit(&state_cuts[i], low, high, scheme.boundary()) {
                    Some(r) => ranges.push(r),
                    None => continue 'inputs,
                }
            }
            let counts: Vec<usize> = ranges.iter().map(|r| r.1 - r.0 + 1).collect();
            for offs in all_indices(&counts) {
                let next = offs.iter().zip(&ranges).map(|(o, r)| r.0 + o).collect();
                out.insert(Transition {
                    state: q.clone(),
                    input: u.clone(),
                    next,
                });
            }
        }
    }
    out
}

/// Greatest set `W ⊆ safe` such that every state of `W` has an input whose
/// successors are nonempty and inside `W`, by plain set iteration.
pub fn explicit_safety(transitions: &[Transition], safe: impl Fn(&[usize]) -> bool) -> HashSet<Vec<usize>> {
    // state -> input -> successors
    let mut succ: HashMap<&[usize], HashMap<&[usize], Vec<&[usize]>>> = HashMap::new();
    for t in transitions {
        succ.entry(&t.state)
            .or_default()
            .entry(&t.input)
            .or_default()
            .push(&t.next);
    }
    let mut w: HashSet<Vec<usize>> = succ.keys().filter(|q| safe(q)).map(|q| q.to_vec()).collect();
    loop {
        let keep: HashSet<Vec<usize>> = w
            .iter()
            .filter(|q| {
                succ[q.as_slice()]
                    .values()
                    .any(|nexts| nexts.iter().all(|x| w.contains(*x)))
            })
            .cloned()
            .collect();
        if keep.len() == w.len() {
            return w;
        }
        w = keep;
    }
}
