//! Safety controller synthesis on an abstract transition relation and
//! closed-loop simulation of the result against the concrete model.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use ssabs_bdd::{Bdd, BddError, BigUint, Snapshot, VarId};
use thiserror::Error;

use crate::abstraction::{AbstractionStats, Execution, GridShape};
use crate::encoding::Encoding;
use crate::geometry::{BoxPartition, GeometryError};
use crate::reach::SystemModel;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Bdd(#[from] BddError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("safety spec has {got} dimensions, the state grid {expected}")]
    SpecDimension { expected: usize, got: usize },
    #[error("no cell of dimension {dim} lies inside the admissible interval")]
    EmptySafeSet { dim: usize },
    #[error("initial state lies in a cell outside the controlled invariant set")]
    InitialOutside,
    #[error("no allowed input at step {step}")]
    NoAllowedInput { step: usize },
    #[error("time limit exceeded after {iterations} fixed-point updates")]
    Timeout { iterations: usize },
}

/// Admissible closed interval per state dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafetySpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SafetySpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        SafetySpec { lo, hi }
    }

    /// `x_i <= threshold` in every dimension of `states`.
    pub fn upper_bound(states: &BoxPartition, threshold: f64) -> Self {
        let dom = states.domain();
        SafetySpec {
            lo: dom.lo().to_vec(),
            hi: vec![threshold; dom.dim()],
        }
    }

    pub fn whole(states: &BoxPartition) -> Self {
        SafetySpec {
            lo: states.domain().lo().to_vec(),
            hi: states.domain().hi().to_vec(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// Index range per dimension of the cells lying entirely inside the
    /// admissible interval.
    pub fn admissible_cells(&self, states: &BoxPartition) -> Result<Vec<(usize, usize)>, SynthesisError> {
        let n = states.dim();
        for got in [self.lo.len(), self.hi.len()] {
            if got != n {
                return Err(SynthesisError::SpecDimension { expected: n, got });
            }
        }
        (0..n)
            .map(|dim| {
                let cells: Vec<usize> = (0..states.counts()[dim])
                    .filter(|&k| {
                        let (a, b) = states.cell_bounds(dim, k);
                        a >= self.lo[dim] && b <= self.hi[dim]
                    })
                    .collect();
                match (cells.first(), cells.last()) {
                    (Some(&a), Some(&b)) => Ok((a, b)),
                    _ => Err(SynthesisError::EmptySafeSet { dim }),
                }
            })
            .collect()
    }
}

/// Safe cells as a function over the state blocks, one index comparator per
/// dimension.
pub fn safe_set(spec: &SafetySpec, states: &BoxPartition, enc: &Encoding) -> Result<Bdd, SynthesisError> {
    let mgr = enc.manager();
    let mut acc = mgr.mk_true();
    for (i, (a, b)) in spec.admissible_cells(states)?.into_iter().enumerate() {
        let r = mgr.in_range(enc.state_block(i), a as u64, b as u64)?;
        acc = mgr.and(&acc, &r);
    }
    Ok(acc)
}

/// State-input pairs with at least one successor, all of them in `z`.
pub fn pre(enc: &Encoding, t: &Bdd, z: &Bdd) -> Result<Bdd, SynthesisError> {
    let mgr = enc.manager();
    let next = mgr.var_set(enc.next_vars())?;
    let has_succ = mgr.exists_set(t, next);
    Ok(mgr.and(&has_succ, &mgr.not(&escapes(enc, t, z)?)))
}

/// Pairs with some successor outside `z`: `∃x+ (T ∧ ¬z[x → x+])`.
fn escapes(enc: &Encoding, t: &Bdd, z: &Bdd) -> Result<Bdd, SynthesisError> {
    let mgr = enc.manager();
    let next = mgr.var_set(enc.next_vars())?;
    let z_next = mgr.replace(z, &enc.state_to_next())?;
    Ok(mgr.and_exists(t, &mgr.not(&z_next), next))
}

/// Maximal controlled invariant set inside a safe set, with the controller
/// that keeps it invariant.
pub struct Controller {
    /// Allowed state-input pairs.
    pub allowed: Bdd,
    /// Controlled invariant states.
    pub invariant: Bdd,
    /// Fixed-point updates computed, the last one confirming convergence.
    pub iterations: usize,
}

/// `W ← S ∧ ∃u pre(W)` from `W = S` until nothing changes.
pub fn synthesize_safety(enc: &Encoding, t: &Bdd, safe: &Bdd) -> Result<Controller, SynthesisError> {
    synthesize_safety_with(enc, t, safe, None, |_, _| {})
}

/// Like [`synthesize_safety`], calling `observe(k, W_k)` after every update
/// and giving up once `deadline` has passed.
pub fn synthesize_safety_with(
    enc: &Encoding,
    t: &Bdd,
    safe: &Bdd,
    deadline: Option<Instant>,
    mut observe: impl FnMut(usize, &Bdd),
) -> Result<Controller, SynthesisError> {
    let mgr = enc.manager();
    let inputs = mgr.var_set(enc.input_vars())?;
    let next = mgr.var_set(enc.next_vars())?;
    let has_succ = mgr.exists_set(t, next);
    let mut w = safe.clone();
    let mut iterations = 0;
    loop {
        iterations += 1;
        // ∃u (hasSucc ∧ ¬escapes) without building pre itself
        let keep = mgr.and_exists(&has_succ, &mgr.not(&escapes(enc, t, &w)?), inputs);
        let next_w = mgr.and(safe, &keep);
        observe(iterations, &next_w);
        if next_w == w {
            break;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(SynthesisError::Timeout { iterations });
        }
        w = next_w;
    }
    let allowed = mgr.and_all([&has_succ, &mgr.not(&escapes(enc, t, &w)?), &w]);
    Ok(Controller {
        allowed,
        invariant: w,
        iterations,
    })
}

impl Controller {
    /// Number of allowed `(q, u)` pairs.
    pub fn pair_count(&self, enc: &Encoding) -> BigUint {
        let vars: Vec<VarId> = enc.state_vars().iter().chain(enc.input_vars()).copied().collect();
        enc.manager()
            .sat_count(&self.allowed, &vars)
            .expect("controller lives on state and input variables")
    }

    pub fn invariant_count(&self, enc: &Encoding) -> BigUint {
        enc.manager()
            .sat_count(&self.invariant, enc.state_vars())
            .expect("invariant set lives on state variables")
    }

    /// `C ∧ T ⇒ W[x → x+]`, checked symbolically.
    pub fn is_sound(&self, enc: &Encoding, t: &Bdd) -> Result<bool, SynthesisError> {
        let mgr = enc.manager();
        let w_next = mgr.replace(&self.invariant, &enc.state_to_next())?;
        let lhs = mgr.and(&self.allowed, t);
        Ok(mgr.implies(&lhs, &w_next).is_true())
    }

    /// Allowed inputs at cell `q` in ascending order; empty outside the
    /// invariant set.
    pub fn allowed_inputs(&self, enc: &Encoding, q: &[usize]) -> Result<Vec<Vec<usize>>, SynthesisError> {
        let mgr = enc.manager();
        let mut lits = Vec::new();
        for (i, &k) in q.iter().enumerate() {
            enc.push_state_literals(i, k, &mut lits);
        }
        let at_q = mgr.restrict(&self.allowed, &lits)?;
        let vars = enc.input_vars();
        let mut out: Vec<Vec<usize>> = mgr
            .sat_assignments(&at_q, vars, usize::MAX)?
            .iter()
            .map(|a| enc.decode(vars, a).1)
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Thread-safe lookup table for simulation.
    pub fn table(&self, enc: &Encoding) -> ControllerTable {
        let mgr = enc.manager();
        ControllerTable {
            allowed: mgr.snapshot(&self.allowed),
            var_count: mgr.var_count(),
            state_blocks: (0..enc.n()).map(|i| enc.state_block(i).vars().to_vec()).collect(),
            input_blocks: (0..enc.m()).map(|j| enc.input_block(j).vars().to_vec()).collect(),
            input_counts: enc.input_counts().to_vec(),
        }
    }

    pub fn report(&self, enc: &Encoding, spec: &SafetySpec, seconds: f64) -> ControllerReport {
        ControllerReport {
            grid: GridShape {
                states: enc.state_counts().to_vec(),
                inputs: enc.input_counts().to_vec(),
            },
            spec: spec.clone(),
            iterations: self.iterations,
            pairs: self.pair_count(enc).to_string(),
            invariant_states: self.invariant_count(enc).to_string(),
            nodes: enc.manager().node_count(&self.allowed),
            seconds,
        }
    }
}

/// Sidecar record written next to a stored controller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerReport {
    pub grid: GridShape,
    pub spec: SafetySpec,
    pub iterations: usize,
    pub pairs: String,
    pub invariant_states: String,
    pub nodes: usize,
    pub seconds: f64,
}

impl ControllerReport {
    pub fn matches(&self, stats: &AbstractionStats) -> bool {
        self.grid == stats.grid
    }
}

/// Detached controller: answers allowed-input queries without the manager.
#[derive(Clone, Debug)]
pub struct ControllerTable {
    allowed: Snapshot,
    var_count: usize,
    state_blocks: Vec<Vec<VarId>>,
    input_blocks: Vec<Vec<VarId>>,
    input_counts: Vec<usize>,
}

fn write_code(bits: &mut [bool], block: &[VarId], k: usize) {
    for (b, v) in block.iter().enumerate() {
        bits[v.index()] = k >> b & 1 == 1;
    }
}

impl ControllerTable {
    fn eval(&self, bits: &mut [bool], q: &[usize], u: &[usize]) -> bool {
        for (block, &k) in self.state_blocks.iter().zip(q) {
            write_code(bits, block, k);
        }
        for (block, &k) in self.input_blocks.iter().zip(u) {
            write_code(bits, block, k);
        }
        self.allowed.eval(|v| bits[v.index()])
    }

    /// Allowed input cells at `q`, ascending in row-major order.
    pub fn allowed_inputs(&self, q: &[usize]) -> Vec<Vec<usize>> {
        let mut bits = vec![false; self.var_count];
        let mut out = Vec::new();
        let mut u = vec![0usize; self.input_counts.len()];
        loop {
            if self.eval(&mut bits, q, &u) {
                out.push(u.clone());
            }
            let mut d = u.len();
            loop {
                if d == 0 {
                    return out;
                }
                d -= 1;
                u[d] += 1;
                if u[d] < self.input_counts[d] {
                    break;
                }
                u[d] = 0;
            }
        }
    }

    pub fn contains(&self, q: &[usize]) -> bool {
        !self.allowed_inputs(q).is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputPolicy {
    /// Smallest allowed input index.
    First,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbancePolicy {
    /// Uniform in `[0, d̄_i]`.
    Random,
    /// Always `d̄`.
    WorstCorner,
    Zero,
}

#[derive(Clone, Copy, Debug)]
pub struct SimulationConfig {
    pub steps: usize,
    pub input_policy: InputPolicy,
    pub disturbance: DisturbancePolicy,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<usize>>,
    /// First step whose state violates the spec or leaves the grid.
    pub violation: Option<usize>,
}

impl Trajectory {
    pub fn is_safe(&self) -> bool {
        self.violation.is_none()
    }
}

/// Concrete grid and spec shared by simulations.
pub struct Plant<'a> {
    pub model: &'a dyn SystemModel,
    pub states: &'a BoxPartition,
    pub inputs: &'a BoxPartition,
    pub spec: &'a SafetySpec,
}

impl Plant<'_> {
    fn disturbance(&self, policy: DisturbancePolicy, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.model.state_dim())
            .map(|i| {
                let dbar = self.model.disturbance_bound(i);
                match policy {
                    DisturbancePolicy::Random if dbar > 0.0 => rng.gen_range(0.0..=dbar),
                    DisturbancePolicy::WorstCorner => dbar,
                    _ => 0.0,
                }
            })
            .collect()
    }

    fn input_value(&self, u: &[usize]) -> Vec<f64> {
        (0..u.len())
            .map(|j| {
                let (a, b) = self.inputs.cell_bounds(j, u[j]);
                0.5 * (a + b)
            })
            .collect()
    }

    /// Runs `choose` as feedback; stops at the first violation.
    fn run(
        &self,
        x0: &[f64],
        cfg: &SimulationConfig,
        mut choose: impl FnMut(&[usize], usize, &mut ChaCha8Rng) -> Result<Vec<usize>, SynthesisError>,
    ) -> Result<Trajectory, SynthesisError> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut x = x0.to_vec();
        let mut traj = Trajectory {
            states: vec![x.clone()],
            inputs: Vec::new(),
            violation: None,
        };
        if !self.spec.contains(&x) {
            traj.violation = Some(0);
            return Ok(traj);
        }
        for step in 0..cfg.steps {
            let q = self.states.index_of(&x)?;
            let u = choose(&q, step, &mut rng)?;
            let d = self.disturbance(cfg.disturbance, &mut rng);
            let mut next = vec![0.0; x.len()];
            self.model.eval(&x, &self.input_value(&u), &d, &mut next);
            x = next;
            traj.inputs.push(u);
            traj.states.push(x.clone());
            if !self.spec.contains(&x) || !self.states.domain().contains(&x) {
                traj.violation = Some(step + 1);
                break;
            }
        }
        Ok(traj)
    }

    /// Feedback through the controller at the cell of the current state.
    pub fn closed_loop(&self, table: &ControllerTable, x0: &[f64], cfg: &SimulationConfig) -> Result<Trajectory, SynthesisError> {
        if !table.contains(&self.states.index_of(x0)?) {
            return Err(SynthesisError::InitialOutside);
        }
        self.run(x0, cfg, |q, step, rng| {
            let allowed = table.allowed_inputs(q);
            if allowed.is_empty() {
                return Err(SynthesisError::NoAllowedInput { step });
            }
            Ok(match cfg.input_policy {
                InputPolicy::First => allowed[0].clone(),
                InputPolicy::Random => allowed[rng.gen_range(0..allowed.len())].clone(),
            })
        })
    }

    /// Constant input cell `u`, no feedback.
    pub fn open_loop(&self, u: &[usize], x0: &[f64], cfg: &SimulationConfig) -> Result<Trajectory, SynthesisError> {
        self.run(x0, cfg, |_, _, _| Ok(u.to_vec()))
    }

    /// Closed-loop runs for `seeds`, each from a random initial state drawn
    /// uniformly from the invariant cells of the spec box.
    pub fn closed_loop_seeds(
        &self,
        table: &ControllerTable,
        seeds: &[u64],
        cfg: &SimulationConfig,
        execution: Execution,
    ) -> Result<Vec<Trajectory>, SynthesisError> {
        let one = |seed: u64| -> Result<Trajectory, SynthesisError> {
            let x0 = self.initial_state(table, seed)?;
            self.closed_loop(table, &x0, &SimulationConfig { seed, ..*cfg })
        };
        match execution {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                seeds.par_iter().map(|&s| one(s)).collect()
            }
            _ => seeds.iter().map(|&s| one(s)).collect(),
        }
    }

    /// Rejection-samples a point of the spec box whose cell is controlled.
    pub fn initial_state(&self, table: &ControllerTable, seed: u64) -> Result<Vec<f64>, SynthesisError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let dom = self.states.domain();
        for _ in 0..100_000 {
            let x: Vec<f64> = (0..dom.dim())
                .map(|i| {
                    let lo = self.spec.lo[i].max(dom.lo()[i]);
                    let hi = self.spec.hi[i].min(dom.hi()[i]);
                    rng.gen_range(lo..=hi)
                })
                .collect();
            if table.contains(&self.states.index_of(&x)?) {
                return Ok(x);
            }
        }
        Err(SynthesisError::InitialOutside)
    }
}
