//! Construction of the abstract transition relation `T(x, u, x+)`.
//!
//! The brute-force sweep visits every state-input cell pair and evaluates the
//! full over-approximation; the projected sweep builds one relation per state
//! coordinate over only the dimensions that coordinate reads and conjoins
//! them. Both return the same function.
//!
//! Over-approximations of a batch of pairs are evaluated before any
//! decision-diagram work, optionally in parallel; insertion into the manager
//! is always sequential and in row-major order.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use ssabs_bdd::{Bdd, BddError, BddManager, BigUint};
use thiserror::Error;

use crate::depgraph::Dependency;
use crate::encoding::{BitOrder, Encoding};
use crate::reach::{OverapproxScheme, ReachError, Scratch};

#[derive(Debug, Error)]
pub enum AbstractionError {
    #[error(transparent)]
    Reach(#[from] ReachError),
    #[error(transparent)]
    Bdd(#[from] BddError),
    #[error("time limit exceeded after {seconds:.1} s")]
    Timeout { seconds: f64 },
    #[error("next-state grid must match the state grid")]
    TargetMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Brute-force sweep over the full state-input grid.
    Bfa,
    /// Sparsity-sensitive sweep over projected grids.
    Ssa,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bfa => "bfa",
            Algorithm::Ssa => "ssa",
        }
    }
}

/// Where over-approximations are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    /// Data-parallel evaluation of each batch. Without the `parallel`
    /// feature this runs sequentially.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

#[derive(Clone, Debug)]
pub struct Options {
    pub execution: Execution,
    /// Cell pairs evaluated per batch.
    pub batch_size: usize,
    pub deadline: Option<Instant>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            execution: Execution::default(),
            batch_size: 4096,
            deadline: None,
        }
    }
}

impl Options {
    pub fn sequential() -> Self {
        Options {
            execution: Execution::Sequential,
            ..Options::default()
        }
    }

    pub fn with_timeout(mut self, limit: Duration) -> Self {
        self.deadline = Some(Instant::now() + limit);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridShape {
    pub states: Vec<usize>,
    pub inputs: Vec<usize>,
}

/// Summary of one abstraction run, serialized as the stats record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbstractionStats {
    pub method: String,
    pub n: usize,
    pub m: usize,
    pub grid: GridShape,
    /// Coordinate evaluations `o_i`.
    pub evals: u64,
    /// Full over-approximation calls `o(q, u)`; zero for the projected sweep.
    pub o_calls: u64,
    /// Wall-clock time of the construction alone.
    pub seconds: f64,
    pub nodes: usize,
    /// Exact number of valid transitions, in decimal.
    pub transitions: String,
}

pub struct AbstractionResult {
    pub transitions: Bdd,
    pub stats: AbstractionStats,
}

/// A decoded transition `(q, u, q+)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub state: Vec<usize>,
    pub input: Vec<usize>,
    pub next: Vec<usize>,
}

/// Grids, over-approximation and variable blocks of one abstraction task.
pub struct AbstractionProblem {
    scheme: OverapproxScheme,
    encoding: Encoding,
}

impl AbstractionProblem {
    /// Declares the variable blocks in `mgr`.
    pub fn new(mgr: &BddManager, scheme: OverapproxScheme, bit_order: BitOrder) -> Result<Self, AbstractionError> {
        if scheme.target().counts() != scheme.states().counts() {
            return Err(AbstractionError::TargetMismatch);
        }
        let deps: Vec<Dependency> = scheme
            .projections()
            .iter()
            .map(|p| Dependency::new(p.state_dims().to_vec(), p.input_dims().to_vec()))
            .collect();
        let encoding = Encoding::new(
            mgr,
            &scheme.states().counts(),
            &scheme.inputs().counts(),
            &deps,
            bit_order,
        )?;
        Ok(AbstractionProblem { scheme, encoding })
    }

    pub fn scheme(&self) -> &OverapproxScheme {
        &self.scheme
    }

    pub fn encoding(&self) -> &Encoding {
        &self.encoding
    }

    pub fn manager(&self) -> &BddManager {
        self.encoding.manager()
    }

    pub fn run(&self, algorithm: Algorithm, opts: &Options) -> Result<AbstractionResult, AbstractionError> {
        match algorithm {
            Algorithm::Bfa => self.bfa(opts),
            Algorithm::Ssa => self.ssa(opts),
        }
    }

    /// Brute-force sweep: `T = ⋁_{q,u} [x = q ∧ u = u ∧ ⋁_{q+ ∈ o(q,u)} x+ = q+]`.
    ///
    /// `o(q, u)` is a product of per-coordinate index ranges, so the inner
    /// disjunction is built as the equivalent conjunction of per-coordinate
    /// range constraints.
    pub fn bfa(&self, opts: &Options) -> Result<AbstractionResult, AbstractionError> {
        let start = Instant::now();
        self.scheme.reset_counters();
        let scheme = &self.scheme;
        let mgr = self.manager();
        let enc = &self.encoding;
        let n = enc.n();
        let counts: Vec<usize> = enc.state_counts().iter().chain(enc.input_counts()).copied().collect();
        let mut ranges = RangeCache::default();
        let mut t = mgr.mk_false();
        let mut lits = Vec::new();
        sweep(
            &self.scheme,
            &counts,
            n,
            opts,
            |s, idx, out| scheme.full_successors(&idx[..n], &idx[n..], s, out),
            |idx, succ| {
                lits.clear();
                for (i, &k) in idx[..n].iter().enumerate() {
                    enc.push_state_literals(i, k, &mut lits);
                }
                for (j, &k) in idx[n..].iter().enumerate() {
                    enc.push_input_literals(j, k, &mut lits);
                }
                // successor box first: its blocks are disjoint, so each
                // conjunction only walks the smaller operand
                let mut next = mgr.mk_true();
                for (i, &(a, b)) in succ.iter().enumerate().rev() {
                    next = mgr.and(ranges.get(enc, i, a, b), &next);
                }
                let clause = mgr.and(&mgr.cube(&lits)?, &next);
                t = mgr.or(&t, &clause);
                Ok(())
            },
        )?;
        let seconds = start.elapsed().as_secs_f64();
        Ok(self.finish(Algorithm::Bfa, t, seconds))
    }

    /// Projected sweep: `T = ⋀_i T_i` with `T_i` built like the brute-force
    /// relation over the dimensions coordinate `i` reads and the next-state
    /// block `x+_i` only.
    pub fn ssa(&self, opts: &Options) -> Result<AbstractionResult, AbstractionError> {
        let start = Instant::now();
        self.scheme.reset_counters();
        let scheme = &self.scheme;
        let mgr = self.manager();
        let enc = &self.encoding;
        let mut ranges = RangeCache::default();
        let mut t = mgr.mk_true();
        let mut lits = Vec::new();
        let mut covered_states = vec![false; enc.n()];
        let mut covered_inputs = vec![false; enc.m()];
        for (i, proj) in self.scheme.projections().iter().enumerate() {
            let sd = proj.state_dims();
            let ud = proj.input_dims();
            let ns = sd.len();
            let counts: Vec<usize> = sd
                .iter()
                .map(|&d| enc.state_counts()[d])
                .chain(ud.iter().map(|&d| enc.input_counts()[d]))
                .collect();
            let mut ti = mgr.mk_false();
            sweep(
                &self.scheme,
                &counts,
                1,
                opts,
                |s, idx, out| match scheme.coord_successors(i, &idx[..ns], &idx[ns..], s)? {
                    Some(r) => {
                        out[0] = r;
                        Ok(true)
                    }
                    None => Ok(false),
                },
                |idx, succ| {
                    lits.clear();
                    for (&d, &k) in sd.iter().zip(&idx[..ns]) {
                        enc.push_state_literals(d, k, &mut lits);
                    }
                    for (&d, &k) in ud.iter().zip(&idx[ns..]) {
                        enc.push_input_literals(d, k, &mut lits);
                    }
                    let cube = mgr.cube(&lits)?;
                    let clause = mgr.and(&cube, ranges.get(enc, i, succ[0].0, succ[0].1));
                    ti = mgr.or(&ti, &clause);
                    Ok(())
                },
            )?;
            t = mgr.and(&t, &ti);
            for &d in sd {
                covered_states[d] = true;
            }
            for &d in ud {
                covered_inputs[d] = true;
            }
        }
        // dimensions no coordinate reads are otherwise unconstrained
        let free_states = enc.valid_states((0..enc.n()).filter(|&d| !covered_states[d]));
        let free_inputs = enc.valid_inputs((0..enc.m()).filter(|&d| !covered_inputs[d]));
        t = mgr.and_all([&t, &free_states, &free_inputs]);
        let seconds = start.elapsed().as_secs_f64();
        Ok(self.finish(Algorithm::Ssa, t, seconds))
    }

    fn finish(&self, algorithm: Algorithm, t: Bdd, seconds: f64) -> AbstractionResult {
        let enc = &self.encoding;
        let stats = AbstractionStats {
            method: algorithm.name().into(),
            n: enc.n(),
            m: enc.m(),
            grid: GridShape {
                states: enc.state_counts().to_vec(),
                inputs: enc.input_counts().to_vec(),
            },
            evals: self.scheme.coordinate_evals(),
            o_calls: self.scheme.o_calls(),
            seconds,
            nodes: self.manager().node_count(&t),
            transitions: transitions_of(enc, &t).to_string(),
        };
        AbstractionResult { transitions: t, stats }
    }
}

/// Exact number of `(q, u, q+)` triples in `t`, out-of-range codes excluded.
pub fn transitions_of(enc: &Encoding, t: &Bdd) -> BigUint {
    let mgr = enc.manager();
    let valid = mgr.and(t, &enc.domain());
    mgr.sat_count(&valid, &enc.all_vars())
        .expect("transition relations live on the encoding variables")
}

/// Decodes every transition of `t`; refuses if there are more than `cap`.
pub fn enumerate_transitions(enc: &Encoding, t: &Bdd, cap: usize) -> Result<Vec<Transition>, BddError> {
    let mgr = enc.manager();
    let valid = mgr.and(t, &enc.domain());
    let vars = enc.all_vars();
    let mut out: Vec<Transition> = mgr
        .sat_assignments(&valid, &vars, cap)?
        .iter()
        .map(|a| {
            let (state, input, next) = enc.decode(&vars, a);
            Transition { state, input, next }
        })
        .collect();
    out.sort_unstable();
    Ok(out)
}

#[derive(Default)]
struct RangeCache {
    map: HashMap<(usize, usize, usize), Bdd>,
}

impl RangeCache {
    fn get(&mut self, enc: &Encoding, i: usize, a: usize, b: usize) -> &Bdd {
        self.map
            .entry((i, a, b))
            .or_insert_with(|| enc.next_range(i, a, b))
    }
}

/// Row-major odometer over a product of index ranges.
struct Odometer {
    counts: Vec<usize>,
    current: Vec<usize>,
    done: bool,
}

impl Odometer {
    fn new(counts: &[usize]) -> Self {
        Odometer {
            counts: counts.to_vec(),
            current: vec![0; counts.len()],
            done: counts.contains(&0),
        }
    }

    fn next_into(&mut self, out: &mut [usize]) -> bool {
        if self.done {
            return false;
        }
        out.copy_from_slice(&self.current);
        self.done = true;
        for d in (0..self.counts.len()).rev() {
            self.current[d] += 1;
            if self.current[d] < self.counts[d] {
                self.done = false;
                break;
            }
            self.current[d] = 0;
        }
        true
    }
}

/// Evaluates `eval` on every index vector of the grid `counts` in batches,
/// then hands each non-blocking result to `insert` in row-major order.
/// `width` is the number of ranges `eval` writes per item.
fn sweep<E, I>(
    scheme: &OverapproxScheme,
    counts: &[usize],
    width: usize,
    opts: &Options,
    eval: E,
    mut insert: I,
) -> Result<(), AbstractionError>
where
    E: Fn(&mut Scratch, &[usize], &mut [(usize, usize)]) -> Result<bool, ReachError> + Sync,
    I: FnMut(&[usize], &[(usize, usize)]) -> Result<(), BddError>,
{
    let dims = counts.len();
    let stride = dims.max(1);
    let rstride = width.max(1);
    let batch = opts.batch_size.max(1);
    let mut odo = Odometer::new(counts);
    let mut idx = vec![0usize; batch * stride];
    let mut res = vec![(0usize, 0usize); batch * rstride];
    let mut ok = vec![false; batch];
    let mut scratch = scheme.scratch();
    let start = Instant::now();
    loop {
        let mut filled = 0;
        while filled < batch && odo.next_into(&mut idx[filled * stride..filled * stride + dims]) {
            filled += 1;
        }
        if filled == 0 {
            return Ok(());
        }
        let items = &idx[..filled * stride];
        let outs = &mut res[..filled * rstride];
        let flags = &mut ok[..filled];
        match opts.execution {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items
                    .par_chunks(stride)
                    .zip(outs.par_chunks_mut(rstride))
                    .zip(flags.par_iter_mut())
                    .try_for_each_init(
                        || scheme.scratch(),
                        |s, ((q, out), flag)| -> Result<(), ReachError> {
                            *flag = eval(s, &q[..dims], &mut out[..width])?;
                            Ok(())
                        },
                    )?;
            }
            _ => {
                for ((q, out), flag) in items.chunks(stride).zip(outs.chunks_mut(rstride)).zip(flags.iter_mut()) {
                    *flag = eval(&mut scratch, &q[..dims], &mut out[..width])?;
                }
            }
        }
        for k in 0..filled {
            if ok[k] {
                insert(&idx[k * stride..k * stride + dims], &res[k * rstride..k * rstride + width])?;
            }
        }
        if let Some(deadline) = opts.deadline {
            if Instant::now() > deadline {
                return Err(AbstractionError::Timeout {
                    seconds: start.elapsed().as_secs_f64(),
                });
            }
        }
    }
}
