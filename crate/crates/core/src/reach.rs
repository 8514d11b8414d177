//! Coordinate-wise over-approximation of one-step reachable sets.
//!
//! Two methods are provided. The corner method evaluates a model at the lower
//! and upper corners of a cell (disturbance at zero and at its bound) and is
//! sound for models that are nondecreasing in states and disturbances. Models
//! whose update reads some argument with a negative sign may expose a split
//! evaluation, see [`SystemModel::eval_coord_split`]. The bound method
//! evaluates the model at the cell center and inflates the image by a local
//! error bound.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depgraph::Dependency;
use crate::geometry::{BoxPartition, CellRange, GeometryError, Projection};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReachError {
    #[error("coordinate {coord}: lower corner image {low} exceeds upper corner image {high}; model is not monotone")]
    MonotonicityViolation { coord: usize, low: f64, high: f64 },
    #[error("coordinate {coord}: negative error bound {beta}")]
    NegativeBound { coord: usize, beta: f64 },
    #[error("coordinate {coord}: model returned a non-finite value")]
    NonFinite { coord: usize },
    #[error("corner method requires a monotone model")]
    NotMonotone,
    #[error("{0}")]
    Geometry(#[from] GeometryError),
    #[error("{what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelClass {
    /// Nondecreasing in every state and disturbance argument, possibly after
    /// splitting arguments through `eval_coord_split`.
    Monotone,
    /// Comes with a local error bound around center images.
    ErrorBounded,
}

/// A discrete-time control system `x+ = f(x, u, d)` with one additive-style
/// disturbance slot per state coordinate.
pub trait SystemModel: Send + Sync {
    fn state_dim(&self) -> usize;

    fn input_dim(&self) -> usize;

    /// The `i`-th coordinate of the update map.
    fn eval_coord(&self, i: usize, x: &[f64], u: &[f64], d: &[f64]) -> f64;

    fn eval(&self, x: &[f64], u: &[f64], d: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.eval_coord(i, x, u, d);
        }
    }

    /// Coordinate `i` evaluated with two state arguments: `x_up` feeds the
    /// occurrences the map is nondecreasing in, `x_down` those it is
    /// nonincreasing in. Must equal `eval_coord` when both agree. The default
    /// suits maps that are nondecreasing in every state.
    fn eval_coord_split(&self, i: usize, x_up: &[f64], x_down: &[f64], u: &[f64], d: &[f64]) -> f64 {
        let _ = x_down;
        self.eval_coord(i, x_up, u, d)
    }

    /// Upper bound of the disturbance entering coordinate `i`; the
    /// disturbance ranges over `[0, bound]`.
    fn disturbance_bound(&self, i: usize) -> f64 {
        let _ = i;
        0.0
    }

    /// Declared dependency set of every coordinate.
    fn dependencies(&self) -> Vec<Dependency>;

    fn class(&self) -> ModelClass;
}

/// Local error bound used by the center method.
pub trait ErrorBound: Send + Sync {
    /// Radius for coordinate `i` given the state cell half-widths and the
    /// input cell `[ulo, uhi]`.
    fn beta(&self, i: usize, half_widths: &[f64], ulo: &[f64], uhi: &[f64]) -> f64;
}

/// Fixed radius per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantBound(pub Vec<f64>);

impl ErrorBound for ConstantBound {
    fn beta(&self, i: usize, _: &[f64], _: &[f64], _: &[f64]) -> f64 {
        self.0[i]
    }
}

/// Radius `half_width_i + extra_i`, which covers any map of the form
/// `x_i + g(u)` and other maps that do not expand coordinate `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizationBound(pub Vec<f64>);

impl ErrorBound for QuantizationBound {
    fn beta(&self, i: usize, half_widths: &[f64], _: &[f64], _: &[f64]) -> f64 {
        half_widths[i] + self.0[i]
    }
}

#[derive(Clone)]
pub enum Method {
    Corner,
    Bound(Arc<dyn ErrorBound>),
}

impl std::fmt::Debug for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Corner => f.write_str("Corner"),
            Method::Bound(_) => f.write_str("Bound"),
        }
    }
}

/// What to do with an image interval that leaves the target domain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainPolicy {
    /// Keep the part inside the domain; a fully outside image blocks the pair.
    #[default]
    Clamp,
    /// Any image not contained in the domain blocks the pair.
    Reject,
}

/// Which target cells an image interval `[lo, hi]` hits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryRule {
    /// Every cell whose half-open region meets the closed interval.
    #[default]
    Inclusive,
    /// Drops the cell above an upper end that lies exactly on a cut. Sound
    /// except when the supremum is attained on that cut.
    Interior,
}

/// How input cells enter the evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputMode {
    /// Input cells are boxes; corners and centers are taken from the box.
    #[default]
    Cells,
    /// Every input cell stands for its center value only.
    Centers,
}

/// The per-coordinate over-approximations `o_i` of one model on one grid.
pub struct OverapproxScheme {
    model: Arc<dyn SystemModel>,
    method: Method,
    states: BoxPartition,
    inputs: BoxPartition,
    target: BoxPartition,
    projections: Vec<Projection>,
    policy: DomainPolicy,
    input_mode: InputMode,
    boundary: BoundaryRule,
    dbar: Vec<f64>,
    zeros: Vec<f64>,
    o_calls: AtomicU64,
    coord_evals: AtomicU64,
}

/// Reusable evaluation buffers. Dimensions a coordinate does not read keep
/// the whole domain interval.
#[derive(Clone, Debug)]
pub struct Scratch {
    xlo: Vec<f64>,
    xhi: Vec<f64>,
    ulo: Vec<f64>,
    uhi: Vec<f64>,
    center: Vec<f64>,
    ucenter: Vec<f64>,
    half: Vec<f64>,
}

impl OverapproxScheme {
    /// Scheme whose projections come from the model's declared dependencies.
    pub fn new(
        model: Arc<dyn SystemModel>,
        method: Method,
        states: BoxPartition,
        inputs: BoxPartition,
    ) -> Result<Self, ReachError> {
        let n = model.state_dim();
        let m = model.input_dim();
        let deps = model.dependencies();
        if deps.len() != n {
            return Err(ReachError::Shape {
                what: "dependency sets",
                expected: n,
                got: deps.len(),
            });
        }
        let projections = deps
            .into_iter()
            .map(|d| Projection::new(d.states, d.inputs, n, m))
            .collect::<Result<Vec<_>, _>>()?;
        Self::with_projections(model, method, states, inputs, projections)
    }

    pub fn with_projections(
        model: Arc<dyn SystemModel>,
        method: Method,
        states: BoxPartition,
        inputs: BoxPartition,
        projections: Vec<Projection>,
    ) -> Result<Self, ReachError> {
        let n = model.state_dim();
        let m = model.input_dim();
        for (what, expected, got) in [
            ("state partition dimension", n, states.dim()),
            ("input partition dimension", m, inputs.dim()),
            ("projection count", n, projections.len()),
        ] {
            if expected != got {
                return Err(ReachError::Shape { what, expected, got });
            }
        }
        if matches!(method, Method::Corner) && model.class() != ModelClass::Monotone {
            return Err(ReachError::NotMonotone);
        }
        let dbar = (0..n).map(|i| model.disturbance_bound(i)).collect();
        Ok(OverapproxScheme {
            model,
            method,
            target: states.clone(),
            states,
            inputs,
            projections,
            policy: DomainPolicy::Clamp,
            input_mode: InputMode::Cells,
            boundary: BoundaryRule::Inclusive,
            dbar,
            zeros: vec![0.0; n],
            o_calls: AtomicU64::new(0),
            coord_evals: AtomicU64::new(0),
        })
    }

    pub fn with_policy(mut self, policy: DomainPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_input_mode(mut self, mode: InputMode) -> Self {
        self.input_mode = mode;
        self
    }

    pub fn with_boundary(mut self, rule: BoundaryRule) -> Self {
        self.boundary = rule;
        self
    }

    /// Uses a next-state grid different from the state grid.
    pub fn with_target(mut self, target: BoxPartition) -> Result<Self, ReachError> {
        if target.dim() != self.n() {
            return Err(ReachError::Shape {
                what: "target partition dimension",
                expected: self.n(),
                got: target.dim(),
            });
        }
        self.target = target;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.states.dim()
    }

    pub fn m(&self) -> usize {
        self.inputs.dim()
    }

    pub fn model(&self) -> &Arc<dyn SystemModel> {
        &self.model
    }

    pub fn method(&self) -> &Method {
        &self.method
    }

    pub fn states(&self) -> &BoxPartition {
        &self.states
    }

    pub fn inputs(&self) -> &BoxPartition {
        &self.inputs
    }

    pub fn target(&self) -> &BoxPartition {
        &self.target
    }

    pub fn projections(&self) -> &[Projection] {
        &self.projections
    }

    pub fn policy(&self) -> DomainPolicy {
        self.policy
    }

    pub fn input_mode(&self) -> InputMode {
        self.input_mode
    }

    pub fn boundary(&self) -> BoundaryRule {
        self.boundary
    }

    /// Number of full over-approximation calls `o(q, u)` so far.
    pub fn o_calls(&self) -> u64 {
        self.o_calls.load(Ordering::Relaxed)
    }

    /// Number of coordinate evaluations `o_i` so far, full calls included.
    pub fn coordinate_evals(&self) -> u64 {
        self.coord_evals.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.o_calls.store(0, Ordering::Relaxed);
        self.coord_evals.store(0, Ordering::Relaxed);
    }

    pub fn scratch(&self) -> Scratch {
        let sd = self.states.domain();
        let id = self.inputs.domain();
        Scratch {
            xlo: sd.lo().to_vec(),
            xhi: sd.hi().to_vec(),
            ulo: id.lo().to_vec(),
            uhi: id.hi().to_vec(),
            center: sd.center(),
            ucenter: id.center(),
            half: sd.half_widths(),
        }
    }

    /// `o_i` on a projected state cell and projected input cell. Returns the
    /// inclusive range of next-state cells along dimension `i`, or `None` if
    /// the pair blocks.
    pub fn coord_successors(
        &self,
        i: usize,
        pq: &[usize],
        pu: &[usize],
        s: &mut Scratch,
    ) -> Result<Option<(usize, usize)>, ReachError> {
        let proj = &self.projections[i];
        for (&d, &k) in proj.state_dims().iter().zip(pq) {
            self.load_state(s, d, k);
        }
        for (&d, &k) in proj.input_dims().iter().zip(pu) {
            self.load_input(s, d, k);
        }
        self.coord_evals.fetch_add(1, Ordering::Relaxed);
        let r = self.eval_range(i, s);
        // restore the domain interval so the buffer stays valid for every
        // coordinate
        let sd = self.states.domain();
        let id = self.inputs.domain();
        for &d in proj.state_dims() {
            s.xlo[d] = sd.lo()[d];
            s.xhi[d] = sd.hi()[d];
            s.center[d] = 0.5 * (sd.lo()[d] + sd.hi()[d]);
            s.half[d] = 0.5 * (sd.hi()[d] - sd.lo()[d]);
        }
        for &d in proj.input_dims() {
            s.ulo[d] = id.lo()[d];
            s.uhi[d] = id.hi()[d];
            s.ucenter[d] = 0.5 * (id.lo()[d] + id.hi()[d]);
        }
        r
    }

    /// The undecomposed `o(q, u)`: every coordinate evaluated on the full
    /// state and input cells. Writes one range per coordinate into `out`
    /// (length `n`) and returns `false` if the pair blocks.
    pub fn full_successors(
        &self,
        q: &[usize],
        u: &[usize],
        s: &mut Scratch,
        out: &mut [(usize, usize)],
    ) -> Result<bool, ReachError> {
        for (d, &k) in q.iter().enumerate() {
            self.load_state(s, d, k);
        }
        for (d, &k) in u.iter().enumerate() {
            self.load_input(s, d, k);
        }
        self.o_calls.fetch_add(1, Ordering::Relaxed);
        self.coord_evals.fetch_add(self.n() as u64, Ordering::Relaxed);
        for (i, slot) in out.iter_mut().enumerate() {
            match self.eval_range(i, s)? {
                Some(r) => *slot = r,
                None => return Ok(false),
            }
        }
        Ok(true)
    }

    /// Product of the per-coordinate ranges `o_i(Π_i q, Π_i u)`.
    pub fn composed_overapprox(&self, q: &[usize], u: &[usize]) -> Result<Option<CellRange>, ReachError> {
        let mut s = self.scratch();
        let mut ranges = Vec::with_capacity(self.n());
        for (i, proj) in self.projections.iter().enumerate() {
            let pq = proj.project_state_index(q);
            let pu = proj.project_input_index(u);
            match self.coord_successors(i, &pq, &pu, &mut s)? {
                Some((a, b)) => ranges.push(a..=b),
                None => return Ok(None),
            }
        }
        Ok(Some(CellRange { ranges }))
    }

    /// Undecomposed `o(q, u)` as a cell range.
    pub fn full_overapprox(&self, q: &[usize], u: &[usize]) -> Result<Option<CellRange>, ReachError> {
        let mut s = self.scratch();
        let mut out = vec![(0, 0); self.n()];
        if !self.full_successors(q, u, &mut s, &mut out)? {
            return Ok(None);
        }
        Ok(Some(CellRange {
            ranges: out.into_iter().map(|(a, b)| a..=b).collect(),
        }))
    }

    fn load_state(&self, s: &mut Scratch, d: usize, k: usize) {
        let (lo, hi) = self.states.cell_bounds(d, k);
        s.xlo[d] = lo;
        s.xhi[d] = hi;
        s.center[d] = 0.5 * (lo + hi);
        s.half[d] = 0.5 * (hi - lo);
    }

    fn load_input(&self, s: &mut Scratch, d: usize, k: usize) {
        let (lo, hi) = self.inputs.cell_bounds(d, k);
        let c = 0.5 * (lo + hi);
        s.ucenter[d] = c;
        match self.input_mode {
            InputMode::Cells => {
                s.ulo[d] = lo;
                s.uhi[d] = hi;
            }
            InputMode::Centers => {
                s.ulo[d] = c;
                s.uhi[d] = c;
            }
        }
    }

    fn eval_range(&self, i: usize, s: &Scratch) -> Result<Option<(usize, usize)>, ReachError> {
        let (low, high) = match &self.method {
            Method::Corner => {
                let low = self.model.eval_coord_split(i, &s.xlo, &s.xhi, &s.ulo, &self.zeros);
                let high = self.model.eval_coord_split(i, &s.xhi, &s.xlo, &s.uhi, &self.dbar);
                if !low.is_finite() || !high.is_finite() {
                    return Err(ReachError::NonFinite { coord: i });
                }
                if low > high {
                    return Err(ReachError::MonotonicityViolation { coord: i, low, high });
                }
                (low, high)
            }
            Method::Bound(bound) => {
                let c = self.model.eval_coord(i, &s.center, &s.ucenter, &self.zeros);
                let beta = bound.beta(i, &s.half, &s.ulo, &s.uhi);
                if !c.is_finite() || !beta.is_finite() {
                    return Err(ReachError::NonFinite { coord: i });
                }
                if beta < 0.0 {
                    return Err(ReachError::NegativeBound { coord: i, beta });
                }
                (c - beta, c + beta)
            }
        };
        Ok(self.clip(i, low, high))
    }

    fn clip(&self, i: usize, low: f64, high: f64) -> Option<(usize, usize)> {
        let dom = self.target.domain();
        let (dlo, dhi) = (dom.lo()[i], dom.hi()[i]);
        if self.policy == DomainPolicy::Reject && (low < dlo || high > dhi) {
            return None;
        }
        match self.boundary {
            BoundaryRule::Inclusive => self.target.intersecting_1d(i, low, high),
            BoundaryRule::Interior => self.target.interior_1d(i, low, high),
        }
    }

    /// Whether a concrete successor `x_next` of a pair with abstract
    /// successor set `succ` is accounted for: inside the domain it must lie
    /// in a listed cell; outside, the pair must block or, under clamping, list
    /// the cell the point clamps to.
    pub fn covers(&self, succ: Option<&CellRange>, x_next: &[f64]) -> bool {
        let dom = self.target.domain();
        match succ {
            None => !dom.contains(x_next),
            Some(range) => {
                let clamped: Vec<f64> = x_next
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v.clamp(dom.lo()[i], dom.hi()[i]))
                    .collect();
                if !dom.contains(x_next) && self.policy == DomainPolicy::Reject {
                    return false;
                }
                match self.target.index_of(&clamped) {
                    Ok(idx) => range.contains(&idx),
                    Err(_) => false,
                }
            }
        }
    }
}
