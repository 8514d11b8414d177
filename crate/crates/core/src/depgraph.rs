//! Dependency graphs over state and input variables and the sparsity
//! parameter derived from them.
//!
//! Vertices `0..n` are states, `n..n+m` are inputs. An edge `j -> i` means the
//! update of state `i` reads vertex `j`; inputs never have incoming edges.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use ssabs_bdd::BigUint;
use thiserror::Error;

use crate::geometry::Projection;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DepGraphError {
    #[error("expected {expected} dependency entries, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("coordinate {coord}: state index {index} out of range (n = {n})")]
    StateOutOfRange { coord: usize, index: usize, n: usize },
    #[error("coordinate {coord}: input index {index} out of range (m = {m})")]
    InputOutOfRange { coord: usize, index: usize, m: usize },
    #[error("operation requires a {expected:?} graph")]
    WrongKind { expected: GraphKind },
}

/// State and input dimensions one coordinate update reads.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dependency {
    pub states: Vec<usize>,
    pub inputs: Vec<usize>,
}

impl Dependency {
    pub fn new(mut states: Vec<usize>, mut inputs: Vec<usize>) -> Self {
        states.sort_unstable();
        states.dedup();
        inputs.sort_unstable();
        inputs.dedup();
        Dependency { states, inputs }
    }

    /// Every state and input.
    pub fn dense(n: usize, m: usize) -> Self {
        Dependency {
            states: (0..n).collect(),
            inputs: (0..m).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len() + self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    /// Dependencies of a discrete-time update map.
    Discrete,
    /// Dependencies read off an ODE right-hand side; every state carries a
    /// self-loop.
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyGraph {
    n: usize,
    m: usize,
    kind: GraphKind,
    /// Sorted in-neighbours of every state vertex.
    parents: Vec<Vec<usize>>,
}

impl DependencyGraph {
    pub fn from_update_dependencies(
        n: usize,
        m: usize,
        deps: &[Dependency],
    ) -> Result<Self, DepGraphError> {
        Self::build(n, m, deps, GraphKind::Discrete)
    }

    pub fn from_ode_dependencies(
        n: usize,
        m: usize,
        deps: &[Dependency],
    ) -> Result<Self, DepGraphError> {
        Self::build(n, m, deps, GraphKind::Continuous)
    }

    fn build(n: usize, m: usize, deps: &[Dependency], kind: GraphKind) -> Result<Self, DepGraphError> {
        if deps.len() != n {
            return Err(DepGraphError::WrongLength {
                expected: n,
                got: deps.len(),
            });
        }
        let mut parents = Vec::with_capacity(n);
        for (coord, dep) in deps.iter().enumerate() {
            let mut p = Vec::with_capacity(dep.len() + 1);
            for &s in &dep.states {
                if s >= n {
                    return Err(DepGraphError::StateOutOfRange { coord, index: s, n });
                }
                p.push(s);
            }
            for &u in &dep.inputs {
                if u >= m {
                    return Err(DepGraphError::InputOutOfRange { coord, index: u, m });
                }
                p.push(n + u);
            }
            if kind == GraphKind::Continuous {
                p.push(coord);
            }
            p.sort_unstable();
            p.dedup();
            parents.push(p);
        }
        Ok(DependencyGraph { n, m, kind, parents })
    }

    pub fn state_count(&self) -> usize {
        self.n
    }

    pub fn input_count(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn vertex_count(&self) -> usize {
        self.n + self.m
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        to < self.n && self.parents[to].binary_search(&from).is_ok()
    }

    /// Edges `(from, to)` sorted by target, then source.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(to, ps)| ps.iter().map(move |&from| (from, to)))
            .collect()
    }

    pub fn indegree(&self, v: usize) -> usize {
        if v < self.n {
            self.parents[v].len()
        } else {
            0
        }
    }

    /// Maximum indegree.
    pub fn sparsity_discrete(&self) -> Result<usize, DepGraphError> {
        self.require(GraphKind::Discrete)?;
        Ok((0..self.n).map(|v| self.indegree(v)).max().unwrap_or(0))
    }

    /// Largest number of vertices from which some state is reachable
    /// (the state itself included), by reverse breadth-first search.
    pub fn sparsity_continuous(&self) -> Result<usize, DepGraphError> {
        self.require(GraphKind::Continuous)?;
        Ok(self.reach_sets_bfs().iter().map(Vec::len).max().unwrap_or(0))
    }

    /// Same quantity as [`sparsity_continuous`](Self::sparsity_continuous),
    /// from the nonzero pattern of `A^0 + A^1 + … + A^n`.
    pub fn sparsity_continuous_matrix(&self) -> Result<usize, DepGraphError> {
        self.require(GraphKind::Continuous)?;
        Ok(self.reach_sets_matrix(self.n).iter().map(Vec::len).max().unwrap_or(0))
    }

    /// For each state, the sorted set of vertices with a walk into it.
    pub fn reach_sets_bfs(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![usize::MAX; self.vertex_count()];
        let mut queue = VecDeque::new();
        (0..self.n)
            .map(|target| {
                let mut found = vec![target];
                seen[target] = target;
                queue.push_back(target);
                while let Some(v) = queue.pop_front() {
                    if v >= self.n {
                        continue;
                    }
                    for &p in &self.parents[v] {
                        if seen[p] != target {
                            seen[p] = target;
                            found.push(p);
                            queue.push_back(p);
                        }
                    }
                }
                found.sort_unstable();
                found
            })
            .collect()
    }

    /// Column patterns of `A^0 + … + A^max_len` over the Boolean semiring,
    /// restricted to state columns.
    pub fn reach_sets_matrix(&self, max_len: usize) -> Vec<Vec<usize>> {
        let size = self.vertex_count();
        let words = size.div_ceil(64).max(1);
        // column-major: col[i] holds the set of rows j with a walk j -> i
        let mut adj = vec![vec![0u64; words]; size];
        for (to, ps) in self.parents.iter().enumerate() {
            for &from in ps {
                adj[to][from / 64] |= 1 << (from % 64);
            }
        }
        let mut power: Vec<Vec<u64>> = (0..size)
            .map(|i| {
                let mut c = vec![0u64; words];
                c[i / 64] |= 1 << (i % 64);
                c
            })
            .collect();
        let mut total = power.clone();
        for _ in 0..max_len {
            // (P·A)[j][i] = OR_k P[j][k] & A[k][i]: column i of the product is
            // the union of P's columns k over the parents k of i.
            let next: Vec<Vec<u64>> = (0..size)
                .map(|i| {
                    let mut c = vec![0u64; words];
                    for k in 0..size {
                        if adj[i][k / 64] >> (k % 64) & 1 == 1 {
                            for (w, src) in c.iter_mut().zip(&power[k]) {
                                *w |= src;
                            }
                        }
                    }
                    c
                })
                .collect();
            for (t, p) in total.iter_mut().zip(&next) {
                for (a, b) in t.iter_mut().zip(p) {
                    *a |= b;
                }
            }
            power = next;
        }
        total
            .into_iter()
            .take(self.n)
            .map(|col| (0..size).filter(|&j| col[j / 64] >> (j % 64) & 1 == 1).collect())
            .collect()
    }

    /// Discrete graph whose state parents are the full reach sets; for an
    /// already discrete graph the graph itself.
    pub fn closure(&self) -> DependencyGraph {
        if self.kind == GraphKind::Discrete {
            return self.clone();
        }
        DependencyGraph {
            n: self.n,
            m: self.m,
            kind: GraphKind::Discrete,
            parents: self.reach_sets_bfs(),
        }
    }

    pub fn dependencies(&self) -> Vec<Dependency> {
        self.parents
            .iter()
            .map(|ps| Dependency {
                states: ps.iter().copied().filter(|&p| p < self.n).collect(),
                inputs: ps.iter().filter(|&&p| p >= self.n).map(|p| p - self.n).collect(),
            })
            .collect()
    }

    pub fn projections_of(&self) -> Result<Vec<Projection>, DepGraphError> {
        self.require(GraphKind::Discrete)?;
        Ok(self
            .dependencies()
            .into_iter()
            .map(|d| {
                Projection::new(d.states, d.inputs, self.n, self.m)
                    .expect("parents are sorted and in range")
            })
            .collect())
    }

    pub fn vertex_name(&self, v: usize) -> String {
        if v < self.n {
            format!("x{}", v + 1)
        } else {
            format!("u{}", v - self.n + 1)
        }
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph dependencies {\n");
        for v in 0..self.vertex_count() {
            let shape = if v < self.n { "circle" } else { "box" };
            let _ = writeln!(out, "  {} [shape={shape}];", self.vertex_name(v));
        }
        for (from, to) in self.edges() {
            let _ = writeln!(out, "  {} -> {};", self.vertex_name(from), self.vertex_name(to));
        }
        out.push_str("}\n");
        out
    }

    /// Sparsity summary for a grid with `state_counts[i]` cells along state
    /// dimension `i` and `input_counts[j]` along input dimension `j`.
    pub fn report(&self, state_counts: &[usize], input_counts: &[usize]) -> SparsityReport {
        let closed = self.closure();
        let deps = closed.dependencies();
        let product = |d: &Dependency| -> BigUint {
            d.states
                .iter()
                .map(|&s| state_counts[s])
                .chain(d.inputs.iter().map(|&u| input_counts[u]))
                .fold(BigUint::from(1u32), |acc, c| acc * BigUint::from(c))
        };
        let full: BigUint = state_counts
            .iter()
            .chain(input_counts)
            .fold(BigUint::from(1u32), |acc, &c| acc * BigUint::from(c));
        let ssa_evals = deps.iter().map(product).sum();
        let h_discrete = (self.kind == GraphKind::Discrete)
            .then(|| self.sparsity_discrete().expect("kind checked"));
        let h_continuous = (self.kind == GraphKind::Continuous)
            .then(|| self.sparsity_continuous().expect("kind checked"));
        SparsityReport {
            n: self.n,
            m: self.m,
            h: closed.sparsity_discrete().expect("closure is discrete"),
            h_discrete,
            h_continuous,
            bfa_evals: full * BigUint::from(self.n),
            ssa_evals,
            dependencies: deps,
        }
    }

    fn require(&self, kind: GraphKind) -> Result<(), DepGraphError> {
        if self.kind != kind {
            return Err(DepGraphError::WrongKind { expected: kind });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparsityReport {
    pub n: usize,
    pub m: usize,
    /// Sparsity parameter governing the projected abstraction cost.
    pub h: usize,
    pub h_discrete: Option<usize>,
    pub h_continuous: Option<usize>,
    /// Coordinate evaluations of the full sweep.
    pub bfa_evals: BigUint,
    /// Coordinate evaluations of the projected sweep.
    pub ssa_evals: BigUint,
    pub dependencies: Vec<Dependency>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dep(states: &[usize], inputs: &[usize]) -> Dependency {
        Dependency::new(states.to_vec(), inputs.to_vec())
    }

    /// Three states, two inputs; coordinate 1 reads x1, x3, u1, u2.
    fn figure_one() -> Vec<Dependency> {
        vec![dep(&[0, 2], &[0, 1]), dep(&[1, 2], &[0, 1]), dep(&[2], &[0, 1])]
    }

    #[test]
    fn figure_one_indegrees() {
        let g = DependencyGraph::from_update_dependencies(3, 2, &figure_one()).unwrap();
        let degrees: Vec<_> = (0..5).map(|v| g.indegree(v)).collect();
        assert_eq!(degrees, vec![4, 4, 3, 0, 0]);
        assert_eq!(g.sparsity_discrete(), Ok(4));
        assert!(matches!(g.sparsity_continuous(), Err(DepGraphError::WrongKind { .. })));
    }

    #[test]
    fn projections_follow_dependencies() {
        let g = DependencyGraph::from_update_dependencies(3, 2, &figure_one()).unwrap();
        let p = g.projections_of().unwrap();
        assert_eq!(p[0].state_dims(), &[0, 2]);
        assert_eq!(p[0].input_dims(), &[0, 1]);
        assert_eq!(p[2].state_dims(), &[2]);
        let dense = DependencyGraph::from_update_dependencies(
            2,
            1,
            &[Dependency::dense(2, 1), Dependency::dense(2, 1)],
        )
        .unwrap();
        for proj in dense.projections_of().unwrap() {
            assert_eq!(proj, Projection::identity(2, 1));
        }
        assert_eq!(dense.sparsity_discrete(), Ok(3));
    }

    #[test]
    fn edgeless_and_range_errors() {
        let g = DependencyGraph::from_update_dependencies(2, 1, &[dep(&[], &[]), dep(&[], &[])]).unwrap();
        assert_eq!(g.sparsity_discrete(), Ok(0));
        assert!(g.edges().is_empty());
        assert_eq!(
            DependencyGraph::from_update_dependencies(1, 1, &[dep(&[1], &[])]),
            Err(DepGraphError::StateOutOfRange { coord: 0, index: 1, n: 1 })
        );
        assert_eq!(
            DependencyGraph::from_update_dependencies(1, 1, &[dep(&[], &[1])]),
            Err(DepGraphError::InputOutOfRange { coord: 0, index: 1, m: 1 })
        );
    }

    #[test]
    fn continuous_examples() {
        // x1' = f(x3, u1), x2' = f(x3, u2), x3' = f(u1, u2)
        let ode = vec![dep(&[2], &[0]), dep(&[2], &[1]), dep(&[], &[0, 1])];
        let g = DependencyGraph::from_ode_dependencies(3, 2, &ode).unwrap();
        assert!(g.has_edge(0, 0) && g.has_edge(2, 2));
        assert_eq!(g.reach_sets_bfs()[0], vec![0, 2, 3, 4]);
        assert_eq!(g.sparsity_continuous(), Ok(4));
        assert_eq!(g.sparsity_continuous_matrix(), Ok(4));
        let closed = g.closure();
        assert_eq!(closed.sparsity_discrete(), Ok(4));

        let double_integrator = vec![dep(&[1], &[]), dep(&[], &[0])];
        let g = DependencyGraph::from_ode_dependencies(2, 1, &double_integrator).unwrap();
        assert_eq!(g.sparsity_continuous(), Ok(3));
        assert_eq!(g.sparsity_continuous_matrix(), Ok(3));

        let single = DependencyGraph::from_ode_dependencies(1, 1, &[dep(&[], &[0])]).unwrap();
        assert_eq!(single.edges(), vec![(0, 0), (1, 0)]);

        let loops = DependencyGraph::from_ode_dependencies(3, 0, &vec![dep(&[], &[]); 3]).unwrap();
        assert_eq!(loops.sparsity_continuous(), Ok(1));
    }

    #[test]
    fn report_counts() {
        let g = DependencyGraph::from_update_dependencies(3, 2, &figure_one()).unwrap();
        let r = g.report(&[4; 3], &[4; 2]);
        assert_eq!(r.h, 4);
        assert_eq!(r.bfa_evals, BigUint::from(3072u32));
        assert_eq!(r.ssa_evals, BigUint::from(576u32));
    }

    #[test]
    fn dot_output_lists_edges() {
        let g = DependencyGraph::from_update_dependencies(1, 1, &[dep(&[0], &[0])]).unwrap();
        let dot = g.to_dot();
        assert!(dot.starts_with("digraph dependencies {"));
        assert!(dot.contains("u1 -> x1;"));
        assert!(dot.contains("x1 -> x1;"));
    }

    fn random_ode() -> impl Strategy<Value = (usize, usize, Vec<Dependency>)> {
        (1usize..8, 0usize..5).prop_flat_map(|(n, m)| {
            let m = m.min(12 - n);
            let one = (
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec(any::<bool>(), m),
            )
                .prop_map(|(s, u)| {
                    Dependency::new(
                        s.iter().enumerate().filter(|p| *p.1).map(|p| p.0).collect(),
                        u.iter().enumerate().filter(|p| *p.1).map(|p| p.0).collect(),
                    )
                });
            (Just(n), Just(m), prop::collection::vec(one, n))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn matrix_and_bfs_agree((n, m, deps) in random_ode()) {
            let g = DependencyGraph::from_ode_dependencies(n, m, &deps).unwrap();
            let bfs = g.reach_sets_bfs();
            prop_assert_eq!(&bfs, &g.reach_sets_matrix(n));
            // walks longer than n add nothing
            prop_assert_eq!(&bfs, &g.reach_sets_matrix(2 * n));
            let h = g.sparsity_continuous().unwrap();
            prop_assert_eq!(h, g.sparsity_continuous_matrix().unwrap());
            prop_assert!(h <= n + m);
        }

        #[test]
        fn discrete_h_bounded((n, m, deps) in random_ode()) {
            let g = DependencyGraph::from_update_dependencies(n, m, &deps).unwrap();
            let h = g.sparsity_discrete().unwrap();
            prop_assert!(h <= n + m);
            let full = deps.iter().any(|d| d.len() == n + m);
            prop_assert_eq!(h == n + m, full);
        }
    }
}
