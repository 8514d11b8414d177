//! Signalized traffic networks in the cell-transmission style and the
//! arterial corridor built from them.
//!
//! Every edge is a road link with an occupancy. Every vertex is a signalized
//! junction with one binary input: in phase 1 it actuates the edges listed as
//! `on`, in phase 0 those listed as `off`. Out-edges that leave the network
//! are not modeled and impose no supply constraint.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depgraph::Dependency;
use crate::geometry::{BoxPartition, GeometryError, Rect};
use crate::reach::{ModelClass, SystemModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("unknown edge `{0}`")]
    UnknownEdge(String),
    #[error("duplicate name `{0}`")]
    Duplicate(String),
    #[error("link {from} -> {to}: {to} does not leave the head of {from}")]
    NotAdjacent { from: String, to: String },
    #[error("link {from} -> {to}: ratio {value} outside [0, 1]")]
    BadRatio { from: String, to: String, value: f64 },
    #[error("missing link {from} -> {to}")]
    MissingLink { from: String, to: String },
    #[error("edge `{edge}`: {message}")]
    BadEdge { edge: String, message: String },
    #[error("vertex `{vertex}`: incoming edge `{edge}` must be listed in exactly one signal phase")]
    BadPhase { vertex: String, edge: String },
    #[error("network has no edges")]
    Empty,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub name: String,
    /// Upstream junction; `None` for entry links.
    #[serde(default)]
    pub tail: Option<String>,
    pub head: String,
    /// Maximum occupancy.
    pub capacity: f64,
    /// Saturation flow per step.
    pub saturation: f64,
    /// Upper bound of the exogenous inflow per step.
    #[serde(default)]
    pub disturbance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexSpec {
    pub name: String,
    /// Incoming edges actuated when the signal is 1.
    pub on: Vec<String>,
    /// Incoming edges actuated when the signal is 0.
    pub off: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub from: String,
    pub to: String,
    /// Fraction of the outflow of `from` entering `to`.
    pub split: f64,
    /// Fraction of the free capacity of `to` reserved for `from`.
    pub supply: f64,
}

/// JSON-facing network description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub edges: Vec<EdgeSpec>,
    pub vertices: Vec<VertexSpec>,
    pub links: Vec<LinkSpec>,
}

#[derive(Clone, Debug, PartialEq)]
struct Edge {
    capacity: f64,
    saturation: f64,
    disturbance: f64,
    tail: Option<usize>,
    head: usize,
    /// Signal value that actuates this edge.
    phase: bool,
    /// Modeled out-edges `k` at the head: (k, supply / split).
    downstream: Vec<(usize, f64)>,
    /// Edges `k` feeding this one: (k, split k -> self).
    upstream: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrafficNetwork {
    edge_names: Vec<String>,
    vertex_names: Vec<String>,
    edges: Vec<Edge>,
}

impl TrafficNetwork {
    pub fn from_spec(spec: &NetworkSpec) -> Result<Self, NetworkError> {
        if spec.edges.is_empty() {
            return Err(NetworkError::Empty);
        }
        let mut vidx = HashMap::new();
        for (i, v) in spec.vertices.iter().enumerate() {
            if vidx.insert(v.name.as_str(), i).is_some() {
                return Err(NetworkError::Duplicate(v.name.clone()));
            }
        }
        let mut eidx = HashMap::new();
        for (i, e) in spec.edges.iter().enumerate() {
            if eidx.insert(e.name.as_str(), i).is_some() || vidx.contains_key(e.name.as_str()) {
                return Err(NetworkError::Duplicate(e.name.clone()));
            }
        }
        let vertex = |name: &str| vidx.get(name).copied().ok_or_else(|| NetworkError::UnknownVertex(name.into()));
        let edge = |name: &str| eidx.get(name).copied().ok_or_else(|| NetworkError::UnknownEdge(name.into()));

        let mut edges = Vec::with_capacity(spec.edges.len());
        for e in &spec.edges {
            let bad = |message: &str| NetworkError::BadEdge {
                edge: e.name.clone(),
                message: message.into(),
            };
            if !(e.capacity > 0.0 && e.capacity.is_finite()) {
                return Err(bad("capacity must be positive"));
            }
            if !(e.saturation >= 0.0 && e.saturation.is_finite()) {
                return Err(bad("saturation flow must be nonnegative"));
            }
            if !(e.disturbance >= 0.0 && e.disturbance.is_finite()) {
                return Err(bad("disturbance bound must be nonnegative"));
            }
            edges.push(Edge {
                capacity: e.capacity,
                saturation: e.saturation,
                disturbance: e.disturbance,
                tail: e.tail.as_deref().map(vertex).transpose()?,
                head: vertex(&e.head)?,
                phase: false,
                downstream: Vec::new(),
                upstream: Vec::new(),
            });
        }

        for (vi, v) in spec.vertices.iter().enumerate() {
            let mut listed = vec![0u8; edges.len()];
            for (names, phase) in [(&v.on, true), (&v.off, false)] {
                for name in names {
                    let e = edge(name)?;
                    if edges[e].head != vi {
                        return Err(NetworkError::BadPhase {
                            vertex: v.name.clone(),
                            edge: name.clone(),
                        });
                    }
                    edges[e].phase = phase;
                    listed[e] += 1;
                }
            }
            for (e, spec_e) in spec.edges.iter().enumerate() {
                if edges[e].head == vi && listed[e] != 1 {
                    return Err(NetworkError::BadPhase {
                        vertex: v.name.clone(),
                        edge: spec_e.name.clone(),
                    });
                }
            }
        }

        let mut link = HashMap::new();
        for l in &spec.links {
            let (from, to) = (edge(&l.from)?, edge(&l.to)?);
            if edges[to].tail != Some(edges[from].head) {
                return Err(NetworkError::NotAdjacent {
                    from: l.from.clone(),
                    to: l.to.clone(),
                });
            }
            for value in [l.split, l.supply] {
                if !(0.0..=1.0).contains(&value) {
                    return Err(NetworkError::BadRatio {
                        from: l.from.clone(),
                        to: l.to.clone(),
                        value,
                    });
                }
            }
            if link.insert((from, to), (l.split, l.supply)).is_some() {
                return Err(NetworkError::Duplicate(format!("{} -> {}", l.from, l.to)));
            }
        }
        for from in 0..edges.len() {
            for to in 0..edges.len() {
                if edges[to].tail != Some(edges[from].head) {
                    continue;
                }
                let &(split, supply) = link.get(&(from, to)).ok_or_else(|| NetworkError::MissingLink {
                    from: spec.edges[from].name.clone(),
                    to: spec.edges[to].name.clone(),
                })?;
                if split > 0.0 {
                    edges[from].downstream.push((to, supply / split));
                    edges[to].upstream.push((from, split));
                }
            }
        }

        Ok(TrafficNetwork {
            edge_names: spec.edges.iter().map(|e| e.name.clone()).collect(),
            vertex_names: spec.vertices.iter().map(|v| v.name.clone()).collect(),
            edges,
        })
    }

    /// Chain of `blocks` junctions. Block `j` adds the arterial edge into
    /// junction `j` followed by its two collector edges; arterial edges carry
    /// 80 % of their outflow on to the next arterial edge, collectors 50 %.
    pub fn corridor(blocks: usize) -> Self {
        Self::from_spec(&corridor_spec(blocks, 0.0)).expect("corridor spec is valid")
    }

    /// Corridor with exogenous demand bound `entry_demand` on the first
    /// arterial edge.
    pub fn corridor_with_entry_demand(blocks: usize, entry_demand: f64) -> Result<Self, NetworkError> {
        Self::from_spec(&corridor_spec(blocks, entry_demand))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_names.len()
    }

    pub fn edge_names(&self) -> &[String] {
        &self.edge_names
    }

    pub fn vertex_names(&self) -> &[String] {
        &self.vertex_names
    }

    pub fn capacity(&self, e: usize) -> f64 {
        self.edges[e].capacity
    }

    pub fn saturation(&self, e: usize) -> f64 {
        self.edges[e].saturation
    }

    pub fn is_actuated(&self, e: usize, u: &[f64]) -> bool {
        let edge = &self.edges[e];
        signal(u[edge.head]) == edge.phase
    }

    /// Outflow of edge `e`; `own` supplies the occupancy of `e`, `down` the
    /// occupancies of its downstream edges.
    fn outflow(&self, e: usize, own: &[f64], down: &[f64], u: &[f64]) -> f64 {
        if !self.is_actuated(e, u) {
            return 0.0;
        }
        let edge = &self.edges[e];
        let mut flow = own[e].min(edge.saturation);
        for &(k, ratio) in &edge.downstream {
            flow = flow.min(ratio * (self.edges[k].capacity - down[k]));
        }
        flow
    }

    pub fn outflow_of(&self, e: usize, x: &[f64], u: &[f64]) -> f64 {
        self.outflow(e, x, x, u)
    }

    pub fn inflow_of(&self, e: usize, x: &[f64], u: &[f64]) -> f64 {
        self.edges[e]
            .upstream
            .iter()
            .map(|&(k, split)| split * self.outflow(k, x, x, u))
            .sum()
    }

    fn update_split(&self, e: usize, up: &[f64], down: &[f64], u: &[f64], d: &[f64]) -> f64 {
        let edge = &self.edges[e];
        // x_e - outflow_e is nondecreasing in x_e and in the downstream
        // occupancies; each inflow term is nondecreasing in the sender's
        // occupancy and nonincreasing in the occupancies its supply reads
        let kept = up[e] - self.outflow(e, up, up, u);
        let inflow: f64 = edge
            .upstream
            .iter()
            .map(|&(k, split)| split * self.outflow(k, up, down, u))
            .sum();
        edge.capacity.min(kept + inflow + d[e])
    }

    /// Full update `x+ = f(x, u, d)`.
    pub fn step(&self, x: &[f64], u: &[f64], d: &[f64]) -> Vec<f64> {
        (0..self.edges.len()).map(|e| self.update_split(e, x, x, u, d)).collect()
    }

    /// Checks the supply identity `Σ_e α_ek u_e = 1` at every modeled
    /// downstream edge for every signal configuration of its tail junction.
    pub fn supply_identity_holds(&self, supply: &HashMap<(usize, usize), f64>) -> bool {
        (0..self.edges.len()).all(|k| {
            let Some(v) = self.edges[k].tail else { return true };
            [false, true].iter().all(|&phase| {
                let total: f64 = (0..self.edges.len())
                    .filter(|&e| self.edges[e].head == v && self.edges[e].phase == phase)
                    .map(|e| supply.get(&(e, k)).copied().unwrap_or(0.0))
                    .sum();
                (total - 1.0).abs() < 1e-12
            })
        })
    }

    /// Local edges `E^local(e)`: in- and out-edges of the tail junction and
    /// out-edges of the head junction.
    pub fn local_edges(&self, e: usize) -> Vec<usize> {
        let edge = &self.edges[e];
        let mut out: Vec<usize> = (0..self.edges.len())
            .filter(|&k| {
                let other = &self.edges[k];
                let at_tail = edge.tail.is_some() && (Some(other.head) == edge.tail || other.tail == edge.tail);
                let after_head = other.tail == Some(edge.head);
                at_tail || after_head
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn dependency_sets(&self) -> Vec<Dependency> {
        (0..self.edges.len())
            .map(|e| {
                let mut states = self.local_edges(e);
                states.push(e);
                let edge = &self.edges[e];
                let mut inputs = vec![edge.head];
                inputs.extend(edge.tail);
                Dependency::new(states, inputs)
            })
            .collect()
    }

    /// Occupancy box `[0, capacity]` per edge.
    pub fn state_domain(&self) -> Rect {
        Rect::new(
            vec![0.0; self.edges.len()],
            self.edges.iter().map(|e| e.capacity).collect(),
        )
        .expect("capacities are positive")
    }

    /// Uniform grid with `cells` cells per edge.
    pub fn state_grid(&self, cells: usize) -> Result<BoxPartition, GeometryError> {
        BoxPartition::uniform(self.state_domain(), &vec![cells; self.edges.len()])
    }

    /// Two input cells per junction, centered on the signal values 0 and 1.
    pub fn input_grid(&self) -> BoxPartition {
        let m = self.vertex_count();
        BoxPartition::uniform(Rect::new(vec![-0.5; m], vec![1.5; m]).expect("valid"), &vec![2; m])
            .expect("valid")
    }
}

/// Signal value of a continuous input coordinate.
pub fn signal(u: f64) -> bool {
    u >= 0.5
}

pub fn corridor_spec(blocks: usize, entry_demand: f64) -> NetworkSpec {
    let mut edges = Vec::new();
    let mut vertices = Vec::new();
    let mut links = Vec::new();
    for j in 1..=blocks {
        let v = format!("v{j}");
        let (a, c1, c2) = (format!("e{}", 3 * j - 2), format!("e{}", 3 * j - 1), format!("e{}", 3 * j));
        edges.push(EdgeSpec {
            name: a.clone(),
            tail: (j > 1).then(|| format!("v{}", j - 1)),
            head: v.clone(),
            capacity: 10.0,
            saturation: 6.0,
            disturbance: if j == 1 { entry_demand } else { 0.0 },
        });
        for c in [&c1, &c2] {
            edges.push(EdgeSpec {
                name: c.clone(),
                tail: None,
                head: v.clone(),
                capacity: 10.0,
                saturation: 2.0,
                disturbance: 1.0,
            });
        }
        if j < blocks {
            let next = format!("e{}", 3 * j + 1);
            links.push(LinkSpec {
                from: a.clone(),
                to: next.clone(),
                split: 0.8,
                supply: 1.0,
            });
            for c in [&c1, &c2] {
                links.push(LinkSpec {
                    from: c.clone(),
                    to: next.clone(),
                    split: 0.5,
                    supply: 0.5,
                });
            }
        }
        vertices.push(VertexSpec {
            name: v,
            on: vec![a],
            off: vec![c1, c2],
        });
    }
    NetworkSpec { edges, vertices, links }
}

impl SystemModel for TrafficNetwork {
    fn state_dim(&self) -> usize {
        self.edges.len()
    }

    fn input_dim(&self) -> usize {
        self.vertex_names.len()
    }

    fn eval_coord(&self, i: usize, x: &[f64], u: &[f64], d: &[f64]) -> f64 {
        self.update_split(i, x, x, u, d)
    }

    fn eval_coord_split(&self, i: usize, x_up: &[f64], x_down: &[f64], u: &[f64], d: &[f64]) -> f64 {
        self.update_split(i, x_up, x_down, u, d)
    }

    fn disturbance_bound(&self, i: usize) -> f64 {
        self.edges[i].disturbance
    }

    fn dependencies(&self) -> Vec<Dependency> {
        self.dependency_sets()
    }

    fn class(&self) -> ModelClass {
        ModelClass::Monotone
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::DependencyGraph;

    #[test]
    fn corridor_shapes() {
        let c1 = TrafficNetwork::corridor(1);
        assert_eq!((c1.state_dim(), c1.input_dim()), (3, 1));
        let c4 = TrafficNetwork::corridor(4);
        assert_eq!((c4.state_dim(), c4.input_dim()), (12, 4));
        assert_eq!(c4.input_grid().len(), 16);
        assert_eq!(TrafficNetwork::corridor(17).state_dim(), 51);
    }

    #[test]
    fn hand_evaluations() {
        let c1 = TrafficNetwork::corridor(1);
        assert_eq!(c1.step(&[4.0, 4.0, 4.0], &[1.0], &[0.0; 3]), vec![0.0, 4.0, 4.0]);
        assert_eq!(c1.step(&[4.0, 4.0, 4.0], &[0.0], &[0.0, 1.0, 1.0]), vec![4.0, 3.0, 3.0]);
        // a full collector receiving exogenous inflow saturates
        assert_eq!(c1.step(&[0.0, 9.5, 0.0], &[1.0], &[0.0, 1.0, 0.0])[1], 10.0);
    }

    #[test]
    fn dependency_sets_are_local() {
        let c2 = TrafficNetwork::corridor(2);
        let deps = c2.dependency_sets();
        assert_eq!(deps[0], Dependency::new(vec![0, 3], vec![0]));
        // collectors read themselves and the arterial edge leaving their head
        assert_eq!(deps[1], Dependency::new(vec![1, 3], vec![0]));
        assert_eq!(deps[5], Dependency::new(vec![5], vec![1]));
        assert_eq!(deps[3], Dependency::new(vec![0, 1, 2, 3], vec![0, 1]));
        let h: Vec<_> = [1, 2, 3, 5, 9]
            .iter()
            .map(|&k| {
                let net = TrafficNetwork::corridor(k);
                DependencyGraph::from_update_dependencies(net.state_dim(), net.input_dim(), &net.dependency_sets())
                    .unwrap()
                    .sparsity_discrete()
                    .unwrap()
            })
            .collect();
        assert_eq!(h, vec![2, 6, 7, 7, 7]);
    }

    #[test]
    fn supply_identity() {
        let spec = corridor_spec(3, 0.0);
        let net = TrafficNetwork::from_spec(&spec).unwrap();
        let idx = |n: &str| net.edge_names().iter().position(|e| e == n).unwrap();
        let supply = spec
            .links
            .iter()
            .map(|l| ((idx(&l.from), idx(&l.to)), l.supply))
            .collect();
        assert!(net.supply_identity_holds(&supply));
    }

    #[test]
    fn spec_validation() {
        let mut spec = corridor_spec(2, 0.0);
        spec.links.pop();
        assert!(matches!(TrafficNetwork::from_spec(&spec), Err(NetworkError::MissingLink { .. })));
        let mut spec = corridor_spec(2, 0.0);
        spec.links[0].split = 1.5;
        assert!(matches!(TrafficNetwork::from_spec(&spec), Err(NetworkError::BadRatio { .. })));
        let mut spec = corridor_spec(1, 0.0);
        spec.vertices[0].off.pop();
        assert!(matches!(TrafficNetwork::from_spec(&spec), Err(NetworkError::BadPhase { .. })));
        let mut spec = corridor_spec(1, 0.0);
        spec.edges[0].head = "nowhere".into();
        assert!(matches!(TrafficNetwork::from_spec(&spec), Err(NetworkError::UnknownVertex(_))));
        let json = serde_json::to_string(&corridor_spec(2, 0.0)).unwrap();
        let back: NetworkSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(TrafficNetwork::from_spec(&back).unwrap(), TrafficNetwork::corridor(2));
    }

    #[test]
    fn supply_limited_inflow_decreases_with_own_occupancy() {
        // the update of an arterial edge is not monotone in its own
        // occupancy once the inflow it admits is supply-limited
        let c3 = TrafficNetwork::corridor(3);
        let u = [1.0, 1.0, 1.0];
        let d = [0.0; 9];
        let low = c3.step(&[6.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0], &u, &d)[3];
        let high = c3.step(&[6.0, 0.0, 0.0, 5.8, 0.0, 0.0, 0.0, 0.0, 0.0], &u, &d)[3];
        assert!(high < low);
        // the split evaluation orders both
        let up = [6.0, 0.0, 0.0, 5.8, 0.0, 0.0, 0.0, 0.0, 0.0];
        let down = [6.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(c3.eval_coord_split(3, &down, &up, &u, &d) <= high.min(low));
        assert!(c3.eval_coord_split(3, &up, &down, &u, &d) >= high.max(low));
    }
}
