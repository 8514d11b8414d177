//! Seeded random sparse systems that are monotone and piecewise affine,
//! used to exercise the abstraction algorithms on many small instances.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::depgraph::Dependency;
use crate::geometry::{BoxPartition, GeometryError, Rect};
use crate::reach::{ModelClass, SystemModel};

/// One monotone piecewise-affine term `w_lo·min(v, k) + w_hi·max(v - k, 0)`
/// with nonnegative slopes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub slope_low: f64,
    pub slope_high: f64,
    pub knee: f64,
}

impl Term {
    fn eval(&self, v: f64) -> f64 {
        self.slope_low * v.min(self.knee) + self.slope_high * (v - self.knee).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    pub offset: f64,
    pub states: Vec<(usize, Term)>,
    pub inputs: Vec<(usize, Term)>,
    pub disturbance: f64,
}

/// `x_i+ = clamp(offset_i + Σ terms + d_i, 0, 1)` on the unit box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomSystem {
    n: usize,
    m: usize,
    coords: Vec<Coordinate>,
}

impl RandomSystem {
    /// Random dependency sets, each of size at most `max_deps`.
    pub fn generate(n: usize, m: usize, max_deps: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let deps = (0..n)
            .map(|_| {
                let size = rng.gen_range(1..=max_deps.clamp(1, n + m));
                let picks = sample(&mut rng, n + m, size).into_vec();
                Dependency::new(
                    picks.iter().copied().filter(|&p| p < n).collect(),
                    picks.iter().filter(|&&p| p >= n).map(|p| p - n).collect(),
                )
            })
            .collect::<Vec<_>>();
        Self::with_rng(n, m, &deps, &mut rng)
    }

    /// Random coefficients for fixed dependency sets.
    pub fn with_dependencies(n: usize, m: usize, deps: &[Dependency], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_rng(n, m, deps, &mut rng)
    }

    fn with_rng(n: usize, m: usize, deps: &[Dependency], rng: &mut ChaCha8Rng) -> Self {
        assert_eq!(deps.len(), n, "one dependency set per coordinate");
        let term = |rng: &mut ChaCha8Rng, fan_in: usize| Term {
            slope_low: rng.gen_range(0.0..1.2) / fan_in as f64,
            slope_high: rng.gen_range(0.0..1.2) / fan_in as f64,
            knee: rng.gen_range(0.0..1.0),
        };
        let coords = deps
            .iter()
            .map(|d| {
                let fan_in = d.len().max(1);
                Coordinate {
                    offset: rng.gen_range(-0.2..0.3),
                    states: d.states.iter().map(|&s| (s, term(rng, fan_in))).collect(),
                    inputs: d.inputs.iter().map(|&u| (u, term(rng, fan_in))).collect(),
                    disturbance: if rng.gen_bool(0.5) { rng.gen_range(0.0..0.15) } else { 0.0 },
                }
            })
            .collect();
        RandomSystem { n, m, coords }
    }

    pub fn grids(&self, state_cells: &[usize], input_cells: &[usize]) -> Result<(BoxPartition, BoxPartition), GeometryError> {
        Ok((
            BoxPartition::uniform(Rect::new(vec![0.0; self.n], vec![1.0; self.n])?, state_cells)?,
            BoxPartition::uniform(Rect::new(vec![0.0; self.m], vec![1.0; self.m])?, input_cells)?,
        ))
    }
}

impl SystemModel for RandomSystem {
    fn state_dim(&self) -> usize {
        self.n
    }

    fn input_dim(&self) -> usize {
        self.m
    }

    fn eval_coord(&self, i: usize, x: &[f64], u: &[f64], d: &[f64]) -> f64 {
        let c = &self.coords[i];
        let mut v = c.offset + d[i];
        for (s, t) in &c.states {
            v += t.eval(x[*s]);
        }
        for (k, t) in &c.inputs {
            v += t.eval(u[*k]);
        }
        v.clamp(0.0, 1.0)
    }

    fn disturbance_bound(&self, i: usize) -> f64 {
        self.coords[i].disturbance
    }

    fn dependencies(&self) -> Vec<Dependency> {
        self.coords
            .iter()
            .map(|c| {
                Dependency::new(
                    c.states.iter().map(|p| p.0).collect(),
                    c.inputs.iter().map(|p| p.0).collect(),
                )
            })
            .collect()
    }

    fn class(&self) -> ModelClass {
        ModelClass::Monotone
    }
}
