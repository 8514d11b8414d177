//! Kinematic bicycle sampled with a zero-order hold on the inputs.
//!
//! States are the planar position `(x1, x2)` and the orientation `x3`;
//! inputs are the velocity `u1` and the steering angle `u2`:
//!
//! ```text
//! x1' = u1 cos(a + x3) / cos(a)
//! x2' = u1 sin(a + x3) / cos(a)
//! x3' = u1 tan(u2),            a = atan(tan(u2) / 2)
//! ```

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depgraph::Dependency;
use crate::geometry::{BoxPartition, GeometryError, Rect};
use crate::reach::{ErrorBound, ModelClass, SystemModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BicycleError {
    #[error("sampling time must be positive, got {0}")]
    BadSamplingTime(f64),
    #[error("steering angle range must stay inside (-pi/2, pi/2)")]
    SteeringRange,
    #[error("integrator needs at least one substep")]
    NoSubsteps,
    #[error("{0}")]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Integrator {
    /// Closed-form solution along the constant-curvature arc.
    Exact,
    /// Classical fourth-order Runge-Kutta with fixed substeps.
    Rk4 { steps: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bicycle {
    tau: f64,
    integrator: Integrator,
}

impl Bicycle {
    pub fn new(tau: f64, integrator: Integrator) -> Result<Self, BicycleError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(BicycleError::BadSamplingTime(tau));
        }
        if integrator == (Integrator::Rk4 { steps: 0 }) {
            return Err(BicycleError::NoSubsteps);
        }
        Ok(Bicycle { tau, integrator })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn integrator(&self) -> Integrator {
        self.integrator
    }

    pub fn rhs(x: &[f64], u: &[f64]) -> [f64; 3] {
        let a = slip(u[1]);
        let speed = u[0] / a.cos();
        [speed * (a + x[2]).cos(), speed * (a + x[2]).sin(), u[0] * u[1].tan()]
    }

    /// One sampling period. Returns NaN components for `|u2| >= pi/2`.
    pub fn step(&self, x: &[f64], u: &[f64]) -> [f64; 3] {
        if u[1].abs() >= FRAC_PI_2 {
            return [f64::NAN; 3];
        }
        match self.integrator {
            Integrator::Exact => exact_step(self.tau, x, u),
            Integrator::Rk4 { steps } => rk4_step(self.tau, steps, x, u),
        }
    }

    /// Default arena `[0,10]² × [-π-0.4, π+0.4]`.
    pub fn default_state_domain() -> Rect {
        Rect::new(vec![0.0, 0.0, -PI - 0.4], vec![10.0, 10.0, PI + 0.4]).expect("valid")
    }

    pub fn default_input_domain() -> Rect {
        Rect::new(vec![-1.0, -1.0], vec![1.0, 1.0]).expect("valid")
    }

    pub fn grids(
        states: Rect,
        state_cells: [usize; 3],
        inputs: Rect,
        input_cells: [usize; 2],
    ) -> Result<(BoxPartition, BoxPartition), BicycleError> {
        if inputs.lo()[1] <= -FRAC_PI_2 || inputs.hi()[1] >= FRAC_PI_2 {
            return Err(BicycleError::SteeringRange);
        }
        Ok((
            BoxPartition::uniform(states, &state_cells)?,
            BoxPartition::uniform(inputs, &input_cells)?,
        ))
    }
}

fn slip(steer: f64) -> f64 {
    (steer.tan() / 2.0).atan()
}

/// `sin(z) / z`, accurate near zero.
fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

fn exact_step(tau: f64, x: &[f64], u: &[f64]) -> [f64; 3] {
    let a = slip(u[1]);
    let speed = u[0] / a.cos();
    let turn = u[0] * u[1].tan();
    let half = 0.5 * turn * tau;
    let heading = x[2] + a + half;
    let chord = speed * tau * sinc(half);
    [
        x[0] + chord * heading.cos(),
        x[1] + chord * heading.sin(),
        x[2] + turn * tau,
    ]
}

fn rk4_step(tau: f64, steps: usize, x: &[f64], u: &[f64]) -> [f64; 3] {
    let h = tau / steps as f64;
    let mut s = [x[0], x[1], x[2]];
    let add = |s: &[f64; 3], k: &[f64; 3], c: f64| [s[0] + c * k[0], s[1] + c * k[1], s[2] + c * k[2]];
    for _ in 0..steps {
        let k1 = Bicycle::rhs(&s, u);
        let k2 = Bicycle::rhs(&add(&s, &k1, h / 2.0), u);
        let k3 = Bicycle::rhs(&add(&s, &k2, h / 2.0), u);
        let k4 = Bicycle::rhs(&add(&s, &k3, h), u);
        for i in 0..3 {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    s
}

impl SystemModel for Bicycle {
    fn state_dim(&self) -> usize {
        3
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn eval_coord(&self, i: usize, x: &[f64], u: &[f64], _: &[f64]) -> f64 {
        if i == 2 && self.integrator == Integrator::Exact && u[1].abs() < FRAC_PI_2 {
            return x[2] + u[0] * u[1].tan() * self.tau;
        }
        self.step(x, u)[i]
    }

    fn eval(&self, x: &[f64], u: &[f64], _: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.step(x, u));
    }

    fn dependencies(&self) -> Vec<Dependency> {
        vec![
            Dependency::new(vec![0, 2], vec![0, 1]),
            Dependency::new(vec![1, 2], vec![0, 1]),
            Dependency::new(vec![2], vec![0, 1]),
        ]
    }

    fn class(&self) -> ModelClass {
        ModelClass::ErrorBounded
    }
}

/// Growth bound of the sampled bicycle around a cell center.
///
/// With `r` the state half-widths, `V` the largest speed `|u1| / cos a` over
/// the input cell, and `Δv, Δa, Δω` the largest deviations of speed, slip
/// angle and turn rate from their values at the input center:
///
/// ```text
/// β1 = r1 + τ·V·r3 + τ·Δv + V·(τ·Δa + τ²/2·Δω)      (β2 alike)
/// β3 = r3 + τ·Δω
/// ```
///
/// For point inputs the deviation terms vanish.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BicycleBound {
    pub tau: f64,
    /// Extra radius added to every coordinate.
    #[serde(default)]
    pub margin: [f64; 3],
}

impl BicycleBound {
    pub fn new(tau: f64) -> Self {
        BicycleBound { tau, margin: [0.0; 3] }
    }
}

fn interval_product(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let p = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    (
        p.iter().copied().fold(f64::INFINITY, f64::min),
        p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

fn deviation(range: (f64, f64), at: f64) -> f64 {
    (range.1 - at).max(at - range.0).max(0.0)
}

impl ErrorBound for BicycleBound {
    fn beta(&self, i: usize, r: &[f64], ulo: &[f64], uhi: &[f64]) -> f64 {
        let tau = self.tau;
        let speed_factor = |s: f64| (1.0 + (s.tan() / 2.0).powi(2)).sqrt();
        let (s_lo, s_hi) = (ulo[1], uhi[1]);
        let max_abs_steer = s_lo.abs().max(s_hi.abs());
        let min_abs_steer = if s_lo <= 0.0 && s_hi >= 0.0 {
            0.0
        } else {
            s_lo.abs().min(s_hi.abs())
        };
        let uc = [0.5 * (ulo[0] + uhi[0]), 0.5 * (s_lo + s_hi)];
        let speed = interval_product(
            (ulo[0], uhi[0]),
            (speed_factor(min_abs_steer), speed_factor(max_abs_steer)),
        );
        let vmax = speed.0.abs().max(speed.1.abs());
        let dv = deviation(speed, uc[0] * speed_factor(uc[1]));
        let da = deviation((slip(s_lo), slip(s_hi)), slip(uc[1]));
        let turn = interval_product((ulo[0], uhi[0]), (s_lo.tan(), s_hi.tan()));
        let dw = deviation(turn, uc[0] * uc[1].tan());
        let beta = match i {
            0 | 1 => r[i] + tau * vmax * r[2] + tau * dv + vmax * (tau * da + 0.5 * tau * tau * dw),
            _ => r[2] + tau * dw,
        };
        beta + self.margin[i]
    }
}
