//! Run configuration: which system, which grid, which algorithm, and the
//! safety spec. Read from JSON and overridden by command-line flags.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use ssabs_core::abstraction::Algorithm;
use ssabs_core::depgraph::{Dependency, DependencyGraph};
use ssabs_core::encoding::BitOrder;
use ssabs_core::models::{Bicycle, BicycleBound, Integrator, NetworkSpec, RandomSystem, TrafficNetwork};
use ssabs_core::reach::{BoundaryRule, InputMode, Method, OverapproxScheme, SystemModel};
use ssabs_core::synthesis::SafetySpec;

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemConfig {
    Corridor {
        blocks: usize,
        #[serde(default)]
        entry_demand: f64,
    },
    Bicycle {
        #[serde(default = "default_tau")]
        tau: f64,
        #[serde(default = "default_integrator")]
        integrator: Integrator,
        #[serde(default = "default_bicycle_states")]
        state_cells: [usize; 3],
        #[serde(default = "default_bicycle_inputs")]
        input_cells: [usize; 2],
    },
    /// User network, inline or as a path to a JSON network file.
    Network {
        #[serde(default)]
        spec: Option<NetworkSpec>,
        #[serde(default)]
        path: Option<String>,
    },
    Random {
        n: usize,
        m: usize,
        max_deps: usize,
        #[serde(default = "default_random_cells")]
        cells: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Continuous-time dependency structure only; usable with `depgraph`.
    Ode {
        n: usize,
        m: usize,
        deps: Vec<Dependency>,
    },
}

fn default_tau() -> f64 {
    0.3
}

fn default_integrator() -> Integrator {
    Integrator::Exact
}

fn default_bicycle_states() -> [usize; 3] {
    [60, 60, 60]
}

fn default_bicycle_inputs() -> [usize; 2] {
    [7, 7]
}

fn default_random_cells() -> usize {
    4
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AlgoChoice {
    Bfa,
    #[default]
    Ssa,
    Both,
}

impl AlgoChoice {
    pub fn algorithms(self) -> Vec<Algorithm> {
        match self {
            AlgoChoice::Bfa => vec![Algorithm::Bfa],
            AlgoChoice::Ssa => vec![Algorithm::Ssa],
            AlgoChoice::Both => vec![Algorithm::Bfa, Algorithm::Ssa],
        }
    }
}

/// Safety spec: either `x_i <= threshold` everywhere or an explicit box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpecConfig {
    Threshold { threshold: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    /// Cells per state dimension for traffic networks.
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default)]
    pub algo: AlgoChoice,
    #[serde(default)]
    pub boundary: BoundaryRule,
    #[serde(default)]
    pub input_mode: Option<InputMode>,
    #[serde(default)]
    pub bit_order: BitOrder,
    #[serde(default)]
    pub spec: Option<SpecConfig>,
    #[serde(default)]
    pub seed: u64,
}

fn default_cells() -> usize {
    10
}

impl RunConfig {
    pub fn new(system: SystemConfig) -> Self {
        RunConfig {
            system,
            cells: default_cells(),
            algo: AlgoChoice::default(),
            boundary: BoundaryRule::default(),
            input_mode: None,
            bit_order: BitOrder::default(),
            spec: None,
            seed: 0,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    fn network(&self, spec: &Option<NetworkSpec>, path: &Option<String>) -> Result<TrafficNetwork, CliError> {
        let spec = match (spec, path) {
            (Some(s), None) => s.clone(),
            (None, Some(p)) => {
                let p = Path::new(p);
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
            }
            _ => return Err(CliError::Usage("network needs exactly one of `spec` and `path`".into())),
        };
        TrafficNetwork::from_spec(&spec).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn model(&self) -> Result<Arc<dyn SystemModel>, CliError> {
        Ok(match &self.system {
            SystemConfig::Corridor { blocks, entry_demand } => Arc::new(
                TrafficNetwork::corridor_with_entry_demand(*blocks, *entry_demand)
                    .map_err(|e| CliError::Usage(e.to_string()))?,
            ),
            SystemConfig::Bicycle { tau, integrator, .. } => {
                Arc::new(Bicycle::new(*tau, *integrator).map_err(|e| CliError::Usage(e.to_string()))?)
            }
            SystemConfig::Network { spec, path } => Arc::new(self.network(spec, path)?),
            SystemConfig::Random { n, m, max_deps, seed, .. } => {
                Arc::new(RandomSystem::generate(*n, *m, *max_deps, seed.unwrap_or(self.seed)))
            }
            SystemConfig::Ode { .. } => {
                return Err(CliError::Usage("an `ode` system only supports the depgraph command".into()))
            }
        })
    }

    /// Over-approximation scheme on the configured grid.
    pub fn scheme(&self) -> Result<OverapproxScheme, CliError> {
        let model = self.model()?;
        let usage = |e: &dyn std::fmt::Display| CliError::Usage(e.to_string());
        let (states, inputs, method, default_mode) = match &self.system {
            SystemConfig::Corridor { blocks, entry_demand } => {
                let net = TrafficNetwork::corridor_with_entry_demand(*blocks, *entry_demand).map_err(|e| usage(&e))?;
                (net.state_grid(self.cells).map_err(|e| usage(&e))?, net.input_grid(), Method::Corner, InputMode::Centers)
            }
            SystemConfig::Network { spec, path } => {
                let net = self.network(spec, path)?;
                (net.state_grid(self.cells).map_err(|e| usage(&e))?, net.input_grid(), Method::Corner, InputMode::Centers)
            }
            SystemConfig::Bicycle { tau, state_cells, input_cells, .. } => {
                let (s, i) = Bicycle::grids(
                    Bicycle::default_state_domain(),
                    *state_cells,
                    Bicycle::default_input_domain(),
                    *input_cells,
                )
                .map_err(|e| usage(&e))?;
                (s, i, Method::Bound(Arc::new(BicycleBound::new(*tau))), InputMode::Centers)
            }
            SystemConfig::Random { n, m, max_deps, cells, seed } => {
                let sys = RandomSystem::generate(*n, *m, *max_deps, seed.unwrap_or(self.seed));
                let (s, i) = sys.grids(&vec![*cells; *n], &vec![*cells; *m]).map_err(|e| usage(&e))?;
                (s, i, Method::Corner, InputMode::Cells)
            }
            SystemConfig::Ode { .. } => unreachable!("rejected by model()"),
        };
        Ok(OverapproxScheme::new(model, method, states, inputs)
            .map_err(|e| usage(&e))?
            .with_input_mode(self.input_mode.unwrap_or(default_mode))
            .with_boundary(self.boundary))
    }

    /// Dependency graph of the configured system, discrete unless the system
    /// is an ODE structure.
    pub fn dependency_graph(&self) -> Result<(DependencyGraph, Vec<usize>, Vec<usize>), CliError> {
        let usage = |e: &dyn std::fmt::Display| CliError::Usage(e.to_string());
        if let SystemConfig::Ode { n, m, deps } = &self.system {
            let g = DependencyGraph::from_ode_dependencies(*n, *m, deps).map_err(|e| usage(&e))?;
            return Ok((g, vec![self.cells; *n], vec![self.cells; *m]));
        }
        let scheme = self.scheme()?;
        let model = scheme.model();
        let g = DependencyGraph::from_update_dependencies(model.state_dim(), model.input_dim(), &model.dependencies())
            .map_err(|e| usage(&e))?;
        Ok((g, scheme.states().counts(), scheme.inputs().counts()))
    }

    pub fn safety_spec(&self, scheme: &OverapproxScheme) -> Result<SafetySpec, CliError> {
        match &self.spec {
            Some(SpecConfig::Threshold { threshold }) => Ok(SafetySpec::upper_bound(scheme.states(), *threshold)),
            Some(SpecConfig::Box { lo, hi }) => Ok(SafetySpec::new(lo.clone(), hi.clone())),
            None => Err(CliError::Usage("no safety spec: set `spec` in the config or pass --threshold".into())),
        }
    }

    pub fn bit_order(&self) -> BitOrder {
        self.bit_order
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corridor_config_parses_with_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"system": {"kind": "corridor", "blocks": 2}, "spec": {"threshold": 8}}"#).unwrap();
        assert_eq!(cfg.cells, 10);
        assert_eq!(cfg.algo, AlgoChoice::Ssa);
        assert_eq!(cfg.spec, Some(SpecConfig::Threshold { threshold: 8.0 }));
        let scheme = cfg.scheme().unwrap();
        assert_eq!(scheme.n(), 6);
        assert_eq!(scheme.input_mode(), InputMode::Centers);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let r: Result<RunConfig, _> = serde_json::from_str(r#"{"system": {"kind": "corridor", "blocks": 2}, "sytem": 1}"#);
        assert!(r.is_err());
    }

    #[test]
    fn ode_systems_only_build_graphs() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"system": {"kind": "ode", "n": 2, "m": 1, "deps": [{"states": [1], "inputs": []}, {"states": [], "inputs": [0]}]}}"#,
        )
        .unwrap();
        assert!(matches!(cfg.scheme(), Err(CliError::Usage(_))));
        let (g, _, _) = cfg.dependency_graph().unwrap();
        assert_eq!(g.sparsity_continuous().unwrap(), 3);
    }

    #[test]
    fn network_needs_one_source() {
        let cfg = RunConfig::new(SystemConfig::Network { spec: None, path: None });
        assert!(matches!(cfg.scheme(), Err(CliError::Usage(_))));
    }
}
