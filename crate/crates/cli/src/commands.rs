use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use ssabs_bdd::{BddManager, BigUint};
use ssabs_core::abstraction::{
    transitions_of, AbstractionError, AbstractionProblem, AbstractionResult, AbstractionStats, Algorithm, Execution,
    Options,
};
use ssabs_core::encoding::Encoding;
use ssabs_core::reach::BoundaryRule;
use ssabs_core::synthesis::{
    safe_set, synthesize_safety_with, Controller, ControllerReport, DisturbancePolicy, InputPolicy, Plant,
    SimulationConfig, SynthesisError, Trajectory,
};

use crate::config::{AlgoChoice, RunConfig, SpecConfig, SystemConfig};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "ssabs", version, about = "Finite abstractions and safety controllers for sparse control systems")]
pub struct Cli {
    /// JSON run configuration; command-line flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Wall-clock limit in seconds for the main computation.
    #[arg(long, global = true)]
    pub timeout: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the abstract transition relation; writes T.bdd and stats.json.
    Abstract(SystemArgs),
    /// Safety synthesis on a stored relation; writes controller.bdd and controller.json.
    Synthesize {
        #[command(flatten)]
        system: SystemArgs,
        /// Relation file, by default `<out>/T.bdd`.
        #[arg(long)]
        transitions: Option<PathBuf>,
    },
    /// Closed-loop simulation under a stored controller, or open loop with a fixed input.
    Simulate {
        #[command(flatten)]
        system: SystemArgs,
        /// Controller file, by default `<out>/controller.bdd`.
        #[arg(long)]
        controller: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = PolicyArg::Random)]
        policy: PolicyArg,
        #[arg(long, value_enum, default_value_t = DisturbanceArg::Random)]
        disturbance: DisturbanceArg,
        /// Comma-separated input cell held constant instead of a controller.
        #[arg(long, value_delimiter = ',')]
        open_loop: Option<Vec<usize>>,
        /// Comma-separated initial state for open-loop runs; defaults to the
        /// lower corner of the state domain.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x0: Option<Vec<f64>>,
    },
    /// Abstraction time and size of corridors over a range of lengths, as CSV.
    Benchmark {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long, default_value_t = 1)]
        from: usize,
        #[arg(long, default_value_t = 17)]
        to: usize,
    },
    /// Dependency graph in dot format and its sparsity parameters.
    Depgraph(SystemArgs),
    /// Model count of a stored relation or controller.
    Count {
        #[command(flatten)]
        system: SystemArgs,
        /// By default `<out>/T.bdd`.
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SystemKind {
    Corridor,
    Bicycle,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    First,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DisturbanceArg {
    Random,
    Worst,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Inclusive,
    Interior,
}

/// Flags that select or adjust the system, shared by every command.
#[derive(Clone, Debug, Default, Args)]
pub struct SystemArgs {
    #[arg(long, value_enum)]
    pub system: Option<SystemKind>,
    /// Corridor length in intersections.
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Cells per state dimension of traffic models.
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long, alias = "method", value_enum)]
    pub algo: Option<AlgoChoice>,
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryArg>,
    /// Safety spec `x_i <= threshold` on every state.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Evaluate over-approximations on the calling thread only.
    #[arg(long)]
    pub sequential: bool,
}

struct Context {
    cfg: RunConfig,
    out: PathBuf,
    deadline: Option<Instant>,
    timeout: Option<f64>,
    execution: Execution,
}

impl Context {
    fn options(&self) -> Options {
        Options {
            execution: self.execution,
            deadline: self.deadline,
            ..Options::default()
        }
    }

    fn path(&self, explicit: &Option<PathBuf>, name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out.join(name))
    }
}

fn resolve(cli: &Cli, args: &SystemArgs) -> Result<Context, CliError> {
    let mut cfg = match (&cli.config, args.system) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(SystemKind::Corridor)) => RunConfig::new(SystemConfig::Corridor {
            blocks: args.blocks.unwrap_or(1),
            entry_demand: 0.0,
        }),
        (None, Some(SystemKind::Bicycle)) => {
            serde_json::from_value(json!({"system": {"kind": "bicycle"}})).expect("bicycle defaults")
        }
        (None, Some(SystemKind::Random)) => RunConfig::new(SystemConfig::Random {
            n: 3,
            m: 2,
            max_deps: 3,
            cells: 4,
            seed: None,
        }),
        (None, None) => return Err(CliError::Usage("give --config or --system".into())),
    };
    if cli.config.is_some() {
        match (args.system, &cfg.system) {
            (None, _)
            | (Some(SystemKind::Corridor), SystemConfig::Corridor { .. })
            | (Some(SystemKind::Bicycle), SystemConfig::Bicycle { .. })
            | (Some(SystemKind::Random), SystemConfig::Random { .. }) => {}
            _ => return Err(CliError::Usage("--system disagrees with the config file".into())),
        }
    }
    if let Some(b) = args.blocks {
        match &mut cfg.system {
            SystemConfig::Corridor { blocks, .. } => *blocks = b,
            _ => return Err(CliError::Usage("--blocks only applies to corridors".into())),
        }
    }
    if let Some(c) = args.cells {
        cfg.cells = c;
    }
    if let Some(a) = args.algo {
        cfg.algo = a;
    }
    if let Some(b) = args.boundary {
        cfg.boundary = match b {
            BoundaryArg::Inclusive => BoundaryRule::Inclusive,
            BoundaryArg::Interior => BoundaryRule::Interior,
        };
    }
    if let Some(t) = args.threshold {
        cfg.spec = Some(SpecConfig::Threshold { threshold: t });
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.timeout {
        if !(t > 0.0) {
            return Err(CliError::Usage("--timeout must be positive".into()));
        }
    }
    Ok(Context {
        cfg,
        out: cli.out.clone(),
        deadline: cli.timeout.map(|t| Instant::now() + Duration::from_secs_f64(t)),
        timeout: cli.timeout,
        execution: if args.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        },
    })
}

fn abstraction_error(e: AbstractionError) -> CliError {
    match e {
        AbstractionError::Timeout { seconds } => CliError::Timeout(format!("abstraction after {seconds:.1} s")),
        other => CliError::Usage(other.to_string()),
    }
}

fn synthesis_error(e: SynthesisError) -> CliError {
    match e {
        SynthesisError::Timeout { iterations } => CliError::Timeout(format!("synthesis after {iterations} iterations")),
        other => CliError::Usage(other.to_string()),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    write(path, &(serde_json::to_string_pretty(value).expect("serializable") + "\n"))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// One abstraction in a fresh manager, with its serialized relation.
fn abstract_once(ctx: &Context, algorithm: Algorithm) -> Result<(AbstractionResult, String, BddManager), CliError> {
    let mgr = BddManager::new();
    let problem = AbstractionProblem::new(&mgr, ctx.cfg.scheme()?, ctx.cfg.bit_order()).map_err(abstraction_error)?;
    let result = problem.run(algorithm, &ctx.options()).map_err(abstraction_error)?;
    let text = mgr.serialize(&result.transitions);
    Ok((result, text, mgr))
}

fn cmd_abstract(ctx: &Context) -> Result<(), CliError> {
    let mut runs = Vec::new();
    for algorithm in ctx.cfg.algo.algorithms() {
        let (result, text, _mgr) = abstract_once(ctx, algorithm)?;
        println!(
            "{}: {:.3} s, {} nodes, {} bytes, {} transitions, {} evaluations",
            result.stats.method,
            result.stats.seconds,
            result.stats.nodes,
            text.len(),
            result.stats.transitions,
            result.stats.evals
        );
        runs.push((result.stats, text));
    }
    let (stats, text) = runs.last().expect("at least one algorithm");
    write(&ctx.out.join("T.bdd"), text)?;
    write_json(&ctx.out.join("stats.json"), stats)?;
    if let [(bfa, bfa_text), (ssa, ssa_text)] = runs.as_slice() {
        let identical = bfa_text == ssa_text;
        let speedup = bfa.seconds / ssa.seconds.max(1e-9);
        write_json(
            &ctx.out.join("comparison.json"),
            &json!({"identical": identical, "speedup": speedup, "bfa": bfa, "ssa": ssa}),
        )?;
        println!("identical: {identical}, speed-up {speedup:.2}x");
        if !identical {
            return Err(CliError::Verification("bfa and ssa relations differ".into()));
        }
    }
    Ok(())
}

/// Problem for the configured system with a stored function loaded into it.
fn load_into(ctx: &Context, path: &Path) -> Result<(AbstractionProblem, ssabs_bdd::Bdd), CliError> {
    let mgr = BddManager::new();
    let problem = AbstractionProblem::new(&mgr, ctx.cfg.scheme()?, ctx.cfg.bit_order()).map_err(abstraction_error)?;
    let f = mgr
        .deserialize(&read(path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e} (does the config match the file?)", path.display())))?;
    Ok((problem, f))
}

fn check_grid(ctx: &Context, sidecar: &Path, grid: &ssabs_core::abstraction::GridShape) -> Result<(), CliError> {
    let scheme = ctx.cfg.scheme()?;
    if grid.states != scheme.states().counts() || grid.inputs != scheme.inputs().counts() {
        return Err(CliError::Usage(format!(
            "{} was built on a different grid than the configured system",
            sidecar.display()
        )));
    }
    Ok(())
}

fn cmd_synthesize(ctx: &Context, transitions: &Option<PathBuf>) -> Result<(), CliError> {
    let t_path = ctx.path(transitions, "T.bdd");
    let sidecar = t_path.with_file_name("stats.json");
    if sidecar.exists() {
        let stats: AbstractionStats = serde_json::from_str(&read(&sidecar)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", sidecar.display())))?;
        check_grid(ctx, &sidecar, &stats.grid)?;
    }
    let (problem, t) = load_into(ctx, &t_path)?;
    let enc = problem.encoding();
    let states = problem.scheme().states();
    let spec = ctx.cfg.safety_spec(problem.scheme())?;
    let safe = safe_set(&spec, states, enc).map_err(synthesis_error)?;
    let start = Instant::now();
    let controller = synthesize_safety_with(enc, &t, &safe, ctx.deadline, |_, _| {}).map_err(synthesis_error)?;
    let seconds = start.elapsed().as_secs_f64();
    let report = controller.report(enc, &spec, seconds);
    let text = enc.manager().serialize(&controller.allowed);
    write(&ctx.out.join("controller.bdd"), &text)?;
    write_json(&ctx.out.join("controller.json"), &report)?;
    println!(
        "{} iterations, {} allowed pairs, {} invariant states, {} nodes, {} bytes, {:.3} s",
        report.iterations,
        report.pairs,
        report.invariant_states,
        report.nodes,
        text.len(),
        seconds
    );
    if controller.invariant.is_false() {
        println!("warning: the controlled invariant set is empty");
    }
    let sound = controller
        .is_sound(enc, &t)
        .map_err(synthesis_error)?;
    if !sound {
        return Err(CliError::Verification("controller is not invariant under the relation".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationSummary {
    runs: usize,
    steps: usize,
    safe: usize,
    /// First violating step of each unsafe run.
    violations: Vec<(u64, usize)>,
}

fn summarize(seeds: &[u64], steps: usize, runs: &[Trajectory]) -> SimulationSummary {
    SimulationSummary {
        runs: runs.len(),
        steps,
        safe: runs.iter().filter(|r| r.is_safe()).count(),
        violations: seeds
            .iter()
            .zip(runs)
            .filter_map(|(&s, r)| r.violation.map(|v| (s, v)))
            .collect(),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    ctx: &Context,
    controller: &Option<PathBuf>,
    runs: usize,
    steps: usize,
    policy: PolicyArg,
    disturbance: DisturbanceArg,
    open_loop: &Option<Vec<usize>>,
    x0: &Option<Vec<f64>>,
) -> Result<(), CliError> {
    let scheme = ctx.cfg.scheme()?;
    let spec = ctx.cfg.safety_spec(&scheme)?;
    let plant = Plant {
        model: scheme.model().as_ref(),
        states: scheme.states(),
        inputs: scheme.inputs(),
        spec: &spec,
    };
    let cfg = SimulationConfig {
        steps,
        input_policy: match policy {
            PolicyArg::First => InputPolicy::First,
            PolicyArg::Random => InputPolicy::Random,
        },
        disturbance: match disturbance {
            DisturbanceArg::Random => DisturbancePolicy::Random,
            DisturbanceArg::Worst => DisturbancePolicy::WorstCorner,
            DisturbanceArg::Zero => DisturbancePolicy::Zero,
        },
        seed: ctx.cfg.seed,
    };
    let seeds: Vec<u64> = (0..runs as u64).map(|k| ctx.cfg.seed + k).collect();

    if let Some(u) = open_loop {
        let counts = scheme.inputs().counts();
        if u.len() != counts.len() || u.iter().zip(&counts).any(|(k, c)| k >= c) {
            return Err(CliError::Usage(format!("--open-loop needs {} input cell indices below {counts:?}", counts.len())));
        }
        let x0 = x0.clone().unwrap_or_else(|| scheme.states().domain().lo().to_vec());
        if x0.len() != scheme.n() {
            return Err(CliError::Usage(format!("--x0 needs {} values", scheme.n())));
        }
        let trajectories = seeds
            .iter()
            .map(|&seed| plant.open_loop(u, &x0, &SimulationConfig { seed, ..cfg }))
            .collect::<Result<Vec<_>, _>>()
            .map_err(synthesis_error)?;
        let summary = summarize(&seeds, steps, &trajectories);
        println!("open loop: {} of {} runs stay safe", summary.safe, summary.runs);
        return write_json(&ctx.out.join("simulation.json"), &summary);
    }

    let c_path = ctx.path(controller, "controller.bdd");
    let sidecar = c_path.with_file_name("controller.json");
    if sidecar.exists() {
        let report: ControllerReport = serde_json::from_str(&read(&sidecar)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", sidecar.display())))?;
        check_grid(ctx, &sidecar, &report.grid)?;
    }
    let (problem, allowed) = load_into(ctx, &c_path)?;
    let enc = problem.encoding();
    let inputs = enc
        .manager()
        .var_set(enc.input_vars())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let controller = Controller {
        invariant: enc.manager().exists_set(&allowed, inputs),
        allowed,
        iterations: 0,
    };
    let table = controller.table(enc);
    let trajectories = plant
        .closed_loop_seeds(&table, &seeds, &cfg, ctx.execution)
        .map_err(synthesis_error)?;
    let summary = summarize(&seeds, steps, &trajectories);
    println!("closed loop: {} of {} runs stay safe", summary.safe, summary.runs);
    write_json(&ctx.out.join("simulation.json"), &summary)?;
    if summary.safe != summary.runs {
        return Err(CliError::Verification(format!(
            "{} closed-loop runs left the safe set",
            summary.runs - summary.safe
        )));
    }
    Ok(())
}

/// CSV row of one corridor length; a timed-out row keeps only `n`.
fn benchmark_row(ctx: &Context, algorithm: Algorithm) -> Result<String, CliError> {
    let n = ctx.cfg.scheme()?.n();
    match abstract_once(ctx, algorithm) {
        Ok((result, text, _)) => Ok(format!(
            "{n},{:.6},{},{},{}",
            result.stats.seconds,
            result.stats.nodes,
            text.len(),
            result.stats.transitions
        )),
        Err(CliError::Timeout(_)) => Ok(format!("{n},timeout,,,")),
        Err(e) => Err(e),
    }
}

fn cmd_benchmark(cli_timeout: Option<f64>, ctx: &mut Context, from: usize, to: usize) -> Result<(), CliError> {
    let algorithm = match ctx.cfg.algo {
        AlgoChoice::Bfa => Algorithm::Bfa,
        AlgoChoice::Ssa => Algorithm::Ssa,
        AlgoChoice::Both => return Err(CliError::Usage("benchmark runs one algorithm at a time".into())),
    };
    if !matches!(ctx.cfg.system, SystemConfig::Corridor { .. }) {
        return Err(CliError::Usage("benchmark sweeps corridor lengths; use --system corridor".into()));
    }
    let mut csv = String::from("n,seconds,nodes,bytes,transitions\n");
    println!("n,seconds,nodes,bytes,transitions");
    for k in from..=to {
        if let SystemConfig::Corridor { blocks, .. } = &mut ctx.cfg.system {
            *blocks = k;
        }
        // the limit applies per row
        ctx.deadline = cli_timeout.map(|t| Instant::now() + Duration::from_secs_f64(t));
        let row = benchmark_row(ctx, algorithm)?;
        println!("{row}");
        let _ = writeln!(csv, "{row}");
    }
    write(&ctx.out.join("benchmark.csv"), &csv)
}

fn cmd_depgraph(ctx: &Context) -> Result<(), CliError> {
    let (graph, state_counts, input_counts) = ctx.cfg.dependency_graph()?;
    let report = graph.report(&state_counts, &input_counts);
    let dot = graph.to_dot();
    print!("{dot}");
    println!("n = {}, m = {}", report.n, report.m);
    if let Some(h) = report.h_discrete {
        println!("h_discrete = {h}");
    }
    if let Some(h) = report.h_continuous {
        println!("h_continuous = {h}");
    }
    println!("h = {}", report.h);
    println!("evaluations: bfa {} ssa {}", report.bfa_evals, report.ssa_evals);
    write(&ctx.out.join("depgraph.dot"), &dot)?;
    write_json(
        &ctx.out.join("depgraph.json"),
        &json!({
            "n": report.n,
            "m": report.m,
            "h": report.h,
            "h_discrete": report.h_discrete,
            "h_continuous": report.h_continuous,
            "bfa_evals": report.bfa_evals.to_string(),
            "ssa_evals": report.ssa_evals.to_string(),
            "dependencies": report.dependencies,
        }),
    )
}

/// Transitions of a relation, or allowed pairs of a controller when the
/// function does not mention next-state variables.
pub fn count_function(enc: &Encoding, f: &ssabs_bdd::Bdd) -> Result<BigUint, CliError> {
    let mgr = enc.manager();
    let support = mgr.support(f);
    if support.iter().any(|v| enc.next_vars().contains(v)) {
        return Ok(transitions_of(enc, f));
    }
    let domain = mgr.and_all([f, &enc.valid_states(0..enc.n()), &enc.valid_inputs(0..enc.m())]);
    let vars: Vec<_> = enc.state_vars().iter().chain(enc.input_vars()).copied().collect();
    mgr.sat_count(&domain, &vars).map_err(|e| CliError::Usage(e.to_string()))
}

fn cmd_count(ctx: &Context, file: &Option<PathBuf>) -> Result<(), CliError> {
    let path = ctx.path(file, "T.bdd");
    let (problem, f) = load_into(ctx, &path)?;
    println!("{}", count_function(problem.encoding(), &f)?);
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Abstract(args) => cmd_abstract(&resolve(&cli, args)?),
        Command::Synthesize { system, transitions } => cmd_synthesize(&resolve(&cli, system)?, transitions),
        Command::Simulate {
            system,
            controller,
            runs,
            steps,
            policy,
            disturbance,
            open_loop,
            x0,
        } => cmd_simulate(
            &resolve(&cli, system)?,
            controller,
            *runs,
            *steps,
            *policy,
            *disturbance,
            open_loop,
            x0,
        ),
        Command::Benchmark { system, from, to } => {
            let mut ctx = resolve(&cli, system)?;
            cmd_benchmark(ctx.timeout, &mut ctx, *from, *to)
        }
        Command::Depgraph(args) => cmd_depgraph(&resolve(&cli, args)?),
        Command::Count { system, file } => cmd_count(&resolve(&cli, system)?, file),
    }
}
