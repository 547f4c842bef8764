use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qhnn_core::diagnostics::{decompose, energy_identity};
use qhnn_core::experiments::{power_of_two_resolutions, trial_seeds, ExperimentError};
use qhnn_core::report::{trace_csv, verdict_json};
use qhnn_core::{
    convergence_sweep, enumerate_fixed_points, example_instance, example_resolution, random_hermitian_weights,
    random_state, reproduce_example, run_observed, DynamicsError, Instance, InstanceDocument, Model, ResolutionFactors,
    RunConfig, SweepConfig, Tolerances, Transition, UpdateMode,
};

#[derive(Parser)]
#[command(name = "qhnn", version, about = "Quaternionic Hopfield network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and write its energy trace and verdict.
    Run(RunArgs),
    /// Reproduce one of the built-in two-neuron examples.
    Example(ExampleArgs),
    /// Convergence probability over random networks.
    Sweep(SweepArgs),
    /// Check the Hermitian and nonnegative-diagonal weight conditions.
    Validate(ValidateArgs),
    /// Enumerate the fixed points of a small multivalued network.
    FixedPoints(FixedPointArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Mv,
    Mv3,
    Cv,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Mv => Model::MvQhnn,
            ModelArg::Mv3 => Model::MvQhnn3,
            ModelArg::Cv => Model::CvQhnn,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Async,
    Parallel,
}

impl From<ModeArg> for UpdateMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Async => UpdateMode::Asynchronous,
            ModeArg::Parallel => UpdateMode::Parallel,
        }
    }
}

/// `K` or `K1,K2,K3`.
fn parse_resolution(s: &str) -> Result<ResolutionFactors, String> {
    let parts: Vec<u32> =
        s.split(',').map(|p| p.trim().parse::<u32>().map_err(|e| format!("{p:?}: {e}"))).collect::<Result<_, _>>()?;
    let k = match parts[..] {
        [k] => ResolutionFactors::new(k, k, k),
        [k1, k2, k3] => ResolutionFactors::new(k1, k2, k3),
        _ => return Err("expected K or K1,K2,K3".into()),
    };
    k.map_err(|e| e.to_string())
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Instance JSON file.
    #[arg(long, value_name = "FILE")]
    instance: Option<PathBuf>,
    /// Built-in two-neuron instance (all three examples share it).
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u8).range(1..=3))]
    example_instance: Option<u8>,
    /// Random Hermitian network with this many neurons (see --seed).
    #[arg(long, value_name = "N")]
    random: Option<usize>,
}

#[derive(Args)]
struct InstanceArgs {
    #[command(flatten)]
    source: Source,
    /// Seed for --random.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Resolution factors, `K` or `K1,K2,K3`. Required for multivalued
    /// models unless using --example-instance (defaults to 2).
    #[arg(long, value_name = "K", value_parser = parse_resolution)]
    k: Option<ResolutionFactors>,
}

/// Grid used for random continuous-model states when no `--k` is given.
const DEFAULT_CONTINUOUS_GRID: u32 = 1 << 17;

impl InstanceArgs {
    /// Loads the instance. With `need_grid` the state carries phase indices.
    fn load(&self, need_grid: bool) -> Result<(Instance, Option<ResolutionFactors>), Usage> {
        let s = &self.source;
        if s.example_instance.is_some() {
            let k = self.k.unwrap_or_else(example_resolution);
            if k != example_resolution() && need_grid {
                return Err(Usage::new("the built-in instance lives on the K = 2 grid"));
            }
            return Ok((example_instance(), need_grid.then_some(k)));
        }
        if need_grid && self.k.is_none() {
            return Err(Usage::new("multivalued models need --k"));
        }
        if let Some(n) = s.random {
            if n == 0 {
                return Err(Usage::new("--random needs at least one neuron"));
            }
            let grid = match self.k {
                Some(k) => k,
                None => ResolutionFactors::uniform(DEFAULT_CONTINUOUS_GRID).expect("positive"),
            };
            let (ws, xs) = trial_seeds(self.seed, 0);
            let inst = Instance { weights: random_hermitian_weights(n, ws), state: random_state(n, grid, xs) };
            return Ok((inst, need_grid.then_some(grid)));
        }
        let path = s.instance.as_deref().expect("clap enforces one source");
        let text = fs::read_to_string(path).map_err(|e| Usage::new(format!("{}: {e}", path.display())))?;
        let doc = InstanceDocument::from_json(&text).map_err(|e| Usage::new(format!("{}: {e}", path.display())))?;
        let k = if need_grid { self.k } else { None };
        let inst = doc.into_instance(k).map_err(|e| Usage::new(format!("{}: {e}", path.display())))?;
        Ok((inst, k))
    }
}

#[derive(Args)]
struct ToleranceArgs {
    /// Potentials with norm at or below this leave the continuous state unchanged.
    #[arg(long, value_name = "TOL")]
    zero_potential_tol: Option<f64>,
    /// Per-component tolerance for continuous state changes and revisits.
    #[arg(long, value_name = "TOL")]
    state_tol: Option<f64>,
}

impl ToleranceArgs {
    fn tolerances(&self) -> Tolerances {
        let mut t = Tolerances::default();
        if let Some(z) = self.zero_potential_tol {
            t.zero_potential = z;
        }
        if let Some(s) = self.state_tol {
            t.state = s;
        }
        t
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long, value_enum, default_value = "async")]
    mode: ModeArg,
    #[command(flatten)]
    instance: InstanceArgs,
    /// Time units before giving up.
    #[arg(long, default_value_t = 1000)]
    t_max: u64,
    /// Energy trace CSV output.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Verdict JSON output; printed to stdout when omitted.
    #[arg(long, value_name = "FILE")]
    verdict: Option<PathBuf>,
    /// Write per-update energy diagnostics as JSON lines (asynchronous only).
    #[arg(long, value_name = "FILE")]
    diagnose: Option<PathBuf>,
    #[command(flatten)]
    tolerances: ToleranceArgs,
}

#[derive(Args)]
struct ExampleArgs {
    #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
    id: u8,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// 100 neurons, 100 trials, 1000 time units.
    #[arg(long)]
    full: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    t_max: Option<u64>,
    /// Exponents m of K = 2^m, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u32).range(0..=31))]
    exponents: Option<Vec<u32>>,
    #[arg(long, value_enum, value_delimiter = ',')]
    models: Option<Vec<ModelArg>>,
    #[arg(long, value_enum, value_delimiter = ',')]
    modes: Option<Vec<ModeArg>>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Wall-clock limit per trial in seconds.
    #[arg(long, value_name = "SECS")]
    trial_time_limit: Option<f64>,
    /// CSV output; printed to stdout when omitted.
    #[arg(long, short, value_name = "FILE")]
    output: Option<PathBuf>,
    #[command(flatten)]
    tolerances: ToleranceArgs,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Largest accepted deviation.
    #[arg(long, default_value_t = 0.0)]
    tolerance: f64,
}

#[derive(Args)]
struct FixedPointArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[command(flatten)]
    instance: InstanceArgs,
}

/// Bad flag combination or unusable input.
#[derive(Debug)]
struct Usage(String);

impl Usage {
    fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// A check ran and failed.
#[derive(Debug)]
struct CheckFailed;

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("check failed")
    }
}

impl std::error::Error for CheckFailed {}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let model: Model = args.model.into();
    let mode: UpdateMode = args.mode.into();
    if args.diagnose.is_some() && mode != UpdateMode::Asynchronous {
        return Err(Usage::new("--diagnose needs --mode async").into());
    }
    if args.t_max == 0 {
        return Err(Usage::new("--t-max must be at least 1").into());
    }
    let (inst, k) = args.instance.load(model.is_multivalued())?;
    let mut cfg = RunConfig::new(model, mode, k, args.t_max);
    cfg.tolerances = args.tolerances.tolerances();

    let w = &inst.weights;
    let mut lines = Vec::new();
    let mut observer = |tr: &Transition<'_>| {
        if !tr.changed {
            return;
        }
        let mut row = match energy_identity(w, tr.before, tr.after, tr.neuron) {
            Ok(id) => serde_json::to_value(id).expect("serializable"),
            Err(e) => serde_json::json!({ "neuron": tr.neuron, "error": e.to_string() }),
        };
        if let Some(k) = k {
            if let Ok(d) = decompose(w, tr.before, tr.after, tr.neuron, k) {
                row["decomposition"] = serde_json::to_value(d).expect("serializable");
            }
        }
        row["t"] = serde_json::json!([*tr.time.numer(), *tr.time.denom()]);
        lines.push(serde_json::to_string(&row).expect("serializable"));
    };
    let observer: Option<&mut dyn FnMut(&Transition<'_>)> =
        if args.diagnose.is_some() { Some(&mut observer) } else { None };
    let out = run_observed(w, &inst.state, &cfg, observer)?;

    if let Some(p) = &args.diagnose {
        let mut text = lines.join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &args.trace {
        fs::write(p, trace_csv(&out)).with_context(|| format!("writing {}", p.display()))?;
    }
    let verdict = serde_json::to_string_pretty(&verdict_json(&out))? + "\n";
    write_or_print(args.verdict.as_deref(), &verdict)
}

fn cmd_example(args: ExampleArgs) -> Result<()> {
    let report = reproduce_example(args.id)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_table());
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CheckFailed.into())
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = if args.full { SweepConfig::full() } else { SweepConfig::desk() };
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(t) = args.t_max {
        cfg.t_max = t;
    }
    if let Some(e) = &args.exponents {
        cfg.resolutions = power_of_two_resolutions(e);
    }
    if let Some(m) = &args.models {
        cfg.models = m.iter().map(|&m| m.into()).collect();
    }
    if let Some(m) = &args.modes {
        cfg.modes = m.iter().map(|&m| m.into()).collect();
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(secs) = args.trial_time_limit {
        cfg.trial_time_limit = Some(Duration::try_from_secs_f64(secs).map_err(|e| Usage::new(e.to_string()))?);
    }
    cfg.tolerances = args.tolerances.tolerances();
    if cfg.trials == 0 || cfg.n == 0 || cfg.t_max == 0 {
        return Err(Usage::new("--n, --trials and --t-max must be positive").into());
    }
    let result = convergence_sweep(&cfg)?;
    write_or_print(args.output.as_deref(), &result.to_csv())
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let (inst, _) = args.instance.load(false)?;
    let report = inst.weights.validate_with_tolerance(args.tolerance);
    println!("n = {}, tolerance = {:e}, max deviation = {:e}", report.n, report.tolerance, report.max_deviation);
    for v in &report.violations {
        println!("  ({}, {}) {:?}: deviation {:e}", v.i + 1, v.j + 1, v.kind, v.deviation);
    }
    if report.passes() {
        println!("ok");
        Ok(())
    } else {
        println!("{} violation(s)", report.violations.len());
        Err(CheckFailed.into())
    }
}

fn cmd_fixed_points(args: FixedPointArgs) -> Result<()> {
    let model: Model = args.model.into();
    if !model.is_multivalued() {
        return Err(Usage::new("fixed-points needs a multivalued model (mv or mv3)").into());
    }
    let (inst, k) = args.instance.load(true)?;
    let k = k.expect("multivalued load returns a grid");
    let points = enumerate_fixed_points(model, &inst.weights, k)?;
    println!("{} fixed point(s) of {} with K = ({}, {}, {})", points.len(), model, k.k1, k.k2, k.k3);
    for p in &points {
        let cells: Vec<String> = p.iter().map(|i| format!("({},{},{})", i.l1, i.l2, i.l3)).collect();
        println!("{}", cells.join(" "));
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<CheckFailed>() {
        return 1;
    }
    if err.is::<Usage>() {
        return 2;
    }
    match err.downcast_ref::<ExperimentError>() {
        Some(ExperimentError::BudgetExceeded { .. }) => return 3,
        Some(ExperimentError::Dynamics(DynamicsError::BudgetExceeded { .. })) => return 3,
        _ => {}
    }
    if let Some(DynamicsError::BudgetExceeded { .. }) = err.downcast_ref::<DynamicsError>() {
        return 3;
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Example(a) => cmd_example(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Validate(a) => cmd_validate(a),
        Command::FixedPoints(a) => cmd_fixed_points(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.is::<CheckFailed>() {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
