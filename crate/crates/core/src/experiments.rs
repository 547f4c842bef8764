//! Reproductions of the two-neuron counterexamples, the random-network
//! convergence sweep, and the large-resolution comparison between the
//! three-angle multivalued model and the continuous model.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::diagnostics::decompose;
use crate::dynamics::{run, DynamicsError, Model, RunConfig, Time, Tolerances, TrajectoryOutcome, UpdateMode, Verdict};
use crate::instances::{example_instance, example_resolution};
use crate::network::{
    random_hermitian_weights, random_state, NetworkState, PhaseIndex, ResolutionFactors, WeightMatrix,
};
use crate::quaternion::{fmt_sig4, PhaseTriple, Quaternion};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("unknown example {0}; expected 1, 2 or 3")]
    UnknownExample(u8),
    #[error("a sweep needs at least one trial")]
    NoTrials,
    #[error("trial {trial} exceeded its wall-clock budget of {limit:?}")]
    BudgetExceeded { trial: usize, limit: Duration },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// One compared quantity of a reproduction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub tolerance: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproReport {
    pub example: u8,
    pub checks: Vec<Check>,
}

impl ReproReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Plain-text table, numbers to four significant digits.
    pub fn to_table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = format!("Example {}\n", self.example);
        for c in &self.checks {
            let tol = c.tolerance.map(|t| format!(" (tol {t:e})")).unwrap_or_default();
            out.push_str(&format!(
                "  [{}] {:width$}  expected {}  got {}{}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.expected,
                c.actual,
                tol,
            ));
        }
        out.push_str(if self.passed() { "all checks passed\n" } else { "some checks FAILED\n" });
        out
    }
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn real(&mut self, name: &str, expected: f64, actual: f64, tol: f64) {
        self.0.push(Check {
            name: name.into(),
            expected: expected.to_string(),
            actual: fmt_sig4(actual),
            tolerance: Some(tol),
            passed: (expected - actual).abs() <= tol,
        });
    }

    fn quat(&mut self, name: &str, expected: Quaternion, actual: Quaternion, tol: f64) {
        self.0.push(Check {
            name: name.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
            tolerance: Some(tol),
            passed: expected.max_abs_diff(actual) <= tol,
        });
    }

    fn exact<T: PartialEq>(&mut self, name: &str, expected: T, actual: T, show: impl Fn(&T) -> String) {
        self.0.push(Check {
            name: name.into(),
            expected: show(&expected),
            actual: show(&actual),
            tolerance: None,
            passed: expected == actual,
        });
    }

    fn verdict(&mut self, name: &str, expected: &str, actual: &Verdict) {
        self.0.push(Check {
            name: name.into(),
            expected: expected.into(),
            actual: describe_verdict(actual),
            tolerance: None,
            passed: actual.name() == expected,
        });
    }
}

pub fn describe_verdict(v: &Verdict) -> String {
    match v {
        Verdict::Converged { t } => format!("converged at t = {t}"),
        Verdict::Periodic { period, first_entry } => format!("periodic, period {period} from t = {first_entry}"),
        Verdict::Exhausted { t_max } => format!("exhausted after t = {t_max}"),
    }
}

fn show_triple(p: &PhaseTriple) -> String {
    format!("({}, {}, {})", fmt_sig4(p.phi), fmt_sig4(p.psi), fmt_sig4(p.theta))
}

fn show_indices(idx: &Option<Vec<PhaseIndex>>) -> String {
    match idx {
        Some(v) => v.iter().map(|i| format!("({},{},{})", i.l1, i.l2, i.l3)).collect::<Vec<_>>().join(" "),
        None => "none".into(),
    }
}

/// Budget used by the reproductions.
const EXAMPLE_T_MAX: u64 = 100;

/// Runs one of the two-neuron examples and compares every printed value.
pub fn reproduce_example(id: u8) -> Result<ReproReport, ExperimentError> {
    let checks = match id {
        1 => example_one()?,
        2 => example_two()?,
        3 => example_three()?,
        other => return Err(ExperimentError::UnknownExample(other)),
    };
    Ok(ReproReport { example: id, checks: checks.0 })
}

fn example_one() -> Result<Checks, ExperimentError> {
    let inst = example_instance();
    let k = example_resolution();
    let w = &inst.weights;
    let mut c = Checks::default();

    let v1 = w.activation_potential(inst.state.units(), 0).map_err(DynamicsError::from)?;
    c.quat("v1(0)", Quaternion::new(-0.1121, 1.577, -5.207, 7.028), v1, 5e-4);
    let angles = v1.to_phase_angles().unwrap_or(PhaseTriple::new(f64::NAN, f64::NAN, f64::NAN));
    c.real("alpha1(0)", 2.1939, angles.phi, 5e-4);
    c.real("beta1(0)", 0.09455, angles.psi, 5e-4);
    c.real("gamma1(0)", 1.4181, angles.theta, 5e-4);
    let (mid, _) = crate::dynamics::quantize(angles, k);
    c.exact("quantized (phi_M, psi_M, theta_M)", PhaseTriple::new(FRAC_PI_2, FRAC_PI_8, FRAC_PI_4), mid, show_triple);

    let cfg = RunConfig::new(Model::MvQhnn, UpdateMode::Asynchronous, Some(k), EXAMPLE_T_MAX).recording();
    let out = run(w, &inst.state, &cfg)?;
    let t6 = Time::new(1, 6);
    let x16 = out.state_at(t6).expect("recorded");
    c.exact(
        "x(1/6) phase indices",
        Some(vec![PhaseIndex::new(1, 0, 0), PhaseIndex::new(0, 0, 0)]),
        x16.indices().map(<[PhaseIndex]>::to_vec),
        show_indices,
    );
    c.real("E(x(0))", -5.0, out.energy_at(Time::from_integer(0)).unwrap_or(f64::NAN), 1e-9);
    c.real("E(x(1/6))", 5.0, out.energy_at(t6).unwrap_or(f64::NAN), 1e-9);
    c.real("E(x(1/3))", -5.0, out.energy_at(Time::new(1, 3)).unwrap_or(f64::NAN), 1e-9);

    match decompose(w, &inst.state, x16, 0, k) {
        Ok(d) => {
            c.exact("(a, b, c)", (1, 0, 0), (d.a, d.b, d.c), |t| format!("{t:?}"));
            c.real("delta phi", 0.6231, d.dphi_shift, 5e-4);
            c.real("delta psi", 0.4873, d.dpsi_shift, 5e-4);
            c.real("delta theta", 2.2035, d.dtheta_shift, 5e-4);
            c.exact("H1 holds", false, d.h1_holds, bool::to_string);
            c.exact("H2 holds", false, d.h2_holds, bool::to_string);
            c.real("Delta E (identity)", 10.0, d.delta_e, 1e-9);
        }
        Err(e) => c.exact("decomposition", "ok".to_string(), e.to_string(), String::clone),
    }
    c.verdict("async MV-QHNN verdict", "periodic", &out.verdict);
    let par = run(w, &inst.state, &RunConfig::new(Model::MvQhnn, UpdateMode::Parallel, Some(k), EXAMPLE_T_MAX))?;
    c.verdict("parallel MV-QHNN verdict", "periodic", &par.verdict);
    Ok(c)
}

fn example_two() -> Result<Checks, ExperimentError> {
    let inst = example_instance();
    let k = example_resolution();
    let mut c = Checks::default();
    let cfg = RunConfig::new(Model::MvQhnn3, UpdateMode::Asynchronous, Some(k), EXAMPLE_T_MAX).recording();
    let out = run(&inst.weights, &inst.state, &cfg)?;
    let half = Time::new(1, 2);
    c.exact(
        "x(1/2) phase indices",
        Some(vec![PhaseIndex::new(1, 1, 1), PhaseIndex::new(0, 0, 0)]),
        out.state_at(half).and_then(|s| s.indices()).map(<[PhaseIndex]>::to_vec),
        show_indices,
    );
    c.real("E(x(0))", -5.0, out.energy_at(Time::from_integer(0)).unwrap_or(f64::NAN), 1e-9);
    c.real("E(x(1/2))", -7.0, out.energy_at(half).unwrap_or(f64::NAN), 1e-9);
    c.verdict("async MV-QHNN3 verdict", "periodic", &out.verdict);
    let par =
        run(&inst.weights, &inst.state, &RunConfig::new(Model::MvQhnn3, UpdateMode::Parallel, Some(k), EXAMPLE_T_MAX))?;
    c.verdict("parallel MV-QHNN3 verdict", "periodic", &par.verdict);
    Ok(c)
}

fn example_three() -> Result<Checks, ExperimentError> {
    let inst = example_instance();
    let w = &inst.weights;
    let mut c = Checks::default();
    let x0_printed = Quaternion::new(-0.2706, -0.6533, -0.2706, 0.6533);
    let x1_printed = Quaternion::new(-0.01261, 0.1774, -0.5858, 0.7907);

    let cfg = RunConfig::new(Model::CvQhnn, UpdateMode::Asynchronous, None, EXAMPLE_T_MAX).recording();
    let out = run(w, &inst.state, &cfg)?;
    let half = Time::new(1, 2);
    let nan = Quaternion::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    let xh = out.state_at(half).map(|s| s.units().to_vec()).unwrap_or_else(|| vec![nan; 2]);
    c.quat("async x1(1/2)", x1_printed, xh[0], 5e-4);
    c.quat("async x2(1/2)", x0_printed, xh[1], 5e-4);
    c.exact("async verdict", Verdict::Converged { t: half }, out.verdict, describe_verdict);
    let e0 = out.energy_at(Time::from_integer(0)).unwrap_or(f64::NAN);
    let eh = out.energy_at(half).unwrap_or(f64::NAN);
    c.real("E(x(1/2))", -8.888, eh, 1e-3);
    c.real("Delta E", -3.888, eh - e0, 1e-3);

    let cfg = RunConfig::new(Model::CvQhnn, UpdateMode::Parallel, None, EXAMPLE_T_MAX).recording();
    let par = run(w, &inst.state, &cfg)?;
    let x1 = par.state_at(Time::from_integer(1)).map(|s| s.units().to_vec()).unwrap_or_else(|| vec![nan; 2]);
    c.quat("parallel x1(1)", x1_printed, x1[0], 5e-4);
    c.quat("parallel x2(1)", Quaternion::new(-0.2918, -0.9124, 0.2814, -0.05567), x1[1], 5e-4);
    let x2 = par.state_at(Time::from_integer(2));
    c.real("parallel |x(2) - x(0)|_max", 0.0, x2.map_or(f64::NAN, |s| s.max_abs_diff(&inst.state)), 1e-9);
    let worst = par.trace.iter().map(|e| (e.energy + 5.0).abs()).fold(0.0, f64::max);
    c.real("parallel max |E + 5|", 0.0, worst, 1e-9);
    c.exact(
        "parallel verdict",
        Verdict::Periodic { period: Time::from_integer(2), first_entry: Time::from_integer(0) },
        par.verdict,
        describe_verdict,
    );
    Ok(c)
}

/// Configuration of the random-network convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n: usize,
    pub trials: usize,
    pub t_max: u64,
    pub resolutions: Vec<ResolutionFactors>,
    pub models: Vec<Model>,
    pub modes: Vec<UpdateMode>,
    pub master_seed: u64,
    pub tolerances: Tolerances,
    /// Wall-clock cap per trial, checked between runs.
    pub trial_time_limit: Option<Duration>,
}

/// `K1 = K2 = K3 = 2^m` for each exponent.
pub fn power_of_two_resolutions(exponents: &[u32]) -> Vec<ResolutionFactors> {
    exponents.iter().map(|&m| ResolutionFactors::uniform(1u32 << m).expect("positive")).collect()
}

impl SweepConfig {
    /// 20 neurons, 30 trials, 200 time units, `K = 2^m` for `m = 1..=20`.
    pub fn desk() -> Self {
        Self {
            n: 20,
            trials: 30,
            t_max: 200,
            resolutions: power_of_two_resolutions(&(1..=20).collect::<Vec<_>>()),
            models: Model::ALL.to_vec(),
            modes: UpdateMode::ALL.to_vec(),
            master_seed: 2018,
            tolerances: Tolerances::default(),
            trial_time_limit: None,
        }
    }

    /// 100 neurons, 100 trials, 1000 time units.
    pub fn full() -> Self {
        Self { n: 100, trials: 100, t_max: 1000, ..Self::desk() }
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeds of trial `trial`: `(weights, initial state)`. Each is
/// `splitmix64(master ^ splitmix64(2·trial + stream))`.
pub fn trial_seeds(master: u64, trial: usize) -> (u64, u64) {
    let t = trial as u64;
    (splitmix64(master ^ splitmix64(2 * t)), splitmix64(master ^ splitmix64(2 * t + 1)))
}

/// Outcome of one `(trial, K, model, mode)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub resolution: ResolutionFactors,
    pub model: Model,
    pub mode: UpdateMode,
    pub verdict: Verdict,
    /// Largest single-event energy increase along the trajectory.
    pub max_energy_increase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub model: Model,
    pub mode: UpdateMode,
    pub resolution: ResolutionFactors,
    pub trials: usize,
    pub converged: usize,
    pub probability: f64,
    pub mean_t_conv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub records: Vec<TrialRecord>,
}

impl SweepResult {
    pub fn row(&self, model: Model, mode: UpdateMode, k: ResolutionFactors) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.model == model && r.mode == mode && r.resolution == k)
    }

    pub fn record(&self, trial: usize, model: Model, mode: UpdateMode, k: ResolutionFactors) -> Option<&TrialRecord> {
        self.records.iter().find(|r| r.trial == trial && r.model == model && r.mode == mode && r.resolution == k)
    }

    /// `model,mode,K1,K2,K3,trials,converged,probability,mean_t_conv`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,mode,K1,K2,K3,trials,converged,probability,mean_t_conv\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.model.short_name(),
                r.mode.short_name(),
                r.resolution.k1,
                r.resolution.k2,
                r.resolution.k3,
                r.trials,
                r.converged,
                r.probability,
                r.mean_t_conv.map(|t| t.to_string()).unwrap_or_default(),
            ));
        }
        out
    }
}

fn time_to_f64(t: Time) -> f64 {
    *t.numer() as f64 / *t.denom() as f64
}

fn max_energy_increase(out: &TrajectoryOutcome) -> f64 {
    out.trace.windows(2).map(|p| p[1].energy - p[0].energy).fold(f64::NEG_INFINITY, f64::max)
}

fn run_trial(cfg: &SweepConfig, trial: usize) -> Result<Vec<TrialRecord>, ExperimentError> {
    let start = Instant::now();
    let (w_seed, x_seed) = trial_seeds(cfg.master_seed, trial);
    let w = random_hermitian_weights(cfg.n, w_seed);
    let mut records = Vec::new();
    for &k in &cfg.resolutions {
        let x0 = random_state(cfg.n, k, x_seed);
        for &model in &cfg.models {
            for &mode in &cfg.modes {
                let mut rc = RunConfig::new(model, mode, Some(k), cfg.t_max);
                rc.tolerances = cfg.tolerances;
                let out = run(&w, &x0, &rc)?;
                records.push(TrialRecord {
                    trial,
                    resolution: k,
                    model,
                    mode,
                    verdict: out.verdict,
                    max_energy_increase: max_energy_increase(&out),
                });
                if let Some(limit) = cfg.trial_time_limit {
                    if start.elapsed() > limit {
                        return Err(ExperimentError::BudgetExceeded { trial, limit });
                    }
                }
            }
        }
    }
    Ok(records)
}

/// Runs every configured `(K, model, mode)` on the same random `(W, x0)`
/// per trial and tallies convergence. Trials run in parallel; the result
/// depends only on the configuration.
pub fn convergence_sweep(cfg: &SweepConfig) -> Result<SweepResult, ExperimentError> {
    if cfg.trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    let per_trial = (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect::<Result<Vec<_>, _>>()?;
    let records: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();

    let mut rows = Vec::new();
    for &k in &cfg.resolutions {
        for &model in &cfg.models {
            for &mode in &cfg.modes {
                let times: Vec<f64> = records
                    .iter()
                    .filter(|r| r.resolution == k && r.model == model && r.mode == mode)
                    .filter_map(|r| match r.verdict {
                        Verdict::Converged { t } => Some(time_to_f64(t)),
                        _ => None,
                    })
                    .collect();
                let converged = times.len();
                rows.push(SweepRow {
                    model,
                    mode,
                    resolution: k,
                    trials: cfg.trials,
                    converged,
                    probability: converged as f64 / cfg.trials as f64,
                    mean_t_conv: (converged > 0).then(|| times.iter().sum::<f64>() / converged as f64),
                });
            }
        }
    }
    Ok(SweepResult { rows, records })
}

/// Side-by-side comparison of two trajectories started from the same state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub multivalued_verdict: String,
    pub continuous_verdict: String,
    /// Both converged or neither did.
    pub verdicts_agree: bool,
    /// Max componentwise state difference after each common event.
    pub discrepancy: Vec<f64>,
    pub max_discrepancy: f64,
    /// `2 (Δφ + Δψ + Δθ)` per elapsed event.
    pub per_event_bound: f64,
    /// Whether `discrepancy[e] <= (e + 1) · per_event_bound` for all `e`.
    pub within_accumulated_bound: bool,
}

/// Max componentwise state difference after every event both recorded
/// trajectories share (index 0 is the initial state).
pub fn trajectory_discrepancy(a: &TrajectoryOutcome, b: &TrajectoryOutcome) -> Vec<f64> {
    match (&a.states, &b.states) {
        (Some(sa), Some(sb)) => sa.iter().zip(sb).map(|(x, y)| x.max_abs_diff(y)).collect(),
        _ => Vec::new(),
    }
}

/// Runs the asynchronous three-angle multivalued model at `k_big` and the
/// asynchronous continuous model from the same `(W, x0)` and compares them
/// event by event.
pub fn large_k_equivalence(
    w: &WeightMatrix,
    x0: &NetworkState,
    k_big: ResolutionFactors,
    t_max: u64,
) -> Result<ComparisonReport, ExperimentError> {
    let mv = run(w, x0, &RunConfig::new(Model::MvQhnn3, UpdateMode::Asynchronous, Some(k_big), t_max).recording())?;
    let cv = run(w, x0, &RunConfig::new(Model::CvQhnn, UpdateMode::Asynchronous, None, t_max).recording())?;
    let discrepancy = trajectory_discrepancy(&mv, &cv);
    let per_event_bound = 2.0 * (k_big.dphi() + k_big.dpsi() + k_big.dtheta());
    let within_accumulated_bound =
        discrepancy.iter().enumerate().all(|(e, &d)| d <= (e.max(1)) as f64 * per_event_bound);
    Ok(ComparisonReport {
        multivalued_verdict: describe_verdict(&mv.verdict),
        continuous_verdict: describe_verdict(&cv.verdict),
        verdicts_agree: mv.verdict.is_converged() == cv.verdict.is_converged(),
        max_discrepancy: discrepancy.iter().copied().fold(0.0, f64::max),
        discrepancy,
        per_event_bound,
        within_accumulated_bound,
    })
}

/// Example instance with its `K = (2, 2, 2)` resolution, for callers that
/// want the comparison on the counterexample.
pub fn example_equivalence(t_max: u64) -> Result<ComparisonReport, ExperimentError> {
    let inst = example_instance();
    large_k_equivalence(&inst.weights, &inst.state, example_resolution(), t_max)
}
