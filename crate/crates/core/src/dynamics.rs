//! Update rules of the three network models and trajectory execution.
//!
//! * `MvQhnn` replaces one phase angle of a neuron per update. A time unit
//!   is a φ sweep, then a ψ sweep, then a θ sweep over neurons `0..n`.
//! * `MvQhnn3` replaces all three phase angles at once; one sweep per unit.
//! * `CvQhnn` sets a neuron to its normalized activation potential; one
//!   sweep per unit.
//!
//! Asynchronous mode applies every neuron update immediately. Parallel
//! mode computes a whole sweep from the state at the start of that sweep.
//! Time is kept as an exact fraction `events / events_per_unit`.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::atomic::{AtomicU64, Ordering};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{NetworkError, NetworkState, PhaseIndex, ResolutionFactors, WeightMatrix};
use crate::quaternion::{PhaseTriple, Quaternion};

/// Exact time stamp, in time units.
pub type Time = Ratio<u64>;

/// Largest `(K1 K2 K3)^n` accepted by [`enumerate_fixed_points`].
pub const ENUMERATION_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("the {0} model needs resolution factors")]
    MissingResolution(Model),
    #[error("the {0} model needs a state carrying phase indices")]
    MissingIndices(Model),
    #[error("t_max must be at least 1")]
    ZeroBudget,
    #[error("{0} is not a multivalued model")]
    NotMultivalued(Model),
    #[error("enumeration needs {needed} states, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    #[serde(rename = "mv")]
    MvQhnn,
    #[serde(rename = "mv3")]
    MvQhnn3,
    #[serde(rename = "cv")]
    CvQhnn,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::MvQhnn, Model::MvQhnn3, Model::CvQhnn];

    pub fn is_multivalued(self) -> bool {
        !matches!(self, Model::CvQhnn)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Model::MvQhnn => "mv",
            Model::MvQhnn3 => "mv3",
            Model::CvQhnn => "cv",
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Model::MvQhnn => "MV-QHNN",
            Model::MvQhnn3 => "MV-QHNN3",
            Model::CvQhnn => "CV-QHNN",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    #[serde(rename = "async")]
    Asynchronous,
    Parallel,
}

impl UpdateMode {
    pub const ALL: [UpdateMode; 2] = [UpdateMode::Asynchronous, UpdateMode::Parallel];

    pub fn short_name(self) -> &'static str {
        match self {
            UpdateMode::Asynchronous => "async",
            UpdateMode::Parallel => "parallel",
        }
    }
}

impl std::fmt::Display for UpdateMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Which phase angle a single-angle update replaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AngleSelector {
    Phi,
    Psi,
    Theta,
}

impl AngleSelector {
    pub const SWEEP_ORDER: [AngleSelector; 3] = [AngleSelector::Phi, AngleSelector::Psi, AngleSelector::Theta];
}

/// Numerical thresholds of the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `|v_i|` at or below this is treated as a zero potential (CV model).
    pub zero_potential: f64,
    /// Max componentwise difference under which a CV neuron counts as
    /// unchanged and two CV states count as equal.
    pub state: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { zero_potential: 1e-12, state: 1e-9 }
    }
}

static QUANTIZE_CALLS: AtomicU64 = AtomicU64::new(0);
static QUANTIZE_VIOLATIONS: AtomicU64 = AtomicU64::new(0);

/// Process-wide counters of [`quantize`] calls and of calls whose output
/// strayed more than half a quantum from the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantizationAudit {
    pub calls: u64,
    pub violations: u64,
}

pub fn quantization_audit() -> QuantizationAudit {
    QuantizationAudit {
        calls: QUANTIZE_CALLS.load(Ordering::Relaxed),
        violations: QUANTIZE_VIOLATIONS.load(Ordering::Relaxed),
    }
}

#[inline]
fn arc_index(angle: f64, lower: f64, quantum: f64, count: u32) -> u32 {
    let raw = ((angle - lower) / quantum).floor();
    if raw <= 0.0 {
        0
    } else {
        (raw as u32).min(count - 1)
    }
}

/// Midpoints of the arcs containing each angle, with their arc indices.
///
/// Out-of-range floor results (an angle sitting on the upper end of its
/// interval) are clamped to the last arc.
pub fn quantize(angles: PhaseTriple, k: ResolutionFactors) -> (PhaseTriple, PhaseIndex) {
    let idx = PhaseIndex::new(
        arc_index(angles.phi, -PI, k.dphi(), k.k1),
        arc_index(angles.psi, -FRAC_PI_4, k.dpsi(), k.k2),
        arc_index(angles.theta, -FRAC_PI_2, k.dtheta(), k.k3),
    );
    let mid = k.angles(idx);

    // |mid - angle| < quantum/2; equality only at an arc's left end, plus
    // rounding in the angle itself.
    let slack = 4.0 * f64::EPSILON * PI;
    let within = |m: f64, a: f64, q: f64| (m - a).abs() < 0.5 * q + slack;
    let ok = within(mid.phi, angles.phi, k.dphi())
        && within(mid.psi, angles.psi, k.dpsi())
        && within(mid.theta, angles.theta, k.dtheta());
    QUANTIZE_CALLS.fetch_add(1, Ordering::Relaxed);
    if !ok {
        QUANTIZE_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
    }
    debug_assert!(ok, "quantization bound violated for {angles:?} at {k:?}");
    (mid, idx)
}

/// New value of one neuron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronUpdate {
    pub unit: Quaternion,
    pub index: Option<PhaseIndex>,
    pub potential: Quaternion,
    pub changed: bool,
}

fn mv_rule(
    k: ResolutionFactors,
    current: PhaseIndex,
    current_unit: Quaternion,
    v: Quaternion,
    selector: Option<AngleSelector>,
) -> NeuronUpdate {
    let unchanged = NeuronUpdate { unit: current_unit, index: Some(current), potential: v, changed: false };
    let Ok(angles) = v.to_phase_angles() else {
        return unchanged;
    };
    let (_, q) = quantize(angles, k);
    let next = match selector {
        Some(AngleSelector::Phi) => PhaseIndex { l1: q.l1, ..current },
        Some(AngleSelector::Psi) => PhaseIndex { l2: q.l2, ..current },
        Some(AngleSelector::Theta) => PhaseIndex { l3: q.l3, ..current },
        None => q,
    };
    if next == current {
        unchanged
    } else {
        NeuronUpdate { unit: k.unit(next), index: Some(next), potential: v, changed: true }
    }
}

fn cv_rule(current: Quaternion, v: Quaternion, tol: &Tolerances) -> NeuronUpdate {
    let norm = v.norm();
    if norm <= tol.zero_potential {
        return NeuronUpdate { unit: current, index: None, potential: v, changed: false };
    }
    let unit = v.scale(1.0 / norm);
    NeuronUpdate { unit, index: None, potential: v, changed: unit.max_abs_diff(current) > tol.state }
}

fn checked_neuron(w: &WeightMatrix, x: &NetworkState, i: usize) -> Result<Quaternion, DynamicsError> {
    Ok(w.activation_potential(x.units(), i)?)
}

fn mv_index(x: &NetworkState, i: usize, model: Model, k: ResolutionFactors) -> Result<PhaseIndex, DynamicsError> {
    let idx = x.indices().ok_or(DynamicsError::MissingIndices(model))?[i];
    k.check_index(idx)?;
    Ok(idx)
}

/// Single-angle multivalued update of neuron `i`. A potential outside the
/// uniquely representable set leaves the neuron unchanged.
pub fn step_mvqhnn(
    w: &WeightMatrix,
    x: &NetworkState,
    i: usize,
    k: ResolutionFactors,
    selector: AngleSelector,
) -> Result<NeuronUpdate, DynamicsError> {
    let v = checked_neuron(w, x, i)?;
    let idx = mv_index(x, i, Model::MvQhnn, k)?;
    Ok(mv_rule(k, idx, x.units()[i], v, Some(selector)))
}

/// Multivalued update of all three angles of neuron `i`.
pub fn step_mvqhnn3(
    w: &WeightMatrix,
    x: &NetworkState,
    i: usize,
    k: ResolutionFactors,
) -> Result<NeuronUpdate, DynamicsError> {
    let v = checked_neuron(w, x, i)?;
    let idx = mv_index(x, i, Model::MvQhnn3, k)?;
    Ok(mv_rule(k, idx, x.units()[i], v, None))
}

/// `x_i ← v_i / |v_i|` unless the potential vanishes.
pub fn step_cvqhnn(
    w: &WeightMatrix,
    x: &NetworkState,
    i: usize,
    tol: &Tolerances,
) -> Result<NeuronUpdate, DynamicsError> {
    let v = checked_neuron(w, x, i)?;
    Ok(cv_rule(x.units()[i], v, tol))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub mode: UpdateMode,
    pub resolution: Option<ResolutionFactors>,
    /// Budget in time units.
    pub t_max: u64,
    pub tolerances: Tolerances,
    /// Keep the full state after every event in [`TrajectoryOutcome::states`].
    pub record_states: bool,
}

impl RunConfig {
    pub fn new(model: Model, mode: UpdateMode, resolution: Option<ResolutionFactors>, t_max: u64) -> Self {
        Self { model, mode, resolution, t_max, tolerances: Tolerances::default(), record_states: false }
    }

    pub fn recording(mut self) -> Self {
        self.record_states = true;
        self
    }
}

/// Number of update events in one time unit.
pub fn events_per_unit(model: Model, mode: UpdateMode, n: usize) -> u64 {
    let n = n as u64;
    match (model, mode) {
        (Model::MvQhnn, UpdateMode::Asynchronous) => 3 * n,
        (Model::MvQhnn, UpdateMode::Parallel) => 3,
        (_, UpdateMode::Asynchronous) => n,
        (_, UpdateMode::Parallel) => 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// No state change for a full time unit; `t` is when the final state
    /// was reached.
    Converged {
        t: Time,
    },
    /// The state at the end of unit `first_entry + period` equals the state
    /// at the end of unit `first_entry`.
    Periodic {
        period: Time,
        first_entry: Time,
    },
    Exhausted {
        t_max: u64,
    },
}

impl Verdict {
    pub fn is_converged(&self) -> bool {
        matches!(self, Verdict::Converged { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Converged { .. } => "converged",
            Verdict::Periodic { .. } => "periodic",
            Verdict::Exhausted { .. } => "exhausted",
        }
    }
}

/// One row of the energy trace. The first row is the initial state at
/// `t = 0` with no neuron. Parallel sweeps have no single neuron either.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub time: Time,
    pub energy: f64,
    pub neuron: Option<usize>,
    pub changed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome {
    pub verdict: Verdict,
    pub trace: Vec<TraceEvent>,
    pub final_state: NetworkState,
    /// State after every trace row, when requested.
    pub states: Option<Vec<NetworkState>>,
    /// False when `W` fails the Hermitian/nonnegative-diagonal conditions,
    /// in which case the reported energies are only the real part of a
    /// non-real form.
    pub energy_certified: bool,
    pub events_per_unit: u64,
}

impl TrajectoryOutcome {
    pub fn final_energy(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |e| e.energy)
    }

    /// Energy at the first trace row with the given time.
    pub fn energy_at(&self, t: Time) -> Option<f64> {
        self.trace.iter().find(|e| e.time == t).map(|e| e.energy)
    }

    /// State at the first trace row with the given time (needs recording).
    pub fn state_at(&self, t: Time) -> Option<&NetworkState> {
        let pos = self.trace.iter().position(|e| e.time == t)?;
        self.states.as_ref().map(|s| &s[pos])
    }
}

/// A single-neuron transition seen by a [`run_observed`] observer.
#[derive(Debug)]
pub struct Transition<'a> {
    pub time: Time,
    pub neuron: usize,
    pub potential: Quaternion,
    pub before: &'a NetworkState,
    pub after: &'a NetworkState,
    pub changed: bool,
}

enum CycleDetector {
    Exact(HashMap<Vec<PhaseIndex>, u64>),
    Approx { tol: f64, width: f64, buckets: HashMap<i64, Vec<usize>>, seen: Vec<(u64, Vec<Quaternion>)> },
}

impl CycleDetector {
    fn new(multivalued: bool, tol: f64) -> Self {
        if multivalued {
            CycleDetector::Exact(HashMap::new())
        } else {
            CycleDetector::Approx { tol, width: (4.0 * tol).max(1e-6), buckets: HashMap::new(), seen: Vec::new() }
        }
    }

    /// Records the state at the end of `unit`; returns the unit of an
    /// earlier matching state.
    fn observe(&mut self, state: &NetworkState, unit: u64) -> Option<u64> {
        match self {
            CycleDetector::Exact(map) => {
                let key = state.indices().expect("multivalued state").to_vec();
                match map.get(&key) {
                    Some(&u) => Some(u),
                    None => {
                        map.insert(key, unit);
                        None
                    }
                }
            }
            CycleDetector::Approx { tol, width, buckets, seen } => {
                // Bucket on one coordinate; states within tol fall in the
                // same or an adjacent bucket.
                let key = (state.units()[0].q0 / *width).floor() as i64;
                for probe in key - 1..=key + 1 {
                    if let Some(list) = buckets.get(&probe) {
                        for &pos in list {
                            let (u, ref units) = seen[pos];
                            let close = units.iter().zip(state.units()).all(|(a, b)| a.max_abs_diff(*b) <= *tol);
                            if close {
                                return Some(u);
                            }
                        }
                    }
                }
                buckets.entry(key).or_default().push(seen.len());
                seen.push((unit, state.units().to_vec()));
                None
            }
        }
    }
}

/// Runs a trajectory; see [`run_observed`].
pub fn run(w: &WeightMatrix, x0: &NetworkState, cfg: &RunConfig) -> Result<TrajectoryOutcome, DynamicsError> {
    run_observed(w, x0, cfg, None)
}

/// Runs a trajectory until it converges, revisits a time-unit boundary
/// state, or exceeds `t_max` time units.
///
/// `observer` is invoked for every asynchronous single-neuron transition;
/// parallel sweeps are not reported to it.
pub fn run_observed(
    w: &WeightMatrix,
    x0: &NetworkState,
    cfg: &RunConfig,
    mut observer: Option<&mut dyn FnMut(&Transition<'_>)>,
) -> Result<TrajectoryOutcome, DynamicsError> {
    let n = w.n();
    if x0.n() != n {
        return Err(NetworkError::DimensionMismatch { weights: n, state: x0.n() }.into());
    }
    if cfg.t_max == 0 {
        return Err(DynamicsError::ZeroBudget);
    }
    let model = cfg.model;
    let tol = cfg.tolerances;
    let mut state = if model.is_multivalued() {
        let k = cfg.resolution.ok_or(DynamicsError::MissingResolution(model))?;
        let indices = x0.indices().ok_or(DynamicsError::MissingIndices(model))?;
        // Rebuild so the quaternions are exactly the grid values of `k`.
        NetworkState::from_indices(indices.to_vec(), k)?
    } else {
        x0.clone().into_continuous()
    };
    let k = cfg.resolution.unwrap_or(ResolutionFactors { k1: 1, k2: 1, k3: 1 });

    let energy_certified = w.validate_with_tolerance(1e-12).passes();
    let epu = events_per_unit(model, cfg.mode, n);
    let total_events = cfg.t_max.saturating_mul(epu);

    let mut energy = w.energy(state.units())?;
    let mut trace = vec![TraceEvent { time: Time::from_integer(0), energy, neuron: None, changed: false }];
    let mut states = cfg.record_states.then(|| vec![state.clone()]);
    let mut detector = CycleDetector::new(model.is_multivalued(), tol.state);
    detector.observe(&state, 0);

    let update = |units: &[Quaternion], indices: Option<&[PhaseIndex]>, i: usize, sel: Option<AngleSelector>| {
        let v = w.potential_unchecked(units, i);
        match model {
            Model::CvQhnn => cv_rule(units[i], v, &tol),
            _ => mv_rule(k, indices.expect("indices")[i], units[i], v, sel),
        }
    };

    let mut event: u64 = 0;
    let mut unchanged_run: u64 = 0;
    let mut last_change: u64 = 0;
    let mut verdict = None;

    while event < total_events {
        let phase = event % epu;
        let (neuron, changed) = match cfg.mode {
            UpdateMode::Asynchronous => {
                let (i, sel) = match model {
                    Model::MvQhnn => (phase as usize % n, Some(AngleSelector::SWEEP_ORDER[phase as usize / n])),
                    _ => (phase as usize, None),
                };
                let upd = update(state.units(), state.indices(), i, sel);
                let old = state.units()[i];
                let before = observer.as_ref().map(|_| state.clone());
                if upd.unit != old {
                    energy = if energy_certified {
                        let x1 = upd.unit.real_inner(upd.potential);
                        let x2 = old.real_inner(upd.potential);
                        let x3 = upd.unit.real_inner(old);
                        energy - (x1 - x2) + w.self_weight(i) * (x3 - 1.0)
                    } else {
                        let mut probe = state.units().to_vec();
                        probe[i] = upd.unit;
                        w.energy(&probe)?
                    };
                    state.set_neuron(i, upd.unit, upd.index);
                }
                if let (Some(obs), Some(before)) = (observer.as_mut(), before.as_ref()) {
                    obs(&Transition {
                        time: Time::new(event + 1, epu),
                        neuron: i,
                        potential: upd.potential,
                        before,
                        after: &state,
                        changed: upd.changed,
                    });
                }
                (Some(i), upd.changed)
            }
            UpdateMode::Parallel => {
                let sel = (model == Model::MvQhnn).then(|| AngleSelector::SWEEP_ORDER[phase as usize]);
                let updates: Vec<NeuronUpdate> =
                    (0..n).map(|i| update(state.units(), state.indices(), i, sel)).collect();
                let changed = updates.iter().any(|u| u.changed);
                for (i, u) in updates.into_iter().enumerate() {
                    match model {
                        Model::CvQhnn => state.set_unit(i, u.unit),
                        _ => state.set_neuron(i, u.unit, u.index),
                    }
                }
                energy = w.energy(state.units())?;
                (None, changed)
            }
        };
        event += 1;
        trace.push(TraceEvent { time: Time::new(event, epu), energy, neuron, changed });
        if let Some(s) = states.as_mut() {
            s.push(state.clone());
        }

        if changed {
            unchanged_run = 0;
            last_change = event;
        } else {
            unchanged_run += 1;
        }
        if unchanged_run >= epu {
            verdict = Some(Verdict::Converged { t: Time::new(last_change, epu) });
            break;
        }
        if event.is_multiple_of(epu) {
            let unit = event / epu;
            if let Some(earlier) = detector.observe(&state, unit) {
                verdict = Some(Verdict::Periodic {
                    period: Time::from_integer(unit - earlier),
                    first_entry: Time::from_integer(earlier),
                });
                break;
            }
        }
    }

    Ok(TrajectoryOutcome {
        verdict: verdict.unwrap_or(Verdict::Exhausted { t_max: cfg.t_max }),
        trace,
        final_state: state,
        states,
        energy_certified,
        events_per_unit: epu,
    })
}

/// Whether every single update prescribed by `model` leaves `x` unchanged,
/// which makes `x` invariant under a full time unit in either mode.
pub fn is_fixed_point(
    model: Model,
    w: &WeightMatrix,
    x: &NetworkState,
    k: ResolutionFactors,
) -> Result<bool, DynamicsError> {
    if !model.is_multivalued() {
        return Err(DynamicsError::NotMultivalued(model));
    }
    let indices = x.indices().ok_or(DynamicsError::MissingIndices(model))?;
    for (i, (&idx, &unit)) in indices.iter().zip(x.units()).enumerate() {
        let v = w.potential_unchecked(x.units(), i);
        let stays = match model {
            Model::MvQhnn => AngleSelector::SWEEP_ORDER.iter().all(|&s| !mv_rule(k, idx, unit, v, Some(s)).changed),
            _ => !mv_rule(k, idx, unit, v, None).changed,
        };
        if !stays {
            return Ok(false);
        }
    }
    Ok(true)
}

/// All states of a small multivalued network that are invariant under a
/// full time unit, found by exhaustive search. Neuron 0 varies fastest.
pub fn enumerate_fixed_points(
    model: Model,
    w: &WeightMatrix,
    k: ResolutionFactors,
) -> Result<Vec<Vec<PhaseIndex>>, DynamicsError> {
    if !model.is_multivalued() {
        return Err(DynamicsError::NotMultivalued(model));
    }
    let per = u128::from(k.states_per_neuron());
    let needed = per.checked_pow(w.n() as u32).unwrap_or(u128::MAX);
    if needed > u128::from(ENUMERATION_BUDGET) {
        return Err(DynamicsError::BudgetExceeded { needed, budget: ENUMERATION_BUDGET });
    }
    let per = per as u64;
    let mut found = Vec::new();
    for ordinal in 0..needed as u64 {
        let mut rest = ordinal;
        let indices: Vec<PhaseIndex> = (0..w.n())
            .map(|_| {
                let idx = k.index_from_ordinal(rest % per);
                rest /= per;
                idx
            })
            .collect();
        let x = NetworkState::from_indices(indices, k)?;
        if is_fixed_point(model, w, &x, k)? {
            found.push(x.indices().expect("indices").to_vec());
        }
    }
    Ok(found)
}
