//! Acceptance gate. Runs every criterion in order, prints one PASS/FAIL
//! line per criterion, and fails if any criterion fails.
//!
//! Run with `cargo test -p qhnn-core --test acceptance -- --nocapture` to
//! see the report.

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::time::{Duration, Instant};

use qhnn_core::diagnostics::{decompose, energy_identity, shifted_overlap};
use qhnn_core::dynamics::quantization_audit;
use qhnn_core::{
    convergence_sweep, enumerate_fixed_points, example_instance, example_resolution, random_hermitian_weights,
    random_state, reproduce_example, run, run_observed, Model, NetworkState, PhaseIndex, PhaseTriple, Quaternion,
    ResolutionFactors, RunConfig, SweepConfig, UpdateMode, Verdict, WeightMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(failures: Vec<String>, summary: String) -> Self {
        if failures.is_empty() {
            Self { passed: true, detail: summary }
        } else {
            let shown: Vec<_> = failures.iter().take(5).cloned().collect();
            Self { passed: false, detail: format!("{summary}; {} failure(s): {}", failures.len(), shown.join(" | ")) }
        }
    }
}

fn example_criterion(id: u8) -> Outcome {
    match reproduce_example(id) {
        Ok(r) => {
            let failures =
                r.failures().map(|c| format!("{}: expected {} got {}", c.name, c.expected, c.actual)).collect();
            Outcome::new(failures, format!("{} checks", r.checks.len()))
        }
        Err(e) => Outcome::new(vec![e.to_string()], String::new()),
    }
}

fn criterion_4() -> Outcome {
    let inst = example_instance();
    let k = example_resolution();
    let w = &inst.weights;
    let mut failures = Vec::new();
    let mut runs = 0;
    for model in [Model::MvQhnn, Model::MvQhnn3] {
        let fixed: HashSet<Vec<PhaseIndex>> = enumerate_fixed_points(model, w, k).unwrap().into_iter().collect();
        for mode in UpdateMode::ALL {
            for ordinal in 0..k.states_per_neuron().pow(2) {
                let per = k.states_per_neuron();
                let x0 = vec![k.index_from_ordinal(ordinal % per), k.index_from_ordinal(ordinal / per)];
                let state = NetworkState::from_indices(x0.clone(), k).unwrap();
                let out = run(w, &state, &RunConfig::new(model, mode, Some(k), 100)).unwrap();
                runs += 1;
                let end = out.final_state.indices().unwrap().to_vec();
                let starts_fixed = fixed.contains(&x0);
                let ok = match out.verdict {
                    Verdict::Converged { t } => fixed.contains(&end) && (t == 0.into()) == starts_fixed,
                    Verdict::Periodic { .. } => !starts_fixed,
                    Verdict::Exhausted { .. } => false,
                };
                if !ok {
                    failures.push(format!("{model} {mode} from {x0:?}: {:?}", out.verdict));
                }
            }
        }
    }
    Outcome::new(failures, format!("{runs} runs against the enumerated fixed-point sets"))
}

fn random_diagonal(w: &mut WeightMatrix, rng: &mut ChaCha8Rng) {
    for i in 0..w.n() {
        w.set(i, i, Quaternion::real(rng.random_range(0.0..2.0)));
    }
}

fn criterion_5() -> Outcome {
    let mut failures = Vec::new();
    let mut events = 0u64;
    let mut changing = 0u64;
    let mut rises = 0u64;
    let mut shallow = 0u64;
    let mut smallest_drop = f64::INFINITY;
    // Exact value of the drop: -(|v| + w_ii) |x' - x|^2 / 2.
    let mut worst_model_error = 0.0f64;
    for inst in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + inst);
        let n = 2 + (inst as usize % 9);
        let mut w = random_hermitian_weights(n, rng.random());
        if inst % 2 == 1 {
            random_diagonal(&mut w, &mut rng);
        }
        if !w.validate().passes() {
            failures.push(format!("instance {inst}: weights fail validation"));
            continue;
        }
        let k = ResolutionFactors::uniform(4).unwrap();
        let x0 = random_state(n, k, rng.random());
        let cfg = RunConfig::new(Model::CvQhnn, UpdateMode::Asynchronous, None, 500);
        let mut obs = |tr: &qhnn_core::Transition<'_>| {
            events += 1;
            let before = w.energy(tr.before.units()).unwrap();
            let after = w.energy(tr.after.units()).unwrap();
            let slack = 1e-12 * (1.0 + before.abs());
            if after > before + slack {
                rises += 1;
                failures.push(format!("instance {inst} t={}: energy rose by {:e}", tr.time, after - before));
            }
            if tr.changed {
                changing += 1;
                let i = tr.neuron;
                let step = (tr.after.units()[i] - tr.before.units()[i]).norm_squared();
                let model = -(tr.potential.norm() + w.self_weight(i)) * step / 2.0;
                worst_model_error = worst_model_error.max(((after - before) - model).abs() / (1.0 + before.abs()));
                smallest_drop = smallest_drop.min(before - after);
                if before - after <= slack {
                    shallow += 1;
                    failures.push(format!(
                        "instance {inst} t={}: state changed by {:e} but energy fell only {:e}",
                        tr.time,
                        tr.before.max_abs_diff(tr.after),
                        before - after
                    ));
                }
            }
        };
        run_observed(&w, &x0, &cfg, Some(&mut obs)).unwrap();
    }
    Outcome::new(
        failures,
        format!(
            "{events} events, {changing} state changes; {rises} increases, {shallow} changes with drop below \
             1e-12(1+|E|); smallest drop {smallest_drop:e}; worst deviation from -(|v|+w_ii)|dx|^2/2 \
             {worst_model_error:e}"
        ),
    )
}

fn closed_form_x3(before: Quaternion, after: Quaternion) -> Option<f64> {
    let a = before.to_phase_angles().ok()?;
    let b = after.to_phase_angles().ok()?;
    Some(shifted_overlap(b.phi - a.phi, b.psi - a.psi, b.theta - a.theta, a.psi))
}

fn criterion_6() -> Outcome {
    let mut failures = Vec::new();
    let mut transitions = 0u64;
    let mut changed = 0u64;
    let mut decomposed = 0u64;
    let mut worst_identity = 0.0f64;
    let mut worst_x3 = 0.0f64;
    let mut seed = 6000u64;
    while transitions < 12_000 || changed < 3_000 {
        for model in Model::ALL {
            seed += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2..=8);
            let mut w = random_hermitian_weights(n, rng.random());
            random_diagonal(&mut w, &mut rng);
            let k = ResolutionFactors::new(rng.random_range(2..=9), rng.random_range(2..=9), rng.random_range(2..=9))
                .unwrap();
            let x0 = random_state(n, k, rng.random());
            let resolution = model.is_multivalued().then_some(k);
            let cfg = RunConfig::new(model, UpdateMode::Asynchronous, resolution, 60);
            let mut obs = |tr: &qhnn_core::Transition<'_>| {
                transitions += 1;
                changed += u64::from(tr.changed);
                let id = energy_identity(&w, tr.before, tr.after, tr.neuron).unwrap();
                let r = (id.delta_e - id.delta_e_direct).abs();
                worst_identity = worst_identity.max(r);
                if r > 1e-9 * (1.0 + id.energy_before.abs()) {
                    failures.push(format!("{model} seed {seed} t={}: identity residual {r:e}", tr.time));
                }
                let (x, y) = (tr.before.units()[tr.neuron], tr.after.units()[tr.neuron]);
                match closed_form_x3(x, y) {
                    Some(x3) => {
                        worst_x3 = worst_x3.max((x3 - id.x3).abs());
                        if (x3 - id.x3).abs() > 1e-9 {
                            failures.push(format!("{model} seed {seed} t={}: X3 residual {:e}", tr.time, x3 - id.x3));
                        }
                    }
                    None => failures.push(format!("{model} seed {seed} t={}: state not representable", tr.time)),
                }
                if model.is_multivalued() {
                    if let Ok(d) = decompose(&w, tr.before, tr.after, tr.neuron, k) {
                        decomposed += 1;
                        let r = (d.x3 - d.x3_closed).abs();
                        worst_x3 = worst_x3.max(r);
                        if r > 1e-9 {
                            failures.push(format!("{model} seed {seed} t={}: integer-step X3 residual {r:e}", tr.time));
                        }
                    }
                }
            };
            run_observed(&w, &x0, &cfg, Some(&mut obs)).unwrap();
        }
    }
    Outcome::new(
        failures,
        format!(
            "{transitions} transitions ({changed} changing, {decomposed} decomposed); worst identity residual \
             {worst_identity:e}, worst X3 residual {worst_x3:e}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let cfg = SweepConfig::desk();
    let result = match convergence_sweep(&cfg) {
        Ok(r) => r,
        Err(e) => return Outcome::new(vec![e.to_string()], String::new()),
    };
    let mut failures = Vec::new();
    let mv3 = |mode, k| result.row(Model::MvQhnn3, mode, k).unwrap();
    for &k in &cfg.resolutions {
        let par = mv3(UpdateMode::Parallel, k);
        if par.probability != 0.0 {
            failures.push(format!("parallel MV-QHNN3 at K={}: P = {}", k.k1, par.probability));
        }
        if k.k1 >= 4 && mv3(UpdateMode::Asynchronous, k).probability < 0.8 {
            failures.push(format!(
                "async MV-QHNN3 at K={}: P = {}",
                k.k1,
                mv3(UpdateMode::Asynchronous, k).probability
            ));
        }
        for model in Model::ALL {
            let p = result.row(model, UpdateMode::Parallel, k).unwrap().probability;
            let a = result.row(model, UpdateMode::Asynchronous, k).unwrap().probability;
            if p > a {
                failures.push(format!("{model} at K={}: P(parallel) = {p} > P(async) = {a}", k.k1));
            }
        }
    }
    let big = ResolutionFactors::uniform(1 << 17).unwrap();
    let mut disagreements = 0;
    for trial in 0..cfg.trials {
        let mv = result.record(trial, Model::MvQhnn3, UpdateMode::Asynchronous, big).unwrap();
        let cv = result.record(trial, Model::CvQhnn, UpdateMode::Asynchronous, big).unwrap();
        if mv.verdict.is_converged() != cv.verdict.is_converged() {
            disagreements += 1;
            failures.push(format!("trial {trial} at K=2^17: MV-QHNN3 {:?} vs CV-QHNN {:?}", mv.verdict, cv.verdict));
        }
    }
    let async_k4 = mv3(UpdateMode::Asynchronous, ResolutionFactors::uniform(4).unwrap()).probability;
    let min_async = cfg
        .resolutions
        .iter()
        .filter(|k| k.k1 >= 4)
        .map(|&k| mv3(UpdateMode::Asynchronous, k).probability)
        .fold(1.0, f64::min);
    Outcome::new(
        failures,
        format!(
            "n={} trials={} t_max={} over K=2^1..2^20; async MV-QHNN3 P(K=4)={async_k4}, min over K>=4 = \
             {min_async}; K=2^17 verdict disagreements {disagreements}",
            cfg.n, cfg.trials, cfg.t_max
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let limit = FRAC_PI_4 - 1e-3;
    for s in 0..100_000u32 {
        let q = if s % 2 == 0 {
            let angles = PhaseTriple::new(
                rng.random_range(-PI..PI),
                rng.random_range(-limit..=limit),
                rng.random_range(-FRAC_PI_2..FRAC_PI_2),
            );
            Quaternion::from_phase_angles(angles, rng.random_range(0.1..10.0))
        } else {
            loop {
                let q = Quaternion::new(
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                );
                if q.norm() > 0.1 && q.to_phase_angles().is_ok_and(|p| p.psi.abs() <= limit) {
                    break q;
                }
            }
        };
        let back = q.to_phase_angles().map(|p| Quaternion::from_phase_angles(p, q.norm()));
        match back {
            Ok(b) => {
                let d = b.max_abs_diff(q);
                worst = worst.max(d);
                if d > 1e-10 {
                    failures.push(format!("{q}: round trip off by {d:e}"));
                }
            }
            Err(e) => failures.push(format!("{q}: {e}")),
        }
    }
    let audit = quantization_audit();
    if audit.violations != 0 {
        failures.push(format!("{} quantization bound violations", audit.violations));
    }
    if audit.calls == 0 {
        failures.push("no quantize calls were audited".into());
    }
    Outcome::new(
        failures,
        format!(
            "100000 round trips, worst {worst:e}; {} quantize calls audited, {} violations",
            audit.calls, audit.violations
        ),
    )
}

#[test]
fn acceptance() {
    type Criterion = (u8, &'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        (1, "two-neuron example, single-angle model", Duration::from_secs(1), || example_criterion(1)),
        (2, "two-neuron example, three-angle model", Duration::from_secs(1), || example_criterion(2)),
        (3, "two-neuron example, continuous model", Duration::from_secs(1), || example_criterion(3)),
        (4, "verdicts match enumerated fixed points", Duration::from_secs(10), criterion_4),
        (5, "continuous async energy monotonicity", Duration::from_secs(30), criterion_5),
        (6, "energy identity and closed-form overlap", Duration::from_secs(30), criterion_6),
        (7, "desk-scale convergence probabilities", Duration::from_secs(600), criterion_7),
        (8, "round trips and quantization bound", Duration::from_secs(60), criterion_8),
    ];
    let mut all = true;
    for (id, name, budget, f) in criteria {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let passed = out.passed && in_time;
        all &= passed;
        println!(
            "criterion {id} {}: {name} ({:.3} s, budget {} s) {}",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            out.detail,
        );
    }
    assert!(all, "acceptance criteria failed");
}
