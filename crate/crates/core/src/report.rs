//! Machine-readable output: energy-trace CSV and verdict JSON.
//!
//! Numbers are written at full precision (shortest round-trip form).

use serde_json::{json, Value};

use crate::dynamics::{Time, TrajectoryOutcome, Verdict};

fn time_json(t: Time) -> Value {
    json!([*t.numer(), *t.denom()])
}

/// `t_num,t_den,energy,neuron,changed`, one row per event. `neuron` is
/// 0-based and empty for the initial row and for parallel sweeps.
pub fn trace_csv(out: &TrajectoryOutcome) -> String {
    let mut s = String::from("t_num,t_den,energy,neuron,changed\n");
    for e in &out.trace {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            e.time.numer(),
            e.time.denom(),
            e.energy,
            e.neuron.map(|i| i.to_string()).unwrap_or_default(),
            u8::from(e.changed),
        ));
    }
    s
}

/// Verdict as a JSON object. Times are `[numerator, denominator]`.
pub fn verdict_json(out: &TrajectoryOutcome) -> Value {
    let (t, period, first_entry) = match out.verdict {
        Verdict::Converged { t } => (Some(t), None, None),
        Verdict::Periodic { period, first_entry } => (None, Some(period), Some(first_entry)),
        Verdict::Exhausted { .. } => (None, None, None),
    };
    json!({
        "verdict": out.verdict.name(),
        "t": t.map(time_json),
        "period": period.map(time_json),
        "first_entry_t": first_entry.map(time_json),
        "t_max": match out.verdict { Verdict::Exhausted { t_max } => Some(t_max), _ => None },
        "final_energy": out.final_energy(),
        "energy_certified": out.energy_certified,
    })
}
