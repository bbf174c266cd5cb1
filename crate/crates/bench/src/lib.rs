//! Fixtures shared by the criterion benches.

use invpend_core::{SimConfig, State, StepReference};

/// 0.3 m step from the upright origin, 1 ms steps.
pub fn step_config(duration_s: f64) -> SimConfig {
    SimConfig {
        duration_s,
        reference: StepReference {
            amplitude_m: 0.3,
            start_s: 0.0,
        },
        initial_state: State::default(),
        ..SimConfig::default()
    }
}

/// Deterministic input pairs covering the fuzzy universe and its shoulders.
pub fn fuzzy_inputs(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let t = k as f64 / n as f64;
            (3.0 * (t * 17.0).sin(), 3.0 * (t * 29.0).cos())
        })
        .collect()
}
