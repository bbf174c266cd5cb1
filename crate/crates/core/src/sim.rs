//! Fixed-step closed-loop simulation.

use std::io::{Read, Write};

use nalgebra::SVector;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::Controller;
use crate::plant::{nonlinear_derivative, PlantParams, State};

/// Classical fourth-order Runge–Kutta step with the input held constant.
pub fn rk4_step<const N: usize, F>(f: F, y: &SVector<f64, N>, u: f64, dt: f64) -> SVector<f64, N>
where
    F: Fn(&SVector<f64, N>, f64) -> SVector<f64, N>,
{
    let k1 = f(y, u);
    let k2 = f(&(y + k1 * (0.5 * dt)), u);
    let k3 = f(&(y + k2 * (0.5 * dt)), u);
    let k4 = f(&(y + k3 * dt), u);
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// One RK4 step of the nonlinear cart-pendulum.
pub fn plant_step(params: &PlantParams, state: &State, force_n: f64, dt: f64) -> State {
    let next = rk4_step(
        |y, u| nonlinear_derivative(params, &State::from_vector(y), u),
        &state.to_vector(),
        force_n,
        dt,
    );
    State::from_vector(&next)
}

/// Cart position step command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReference {
    pub amplitude_m: f64,
    pub start_s: f64,
}

impl StepReference {
    pub fn value(&self, t_s: f64) -> f64 {
        if t_s >= self.start_s {
            self.amplitude_m
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbanceKind {
    #[default]
    None,
    UniformNoise,
}

/// Additive input disturbance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSpec {
    pub kind: DisturbanceKind,
    pub amplitude_n: f64,
    pub start_s: f64,
    pub end_s: f64,
}

impl DisturbanceSpec {
    /// Uniform noise of ±0.5 N over `[0, duration_s]`.
    pub fn default_noise(duration_s: f64) -> Self {
        Self {
            kind: DisturbanceKind::UniformNoise,
            amplitude_n: 0.5,
            start_s: 0.0,
            end_s: duration_s,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.amplitude_n.is_finite() && self.amplitude_n >= 0.0) {
            return Err(format!(
                "amplitude_n must be finite and >= 0 (got {})",
                self.amplitude_n
            ));
        }
        if !(self.start_s.is_finite() && self.end_s.is_finite()) {
            return Err("start_s and end_s must be finite".into());
        }
        if self.start_s > self.end_s {
            return Err(format!(
                "start_s ({}) must not exceed end_s ({})",
                self.start_s, self.end_s
            ));
        }
        Ok(())
    }
}

/// Uniform double in `[0, 1)` from the top 53 bits of one ChaCha8 word.
fn unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Disturbance force at time `t_s`. The generator is only advanced inside
/// the active window.
pub fn disturbance_sample(spec: &DisturbanceSpec, t_s: f64, rng: &mut ChaCha8Rng) -> f64 {
    if spec.kind == DisturbanceKind::None || t_s < spec.start_s || t_s > spec.end_s {
        return 0.0;
    }
    let u = unit_uniform(rng);
    spec.amplitude_n * (2.0 * u - 1.0)
}

/// The ChaCha8 stream used for disturbance sampling.
pub fn disturbance_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt_s: f64,
    pub duration_s: f64,
    pub reference: StepReference,
    pub disturbance: Option<DisturbanceSpec>,
    pub seed: u64,
    pub initial_state: State,
    /// Symmetric force saturation; `None` leaves the actuator unbounded.
    pub actuator_limit_n: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_s: 1e-3,
            duration_s: 40.0,
            reference: StepReference {
                amplitude_m: 0.0,
                start_s: 0.0,
            },
            disturbance: None,
            seed: 0,
            initial_state: State::default(),
            actuator_limit_n: None,
        }
    }
}

impl SimConfig {
    /// Number of integration steps, checked to be an exact multiple of `dt_s`.
    pub fn step_count(&self) -> Result<usize, SimError> {
        let invalid = |msg: String| Err(SimError::InvalidConfig(msg));
        if !(self.dt_s.is_finite() && self.dt_s > 0.0) {
            return invalid(format!("dt_s must be finite and > 0 (got {})", self.dt_s));
        }
        if !(self.duration_s.is_finite() && self.duration_s >= self.dt_s) {
            return invalid(format!(
                "duration_s must be finite and >= dt_s (got {})",
                self.duration_s
            ));
        }
        let ratio = self.duration_s / self.dt_s;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio {
            return invalid(format!(
                "duration_s / dt_s = {ratio} is not an integer step count"
            ));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.step_count()?;
        if let Some(d) = &self.disturbance {
            d.validate().map_err(SimError::InvalidConfig)?;
        }
        if let Some(limit) = self.actuator_limit_n {
            if !(limit > 0.0) {
                return Err(SimError::InvalidConfig(format!(
                    "actuator_limit_n must be > 0 (got {limit})"
                )));
            }
        }
        if !self.initial_state.is_finite() {
            return Err(SimError::InvalidConfig(
                "initial_state must be finite".into(),
            ));
        }
        if !(self.reference.amplitude_m.is_finite() && self.reference.start_s.is_finite()) {
            return Err(SimError::InvalidConfig("reference must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("simulation fault at step {step} (t = {time_s} s): {reason}")]
    Fault {
        step: usize,
        time_s: f64,
        reason: String,
        partial: Box<Trajectory>,
    },
    #[error("trajectory I/O: {0}")]
    Io(String),
}

/// Sampled closed-loop log. Row `k` holds the state at `t_k` and the force
/// applied over `[t_k, t_k + dt)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times_s: Vec<f64>,
    pub states: Vec<State>,
    pub inputs_n: Vec<f64>,
    pub references: Vec<f64>,
}

pub const CSV_HEADER: [&str; 7] = ["t", "theta", "theta_dot", "x", "x_dot", "u", "ref"];

impl Trajectory {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            times_s: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            inputs_n: Vec::with_capacity(n),
            references: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    pub fn push(&mut self, t: f64, state: State, input: f64, reference: f64) {
        self.times_s.push(t);
        self.states.push(state);
        self.inputs_n.push(input);
        self.references.push(reference);
    }

    pub fn theta(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.theta_rad).collect()
    }

    pub fn x(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.x_m).collect()
    }

    pub fn x_dot(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.x_dot_ms).collect()
    }

    pub fn final_reference(&self) -> f64 {
        self.references.last().copied().unwrap_or(0.0)
    }

    /// Writes `t,theta,theta_dot,x,x_dot,u,ref` rows. Values use the shortest
    /// decimal representation that round-trips exactly.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SimError> {
        let io = |e: csv::Error| SimError::Io(e.to_string());
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER).map_err(io)?;
        for k in 0..self.len() {
            let s = &self.states[k];
            let row = [
                self.times_s[k],
                s.theta_rad,
                s.theta_dot_rads,
                s.x_m,
                s.x_dot_ms,
                self.inputs_n[k],
                self.references[k],
            ];
            w.write_record(row.iter().map(|v| v.to_string()))
                .map_err(io)?;
        }
        w.flush().map_err(|e| SimError::Io(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is ASCII")
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, SimError> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r
            .headers()
            .map_err(|e| SimError::Io(e.to_string()))?
            .clone();
        if headers.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(SimError::Io(format!(
                "expected header `{}`, found `{}`",
                CSV_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut traj = Trajectory::default();
        for (i, rec) in r.deserialize::<[f64; 7]>().enumerate() {
            let v = rec.map_err(|e| SimError::Io(format!("row {}: {e}", i + 1)))?;
            traj.push(v[0], State::new(v[1], v[2], v[3], v[4]), v[5], v[6]);
        }
        Ok(traj)
    }
}

/// Simulates the nonlinear plant under `controller` for `config.duration_s`.
///
/// Per step: sample the reference, evaluate the controller on the measured
/// state, add the disturbance, saturate, then advance the plant by RK4.
pub fn run_closed_loop<C: Controller + ?Sized>(
    params: &PlantParams,
    controller: &mut C,
    config: &SimConfig,
) -> Result<Trajectory, SimError> {
    config.validate()?;
    params
        .validate()
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let n = config.step_count()?;
    let dt = config.dt_s;
    let mut rng = disturbance_rng(config.seed);
    let mut traj = Trajectory::with_capacity(n);
    let mut state = config.initial_state;

    for k in 0..n {
        let t = k as f64 * dt;
        let r = config.reference.value(t);
        let mut u = controller.control(r, &state, dt);
        if let Some(d) = &config.disturbance {
            u += disturbance_sample(d, t, &mut rng);
        }
        if let Some(limit) = config.actuator_limit_n {
            u = u.clamp(-limit, limit);
        }
        if !u.is_finite() {
            return Err(SimError::Fault {
                step: k,
                time_s: t,
                reason: format!("non-finite control force {u}"),
                partial: Box::new(traj),
            });
        }
        traj.push(t, state, u, r);
        let next = plant_step(params, &state, u, dt);
        if !next.is_finite() {
            return Err(SimError::Fault {
                step: k,
                time_s: t,
                reason: "non-finite plant state".into(),
                partial: Box::new(traj),
            });
        }
        state = next;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ZeroController;
    use nalgebra::Vector4;

    #[test]
    fn zero_field_is_identity() {
        let y = Vector4::new(1.0, 2.0, 3.0, 4.0);
        let next = rk4_step(|_, _| Vector4::zeros(), &y, 0.0, 0.1);
        assert_eq!(next, y);
    }

    #[test]
    fn exponential_oracle() {
        let mut y = Vector4::new(1.0, 0.0, 0.0, 0.0);
        for _ in 0..1000 {
            y = rk4_step(|z, _| Vector4::new(z[0], 0.0, 0.0, 0.0), &y, 0.0, 1e-3);
        }
        assert!((y[0] - 1f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn input_is_held_over_step() {
        // ẏ = u with u = 2 -> y(0.5) = 1
        let y = SVector::<f64, 1>::new(0.0);
        let next = rk4_step(|_, u| SVector::<f64, 1>::new(u), &y, 2.0, 0.5);
        assert!((next[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn origin_stays_at_origin() {
        let cfg = SimConfig {
            duration_s: 1.0,
            ..SimConfig::default()
        };
        let traj = run_closed_loop(&PlantParams::default(), &mut ZeroController, &cfg).unwrap();
        assert_eq!(traj.len(), 1000);
        assert!(traj.states.iter().all(|s| *s == State::default()));
        assert!(traj.inputs_n.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn times_are_uniform() {
        let cfg = SimConfig {
            duration_s: 0.5,
            dt_s: 0.01,
            ..SimConfig::default()
        };
        let traj = run_closed_loop(&PlantParams::default(), &mut ZeroController, &cfg).unwrap();
        assert_eq!(traj.len(), 50);
        for (k, t) in traj.times_s.iter().enumerate() {
            assert_eq!(*t, k as f64 * 0.01);
        }
    }

    #[test]
    fn rejects_fractional_step_count() {
        let cfg = SimConfig {
            duration_s: 1.0005,
            ..SimConfig::default()
        };
        assert!(matches!(cfg.step_count(), Err(SimError::InvalidConfig(_))));
        let bad_dt = SimConfig {
            dt_s: 0.0,
            ..SimConfig::default()
        };
        assert!(bad_dt.validate().is_err());
    }

    #[test]
    fn disturbance_window_and_zero_amplitude() {
        let mut rng = disturbance_rng(3);
        let spec = DisturbanceSpec {
            kind: DisturbanceKind::UniformNoise,
            amplitude_n: 1.0,
            start_s: 2.0,
            end_s: 3.0,
        };
        assert_eq!(disturbance_sample(&spec, 1.0, &mut rng), 0.0);
        assert_eq!(disturbance_sample(&spec, 3.5, &mut rng), 0.0);
        let v = disturbance_sample(&spec, 2.5, &mut rng);
        assert!(v.abs() <= 1.0 && v != 0.0);
        let silent = DisturbanceSpec {
            amplitude_n: 0.0,
            ..spec
        };
        assert_eq!(disturbance_sample(&silent, 2.5, &mut rng), 0.0);
    }

    #[test]
    fn rng_stream_is_pinned() {
        // Guards against silent changes of the generator or bit mapping.
        let mut rng = disturbance_rng(42);
        let a = unit_uniform(&mut rng);
        let mut again = disturbance_rng(42);
        assert_eq!(a, unit_uniform(&mut again));
        let spec = DisturbanceSpec::default_noise(1.0);
        let mut r1 = disturbance_rng(7);
        let mut r2 = disturbance_rng(7);
        let s1: Vec<f64> = (0..100)
            .map(|_| disturbance_sample(&spec, 0.5, &mut r1))
            .collect();
        let s2: Vec<f64> = (0..100)
            .map(|_| disturbance_sample(&spec, 0.5, &mut r2))
            .collect();
        assert_eq!(s1, s2);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut traj = Trajectory::default();
        traj.push(0.0, State::new(0.1, -1e-17, 1.0 / 3.0, 2.5e10), 0.3, 1.0);
        traj.push(
            0.001,
            State::new(std::f64::consts::PI, 0.0, -0.0, 7.0),
            -4.2,
            1.0,
        );
        let text = traj.to_csv_string();
        assert!(text.starts_with("t,theta,theta_dot,x,x_dot,u,ref\n"));
        assert!(
            text.lines().skip(1).all(|l| !l.contains(['e', 'E'])),
            "decimal notation only: {text}"
        );
        let back = Trajectory::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, traj);
    }

    #[test]
    fn read_csv_rejects_wrong_header() {
        assert!(Trajectory::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
