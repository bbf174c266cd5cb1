//! Scenario configuration: a TOML document describing the plant, the
//! controller, the simulation and the test condition.
//!
//! Only `controller` is required. Every other key has a documented default;
//! unknown keys are rejected with their key path.

use std::fmt;

use nalgebra::RowVector4;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classic::{
    lqr_synthesize, CareOptions, CareSolution, LoopStructure, LqrController, LqrWeights, PidGains,
    PidPosition, PidSimultaneous,
};
use crate::control::Controller;
use crate::hybrid::{
    AdaptiveParams, FuzzySpec, FuzzySystem, HybridChannelConfig, HybridPosition,
    HybridSimultaneous, MembershipFunction, ReferenceModel, SafetyBox, Term,
};
use crate::metrics::MetricsConfig;
use crate::plant::{linearize_at, Equilibrium, PlantParams, State};
use crate::sim::{DisturbanceKind, DisturbanceSpec, SimConfig, StepReference};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    PidPosition,
    PidSimultaneous,
    Lqr,
    Hybrid,
    HybridSimultaneous,
}

impl ControllerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::PidPosition => "pid-position",
            ControllerKind::PidSimultaneous => "pid-simultaneous",
            ControllerKind::Lqr => "lqr",
            ControllerKind::Hybrid => "hybrid",
            ControllerKind::HybridSimultaneous => "hybrid-simultaneous",
        }
    }

    /// `pid`, `lqr` or `hybrid`.
    pub fn family(self) -> &'static str {
        match self {
            ControllerKind::PidPosition | ControllerKind::PidSimultaneous => "pid",
            ControllerKind::Lqr => "lqr",
            ControllerKind::Hybrid | ControllerKind::HybridSimultaneous => "hybrid",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    #[default]
    Nominal,
    Disturbance,
    ParameterVariation,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Nominal => "nominal",
            Condition::Disturbance => "disturbance",
            Condition::ParameterVariation => "parameter-variation",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

// ---------------------------------------------------------------- resolved form

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub cart_mass_kg: f64,
    pub bob_mass_kg: f64,
    pub pendulum_length_m: f64,
    pub gravity_ms2: f64,
    pub cart_mass_multiplier: f64,
    pub pendulum_length_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt_s: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub step_amplitude_m: f64,
    pub step_start_s: f64,
    /// `[θ, θ̇, x, ẋ]`.
    pub initial_state: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actuator_limit_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    pub band_fraction: f64,
    pub tail_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidPositionConfig {
    pub structure: LoopStructure,
    pub position: PidGains,
    pub velocity: PidGains,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidSimultaneousConfig {
    pub angle: PidGains,
    pub position: PidGains,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqrConfig {
    pub q_diag: [f64; 4],
    pub r: f64,
    pub equilibrium: Equilibrium,
    /// Fixed gain used instead of the synthesized one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridPositionConfig {
    pub position: HybridChannelConfig,
    pub velocity: PidGains,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridSimultaneousConfig {
    pub angle: HybridChannelConfig,
    pub position: HybridChannelConfig,
}

/// Fully resolved scenario. Serializing and re-parsing yields an equal value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Report group; scenarios sharing a study are compared side by side.
    pub study: String,
    pub controller: ControllerKind,
    pub condition: Condition,
    pub plant: PlantSection,
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<DisturbanceSpec>,
    pub metrics: MetricsSection,
    pub pid_position: PidPositionConfig,
    pub pid_simultaneous: PidSimultaneousConfig,
    pub lqr: LqrConfig,
    pub hybrid: HybridPositionConfig,
    pub hybrid_simultaneous: HybridSimultaneousConfig,
}

// ---------------------------------------------------------------- raw form

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    study: Option<String>,
    controller: ControllerKind,
    condition: Option<Condition>,
    plant: Option<RawPlant>,
    sim: Option<RawSim>,
    disturbance: Option<RawDisturbance>,
    metrics: Option<RawMetrics>,
    pid_position: Option<RawPidPosition>,
    pid_simultaneous: Option<RawPidSimultaneous>,
    lqr: Option<RawLqr>,
    hybrid: Option<RawHybridPosition>,
    hybrid_simultaneous: Option<RawHybridSimultaneous>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlant {
    cart_mass_kg: Option<f64>,
    bob_mass_kg: Option<f64>,
    pendulum_length_m: Option<f64>,
    gravity_ms2: Option<f64>,
    cart_mass_multiplier: Option<f64>,
    pendulum_length_multiplier: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    dt_s: Option<f64>,
    duration_s: Option<f64>,
    seed: Option<u64>,
    step_amplitude_m: Option<f64>,
    step_start_s: Option<f64>,
    initial_state: Option<[f64; 4]>,
    actuator_limit_n: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDisturbance {
    kind: Option<DisturbanceKind>,
    amplitude_n: Option<f64>,
    start_s: Option<f64>,
    end_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetrics {
    band_fraction: Option<f64>,
    tail_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPidPosition {
    structure: Option<LoopStructure>,
    position: Option<PidGains>,
    velocity: Option<PidGains>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPidSimultaneous {
    angle: Option<PidGains>,
    position: Option<PidGains>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLqr {
    q_diag: Option<[f64; 4]>,
    r: Option<f64>,
    equilibrium: Option<Equilibrium>,
    gain: Option<[f64; 4]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFuzzy {
    input1_terms: Option<[MembershipFunction; 7]>,
    input2_terms: Option<[MembershipFunction; 7]>,
    rule_table: Option<[[Term; 7]; 7]>,
    output_centers: Option<[f64; 7]>,
    input_scale1: Option<f64>,
    input_scale2: Option<f64>,
    output_scale: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdaptation {
    theta1: Option<f64>,
    theta2: Option<f64>,
    theta3: Option<f64>,
    theta_prime: Option<f64>,
    gamma_p: Option<f64>,
    gamma_i: Option<f64>,
    gamma_d: Option<f64>,
    gamma_prime: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSafetyBox {
    min: Option<f64>,
    max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReferenceModel {
    natural_frequency_rads: Option<f64>,
    damping_ratio: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    crisp: Option<PidGains>,
    channel: Option<PidGains>,
    fuzzy: Option<RawFuzzy>,
    adaptation: Option<RawAdaptation>,
    safety_box: Option<RawSafetyBox>,
    reference_model: Option<RawReferenceModel>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHybridPosition {
    position: Option<RawChannel>,
    velocity: Option<PidGains>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHybridSimultaneous {
    angle: Option<RawChannel>,
    position: Option<RawChannel>,
}

// ---------------------------------------------------------------- resolution

fn resolve_channel(
    raw: Option<RawChannel>,
    base: HybridChannelConfig,
    path: &str,
) -> Result<HybridChannelConfig, ConfigError> {
    let Some(raw) = raw else {
        return Ok(base);
    };
    let spec = base.fuzzy.spec().clone();
    let fuzzy = match raw.fuzzy {
        None => base.fuzzy,
        Some(f) => FuzzySystem::new(FuzzySpec {
            input1_terms: f.input1_terms.unwrap_or(spec.input1_terms),
            input2_terms: f.input2_terms.unwrap_or(spec.input2_terms),
            rule_table: f.rule_table.unwrap_or(spec.rule_table),
            output_centers: f.output_centers.unwrap_or(spec.output_centers),
            input_scale1: f.input_scale1.unwrap_or(spec.input_scale1),
            input_scale2: f.input_scale2.unwrap_or(spec.input_scale2),
            output_scale: f.output_scale.unwrap_or(spec.output_scale),
        })
        .map_err(|e| ConfigError::at(format!("{path}.fuzzy"), e.to_string()))?,
    };
    let a = raw.adaptation.unwrap_or_default();
    let b = base.adaptation;
    let adaptation = AdaptiveParams {
        theta1: a.theta1.unwrap_or(b.theta1),
        theta2: a.theta2.unwrap_or(b.theta2),
        theta3: a.theta3.unwrap_or(b.theta3),
        theta_prime: a.theta_prime.unwrap_or(b.theta_prime),
        gamma_p: a.gamma_p.unwrap_or(b.gamma_p),
        gamma_i: a.gamma_i.unwrap_or(b.gamma_i),
        gamma_d: a.gamma_d.unwrap_or(b.gamma_d),
        gamma_prime: a.gamma_prime.unwrap_or(b.gamma_prime),
    };
    let sb = raw.safety_box.unwrap_or_default();
    let safety_box = SafetyBox {
        min: sb.min.unwrap_or(base.safety_box.min),
        max: sb.max.unwrap_or(base.safety_box.max),
    };
    let rm = raw.reference_model.unwrap_or_default();
    let reference_model = ReferenceModel::new(
        rm.natural_frequency_rads
            .unwrap_or(base.reference_model.natural_frequency_rads),
        rm.damping_ratio
            .unwrap_or(base.reference_model.damping_ratio),
    );
    let cfg = HybridChannelConfig {
        crisp: raw.crisp.unwrap_or(base.crisp),
        channel: raw.channel.unwrap_or(base.channel),
        fuzzy,
        adaptation,
        safety_box,
        reference_model,
    };
    cfg.validate().map_err(|e| ConfigError::at(path, e))?;
    Ok(cfg)
}

fn check_gains(g: &PidGains, path: &str) -> Result<(), ConfigError> {
    g.validate().map_err(|e| ConfigError::at(path, e))
}

fn positive(v: f64, path: &str) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::at(
            path,
            format!("must be finite and > 0 (got {v})"),
        ))
    }
}

/// Parses and validates a scenario document, applying all defaults.
pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let de = toml::Deserializer::parse(text)
        .map_err(|e| ConfigError::at("<document>", e.to_string()))?;
    let raw: RawScenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ConfigError::at(
            if path == "." {
                "<document>".into()
            } else {
                path
            },
            inner.message().to_string(),
        )
    })?;
    resolve(raw)
}

fn resolve(raw: RawScenario) -> Result<Scenario, ConfigError> {
    let controller = raw.controller;
    let condition = raw.condition.unwrap_or_default();

    let rl = raw.lqr.unwrap_or_default();
    let lqr = LqrConfig {
        q_diag: rl.q_diag.unwrap_or([1.0, 9.0, 230.0, 180.0]),
        r: rl.r.unwrap_or(1.5),
        equilibrium: rl.equilibrium.unwrap_or_default(),
        gain: rl.gain,
    };
    LqrWeights::diagonal(lqr.q_diag, lqr.r)
        .validate()
        .map_err(|e| ConfigError::at("lqr", e.to_string()))?;
    if let Some(k) = lqr.gain {
        if !k.iter().all(|v| v.is_finite()) {
            return Err(ConfigError::at("lqr.gain", "entries must be finite"));
        }
    }

    let simultaneous = match controller {
        ControllerKind::PidSimultaneous | ControllerKind::HybridSimultaneous => true,
        ControllerKind::Lqr => lqr.equilibrium == Equilibrium::Upright,
        ControllerKind::PidPosition | ControllerKind::Hybrid => false,
    };
    let topology = if simultaneous {
        "simultaneous"
    } else {
        "cart-position"
    };

    let rp = raw.plant.unwrap_or_default();
    let d = PlantParams::default();
    let plant = PlantSection {
        cart_mass_kg: positive(
            rp.cart_mass_kg.unwrap_or(d.cart_mass_kg),
            "plant.cart_mass_kg",
        )?,
        bob_mass_kg: positive(rp.bob_mass_kg.unwrap_or(d.bob_mass_kg), "plant.bob_mass_kg")?,
        pendulum_length_m: positive(
            rp.pendulum_length_m.unwrap_or(d.pendulum_length_m),
            "plant.pendulum_length_m",
        )?,
        gravity_ms2: positive(rp.gravity_ms2.unwrap_or(d.gravity_ms2), "plant.gravity_ms2")?,
        cart_mass_multiplier: positive(
            rp.cart_mass_multiplier.unwrap_or(1.0),
            "plant.cart_mass_multiplier",
        )?,
        pendulum_length_multiplier: positive(
            rp.pendulum_length_multiplier.unwrap_or(1.0),
            "plant.pendulum_length_multiplier",
        )?,
    };
    if condition != Condition::ParameterVariation {
        for (key, v) in [
            ("plant.cart_mass_multiplier", plant.cart_mass_multiplier),
            (
                "plant.pendulum_length_multiplier",
                plant.pendulum_length_multiplier,
            ),
        ] {
            if v != 1.0 {
                return Err(ConfigError::at(
                    key,
                    "multipliers other than 1 require condition = \"parameter-variation\"",
                ));
            }
        }
    }

    let rs = raw.sim.unwrap_or_default();
    let default_initial = if simultaneous {
        [0.0; 4]
    } else {
        let h = Equilibrium::Hanging.state();
        h.to_array()
    };
    let sim = SimSection {
        dt_s: positive(rs.dt_s.unwrap_or(1e-3), "sim.dt_s")?,
        duration_s: positive(rs.duration_s.unwrap_or(40.0), "sim.duration_s")?,
        seed: rs.seed.unwrap_or(0),
        step_amplitude_m: rs
            .step_amplitude_m
            .unwrap_or(if simultaneous { 0.3 } else { 1.0 }),
        step_start_s: rs.step_start_s.unwrap_or(0.0),
        initial_state: rs.initial_state.unwrap_or(default_initial),
        actuator_limit_n: rs.actuator_limit_n,
    };
    if !sim.step_amplitude_m.is_finite() {
        return Err(ConfigError::at("sim.step_amplitude_m", "must be finite"));
    }
    if !(sim.step_start_s.is_finite() && sim.step_start_s >= 0.0) {
        return Err(ConfigError::at(
            "sim.step_start_s",
            "must be finite and >= 0",
        ));
    }
    if !sim.initial_state.iter().all(|v| v.is_finite()) {
        return Err(ConfigError::at(
            "sim.initial_state",
            "entries must be finite",
        ));
    }
    if let Some(l) = sim.actuator_limit_n {
        positive(l, "sim.actuator_limit_n")?;
    }

    let disturbance = match (raw.disturbance, condition) {
        (None, Condition::Disturbance) => Some(DisturbanceSpec::default_noise(sim.duration_s)),
        (None, _) => None,
        (Some(rd), _) => {
            let base = DisturbanceSpec::default_noise(sim.duration_s);
            let spec = DisturbanceSpec {
                kind: rd.kind.unwrap_or(base.kind),
                amplitude_n: rd.amplitude_n.unwrap_or(base.amplitude_n),
                start_s: rd.start_s.unwrap_or(base.start_s),
                end_s: rd.end_s.unwrap_or(base.end_s),
            };
            spec.validate()
                .map_err(|e| ConfigError::at("disturbance", e))?;
            if spec.kind != DisturbanceKind::None && condition != Condition::Disturbance {
                return Err(ConfigError::at(
                    "disturbance.kind",
                    "noise injection requires condition = \"disturbance\"",
                ));
            }
            Some(spec)
        }
    };

    let rm = raw.metrics.unwrap_or_default();
    let metrics = MetricsSection {
        band_fraction: positive(rm.band_fraction.unwrap_or(0.02), "metrics.band_fraction")?,
        tail_fraction: rm.tail_fraction.unwrap_or(0.1),
    };
    if !(metrics.tail_fraction > 0.0 && metrics.tail_fraction <= 1.0) {
        return Err(ConfigError::at(
            "metrics.tail_fraction",
            "must lie in (0, 1]",
        ));
    }

    let rpp = raw.pid_position.unwrap_or_default();
    let pid_position = PidPositionConfig {
        structure: rpp.structure.unwrap_or_default(),
        position: rpp
            .position
            .unwrap_or_else(PidPosition::default_position_gains),
        velocity: rpp
            .velocity
            .unwrap_or_else(PidPosition::default_velocity_gains),
    };
    check_gains(&pid_position.position, "pid_position.position")?;
    check_gains(&pid_position.velocity, "pid_position.velocity")?;

    let rps = raw.pid_simultaneous.unwrap_or_default();
    let pid_simultaneous = PidSimultaneousConfig {
        angle: rps
            .angle
            .unwrap_or_else(PidSimultaneous::default_angle_gains),
        position: rps
            .position
            .unwrap_or_else(PidSimultaneous::default_position_gains),
    };
    check_gains(&pid_simultaneous.angle, "pid_simultaneous.angle")?;
    check_gains(&pid_simultaneous.position, "pid_simultaneous.position")?;

    let rh = raw.hybrid.unwrap_or_default();
    let hybrid = HybridPositionConfig {
        position: resolve_channel(
            rh.position,
            HybridChannelConfig::cart_position_default(),
            "hybrid.position",
        )?,
        velocity: rh
            .velocity
            .unwrap_or_else(PidPosition::default_velocity_gains),
    };
    check_gains(&hybrid.velocity, "hybrid.velocity")?;

    let rhs = raw.hybrid_simultaneous.unwrap_or_default();
    let hybrid_simultaneous = HybridSimultaneousConfig {
        angle: resolve_channel(
            rhs.angle,
            HybridChannelConfig::angle_default(),
            "hybrid_simultaneous.angle",
        )?,
        position: resolve_channel(
            rhs.position,
            HybridChannelConfig::simultaneous_position_default(),
            "hybrid_simultaneous.position",
        )?,
    };

    let study = raw
        .study
        .unwrap_or_else(|| format!("{topology}/{condition}"));
    let name = raw
        .name
        .unwrap_or_else(|| format!("{topology}-{condition}-{controller}"));
    if name.is_empty()
        || !name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
    {
        return Err(ConfigError::at(
            "name",
            "must be nonempty and use only ASCII letters, digits, '-', '_' or '.'",
        ));
    }

    let scenario = Scenario {
        name,
        study,
        controller,
        condition,
        plant,
        sim,
        disturbance,
        metrics,
        pid_position,
        pid_simultaneous,
        lqr,
        hybrid,
        hybrid_simultaneous,
    };
    scenario
        .sim_config()
        .validate()
        .map_err(|e| ConfigError::at("sim", e.to_string()))?;
    Ok(scenario)
}

// ---------------------------------------------------------------- use

impl Scenario {
    /// Minimal scenario for a controller kind with every default applied.
    pub fn defaults_for(controller: ControllerKind) -> Self {
        resolve(RawScenario {
            name: None,
            study: None,
            controller,
            condition: None,
            plant: None,
            sim: None,
            disturbance: None,
            metrics: None,
            pid_position: None,
            pid_simultaneous: None,
            lqr: None,
            hybrid: None,
            hybrid_simultaneous: None,
        })
        .expect("defaults are valid")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario is serializable")
    }

    /// Parameters the controllers are designed against.
    pub fn nominal_plant(&self) -> PlantParams {
        PlantParams {
            cart_mass_kg: self.plant.cart_mass_kg,
            bob_mass_kg: self.plant.bob_mass_kg,
            pendulum_length_m: self.plant.pendulum_length_m,
            gravity_ms2: self.plant.gravity_ms2,
        }
    }

    /// Parameters the simulation runs with.
    pub fn effective_plant(&self) -> PlantParams {
        self.nominal_plant().scaled(
            self.plant.cart_mass_multiplier,
            self.plant.pendulum_length_multiplier,
        )
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = self.sim.initial_state;
        SimConfig {
            dt_s: self.sim.dt_s,
            duration_s: self.sim.duration_s,
            reference: StepReference {
                amplitude_m: self.sim.step_amplitude_m,
                start_s: self.sim.step_start_s,
            },
            disturbance: self.disturbance,
            seed: self.sim.seed,
            initial_state: State::new(s[0], s[1], s[2], s[3]),
            actuator_limit_n: self.sim.actuator_limit_n,
        }
    }

    pub fn metrics_config(&self) -> MetricsConfig {
        MetricsConfig {
            band_fraction: self.metrics.band_fraction,
            tail_fraction: self.metrics.tail_fraction,
        }
    }

    /// Whether the pendulum is balanced upright (as opposed to cart-only
    /// control with the pendulum hanging).
    pub fn is_simultaneous(&self) -> bool {
        match self.controller {
            ControllerKind::PidSimultaneous | ControllerKind::HybridSimultaneous => true,
            ControllerKind::Lqr => self.lqr.equilibrium == Equilibrium::Upright,
            ControllerKind::PidPosition | ControllerKind::Hybrid => false,
        }
    }

    /// LQR synthesized on the nominal plant for this scenario's weights.
    pub fn synthesize_lqr(&self) -> Result<(LqrController, CareSolution), ConfigError> {
        let sys = linearize_at(&self.nominal_plant(), self.lqr.equilibrium);
        lqr_synthesize(
            &sys,
            &LqrWeights::diagonal(self.lqr.q_diag, self.lqr.r),
            2,
            self.lqr.equilibrium,
            &CareOptions::default(),
        )
        .map_err(|e| ConfigError::at("lqr", e.to_string()))
    }

    /// LQR actually used: the configured gain if given, else synthesized.
    pub fn lqr_controller(&self) -> Result<LqrController, ConfigError> {
        match self.lqr.gain {
            Some(k) => {
                let sys = linearize_at(&self.nominal_plant(), self.lqr.equilibrium);
                LqrController::from_gain(&sys, RowVector4::from(k), 2, self.lqr.equilibrium)
                    .map_err(|e| ConfigError::at("lqr.gain", e.to_string()))
            }
            None => Ok(self.synthesize_lqr()?.0),
        }
    }

    pub fn build_controller(&self) -> Result<Box<dyn Controller>, ConfigError> {
        Ok(match self.controller {
            ControllerKind::PidPosition => Box::new(PidPosition::new(
                self.pid_position.position,
                self.pid_position.velocity,
                self.pid_position.structure,
            )),
            ControllerKind::PidSimultaneous => Box::new(PidSimultaneous::new(
                self.pid_simultaneous.angle,
                self.pid_simultaneous.position,
            )),
            ControllerKind::Lqr => Box::new(self.lqr_controller()?),
            ControllerKind::Hybrid => Box::new(
                HybridPosition::new(self.hybrid.position.clone(), self.hybrid.velocity)
                    .map_err(|e| ConfigError::at("hybrid", e))?,
            ),
            ControllerKind::HybridSimultaneous => Box::new(
                HybridSimultaneous::new(
                    self.hybrid_simultaneous.angle.clone(),
                    self.hybrid_simultaneous.position.clone(),
                )
                .map_err(|e| ConfigError::at("hybrid_simultaneous", e))?,
            ),
        })
    }
}
