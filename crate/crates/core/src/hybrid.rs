//! Hybrid controller: MIT-rule model-reference adaptation shapes three
//! λ signals, which feed a PI-channel and a D-channel into a 7×7 Mamdani
//! fuzzy stage; the fuzzy output is added to a crisp PID of the tracking
//! error.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classic::{Pid, PidGains};
use crate::control::Controller;
use crate::plant::State;

// ---------------------------------------------------------------- reference model

/// `ÿ_m + 2ζω ẏ_m + ω² y_m = ω² r`, advanced with RK4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceModel {
    pub natural_frequency_rads: f64,
    pub damping_ratio: f64,
    #[serde(skip)]
    state: [f64; 2],
}

impl ReferenceModel {
    pub fn new(natural_frequency_rads: f64, damping_ratio: f64) -> Self {
        Self {
            natural_frequency_rads,
            damping_ratio,
            state: [0.0; 2],
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.natural_frequency_rads.is_finite() && self.natural_frequency_rads > 0.0) {
            return Err(format!(
                "natural_frequency_rads must be > 0 (got {})",
                self.natural_frequency_rads
            ));
        }
        if !(self.damping_ratio.is_finite() && self.damping_ratio > 0.0) {
            return Err(format!(
                "damping_ratio must be > 0 (got {})",
                self.damping_ratio
            ));
        }
        Ok(())
    }

    pub fn output(&self) -> f64 {
        self.state[0]
    }

    pub fn reset(&mut self) {
        self.state = [0.0; 2];
    }

    fn deriv(&self, y: [f64; 2], r: f64) -> [f64; 2] {
        let w = self.natural_frequency_rads;
        let z = self.damping_ratio;
        [y[1], w * w * (r - y[0]) - 2.0 * z * w * y[1]]
    }

    /// Advances one step with `r` held and returns the new `y_m`.
    pub fn step(&mut self, r: f64, dt_s: f64) -> f64 {
        let y = self.state;
        let add = |a: [f64; 2], k: [f64; 2], h: f64| [a[0] + h * k[0], a[1] + h * k[1]];
        let k1 = self.deriv(y, r);
        let k2 = self.deriv(add(y, k1, 0.5 * dt_s), r);
        let k3 = self.deriv(add(y, k2, 0.5 * dt_s), r);
        let k4 = self.deriv(add(y, k3, dt_s), r);
        for i in 0..2 {
            self.state[i] = y[i] + dt_s / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        self.state[0]
    }
}

impl Default for ReferenceModel {
    fn default() -> Self {
        Self::new(1.0, 0.9)
    }
}

// ---------------------------------------------------------------- adaptation

/// Adjustable parameters `θ₁, θ₂, θ₃, θ'` and their adaptation rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveParams {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub theta_prime: f64,
    pub gamma_p: f64,
    pub gamma_i: f64,
    pub gamma_d: f64,
    pub gamma_prime: f64,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self {
            theta1: 1.0,
            theta2: 1.0,
            theta3: 1.0,
            theta_prime: 1.0,
            gamma_p: 0.01,
            gamma_i: 0.01,
            gamma_d: 0.01,
            gamma_prime: 0.01,
        }
    }
}

impl AdaptiveParams {
    /// Adaptation disabled, `θ = (1, 1, 1)`, `θ' = 1`: every λ equals `r − y`.
    pub fn frozen_unity() -> Self {
        Self {
            gamma_p: 0.0,
            gamma_i: 0.0,
            gamma_d: 0.0,
            gamma_prime: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let thetas = [self.theta1, self.theta2, self.theta3, self.theta_prime];
        if !thetas.iter().all(|v| v.is_finite()) {
            return Err("adaptive parameters must be finite".into());
        }
        let rates = [self.gamma_p, self.gamma_i, self.gamma_d, self.gamma_prime];
        if !rates.iter().all(|g| g.is_finite() && *g >= 0.0) {
            return Err("adaptation rates must be finite and >= 0".into());
        }
        Ok(())
    }
}

/// MIT-rule update with the reference-model output as sensitivity proxy:
/// `θᵢ ← θᵢ − γᵢ·e_m·y_m·dt`, `θ' ← θ' − γ'·e_m·y_mf·dt`, where `y_mf` is
/// `y_m` passed once more through the reference model.
pub fn mit_rule_update(
    params: &AdaptiveParams,
    model_error: f64,
    y_m: f64,
    y_mf: f64,
    dt_s: f64,
) -> AdaptiveParams {
    let g = model_error * y_m * dt_s;
    AdaptiveParams {
        theta1: params.theta1 - params.gamma_p * g,
        theta2: params.theta2 - params.gamma_i * g,
        theta3: params.theta3 - params.gamma_d * g,
        theta_prime: params.theta_prime - params.gamma_prime * model_error * y_mf * dt_s,
        ..*params
    }
}

/// `λᵢ = θᵢ·r − θ'·y`.
pub fn lambda_signals(params: &AdaptiveParams, reference: f64, plant_output: f64) -> [f64; 3] {
    let fb = params.theta_prime * plant_output;
    [
        params.theta1 * reference - fb,
        params.theta2 * reference - fb,
        params.theta3 * reference - fb,
    ]
}

/// Admissible range for every adjustable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyBox {
    pub min: f64,
    pub max: f64,
}

impl Default for SafetyBox {
    fn default() -> Self {
        Self {
            min: -100.0,
            max: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClampEvent {
    pub channel: &'static str,
    pub step: u64,
    pub parameter: &'static str,
    pub value: f64,
    pub clamped_to: f64,
}

impl SafetyBox {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(format!(
                "safety box needs finite min < max (got [{}, {}])",
                self.min, self.max
            ));
        }
        Ok(())
    }

    pub fn contains(&self, p: &AdaptiveParams) -> bool {
        [p.theta1, p.theta2, p.theta3, p.theta_prime]
            .iter()
            .all(|v| (self.min..=self.max).contains(v))
    }

    /// Clamps the parameters into the box, appending one event per clamped
    /// entry.
    pub fn apply(
        &self,
        params: &mut AdaptiveParams,
        channel: &'static str,
        step: u64,
        events: &mut Vec<ClampEvent>,
    ) {
        let fields: [(&'static str, &mut f64); 4] = [
            ("theta1", &mut params.theta1),
            ("theta2", &mut params.theta2),
            ("theta3", &mut params.theta3),
            ("theta_prime", &mut params.theta_prime),
        ];
        for (name, v) in fields {
            let c = v.clamp(self.min, self.max);
            if c != *v {
                events.push(ClampEvent {
                    channel,
                    step,
                    parameter: name,
                    value: *v,
                    clamped_to: c,
                });
                *v = c;
            }
        }
    }
}

// ---------------------------------------------------------------- fuzzy

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    NB,
    NM,
    NS,
    Z,
    PS,
    PM,
    PB,
}

impl Term {
    pub const ALL: [Term; 7] = [
        Term::NB,
        Term::NM,
        Term::NS,
        Term::Z,
        Term::PS,
        Term::PM,
        Term::PB,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Term> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Term::NB => "NB",
            Term::NM => "NM",
            Term::NS => "NS",
            Term::Z => "Z",
            Term::PS => "PS",
            Term::PM => "PM",
            Term::PB => "PB",
        }
    }
}

/// Piecewise-linear membership function. Infinite outer breakpoints give
/// shoulders that stay at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "breakpoints", rename_all = "snake_case")]
pub enum MembershipFunction {
    Triangular([f64; 3]),
    Trapezoidal([f64; 4]),
}

fn rising(v: f64, a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY || v >= b {
        1.0
    } else if v <= a {
        0.0
    } else {
        (v - a) / (b - a)
    }
}

fn falling(v: f64, c: f64, d: f64) -> f64 {
    if d == f64::INFINITY || v <= c {
        1.0
    } else if v >= d {
        0.0
    } else {
        (d - v) / (d - c)
    }
}

impl MembershipFunction {
    pub fn breakpoints(&self) -> &[f64] {
        match self {
            MembershipFunction::Triangular(p) => p,
            MembershipFunction::Trapezoidal(p) => p,
        }
    }

    pub fn eval(&self, v: f64) -> f64 {
        match *self {
            MembershipFunction::Triangular([a, b, c]) => rising(v, a, b).min(falling(v, b, c)),
            MembershipFunction::Trapezoidal([a, b, c, d]) => rising(v, a, b).min(falling(v, c, d)),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let p = self.breakpoints();
        if p.iter().any(|v| v.is_nan()) {
            return Err("breakpoints must not be NaN".into());
        }
        if p.windows(2).any(|w| w[0] > w[1]) {
            return Err(format!("breakpoints must be nondecreasing (got {p:?})"));
        }
        let inner = &p[1..p.len() - 1];
        if inner.iter().any(|v| v.is_infinite())
            && !matches!(self, MembershipFunction::Trapezoidal(_))
        {
            return Err("only trapezoid shoulders may be infinite".into());
        }
        if p[0] == f64::INFINITY || p[p.len() - 1] == f64::NEG_INFINITY {
            return Err(format!("empty support (got {p:?})"));
        }
        Ok(())
    }
}

/// Membership value of `v` for `mf`.
pub fn fuzzify(mf: &MembershipFunction, v: f64) -> f64 {
    mf.eval(v)
}

#[derive(Debug, Error, PartialEq)]
pub enum FuzzyError {
    #[error("membership function {input}/{term}: {reason}")]
    Membership {
        input: usize,
        term: &'static str,
        reason: String,
    },
    #[error("input {input} is not covered at {value}")]
    Coverage { input: usize, value: f64 },
    #[error("rule table is not odd-symmetric at ({i}, {j})")]
    Symmetry { i: usize, j: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Plain-data description of a [`FuzzySystem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzySpec {
    pub input1_terms: [MembershipFunction; 7],
    pub input2_terms: [MembershipFunction; 7],
    /// `rule_table[i][j]`: output term for input1 term `i`, input2 term `j`.
    pub rule_table: [[Term; 7]; 7],
    pub output_centers: [f64; 7],
    pub input_scale1: f64,
    pub input_scale2: f64,
    pub output_scale: f64,
}

/// Validated two-input, one-output Mamdani system with singleton outputs and
/// center-average defuzzification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FuzzySpec", into = "FuzzySpec")]
pub struct FuzzySystem {
    spec: FuzzySpec,
}

/// Seven evenly spaced peaks on `[−1, 1]`.
pub fn default_peaks() -> [f64; 7] {
    std::array::from_fn(|i| -1.0 + i as f64 / 3.0)
}

/// Triangles at [`default_peaks`] with infinite shoulders on NB and PB.
pub fn default_terms() -> [MembershipFunction; 7] {
    let p = default_peaks();
    std::array::from_fn(|i| match i {
        0 => MembershipFunction::Trapezoidal([f64::NEG_INFINITY, f64::NEG_INFINITY, p[0], p[1]]),
        6 => MembershipFunction::Trapezoidal([p[5], p[6], f64::INFINITY, f64::INFINITY]),
        _ => MembershipFunction::Triangular([p[i - 1], p[i], p[i + 1]]),
    })
}

/// `rule(i, j) = clamp(i + j − 3, 0, 6)` on zero-based term indices.
pub fn default_rule_table() -> [[Term; 7]; 7] {
    std::array::from_fn(|i| std::array::from_fn(|j| Term::ALL[(i + j).saturating_sub(3).min(6)]))
}

impl FuzzySpec {
    pub fn standard(input_scale1: f64, input_scale2: f64, output_scale: f64) -> Self {
        Self {
            input1_terms: default_terms(),
            input2_terms: default_terms(),
            rule_table: default_rule_table(),
            output_centers: default_peaks(),
            input_scale1,
            input_scale2,
            output_scale,
        }
    }
}

impl Default for FuzzySpec {
    fn default() -> Self {
        Self::standard(1.0, 1.0, 1.0)
    }
}

fn coverage_probe_points(terms: &[MembershipFunction; 7]) -> Vec<f64> {
    let mut pts: Vec<f64> = terms
        .iter()
        .flat_map(|t| t.breakpoints().iter().copied())
        .filter(|v| v.is_finite())
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut probes = pts.clone();
    probes.extend(pts.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    if let (Some(lo), Some(hi)) = (pts.first(), pts.last()) {
        probes.push(lo - 1.0);
        probes.push(hi + 1.0);
    } else {
        probes.push(0.0);
    }
    probes
}

impl TryFrom<FuzzySpec> for FuzzySystem {
    type Error = FuzzyError;

    fn try_from(spec: FuzzySpec) -> Result<Self, FuzzyError> {
        FuzzySystem::new(spec)
    }
}

impl From<FuzzySystem> for FuzzySpec {
    fn from(sys: FuzzySystem) -> Self {
        sys.spec
    }
}

impl FuzzySystem {
    pub fn new(spec: FuzzySpec) -> Result<Self, FuzzyError> {
        for (k, terms) in [&spec.input1_terms, &spec.input2_terms]
            .into_iter()
            .enumerate()
        {
            for (t, mf) in terms.iter().enumerate() {
                mf.validate().map_err(|reason| FuzzyError::Membership {
                    input: k + 1,
                    term: Term::ALL[t].label(),
                    reason,
                })?;
            }
            // Membership sums are piecewise linear between breakpoints, so
            // positivity at breakpoints, midpoints and beyond the ends covers
            // the whole line.
            for v in coverage_probe_points(terms) {
                if terms.iter().map(|mf| mf.eval(v)).sum::<f64>() <= 0.0 {
                    return Err(FuzzyError::Coverage {
                        input: k + 1,
                        value: v,
                    });
                }
            }
        }
        for (name, s) in [
            ("input_scale1", spec.input_scale1),
            ("input_scale2", spec.input_scale2),
            ("output_scale", spec.output_scale),
        ] {
            if !(s.is_finite() && s > 0.0) {
                return Err(FuzzyError::Invalid(format!(
                    "{name} must be finite and > 0 (got {s})"
                )));
            }
        }
        if !spec.output_centers.iter().all(|c| c.is_finite()) {
            return Err(FuzzyError::Invalid("output centers must be finite".into()));
        }
        let z = &spec.output_centers;
        for i in 0..7 {
            for j in 0..7 {
                let a = z[spec.rule_table[i][j].index()];
                let b = z[spec.rule_table[6 - i][6 - j].index()];
                if (a + b).abs() > 1e-12 {
                    return Err(FuzzyError::Symmetry { i, j });
                }
            }
        }
        Ok(Self { spec })
    }

    pub fn standard(
        input_scale1: f64,
        input_scale2: f64,
        output_scale: f64,
    ) -> Result<Self, FuzzyError> {
        Self::new(FuzzySpec::standard(
            input_scale1,
            input_scale2,
            output_scale,
        ))
    }

    pub fn spec(&self) -> &FuzzySpec {
        &self.spec
    }

    pub fn rule(&self, i: usize, j: usize) -> Term {
        self.spec.rule_table[i][j]
    }

    /// Largest `|output|` the system can produce.
    pub fn output_bound(&self) -> f64 {
        self.spec.output_scale
            * self
                .spec
                .output_centers
                .iter()
                .fold(0.0_f64, |m, c| m.max(c.abs()))
    }
}

impl Default for FuzzySystem {
    fn default() -> Self {
        Self::new(FuzzySpec::default()).expect("standard system is valid")
    }
}

/// Scales the inputs, fires all 49 rules with min-conjunction and returns the
/// scaled center average `Σμⱼzⱼ / Σμⱼ`.
#[allow(clippy::needless_range_loop)]
pub fn fuzzy_infer(system: &FuzzySystem, input1: f64, input2: f64) -> f64 {
    let s = &system.spec;
    let a = input1 * s.input_scale1;
    let b = input2 * s.input_scale2;
    let mu1: [f64; 7] = std::array::from_fn(|i| s.input1_terms[i].eval(a));
    let mu2: [f64; 7] = std::array::from_fn(|j| s.input2_terms[j].eval(b));
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..7 {
        if mu1[i] == 0.0 {
            continue;
        }
        for j in 0..7 {
            let w = mu1[i].min(mu2[j]);
            num += w * s.output_centers[s.rule_table[i][j].index()];
            den += w;
        }
    }
    s.output_scale * num / den
}

// ---------------------------------------------------------------- hybrid law

/// Parameters of one hybrid loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridChannelConfig {
    /// Gains of the crisp PID on `e = r − y`.
    pub crisp: PidGains,
    /// Gains forming the PI-channel `Kp·λ₁ + Ki·∫λ₂` and the D-channel
    /// `Kd·dλ₃/dt`; the filter constant applies to `dλ₃/dt`.
    pub channel: PidGains,
    pub fuzzy: FuzzySystem,
    pub adaptation: AdaptiveParams,
    pub safety_box: SafetyBox,
    pub reference_model: ReferenceModel,
}

impl HybridChannelConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.crisp.validate().map_err(|e| format!("crisp: {e}"))?;
        self.channel
            .validate()
            .map_err(|e| format!("channel: {e}"))?;
        self.adaptation.validate()?;
        self.safety_box.validate()?;
        if !self.safety_box.contains(&self.adaptation) {
            return Err("initial adaptive parameters lie outside the safety box".into());
        }
        self.reference_model.validate()
    }

    /// Cart-position loop used alongside a velocity PID.
    pub fn cart_position_default() -> Self {
        Self {
            crisp: PidGains::new(0.6, 16.0, 10.0),
            channel: PidGains::new(1.0, 0.0, 0.0),
            fuzzy: FuzzySystem::standard(1.0, 1.0, 10.0).expect("valid"),
            adaptation: AdaptiveParams::default(),
            safety_box: SafetyBox::default(),
            reference_model: ReferenceModel::default(),
        }
    }

    /// Angle loop of the simultaneous controller.
    pub fn angle_default() -> Self {
        Self {
            crisp: PidGains::new(30.0, 0.009, 5.0),
            channel: PidGains::new(80.0, 0.0, 10.0),
            fuzzy: FuzzySystem::standard(1.0 / 20.0, 1.0 / 20.0, 20.0).expect("valid"),
            ..Self::cart_position_default()
        }
    }

    /// Position loop of the simultaneous controller.
    pub fn simultaneous_position_default() -> Self {
        Self {
            crisp: PidGains::new(4.0, 2.0, 4.0),
            channel: PidGains::new(48.0, 0.0, 24.0),
            fuzzy: FuzzySystem::standard(1.0 / 20.0, 1.0 / 20.0, 20.0).expect("valid"),
            ..Self::cart_position_default()
        }
    }
}

/// Intermediate signals of the most recent [`HybridChannel::step`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelSignals {
    pub y_m: f64,
    pub model_error: f64,
    pub lambda: [f64; 3],
    pub pi_channel: f64,
    pub d_channel: f64,
    pub u_fuzzy: f64,
    pub u_crisp: f64,
}

/// One single-input hybrid loop: `u = fuzzy(PI-ch, D-ch) + PID(r − y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridChannel {
    pub label: &'static str,
    config: HybridChannelConfig,
    crisp: Pid,
    params: AdaptiveParams,
    model: ReferenceModel,
    sensitivity_filter: ReferenceModel,
    lambda2_integral: f64,
    previous_lambda: Option<[f64; 3]>,
    lambda3_rate: f64,
    steps: u64,
    events: Vec<ClampEvent>,
    last: ChannelSignals,
}

impl HybridChannel {
    pub fn new(label: &'static str, config: HybridChannelConfig) -> Result<Self, String> {
        config.validate()?;
        Ok(Self {
            label,
            crisp: Pid::new(config.crisp),
            params: config.adaptation,
            model: config.reference_model,
            sensitivity_filter: config.reference_model,
            lambda2_integral: 0.0,
            previous_lambda: None,
            lambda3_rate: 0.0,
            steps: 0,
            events: Vec::new(),
            last: ChannelSignals::default(),
            config,
        })
    }

    pub fn config(&self) -> &HybridChannelConfig {
        &self.config
    }

    pub fn params(&self) -> &AdaptiveParams {
        &self.params
    }

    pub fn events(&self) -> &[ClampEvent] {
        &self.events
    }

    pub fn last_signals(&self) -> &ChannelSignals {
        &self.last
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.label, self.config.clone()).expect("config was validated");
    }

    /// Reference model, adaptation, λ signals, channel signals, fuzzy stage
    /// and crisp PID, in that order.
    pub fn step(&mut self, reference: f64, output: f64, dt_s: f64) -> f64 {
        let y_m_prev = self.model.output();
        let y_m = self.model.step(reference, dt_s);
        let y_mf = self.sensitivity_filter.step(y_m_prev, dt_s);
        let e_m = output - y_m;
        self.params = mit_rule_update(&self.params, e_m, y_m, y_mf, dt_s);
        self.config
            .safety_box
            .apply(&mut self.params, self.label, self.steps, &mut self.events);

        let lambda = lambda_signals(&self.params, reference, output);
        let prev = self.previous_lambda.unwrap_or(lambda);
        self.lambda2_integral += 0.5 * (lambda[1] + prev[1]) * dt_s;
        let raw = (lambda[2] - prev[2]) / dt_s;
        let alpha = dt_s / (self.config.channel.derivative_filter_tau_s + dt_s);
        self.lambda3_rate += alpha * (raw - self.lambda3_rate);
        self.previous_lambda = Some(lambda);

        let g = &self.config.channel;
        let pi_channel = g.kp * lambda[0] + g.ki * self.lambda2_integral;
        let d_channel = g.kd * self.lambda3_rate;
        let u_fuzzy = fuzzy_infer(&self.config.fuzzy, pi_channel, d_channel);
        let u_crisp = self.crisp.step(reference - output, dt_s);
        self.steps += 1;
        self.last = ChannelSignals {
            y_m,
            model_error: e_m,
            lambda,
            pi_channel,
            d_channel,
            u_fuzzy,
            u_crisp,
        };
        u_fuzzy + u_crisp
    }
}

/// Cart-position hybrid: a hybrid loop on `x` plus a velocity PID on `−ẋ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridPosition {
    pub position: HybridChannel,
    pub velocity: Pid,
}

impl HybridPosition {
    pub fn new(position: HybridChannelConfig, velocity: PidGains) -> Result<Self, String> {
        Ok(Self {
            position: HybridChannel::new("position", position)?,
            velocity: Pid::new(velocity),
        })
    }
}

impl Default for HybridPosition {
    fn default() -> Self {
        Self::new(
            HybridChannelConfig::cart_position_default(),
            PidGains::new(10.0, 8.9, 0.009),
        )
        .expect("defaults are valid")
    }
}

impl Controller for HybridPosition {
    fn control(&mut self, reference: f64, state: &State, dt_s: f64) -> f64 {
        self.position.step(reference, state.x_m, dt_s) + self.velocity.step(-state.x_dot_ms, dt_s)
    }

    fn reset(&mut self) {
        self.position.reset();
        self.velocity.reset();
    }

    fn clamp_events(&self) -> &[ClampEvent] {
        self.position.events()
    }
}

/// Angle and position hybrid loops: `F = H_θ(0, θ) − H_x(r, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridSimultaneous {
    pub angle: HybridChannel,
    pub position: HybridChannel,
    events: Vec<ClampEvent>,
}

impl HybridSimultaneous {
    pub fn new(angle: HybridChannelConfig, position: HybridChannelConfig) -> Result<Self, String> {
        Ok(Self {
            angle: HybridChannel::new("angle", angle)?,
            position: HybridChannel::new("position", position)?,
            events: Vec::new(),
        })
    }
}

impl Default for HybridSimultaneous {
    fn default() -> Self {
        Self::new(
            HybridChannelConfig::angle_default(),
            HybridChannelConfig::simultaneous_position_default(),
        )
        .expect("defaults are valid")
    }
}

impl Controller for HybridSimultaneous {
    fn control(&mut self, reference: f64, state: &State, dt_s: f64) -> f64 {
        let na = self.angle.events().len();
        let nx = self.position.events().len();
        let ua = self.angle.step(0.0, state.theta_rad, dt_s);
        let ux = self.position.step(reference, state.x_m, dt_s);
        self.events.extend_from_slice(&self.angle.events()[na..]);
        self.events.extend_from_slice(&self.position.events()[nx..]);
        ua - ux
    }

    fn reset(&mut self) {
        self.angle.reset();
        self.position.reset();
        self.events.clear();
    }

    fn clamp_events(&self) -> &[ClampEvent] {
        &self.events
    }
}
