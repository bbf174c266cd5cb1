//! Nonlinear cart-pendulum simulation with three controller families:
//! PID (cart-only and simultaneous loops), LQR with a Riccati solver, and a
//! hybrid controller that combines MIT-rule model-reference adaptation, a
//! 49-rule Mamdani fuzzy stage and a crisp PID term.
//!
//! The crate is organised bottom-up:
//!
//! - [`plant`]: physical parameters, equations of motion, linearization and
//!   structural assessment (controllability, observability, stability).
//! - [`sim`]: fixed-step RK4 closed-loop simulation, disturbance injection and
//!   trajectory I/O.
//! - [`classic`]: discrete PID, the two PID loop topologies, CARE solver and
//!   LQR synthesis.
//! - [`hybrid`]: reference model, adaptation law, fuzzy inference and the
//!   hybrid control law.
//! - [`metrics`]: settling time, overshoot, steady-state error and comparison
//!   reports.
//! - [`scenario`], [`runner`] and [`repro`]: configuration files, batch
//!   execution and the built-in comparison study.

// `!(x < y)` is used on purpose so that NaN takes the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classic;
pub mod control;
pub mod hybrid;
pub mod linalg;
pub mod metrics;
pub mod plant;
pub mod repro;
pub mod runner;
pub mod scenario;
pub mod sim;

pub use classic::{
    lqr_control, lqr_synthesize, pid_step, solve_care, CareError, CareOptions, CareSolution,
    LoopStructure, LqrController, LqrError, LqrWeights, Pid, PidGains, PidPosition,
    PidSimultaneous, PidState,
};
pub use control::Controller;
pub use hybrid::{
    fuzzy_infer, lambda_signals, mit_rule_update, AdaptiveParams, ClampEvent, FuzzyError,
    FuzzySystem, HybridChannel, HybridPosition, HybridSimultaneous, MembershipFunction,
    ReferenceModel, SafetyBox, Term,
};
pub use metrics::{
    overshoot_pct, settling_time, steady_state_error, summarize, Metrics, MetricsConfig, Report,
};
pub use plant::{
    assess, linearize, linearize_at, nonlinear_derivative, Assessment, Equilibrium, PlantError,
    PlantParams, State, StateSpace,
};
pub use scenario::{parse_scenario, Condition, ConfigError, ControllerKind, Scenario};
pub use sim::{
    disturbance_sample, rk4_step, run_closed_loop, DisturbanceKind, DisturbanceSpec, SimConfig,
    SimError, StepReference, Trajectory,
};
