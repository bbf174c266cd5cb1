//! Discrete PID, the PID loop topologies, a continuous algebraic Riccati
//! equation solver and LQR synthesis.

use nalgebra::{DMatrix, Matrix4, RowVector4, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::Controller;
use crate::linalg;
use crate::plant::{Equilibrium, State, StateSpace};

// ---------------------------------------------------------------- PID

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// First-order derivative filter time constant; `0` is a pure backward
    /// difference.
    #[serde(default = "default_tau")]
    pub derivative_filter_tau_s: f64,
    /// Optional symmetric clamp on the integral accumulator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integral_limit: Option<f64>,
}

fn default_tau() -> f64 {
    0.01
}

impl PidGains {
    pub const fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self {
            kp,
            ki,
            kd,
            derivative_filter_tau_s: 0.01,
            integral_limit: None,
        }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn with_tau(self, tau_s: f64) -> Self {
        Self {
            derivative_filter_tau_s: tau_s,
            ..self
        }
    }

    pub fn is_zero(&self) -> bool {
        self.kp == 0.0 && self.ki == 0.0 && self.kd == 0.0
    }

    pub fn validate(&self) -> Result<(), String> {
        if ![self.kp, self.ki, self.kd].iter().all(|g| g.is_finite()) {
            return Err("PID gains must be finite".into());
        }
        if !(self.derivative_filter_tau_s.is_finite() && self.derivative_filter_tau_s >= 0.0) {
            return Err(format!(
                "derivative_filter_tau_s must be >= 0 (got {})",
                self.derivative_filter_tau_s
            ));
        }
        if let Some(lim) = self.integral_limit {
            if !(lim > 0.0) {
                return Err(format!("integral_limit must be > 0 (got {lim})"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral_accumulator: f64,
    pub previous_error: f64,
    pub filtered_derivative: f64,
    /// Set after the first sample; until then the previous error is taken
    /// equal to the current one, so a nonzero initial error causes no kick.
    pub primed: bool,
}

/// One PID update: trapezoidal integral, filtered backward-difference
/// derivative.
pub fn pid_step(gains: &PidGains, state: &PidState, error: f64, dt_s: f64) -> (f64, PidState) {
    let prev = if state.primed {
        state.previous_error
    } else {
        error
    };
    let mut integral = state.integral_accumulator + 0.5 * (error + prev) * dt_s;
    if let Some(lim) = gains.integral_limit {
        integral = integral.clamp(-lim, lim);
    }
    let raw = (error - prev) / dt_s;
    let alpha = dt_s / (gains.derivative_filter_tau_s + dt_s);
    let derivative = state.filtered_derivative + alpha * (raw - state.filtered_derivative);
    let u = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    (
        u,
        PidState {
            integral_accumulator: integral,
            previous_error: error,
            filtered_derivative: derivative,
            primed: true,
        },
    )
}

/// PID gains with their running state.
#[derive(Debug, Clone, PartialEq)]
pub struct Pid {
    pub gains: PidGains,
    pub state: PidState,
}

impl Pid {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            state: PidState::default(),
        }
    }

    pub fn step(&mut self, error: f64, dt_s: f64) -> f64 {
        let (u, next) = pid_step(&self.gains, &self.state, error, dt_s);
        self.state = next;
        u
    }

    pub fn reset(&mut self) {
        self.state = PidState::default();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoopStructure {
    /// `F = PID_x(r − x) + PID_v(0 − ẋ)`.
    #[default]
    Parallel,
    /// `v* = PID_x(r − x)`, `F = PID_v(v* − ẋ)`. An all-zero velocity loop is
    /// bypassed (`F = v*`).
    Cascade,
}

/// Cart-position PID: a position loop and a velocity loop.
#[derive(Debug, Clone, PartialEq)]
pub struct PidPosition {
    pub position: Pid,
    pub velocity: Pid,
    pub structure: LoopStructure,
}

impl PidPosition {
    pub fn new(position: PidGains, velocity: PidGains, structure: LoopStructure) -> Self {
        Self {
            position: Pid::new(position),
            velocity: Pid::new(velocity),
            structure,
        }
    }

    pub fn default_position_gains() -> PidGains {
        PidGains::new(0.6, 16.0, 10.0)
    }

    pub fn default_velocity_gains() -> PidGains {
        PidGains::new(10.0, 8.9, 0.009)
    }
}

impl Default for PidPosition {
    fn default() -> Self {
        Self::new(
            Self::default_position_gains(),
            Self::default_velocity_gains(),
            LoopStructure::Parallel,
        )
    }
}

impl Controller for PidPosition {
    fn control(&mut self, reference: f64, state: &State, dt_s: f64) -> f64 {
        let outer = self.position.step(reference - state.x_m, dt_s);
        match self.structure {
            LoopStructure::Parallel => outer + self.velocity.step(-state.x_dot_ms, dt_s),
            LoopStructure::Cascade if self.velocity.gains.is_zero() => outer,
            LoopStructure::Cascade => self.velocity.step(outer - state.x_dot_ms, dt_s),
        }
    }

    fn reset(&mut self) {
        self.position.reset();
        self.velocity.reset();
    }
}

/// Angle and position PID loops in parallel: `F = PID_θ(0 − θ) − PID_x(r − x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PidSimultaneous {
    pub angle: Pid,
    pub position: Pid,
}

impl PidSimultaneous {
    pub fn new(angle: PidGains, position: PidGains) -> Self {
        Self {
            angle: Pid::new(angle),
            position: Pid::new(position),
        }
    }

    pub fn default_angle_gains() -> PidGains {
        PidGains::new(30.0, 0.009, 5.0)
    }

    pub fn default_position_gains() -> PidGains {
        PidGains::new(4.0, 2.0, 4.0)
    }

    /// Tabulated gains of the published simultaneous study. They do not
    /// stabilize this plant under any sign pairing.
    pub fn published_gains() -> (PidGains, PidGains) {
        (
            PidGains::new(6.9, 0.009, 1.4),
            PidGains::new(1.0, 18.0, 1.0),
        )
    }
}

impl Default for PidSimultaneous {
    fn default() -> Self {
        Self::new(Self::default_angle_gains(), Self::default_position_gains())
    }
}

impl Controller for PidSimultaneous {
    fn control(&mut self, reference: f64, state: &State, dt_s: f64) -> f64 {
        let ua = self.angle.step(-state.theta_rad, dt_s);
        let ux = self.position.step(reference - state.x_m, dt_s);
        ua - ux
    }

    fn reset(&mut self) {
        self.angle.reset();
        self.position.reset();
    }
}

// ---------------------------------------------------------------- CARE

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CareOptions {
    /// Convergence threshold on `‖ΔP‖_F` per integration step.
    pub update_tol: f64,
    /// Required Riccati residual `‖AᵀP + PA − PBR⁻¹BᵀP + Q‖_F`.
    pub residual_tol: f64,
    /// Cap on Riccati-differential-equation steps.
    pub max_iter: usize,
    pub rde_step: f64,
    pub newton_steps: usize,
}

impl Default for CareOptions {
    fn default() -> Self {
        Self {
            update_tol: 1e-9,
            residual_tol: 1e-8,
            max_iter: 2_000_000,
            rde_step: 1e-3,
            newton_steps: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution {
    pub p: DMatrix<f64>,
    pub residual: f64,
    pub rde_steps: usize,
    pub newton_steps: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum CareError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("(A, B) is not stabilizable")]
    NotStabilizable,
    #[error("R is not positive definite")]
    RNotPositiveDefinite,
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("solution is not positive definite")]
    NotPositiveDefinite,
}

/// `AᵀP + PA − PBR⁻¹BᵀP + Q`.
pub fn care_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r_inv: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    let pb = p * b;
    a.transpose() * p + p * a - &pb * r_inv * pb.transpose() + q
}

/// Stabilizability via the PBH test on eigenvalues with `Re ≥ 0`.
pub fn is_stabilizable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let m = b.ncols();
    linalg::eigenvalues(a)
        .into_iter()
        .filter(|z| z.re >= -1e-12)
        .all(|z| {
            // rank [A − λI, B] over ℂ via the real 2n × 2(n+m) embedding.
            let mut blk = DMatrix::zeros(2 * n, 2 * (n + m));
            for i in 0..n {
                for j in 0..n {
                    let re = a[(i, j)] - if i == j { z.re } else { 0.0 };
                    let im = if i == j { -z.im } else { 0.0 };
                    blk[(i, j)] = re;
                    blk[(i + n, j + n)] = re;
                    blk[(i, j + n)] = -im;
                    blk[(i + n, j)] = im;
                }
                for j in 0..m {
                    blk[(i, 2 * n + j)] = b[(i, j)];
                    blk[(i + n, 2 * n + m + j)] = b[(i, j)];
                }
            }
            linalg::numerical_rank(&blk, 1e-10) == 2 * n
        })
}

/// Stabilizing solution of the continuous algebraic Riccati equation.
///
/// The Riccati differential equation `dP/dτ = AᵀP + PA − PBR⁻¹BᵀP + Q` is
/// integrated from `P = 0` with RK4 until the per-step update falls below
/// `update_tol`; the result is then polished with Newton steps, each a
/// Lyapunov solve for the correction.
pub fn solve_care_dyn(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    opts: &CareOptions,
) -> Result<CareSolution, CareError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(CareError::Dimension(format!(
            "A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    if r.clone().cholesky().is_none() {
        return Err(CareError::RNotPositiveDefinite);
    }
    if !is_stabilizable(a, b) {
        return Err(CareError::NotStabilizable);
    }
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or(CareError::RNotPositiveDefinite)?;
    let s = b * &r_inv * b.transpose();
    let at = a.transpose();
    let rhs = |p: &DMatrix<f64>| -> DMatrix<f64> { &at * p + p * a - p * &s * p + q };

    let h = opts.rde_step;
    let mut p = DMatrix::zeros(n, n);
    let mut rde_steps = 0;
    while rde_steps < opts.max_iter {
        let k1 = rhs(&p);
        let k2 = rhs(&(&p + &k1 * (0.5 * h)));
        let k3 = rhs(&(&p + &k2 * (0.5 * h)));
        let k4 = rhs(&(&p + &k3 * h));
        let dp = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        p += &dp;
        rde_steps += 1;
        let upd = linalg::frobenius(&dp);
        if !upd.is_finite() {
            break;
        }
        if upd < opts.update_tol {
            break;
        }
    }
    p = (&p + p.transpose()) * 0.5;

    let mut residual = linalg::frobenius(&care_residual(a, b, q, &r_inv, &p));
    let mut newton = 0;
    // Newton steps in correction form: solve Acl^T dP + dP Acl + Res(P) = 0.
    while newton < opts.newton_steps && residual.is_finite() {
        let acl = a - &s * &p;
        if !linalg::is_hurwitz(&acl) {
            break;
        }
        let res = care_residual(a, b, q, &r_inv, &p);
        let Some(dp) = linalg::solve_lyapunov(&acl, &res) else {
            break;
        };
        let next = &p + dp;
        let next = (&next + next.transpose()) * 0.5;
        let next_res = linalg::frobenius(&care_residual(a, b, q, &r_inv, &next));
        newton += 1;
        if !(next_res < residual) {
            break;
        }
        p = next;
        residual = next_res;
    }

    if !(residual <= opts.residual_tol) {
        return Err(CareError::NoConvergence {
            iterations: rde_steps + newton,
            residual,
        });
    }
    if p.clone().cholesky().is_none() {
        return Err(CareError::NotPositiveDefinite);
    }
    Ok(CareSolution {
        p,
        residual,
        rde_steps,
        newton_steps: newton,
    })
}

/// [`solve_care_dyn`] for the single-input cart-pendulum model.
pub fn solve_care(
    system: &StateSpace,
    weights: &LqrWeights,
    opts: &CareOptions,
) -> Result<CareSolution, CareError> {
    let q = DMatrix::from_iterator(4, 4, weights.q.iter().cloned());
    let r = DMatrix::from_element(1, 1, weights.r);
    solve_care_dyn(&system.a_dyn(), &system.b_dyn(), &q, &r, opts)
}

// ---------------------------------------------------------------- LQR

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrWeights {
    pub q: Matrix4<f64>,
    pub r: f64,
}

impl LqrWeights {
    pub fn diagonal(q_diag: [f64; 4], r: f64) -> Self {
        Self {
            q: Matrix4::from_diagonal(&Vector4::from(q_diag)),
            r,
        }
    }

    /// `Q = diag(1, 9, 230, 180)`, `R = 1.5`.
    pub fn published() -> Self {
        Self::diagonal([1.0, 9.0, 230.0, 180.0], 1.5)
    }

    pub fn validate(&self) -> Result<(), LqrError> {
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(LqrError::InvalidWeights(format!(
                "r must be > 0 (got {})",
                self.r
            )));
        }
        if (self.q - self.q.transpose()).abs().max() > 1e-12 {
            return Err(LqrError::InvalidWeights("q must be symmetric".into()));
        }
        let min_eig = self.q.symmetric_eigenvalues().min();
        if !(min_eig >= -1e-10) {
            return Err(LqrError::InvalidWeights(format!(
                "q must be positive semi-definite (min eigenvalue {min_eig})"
            )));
        }
        Ok(())
    }
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self::published()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LqrError {
    #[error("invalid LQR weights: {0}")]
    InvalidWeights(String),
    #[error(transparent)]
    Care(#[from] CareError),
    #[error("closed loop A − BK is not Hurwitz (max real part {0})")]
    NotStabilizing(f64),
    #[error("reference scaling undefined: zero DC gain to the tracked output")]
    SingularDcGain,
    #[error("tracked output index {0} out of range")]
    BadOutputIndex(usize),
}

/// `u = N·r − K·z`, where `z` is the state in the local coordinates of the
/// equilibrium the gain was designed about.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrController {
    pub k_gain: RowVector4<f64>,
    pub n_scale: f64,
    pub tracked_output_index: usize,
    pub equilibrium: Equilibrium,
}

impl LqrController {
    /// Wraps a given gain, deriving `N` so that the linear closed loop has unit
    /// DC gain from `r` to the tracked output.
    pub fn from_gain(
        system: &StateSpace,
        k_gain: RowVector4<f64>,
        tracked_output_index: usize,
        equilibrium: Equilibrium,
    ) -> Result<Self, LqrError> {
        if tracked_output_index >= 4 {
            return Err(LqrError::BadOutputIndex(tracked_output_index));
        }
        let acl = system.a - system.b * k_gain;
        let inv = acl.try_inverse().ok_or(LqrError::SingularDcGain)?;
        let dc = -(system.c.row(tracked_output_index) * inv * system.b)[(0, 0)];
        if dc.abs() < 1e-12 || !dc.is_finite() {
            return Err(LqrError::SingularDcGain);
        }
        Ok(Self {
            k_gain,
            n_scale: 1.0 / dc,
            tracked_output_index,
            equilibrium,
        })
    }

    pub fn closed_loop_matrix(&self, system: &StateSpace) -> Matrix4<f64> {
        system.a - system.b * self.k_gain
    }
}

/// Control law of an [`LqrController`].
pub fn lqr_control(controller: &LqrController, reference: f64, state: &State) -> f64 {
    let z = controller.equilibrium.to_local(state);
    controller.n_scale * reference - (controller.k_gain * z)[(0, 0)]
}

/// Solves the CARE and returns `K = R⁻¹BᵀP`, the reference scaling `N` and
/// `P`.
pub fn lqr_synthesize(
    system: &StateSpace,
    weights: &LqrWeights,
    tracked_output_index: usize,
    equilibrium: Equilibrium,
    opts: &CareOptions,
) -> Result<(LqrController, CareSolution), LqrError> {
    weights.validate()?;
    let sol = solve_care(system, weights, opts)?;
    let p = Matrix4::from_iterator(sol.p.iter().cloned());
    let k_gain = (system.b.transpose() * p) / weights.r;
    let ctrl = LqrController::from_gain(system, k_gain, tracked_output_index, equilibrium)?;
    let max_re = linalg::max_real_part(&DMatrix::from_iterator(
        4,
        4,
        ctrl.closed_loop_matrix(system).iter().cloned(),
    ));
    if !(max_re < 0.0) {
        return Err(LqrError::NotStabilizing(max_re));
    }
    Ok((ctrl, sol))
}

impl Controller for LqrController {
    fn control(&mut self, reference: f64, state: &State, _dt_s: f64) -> f64 {
        lqr_control(self, reference, state)
    }

    fn reset(&mut self) {}
}
