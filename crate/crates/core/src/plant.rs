//! Cart-pendulum model: physical parameters, nonlinear equations of motion,
//! linearization at the two equilibria and structural assessment.
//!
//! Angle convention: `θ = 0` is the upright position and a positive force
//! accelerates both `x` and `θ` in the positive direction, so the upright
//! linearization has `B = [0, 1/(Ml), 0, 1/M]ᵀ` and an unstable pendulum pole.

use nalgebra::{Complex, DMatrix, Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error, PartialEq)]
pub enum PlantError {
    #[error("plant parameter `{name}` must be finite and > 0 (got {value})")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("non-finite {what}")]
    NonFinite { what: &'static str },
}

/// Physical constants of the cart-pendulum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantParams {
    pub cart_mass_kg: f64,
    pub bob_mass_kg: f64,
    pub pendulum_length_m: f64,
    pub gravity_ms2: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            cart_mass_kg: 1.2,
            bob_mass_kg: 0.2,
            pendulum_length_m: 0.36,
            gravity_ms2: 9.8,
        }
    }
}

impl PlantParams {
    pub fn new(
        cart_mass_kg: f64,
        bob_mass_kg: f64,
        pendulum_length_m: f64,
        gravity_ms2: f64,
    ) -> Result<Self, PlantError> {
        let p = Self {
            cart_mass_kg,
            bob_mass_kg,
            pendulum_length_m,
            gravity_ms2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        for (name, value) in [
            ("cart_mass_kg", self.cart_mass_kg),
            ("bob_mass_kg", self.bob_mass_kg),
            ("pendulum_length_m", self.pendulum_length_m),
            ("gravity_ms2", self.gravity_ms2),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(PlantError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    /// Copy with cart mass and pendulum length scaled.
    pub fn scaled(&self, cart_mass_multiplier: f64, pendulum_length_multiplier: f64) -> Self {
        Self {
            cart_mass_kg: self.cart_mass_kg * cart_mass_multiplier,
            pendulum_length_m: self.pendulum_length_m * pendulum_length_multiplier,
            ..*self
        }
    }

    /// Total mechanical energy, potential measured from the pivot height.
    pub fn energy(&self, s: &State) -> f64 {
        let (big_m, m, l, g) = self.unpack();
        let c = libm::cos(s.theta_rad);
        0.5 * (big_m + m) * s.x_dot_ms * s.x_dot_ms - m * l * s.x_dot_ms * s.theta_dot_rads * c
            + 0.5 * m * l * l * s.theta_dot_rads * s.theta_dot_rads
            + m * g * l * c
    }

    fn unpack(&self) -> (f64, f64, f64, f64) {
        (
            self.cart_mass_kg,
            self.bob_mass_kg,
            self.pendulum_length_m,
            self.gravity_ms2,
        )
    }
}

/// `[θ, θ̇, x, ẋ]` in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub theta_rad: f64,
    pub theta_dot_rads: f64,
    pub x_m: f64,
    pub x_dot_ms: f64,
}

impl State {
    pub const fn new(theta_rad: f64, theta_dot_rads: f64, x_m: f64, x_dot_ms: f64) -> Self {
        Self {
            theta_rad,
            theta_dot_rads,
            x_m,
            x_dot_ms,
        }
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.theta_rad, self.theta_dot_rads, self.x_m, self.x_dot_ms)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.theta_rad, self.theta_dot_rads, self.x_m, self.x_dot_ms]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Linear model `ẋ = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Matrix4<f64>,
    pub b: Vector4<f64>,
    pub c: Matrix4<f64>,
    pub d: Vector4<f64>,
}

impl StateSpace {
    /// Full-state output: `C = I`, `D = 0`.
    pub fn with_full_state_output(a: Matrix4<f64>, b: Vector4<f64>) -> Self {
        Self {
            a,
            b,
            c: Matrix4::identity(),
            d: Vector4::zeros(),
        }
    }

    pub fn a_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_iterator(4, 4, self.a.iter().cloned())
    }

    pub fn b_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_iterator(4, 1, self.b.iter().cloned())
    }

    pub fn c_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_iterator(4, 4, self.c.iter().cloned())
    }
}

/// Operating point of a linearization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Equilibrium {
    /// `θ = 0`; local coordinates equal the plant state.
    #[default]
    Upright,
    /// `θ = π`; local angle `φ = π − θ`, `φ̇ = −θ̇`, which keeps `B` positive.
    Hanging,
}

impl Equilibrium {
    /// Plant state expressed in this equilibrium's local coordinates.
    pub fn to_local(&self, s: &State) -> Vector4<f64> {
        match self {
            Equilibrium::Upright => s.to_vector(),
            Equilibrium::Hanging => Vector4::new(
                std::f64::consts::PI - s.theta_rad,
                -s.theta_dot_rads,
                s.x_m,
                s.x_dot_ms,
            ),
        }
    }

    pub fn from_local(&self, v: &Vector4<f64>) -> State {
        match self {
            Equilibrium::Upright => State::from_vector(v),
            Equilibrium::Hanging => State::new(std::f64::consts::PI - v[0], -v[1], v[2], v[3]),
        }
    }

    pub fn state(&self) -> State {
        self.from_local(&Vector4::zeros())
    }
}

/// `[θ̇, θ̈, ẋ, ẍ]` of the nonlinear model under horizontal force `force_n`.
///
/// Closed form of the Euler–Lagrange equations of
/// `L = ½(M+m)ẋ² − mlẋθ̇cosθ + ½ml²θ̇² − mglcosθ + Fx`:
///
/// ```text
/// ẍ = (F − mlθ̇²sinθ + mg sinθ cosθ) / (M + m − m cos²θ)
/// θ̈ = (cosθ (F − mlθ̇²sinθ) + (M+m) g sinθ) / (l (M + m − m cos²θ))
/// ```
pub fn nonlinear_derivative(params: &PlantParams, state: &State, force_n: f64) -> Vector4<f64> {
    let (big_m, m, l, g) = params.unpack();
    // libm rather than the platform math library keeps trajectories
    // bit-identical across targets.
    let (s, c) = (libm::sin(state.theta_rad), libm::cos(state.theta_rad));
    let w = state.theta_dot_rads;
    let den = big_m + m - m * c * c;
    let push = force_n - m * l * w * w * s;
    let x_acc = (push + m * g * s * c) / den;
    let theta_acc = (c * push + (big_m + m) * g * s) / (l * den);
    Vector4::new(w, theta_acc, state.x_dot_ms, x_acc)
}

/// Checked variant of [`nonlinear_derivative`].
pub fn try_nonlinear_derivative(
    params: &PlantParams,
    state: &State,
    force_n: f64,
) -> Result<Vector4<f64>, PlantError> {
    params.validate()?;
    if !state.is_finite() {
        return Err(PlantError::NonFinite { what: "state" });
    }
    if !force_n.is_finite() {
        return Err(PlantError::NonFinite { what: "force" });
    }
    Ok(nonlinear_derivative(params, state, force_n))
}

/// Linearization at the upright equilibrium.
pub fn linearize(params: &PlantParams) -> StateSpace {
    linearize_at(params, Equilibrium::Upright)
}

/// Exact Jacobian of [`nonlinear_derivative`] at the given equilibrium, in
/// that equilibrium's local coordinates.
pub fn linearize_at(params: &PlantParams, eq: Equilibrium) -> StateSpace {
    let (big_m, m, l, g) = params.unpack();
    // Upright: sinθ ≈ θ, cosθ ≈ 1. Hanging (φ = π − θ): sinθ ≈ φ, cosθ ≈ −1.
    let stiffness = match eq {
        Equilibrium::Upright => 1.0,
        Equilibrium::Hanging => -1.0,
    };
    let a = Matrix4::new(
        0.0,
        1.0,
        0.0,
        0.0,
        stiffness * (big_m + m) * g / (big_m * l),
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        1.0,
        stiffness * m * g / big_m,
        0.0,
        0.0,
        0.0,
    );
    let b = Vector4::new(0.0, 1.0 / (big_m * l), 0.0, 1.0 / big_m);
    StateSpace::with_full_state_output(a, b)
}

/// Structural properties of a linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct Assessment {
    pub controllable: bool,
    pub observable: bool,
    pub stable: bool,
    pub open_loop_poles: Vec<Complex<f64>>,
}

pub fn assess(system: &StateSpace) -> Assessment {
    assess_dyn(&system.a_dyn(), &system.b_dyn(), &system.c_dyn())
}

/// Dimension-generic version of [`assess`].
pub fn assess_dyn(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Assessment {
    let n = a.nrows();
    let ctrb = linalg::controllability_matrix(a, b);
    let obsv = linalg::observability_matrix(a, c);
    let open_loop_poles = linalg::eigenvalues(a);
    Assessment {
        controllable: linalg::numerical_rank(&ctrb, linalg::RANK_EPS) == n,
        observable: linalg::numerical_rank(&obsv, linalg::RANK_EPS) == n,
        stable: open_loop_poles.iter().all(|z| z.re < 0.0),
        open_loop_poles,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table_one() -> PlantParams {
        PlantParams::default()
    }

    #[test]
    fn default_is_table_one() {
        let p = table_one();
        assert_eq!(
            (
                p.cart_mass_kg,
                p.bob_mass_kg,
                p.pendulum_length_m,
                p.gravity_ms2
            ),
            (1.2, 0.2, 0.36, 9.8)
        );
        assert!(p.validate().is_ok());
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(PlantParams::new(0.0, 0.2, 0.36, 9.8).is_err());
        assert!(PlantParams::new(1.2, -0.2, 0.36, 9.8).is_err());
        assert!(PlantParams::new(1.2, 0.2, f64::NAN, 9.8).is_err());
        assert!(PlantParams::new(1.2, 0.2, 0.36, f64::INFINITY).is_err());
    }

    #[test]
    fn upright_unforced_is_fixed_point() {
        let d = nonlinear_derivative(&table_one(), &State::default(), 0.0);
        assert_eq!(d, Vector4::zeros());
    }

    #[test]
    fn unit_force_at_upright() {
        // θ = 0: sin = 0, cos = 1, den = M -> ẍ = F/M, θ̈ = F/(Ml).
        let d = nonlinear_derivative(&table_one(), &State::default(), 1.0);
        assert_relative_eq!(d[3], 1.0 / 1.2, epsilon = 1e-15);
        assert_relative_eq!(d[1], 1.0 / (1.2 * 0.36), epsilon = 1e-15);
        assert_eq!(d[0], 0.0);
        assert_eq!(d[2], 0.0);
    }

    #[test]
    fn small_angle_matches_linear_model() {
        let p = table_one();
        let s = State::new(0.01, 0.0, 0.0, 0.0);
        let nl = nonlinear_derivative(&p, &s, 0.0);
        let lin = linearize(&p).a * s.to_vector();
        for i in 0..4 {
            if lin[i].abs() < 1e-9 {
                assert!(nl[i].abs() < 1e-6);
            } else {
                assert!(((nl[i] - lin[i]) / lin[i]).abs() < 1e-3, "entry {i}");
            }
        }
    }

    #[test]
    fn checked_derivative_rejects_nan() {
        let p = table_one();
        let bad = State::new(f64::NAN, 0.0, 0.0, 0.0);
        assert!(try_nonlinear_derivative(&p, &bad, 0.0).is_err());
        assert!(try_nonlinear_derivative(&p, &State::default(), f64::INFINITY).is_err());
    }

    #[test]
    fn linearized_entries() {
        let ss = linearize(&table_one());
        assert_relative_eq!(ss.b[1], 2.314_814_814_814_815, epsilon = 1e-12);
        assert_relative_eq!(ss.b[3], 0.833_333_333_333_333_4, epsilon = 1e-12);
        assert_relative_eq!(
            ss.a[(1, 0)].abs(),
            1.4 * 9.8 / (1.2 * 0.36),
            epsilon = 1e-12
        );
        assert_relative_eq!(ss.a[(1, 0)], 31.759_259_259_259_26, epsilon = 1e-9);
        assert_eq!(ss.a[(0, 1)], 1.0);
        assert_eq!(ss.a[(2, 3)], 1.0);
        assert_eq!(ss.c, Matrix4::identity());
        assert_eq!(ss.d, Vector4::zeros());
    }

    fn fd_jacobian(p: &PlantParams, eq: Equilibrium) -> (Matrix4<f64>, Vector4<f64>) {
        let h = 1e-6;
        let f = |z: &Vector4<f64>, u: f64| {
            let s = eq.from_local(z);
            let d = nonlinear_derivative(p, &s, u);
            // express the rate in local coordinates
            match eq {
                Equilibrium::Upright => d,
                Equilibrium::Hanging => Vector4::new(-d[0], -d[1], d[2], d[3]),
            }
        };
        let mut a = Matrix4::zeros();
        for j in 0..4 {
            let mut zp = Vector4::zeros();
            let mut zm = Vector4::zeros();
            zp[j] = h;
            zm[j] = -h;
            let col = (f(&zp, 0.0) - f(&zm, 0.0)) / (2.0 * h);
            a.set_column(j, &col);
        }
        let b = (f(&Vector4::zeros(), h) - f(&Vector4::zeros(), -h)) / (2.0 * h);
        (a, b)
    }

    #[test]
    fn jacobian_matches_finite_differences_both_equilibria() {
        let p = table_one();
        for eq in [Equilibrium::Upright, Equilibrium::Hanging] {
            let ss = linearize_at(&p, eq);
            let (a, b) = fd_jacobian(&p, eq);
            for i in 0..4 {
                for j in 0..4 {
                    assert!(
                        (ss.a[(i, j)] - a[(i, j)]).abs() < 1e-6,
                        "{eq:?} A[{i}][{j}]"
                    );
                }
                assert!((ss.b[i] - b[i]).abs() < 1e-6, "{eq:?} B[{i}]");
            }
        }
    }

    #[test]
    fn hanging_equilibrium_is_fixed_point() {
        let p = table_one();
        let s = Equilibrium::Hanging.state();
        let d = nonlinear_derivative(&p, &s, 0.0);
        assert!(d.norm() < 1e-12);
    }

    #[test]
    fn assessment_of_table_one_plant() {
        let a = assess(&linearize(&table_one()));
        assert!(a.controllable);
        assert!(a.observable);
        assert!(!a.stable);
        let expected = (1.4_f64 * 9.8 / (1.2 * 0.36)).sqrt();
        let positive: Vec<_> = a.open_loop_poles.iter().filter(|z| z.re > 1e-6).collect();
        assert_eq!(positive.len(), 1);
        assert_relative_eq!(positive[0].re, expected, epsilon = 1e-9);
        assert_relative_eq!(expected, 5.635, epsilon = 1e-3);
    }

    #[test]
    fn negative_identity_is_stable() {
        let mut b = Vector4::zeros();
        b[0] = 1.0;
        let ss = StateSpace::with_full_state_output(-Matrix4::identity(), b);
        let a = assess(&ss);
        assert!(a.stable);
        assert!(a.observable);
        assert!(!a.controllable);
    }

    #[test]
    fn energy_of_rest_states() {
        let p = table_one();
        assert_relative_eq!(
            p.energy(&State::default()),
            0.2 * 9.8 * 0.36,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            p.energy(&Equilibrium::Hanging.state()),
            -0.2 * 9.8 * 0.36,
            epsilon = 1e-15
        );
    }

    #[test]
    fn scaled_params() {
        let p = table_one().scaled(1.2, 1.0);
        assert_relative_eq!(p.cart_mass_kg, 1.44, epsilon = 1e-15);
        let q = table_one().scaled(1.15, 1.05);
        assert_relative_eq!(q.pendulum_length_m, 0.378, epsilon = 1e-15);
    }
}
