use invpend_core::linalg::{controllability_matrix, numerical_rank, RANK_EPS};
use invpend_core::sim::plant_step;
use invpend_core::*;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = PlantParams> {
    (0.5..3.0f64, 0.05..1.0f64, 0.1..1.5f64)
        .prop_map(|(big_m, m, l)| PlantParams::new(big_m, m, l, 9.8).unwrap())
}

proptest! {
    #[test]
    fn equilibria_are_fixed_points_at_any_cart_position(p in params(), x in -100.0..100.0f64) {
        for theta in [0.0, std::f64::consts::PI] {
            let d = nonlinear_derivative(&p, &State::new(theta, 0.0, x, 0.0), 0.0);
            prop_assert!(d.amax() < 1e-12, "θ = {theta}: {d:?}");
        }
    }

    #[test]
    fn controllability_survives_input_scaling(p in params(), scale in prop_oneof![-1e3..-1e-3f64, 1e-3..1e3f64]) {
        for eq in [Equilibrium::Upright, Equilibrium::Hanging] {
            let sys = linearize_at(&p, eq);
            let b = sys.b_dyn() * scale;
            let rank = numerical_rank(&controllability_matrix(&sys.a_dyn(), &b), RANK_EPS);
            prop_assert_eq!(rank, 4);
        }
    }

    #[test]
    fn unforced_motion_conserves_energy(
        theta in 0.5..std::f64::consts::PI,
        omega in -2.0..2.0f64,
        v in -1.0..1.0f64,
    ) {
        let p = PlantParams::default();
        let mut s = State::new(theta, omega, 0.0, v);
        let e0 = p.energy(&s);
        let scale = e0.abs().max(p.bob_mass_kg * p.gravity_ms2 * p.pendulum_length_m);
        for _ in 0..10_000 {
            s = plant_step(&p, &s, 0.0, 1e-3);
        }
        let drift = (p.energy(&s) - e0).abs() / scale;
        prop_assert!(drift < 1e-3, "relative drift {drift}");
    }

    #[test]
    fn linear_model_matches_small_perturbations(
        p in params(),
        dir in prop::array::uniform4(-1.0..1.0f64),
        u in -1.0..1.0f64,
    ) {
        let eps = 1e-5;
        let sys = linearize(&p);
        let z = nalgebra::Vector4::from(dir) * eps;
        let exact = nonlinear_derivative(&p, &State::from_vector(&z), u * eps);
        let lin = sys.a * z + sys.b * (u * eps);
        let scale = exact.amax().max(eps);
        prop_assert!((exact - lin).amax() / scale < 1e-3);
    }
}

#[test]
fn upright_open_loop_is_unstable_and_hanging_is_not() {
    let p = PlantParams::default();
    let up = assess(&linearize_at(&p, Equilibrium::Upright));
    assert!(up.controllable && up.observable && !up.stable);
    let down = assess(&linearize_at(&p, Equilibrium::Hanging));
    assert!(down.controllable && down.open_loop_poles.iter().all(|z| z.re <= 1e-12));
}

#[test]
fn scaled_plant_applies_multipliers() {
    let p = PlantParams::default().scaled(1.2, 1.0);
    assert!((p.cart_mass_kg - 1.44).abs() < 1e-12);
    let q = PlantParams::default().scaled(1.15, 1.05);
    assert!((q.cart_mass_kg - 1.38).abs() < 1e-12);
    assert!((q.pendulum_length_m - 0.378).abs() < 1e-12);
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(PlantParams::new(0.0, 0.2, 0.36, 9.8).is_err());
    assert!(PlantParams::new(1.2, -0.2, 0.36, 9.8).is_err());
    assert!(PlantParams::new(1.2, 0.2, f64::NAN, 9.8).is_err());
}
