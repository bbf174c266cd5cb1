//! Acceptance suite. Each test prints one `PASS`/`FAIL` line for its
//! criterion and then asserts it. Run with `--nocapture` to see the lines:
//!
//! ```text
//! cargo test -p invpend-core --test acceptance -- --nocapture --test-threads=1
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use invpend_core::classic::{care_residual, is_stabilizable, solve_care_dyn};
use invpend_core::hybrid::{FuzzySystem, HybridChannelConfig};
use invpend_core::linalg::frobenius;
use invpend_core::plant::nonlinear_derivative;
use invpend_core::repro::{builtin_scenarios, PUBLISHED_HYBRID_PID_RATIO_PCT, PUBLISHED_K};
use invpend_core::runner::{run_all, run_matrix, RunOutput, ScenarioOutcome};
use invpend_core::*;
use nalgebra::{DMatrix, Matrix4, SVector, Vector4};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("{tag} criterion {id} ({name}): {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    lo + (hi - lo) * u
}

fn rel_match(k: &[f64], target: &[f64; 4], tol: f64) -> bool {
    k.iter()
        .zip(target)
        .all(|(a, b)| ((a - b) / b).abs() <= tol)
}

fn gain_of(a: Matrix4<f64>, b: Vector4<f64>) -> Result<[f64; 4], String> {
    let sys = StateSpace::with_full_state_output(a, b);
    lqr_synthesize(
        &sys,
        &LqrWeights::published(),
        2,
        Equilibrium::Upright,
        &CareOptions::default(),
    )
    .map(|(c, _)| [c.k_gain[0], c.k_gain[1], c.k_gain[2], c.k_gain[3]])
    .map_err(|e| e.to_string())
}

fn fmt4(k: &[f64; 4]) -> String {
    format!("[{:.4}, {:.4}, {:.4}, {:.4}]", k[0], k[1], k[2], k[3])
}

#[test]
fn c1_lqr_gain_reproduction() {
    let p = PlantParams::default();
    let (big_m, m, l, g) = (
        p.cart_mass_kg,
        p.bob_mass_kg,
        p.pendulum_length_m,
        p.gravity_ms2,
    );
    let start = Instant::now();

    let jac = linearize(&p);
    let k_jac = gain_of(jac.a, jac.b).expect("Jacobian model is stabilizable");

    // Published linear model with g restored in the θ row.
    let mut a_printed = Matrix4::zeros();
    a_printed[(0, 1)] = 1.0;
    a_printed[(1, 0)] = -(big_m + m) * g / (big_m * l);
    a_printed[(2, 3)] = 1.0;
    a_printed[(3, 0)] = -g * m / big_m;
    let b_printed = Vector4::new(0.0, 1.0 / (big_m * l), 0.0, 1.0 / big_m);
    let k_printed = gain_of(a_printed, b_printed).expect("printed model is stabilizable");
    let elapsed = start.elapsed().as_secs_f64();

    // Diagnostic only: the published θ row taken literally (no g) with l/M in
    // place of 1/(Ml). Not a physical model of this plant.
    let mut a_literal = a_printed;
    a_literal[(1, 0)] = -(big_m + m) / (big_m * l);
    let b_literal = Vector4::new(0.0, l / big_m, 0.0, 1.0 / big_m);
    let k_literal = gain_of(a_literal, b_literal).expect("literal model is stabilizable");
    println!(
        "  diagnostic: published rows without g and B = [0, l/M, 0, 1/M] give {} (match: {})",
        fmt4(&k_literal),
        rel_match(&k_literal, &PUBLISHED_K, 0.02)
    );

    let jac_ok = rel_match(&k_jac, &PUBLISHED_K, 0.02);
    let printed_ok = rel_match(&k_printed, &PUBLISHED_K, 0.02);
    let detail = format!(
        "target {}; Jacobian {} match={jac_ok}; published+g {} match={printed_ok}; runtime {elapsed:.3} s",
        fmt4(&PUBLISHED_K),
        fmt4(&k_jac),
        fmt4(&k_printed)
    );
    verdict(
        1,
        "LQR gain reproduction",
        (jac_ok || printed_ok) && elapsed < 1.0,
        &detail,
    );
}

fn random_stabilizable(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>) {
    loop {
        let n = 2 + (rng.next_u64() % 5) as usize;
        let m = 1 + (rng.next_u64() % 2) as usize;
        let a = DMatrix::from_fn(n, n, |_, _| uniform(rng, -2.0, 2.0));
        let b = DMatrix::from_fn(n, m, |_, _| uniform(rng, -1.0, 1.0));
        if is_stabilizable(&a, &b) {
            return (a, b);
        }
    }
}

#[test]
fn c2_care_correctness() {
    let opts = CareOptions::default();
    let sys = linearize(&PlantParams::default());
    let plant = solve_care(&sys, &LqrWeights::published(), &opts).expect("plant CARE solves");

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for i in 0..50 {
        let (a, b) = random_stabilizable(&mut rng);
        let n = a.nrows();
        let m = b.ncols();
        let q = DMatrix::identity(n, n);
        let r = DMatrix::identity(m, m);
        match solve_care_dyn(&a, &b, &q, &r, &opts) {
            Ok(sol) => {
                let res = frobenius(&care_residual(&a, &b, &q, &r, &sol.p));
                worst = worst.max(res);
                if res > 1e-8 {
                    failures.push(format!("#{i} ({n}x{n}) residual {res:e}"));
                }
            }
            Err(e) => failures.push(format!("#{i} ({n}x{n}): {e}")),
        }
    }

    let one = DMatrix::from_element(1, 1, 1.0);
    let scalar = solve_care_dyn(&one, &one, &one, &one, &opts).expect("scalar CARE solves");
    let scalar_err = (scalar.p[(0, 0)] - (1.0 + 2f64.sqrt())).abs();

    let pass = plant.residual <= 1e-8 && failures.is_empty() && scalar_err <= 1e-10;
    let detail = format!(
        "plant residual {:.2e}; 50 random systems worst {worst:.2e}, failures {:?}; scalar |P − (1+√2)| = {scalar_err:.1e}",
        plant.residual, failures
    );
    verdict(2, "CARE correctness", pass, &detail);
}

fn richardson_order(y4: f64, y2: f64, y1: f64) -> f64 {
    ((y4 - y2).abs() / (y2 - y1).abs()).log2()
}

fn integrate<const N: usize>(
    f: impl Fn(&SVector<f64, N>, f64) -> SVector<f64, N> + Copy,
    y0: SVector<f64, N>,
    dt: f64,
    steps: usize,
) -> SVector<f64, N> {
    (0..steps).fold(y0, |y, _| rk4_step(f, &y, 0.0, dt))
}

#[test]
fn c3_integrator_order() {
    let dts = [4e-3, 2e-3, 1e-3];
    let steps = |dt: f64| (1.0 / dt).round() as usize;

    let exp_end: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            integrate(
                |y: &SVector<f64, 1>, _| *y,
                SVector::<f64, 1>::new(1.0),
                dt,
                steps(dt),
            )[0]
        })
        .collect();
    let order_exp = richardson_order(exp_end[0], exp_end[1], exp_end[2]);

    let p = PlantParams::default();
    let pend = |y: &SVector<f64, 4>, u: f64| nonlinear_derivative(&p, &State::from_vector(y), u);
    let pend_order = |theta0: f64| {
        let y0 = State::new(theta0, 0.0, 0.0, 0.0).to_vector();
        let ends: Vec<SVector<f64, 4>> = dts
            .iter()
            .map(|&dt| integrate(pend, y0, dt, steps(dt)))
            .collect();
        ((ends[0] - ends[1]).norm() / (ends[1] - ends[2]).norm()).log2()
    };
    // Free swing of 0.3 rad about the hanging position.
    let order_pend = pend_order(std::f64::consts::PI - 0.3);
    // A fall from 0.3 rad off upright passes the bottom at about 6 rad/s; at
    // these step sizes that run is still short of the asymptotic regime.
    println!(
        "  diagnostic: fall from 0.3 rad off upright gives order {:.3}",
        pend_order(0.3)
    );

    let pass = order_exp >= 3.9 && order_pend >= 3.9;
    let detail = format!("ẏ = y order {order_exp:.3}; unforced pendulum swing (0.3 rad about hanging) order {order_pend:.3}");
    verdict(3, "integrator order", pass, &detail);
}

#[test]
fn c4_model_consistency() {
    let p = PlantParams::default();
    let lin = linearize(&p);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for j in 0..5 {
        let f = |sign: f64| {
            let mut v = Vector4::zeros();
            let mut u = 0.0;
            if j < 4 {
                v[j] = sign * h;
            } else {
                u = sign * h;
            }
            nonlinear_derivative(&p, &State::from_vector(&v), u)
        };
        let col = (f(1.0) - f(-1.0)) / (2.0 * h);
        let exact = if j < 4 {
            lin.a.column(j).into_owned()
        } else {
            lin.b
        };
        worst = worst.max((col - exact).amax());
    }

    let (ctrl, _) = lqr_synthesize(
        &lin,
        &LqrWeights::published(),
        2,
        Equilibrium::Upright,
        &CareOptions::default(),
    )
    .expect("upright LQR");
    let cfg = SimConfig {
        duration_s: 5.0,
        reference: StepReference {
            amplitude_m: 0.01,
            start_s: 0.0,
        },
        ..SimConfig::default()
    };
    let mut c = ctrl;
    let nl = run_closed_loop(&p, &mut c, &cfg).expect("nonlinear run");
    let acl = ctrl.closed_loop_matrix(&lin);
    let bn = lin.b * ctrl.n_scale;
    let lin_rhs = |z: &SVector<f64, 4>, r: f64| acl * z + bn * r;
    let mut z = Vector4::zeros();
    let mut sup_diff: f64 = 0.0;
    let mut sup_lin: f64 = 0.0;
    for (k, s) in nl.states.iter().enumerate() {
        sup_diff = sup_diff.max((s.to_vector() - z).amax());
        sup_lin = sup_lin.max(z.amax());
        z = rk4_step(lin_rhs, &z, nl.references[k], cfg.dt_s);
    }
    let rel = sup_diff / sup_lin;
    let pass = worst <= 1e-6 && rel <= 0.02;
    let detail = format!(
        "max |Jacobian − finite difference| {worst:.2e}; nonlinear vs linear sup-norm gap {:.4}%",
        rel * 100.0
    );
    verdict(4, "model consistency", pass, &detail);
}

// Independent Mamdani oracle: triangles and shoulders written out by hand,
// all 49 rules enumerated.
fn oracle_mu(k: usize, v: f64) -> f64 {
    let peak = -1.0 + k as f64 / 3.0;
    let w = 1.0 / 3.0;
    if (k == 0 && v <= peak) || (k == 6 && v >= peak) {
        return 1.0;
    }
    (1.0 - (v - peak).abs() / w).max(0.0)
}

fn oracle_infer(a: f64, b: f64, out_scale: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..7 {
        for j in 0..7 {
            let w = oracle_mu(i, a).min(oracle_mu(j, b));
            let out = (i as i64 + j as i64 - 3).clamp(0, 6) as f64;
            num += w * (-1.0 + out / 3.0);
            den += w;
        }
    }
    out_scale * num / den
}

#[test]
fn c5_fuzzy_engine() {
    let sys = FuzzySystem::standard(1.0, 1.0, 1.0).expect("standard system");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut oracle_gap: f64 = 0.0;
    let mut sym_gap: f64 = 0.0;
    let mut bound_excess: f64 = f64::NEG_INFINITY;
    let bound = sys.output_bound();
    for _ in 0..1000 {
        let a = uniform(&mut rng, -1.5, 1.5);
        let b = uniform(&mut rng, -1.5, 1.5);
        let y = fuzzy_infer(&sys, a, b);
        oracle_gap = oracle_gap.max((y - oracle_infer(a, b, 1.0)).abs());
        sym_gap = sym_gap.max((fuzzy_infer(&sys, -a, -b) + y).abs());
        bound_excess = bound_excess.max(y.abs() - bound);
    }

    let spec = sys.spec();
    let mut min_strength = f64::INFINITY;
    for i in 0..=200 {
        for j in 0..=200 {
            let a = -1.0 + i as f64 / 100.0;
            let b = -1.0 + j as f64 / 100.0;
            let s: f64 = (0..7)
                .flat_map(|p| (0..7).map(move |q| (p, q)))
                .map(|(p, q)| {
                    spec.input1_terms[p]
                        .eval(a)
                        .min(spec.input2_terms[q].eval(b))
                })
                .sum();
            min_strength = min_strength.min(s);
        }
    }

    let pass = oracle_gap <= 1e-12 && sym_gap <= 1e-12 && bound_excess <= 0.0 && min_strength > 0.0;
    let detail = format!(
        "oracle gap {oracle_gap:.1e}; odd-symmetry gap {sym_gap:.1e}; max |y| − bound {bound_excess:.3}; min firing on 201x201 grid {min_strength:.3}"
    );
    verdict(5, "fuzzy engine", pass, &detail);
}

fn builtin_outcomes() -> &'static [ScenarioOutcome] {
    static CELL: OnceLock<Vec<ScenarioOutcome>> = OnceLock::new();
    CELL.get_or_init(|| run_all(&builtin_scenarios(0)))
}

fn outcome(study: &str, family: &str) -> &'static RunOutput {
    builtin_outcomes()
        .iter()
        .find(|o| o.scenario.study == study && o.scenario.controller.family() == family)
        .and_then(|o| o.result.as_ref().ok())
        .unwrap_or_else(|| panic!("{study}/{family} did not run"))
}

fn settling(study: &str, family: &str) -> f64 {
    outcome(study, family)
        .position
        .settling_time_s
        .unwrap_or(f64::INFINITY)
}

#[test]
fn c6_table_ordering() {
    let nom = "cart-position/nominal";
    let (h, l, p) = (
        settling(nom, "hybrid"),
        settling(nom, "lqr"),
        settling(nom, "pid"),
    );
    let ratio = h / p * 100.0;
    let a_order = h < p && p < l;
    let a_ratio = (ratio - PUBLISHED_HYBRID_PID_RATIO_PCT).abs() <= 15.0;
    let a = a_order && a_ratio;

    let sse = |f: &str| outcome(nom, f).position.steady_state_error;
    let b = sse("pid").abs() <= 1e-3 && sse("hybrid").abs() <= 1e-3 && sse("lqr").abs() > 1e-3;

    let var = "cart-position/parameter-variation";
    let degradation: BTreeMap<&str, f64> = ["hybrid", "lqr", "pid"]
        .into_iter()
        .map(|f| (f, settling(var, f) / settling(nom, f)))
        .collect();
    let c = degradation
        .iter()
        .all(|(f, d)| *f == "lqr" || *d < degradation["lqr"]);

    let sim = "simultaneous/nominal";
    let st: Vec<f64> = ["hybrid", "lqr", "pid"]
        .iter()
        .map(|f| settling(sim, f))
        .collect();
    let hy = outcome(sim, "hybrid");
    let d = st.iter().all(|t| t.is_finite())
        && hy.angle.settled
        && hy.angle.steady_state_error.abs() < 1e-3
        && st[0] < st[1]
        && st[0] < st[2];

    let detail = format!(
        "(a) {} settling hybrid {h:.3} / PID {p:.3} / LQR {l:.3} s, hybrid/PID {ratio:.0}% vs {PUBLISHED_HYBRID_PID_RATIO_PCT:.0}% ± 15; \
         (b) {} SSE hybrid {:.4}, PID {:.4}, LQR {:.4}; \
         (c) {} settling ratio under +20% cart mass hybrid {:.2}, LQR {:.2}, PID {:.2}; \
         (d) {} simultaneous settling hybrid {:.3}, LQR {:.3}, PID {:.3} s, angle settled {}",
        if a { "ok" } else { "FAILED" },
        if b { "ok" } else { "FAILED" },
        sse("hybrid"),
        sse("pid"),
        sse("lqr"),
        if c { "ok" } else { "FAILED" },
        degradation["hybrid"],
        degradation["lqr"],
        degradation["pid"],
        if d { "ok" } else { "FAILED" },
        st[0],
        st[1],
        st[2],
        hy.angle.settled,
    );
    verdict(6, "table-ordering reproduction", a && b && c && d, &detail);
}

#[test]
fn c7_metrics_oracles() {
    let dt = 1e-3;
    let t: Vec<f64> = (0..20_000).map(|k| k as f64 * dt).collect();
    let mut first_order_gap: f64 = 0.0;
    for tau in [0.5, 1.0, 2.0] {
        let y: Vec<f64> = t.iter().map(|t| 1.0 - (-t / tau).exp()).collect();
        let ts = settling_time(&t, &y, 1.0, 0.02).expect("settles");
        first_order_gap = first_order_gap.max((ts + tau * 0.02f64.ln()).abs());
    }
    let mut overshoot_gap: f64 = 0.0;
    for zeta in [0.2_f64, 0.5, 0.7] {
        let wd = (1.0 - zeta * zeta).sqrt();
        let phi = zeta.acos();
        let y: Vec<f64> = t
            .iter()
            .map(|t| 1.0 - (-zeta * t).exp() / wd * (wd * t + phi).sin())
            .collect();
        let expected = 100.0 * (-std::f64::consts::PI * zeta / wd).exp();
        overshoot_gap = overshoot_gap.max((overshoot_pct(&y, 1.0) - expected).abs());
    }
    let pass = first_order_gap <= dt && overshoot_gap <= 0.1;
    let detail = format!(
        "first-order settling gap {first_order_gap:.2e} s (one sample = {dt:e} s); second-order overshoot gap {overshoot_gap:.2e} points"
    );
    verdict(7, "metrics oracles", pass, &detail);
}

fn dir_digest(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.expect("entry");
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).expect("read"),
            )
        })
        .collect()
}

/// SHA-256 of the CSV of a short hybrid simultaneous run under noise, recorded
/// on x86_64 Linux. Any other target must reproduce it.
const REFERENCE_TRAJECTORY_SHA256: &str =
    "66a26bf04e5bcfa85ff9c0c7aca96a9f4fff949041d401523acdc7aeea846019";

#[test]
fn c8_determinism() {
    let scenarios = builtin_scenarios(7);
    let d1 = tempfile::tempdir().expect("tempdir");
    let d2 = tempfile::tempdir().expect("tempdir");
    run_matrix(&scenarios, d1.path()).expect("matrix");
    run_matrix(&scenarios, d2.path()).expect("matrix");
    let (a, b) = (dir_digest(d1.path()), dir_digest(d2.path()));
    let same_run = a == b && a.len() == 20;

    let s = parse_scenario(
        "controller = \"hybrid-simultaneous\"\ncondition = \"disturbance\"\n[sim]\nduration_s = 2.0\nseed = 11",
    )
    .expect("scenario");
    let mut c = s.build_controller().expect("controller");
    let csv = run_closed_loop(&s.effective_plant(), &mut c, &s.sim_config())
        .expect("run")
        .to_csv_string();
    let digest = format!("{:x}", Sha256::digest(csv.as_bytes()));
    let cross = digest == REFERENCE_TRAJECTORY_SHA256;

    let detail = format!(
        "two runs of 18 scenarios: {} files, identical {}; reference trajectory digest {} (expected {})",
        a.len(),
        a == b,
        digest,
        REFERENCE_TRAJECTORY_SHA256
    );
    verdict(8, "determinism", same_run && cross, &detail);
}

/// Adaptation-off structural form written against the PID primitive only:
/// `u = fuzzy(Kp·e + Ki·∫e, Kd·ė) + PID(e)`, `e = r − y`.
struct Structural {
    fuzzy: FuzzySystem,
    pi: Pid,
    d: Pid,
    crisp: Pid,
}

impl Structural {
    fn new(cfg: &HybridChannelConfig) -> Self {
        let ch = cfg.channel;
        Self {
            fuzzy: cfg.fuzzy.clone(),
            pi: Pid::new(PidGains { kd: 0.0, ..ch }),
            d: Pid::new(PidGains {
                kp: 0.0,
                ki: 0.0,
                ..ch
            }),
            crisp: Pid::new(cfg.crisp),
        }
    }

    fn step(&mut self, r: f64, y: f64, dt: f64) -> f64 {
        let e = r - y;
        let pi = self.pi.step(e, dt);
        let d = self.d.step(e, dt);
        fuzzy_infer(&self.fuzzy, pi, d) + self.crisp.step(e, dt)
    }
}

fn frozen(mut cfg: HybridChannelConfig) -> HybridChannelConfig {
    cfg.adaptation = AdaptiveParams {
        gamma_p: 0.0,
        gamma_i: 0.0,
        gamma_d: 0.0,
        gamma_prime: 0.0,
        ..AdaptiveParams::frozen_unity()
    };
    cfg
}

#[test]
fn c9_mrac_sanity() {
    let p = PlantParams::default();
    let dt = 1e-3;
    let angle_cfg = frozen(HybridChannelConfig::angle_default());
    let pos_cfg = frozen(HybridChannelConfig::simultaneous_position_default());
    let mut hybrid = HybridSimultaneous::new(angle_cfg.clone(), pos_cfg.clone()).expect("valid");
    let mut sa = Structural::new(&angle_cfg);
    let mut sx = Structural::new(&pos_cfg);
    let mut s1 = State::new(0.05, 0.0, 0.0, 0.0);
    let mut s2 = s1;
    let mut mismatches = 0usize;
    let steps = 10_000;
    for k in 0..steps {
        let r = if k == 0 { 0.0 } else { 0.3 };
        let u1 = hybrid.control(r, &s1, dt);
        let u2 = sa.step(0.0, s2.theta_rad, dt) - sx.step(r, s2.x_m, dt);
        if u1.to_bits() != u2.to_bits() || s1 != s2 {
            mismatches += 1;
        }
        s1 = invpend_core::sim::plant_step(&p, &s1, u1, dt);
        s2 = invpend_core::sim::plant_step(&p, &s2, u2, dt);
    }

    let events: usize = builtin_outcomes()
        .iter()
        .map(|o| o.result.as_ref().map_or(0, |r| r.clamp_events.len()))
        .sum();
    let faults = builtin_outcomes()
        .iter()
        .filter(|o| o.result.is_err())
        .count();

    let pass = mismatches == 0 && events == 0 && faults == 0;
    let detail = format!(
        "γ = 0 reduction: {mismatches} of {steps} steps differ bitwise; built-in scenarios: {events} clamp events, {faults} faults"
    );
    verdict(9, "MRAC sanity", pass, &detail);
}
