//! Acceptance suite: one line of output per top-level criterion, PASS or
//! FAIL with the elapsed time against the runtime budget.  The process
//! exits nonzero when any criterion fails, so `cargo test` reports it.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use ellop_core::elliptic::complex_central_derivative;
use ellop_core::elltoda::{
    compatibility_check, integrate, integrate_flow_with_coupling, toda1d_lax_residual,
    toda_consistent_derivatives, EllTodaChain, NeighborCoupling, TodaGermState,
};
use ellop_core::operators::{find_commuting_partner, BandedOperator, Window};
use ellop_core::rank1::Rank1Data;
use ellop_core::sample::SamplePlan;
use ellop_core::seprank2::SepRank2Data;
use ellop_core::tyurin::{L4Mode, SymmetricParams, TyurinChain};
use ellop_core::{ComplexPoint, Torus};
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn point(re: f64, im: f64) -> ComplexPoint {
    ComplexPoint::new(re, im).expect("finite point")
}

/// A single named check inside a criterion: worst observed value against
/// its bound (pass when `value < bound`; for lower bounds see `at_least`).
struct Check {
    label: &'static str,
    value: f64,
    bound: f64,
    lower_bound: bool,
}

impl Check {
    fn at_most(label: &'static str, value: f64, bound: f64) -> Self {
        Self {
            label,
            value,
            bound,
            lower_bound: false,
        }
    }

    fn at_least(label: &'static str, value: f64, bound: f64) -> Self {
        Self {
            label,
            value,
            bound,
            lower_bound: true,
        }
    }

    fn pass(&self) -> bool {
        if self.lower_bound {
            self.value.is_finite() && self.value > self.bound
        } else {
            self.value.is_finite() && self.value < self.bound
        }
    }
}

fn render(checks: &[Check]) -> (bool, String) {
    let pass = checks.iter().all(Check::pass);
    let detail = checks
        .iter()
        .map(|check| {
            let sign = if check.lower_bound { ">" } else { "<" };
            let mark = if check.pass() { "" } else { " [FAIL]" };
            format!(
                "{} {:.2e} ({sign} {:.0e}){mark}",
                check.label, check.value, check.bound
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    (pass, detail)
}

// ---------------------------------------------------------------------------
// 1. identity suite for the basic functions on three lattices
// ---------------------------------------------------------------------------

fn elliptic_identity_suite() -> (bool, String) {
    const POINTS: usize = 100;
    const CLEARANCE: f64 = 0.15;
    const PAIR_CLEARANCE: f64 = 0.1;
    const FD_STEP: f64 = 1e-5;
    let lattices = [
        Torus::new(c(1.0, 0.0), c(0.0, 1.0)).expect("valid torus"),
        Torus::new(c(1.0, 0.0), c(0.0, 1.3)).expect("valid torus"),
        Torus::new(c(1.0, 0.0), c(0.3, 1.1)).expect("valid torus"),
    ];

    let mut ode = 0.0f64;
    let mut zeta_fd = 0.0f64;
    let mut sigma_fd = 0.0f64;
    let mut zeta_qp = 0.0f64;
    let mut sigma_qp = 0.0f64;
    let mut legendre = 0.0f64;
    let mut two_form = 0.0f64;
    let mut log_u = 0.0f64;
    let mut log_v = 0.0f64;

    for (index, torus) in lattices.iter().enumerate() {
        let mut plan = SamplePlan::new(torus, 100 + index as u64);
        let periods = [2.0 * torus.omega(), 2.0 * torus.omega_prime()];
        let etas = [torus.eta(), torus.eta_prime()];
        let halves = [torus.omega(), torus.omega_prime()];
        for z in plan.take(POINTS, CLEARANCE) {
            let wp = torus.wp(z).unwrap();
            let wp_prime = torus.wp_prime(z).unwrap();
            let lhs = wp_prime * wp_prime;
            let rhs = 4.0 * wp * wp * wp - torus.g2() * wp - torus.g3();
            ode = ode.max((lhs - rhs).norm() / lhs.norm().max(1.0));

            let zeta = torus.zeta_w(z).unwrap();
            let dz = complex_central_derivative(|x| torus.zeta_w(x), z, FD_STEP).unwrap();
            zeta_fd = zeta_fd.max((dz + wp).norm() / wp.norm().max(1.0));

            let sigma = torus.sigma_w(z).unwrap();
            let ds = complex_central_derivative(|x| torus.sigma_w(x), z, FD_STEP).unwrap();
            sigma_fd = sigma_fd.max((ds / sigma - zeta).norm() / zeta.norm().max(1.0));

            for ((period, eta), half) in periods.iter().zip(etas).zip(halves) {
                let jump = torus.zeta_w(z + period).unwrap() - zeta - 2.0 * eta;
                zeta_qp = zeta_qp.max(jump.norm() / (1.0 + zeta.norm()));
                let shifted = torus.sigma_w(z + period).unwrap();
                let expected = -sigma * (2.0 * eta * (z + half)).exp();
                sigma_qp = sigma_qp.max((shifted - expected).norm() / expected.norm().max(1.0));
            }
        }

        let lg = (torus.eta() * torus.omega_prime()
            - torus.eta_prime() * torus.omega()
            - c(0.0, std::f64::consts::FRAC_PI_2))
        .norm()
            / (1.0 + (torus.eta() * torus.omega_prime()).norm());
        legendre = legendre.max(lg);

        let mut pairs = 0usize;
        let mut attempts = 0usize;
        while pairs < POINTS {
            attempts += 1;
            assert!(attempts < 1000 * POINTS, "pair drawing stalled");
            let u = plan.take(1, CLEARANCE)[0];
            let v = plan.take(1, CLEARANCE)[0];
            if torus.lattice_distance(u - v) < PAIR_CLEARANCE
                || torus.lattice_distance(u + v) < PAIR_CLEARANCE
                || torus.lattice_distance(2.0 * v) < PAIR_CLEARANCE
            {
                continue;
            }
            pairs += 1;
            let f = torus.f(u, v).unwrap();
            let quotient = torus.wp_prime(v).unwrap() / (torus.wp(v).unwrap() - torus.wp(u).unwrap());
            two_form = two_form.max((f - quotient).norm() / (1.0 + f.norm()));
            let residuals = torus.log_f_derivative_identities(u, v, FD_STEP).unwrap();
            log_u = log_u.max(residuals.residual_u);
            log_v = log_v.max(residuals.residual_v);
        }
    }

    render(&[
        Check::at_most("wp-ode", ode, 1e-9),
        Check::at_most("zeta-fd", zeta_fd, 1e-6),
        Check::at_most("sigma-fd", sigma_fd, 1e-6),
        Check::at_most("zeta-qp", zeta_qp, 1e-10),
        Check::at_most("sigma-qp", sigma_qp, 1e-10),
        Check::at_most("legendre", legendre, 1e-10),
        Check::at_most("pair-kernel", two_form, 1e-9),
        Check::at_most("log-du", log_u, 1e-6),
        Check::at_most("log-dv", log_v, 1e-6),
    ])
}

// ---------------------------------------------------------------------------
// 2. one-component family and its reconstructed operator pair
// ---------------------------------------------------------------------------

fn rank1_pair() -> (bool, String) {
    let torus = Torus::new(c(1.0, 0.0), c(0.0, 1.0)).expect("valid torus");
    let data = Rank1Data::new(
        torus.clone(),
        point(0.41, 0.27),
        point(-0.13, 0.52),
        point(0.77, 0.31),
    )
    .expect("admissible data");

    let singular = [data.p_plus(), data.p_minus(), data.gamma()];
    let points = SamplePlan::new(&torus, 7).take_filtered(6, 0.2, |z| {
        singular
            .iter()
            .all(|&s| torus.lattice_distance(z - s) >= 0.2)
    });
    let mut periodicity = 0.0f64;
    for n in -3..=3 {
        for &z in &points {
            let base = data.ba_function(n, z).unwrap();
            for period in [2.0 * torus.omega(), 2.0 * torus.omega_prime()] {
                let shifted = data.ba_function(n, z + period).unwrap();
                periodicity = periodicity.max((shifted - base).norm() / base.norm().max(1.0));
            }
        }
    }

    let window = Window::new(-5, 5).expect("valid window");
    let report = data
        .rank1_pair_check_seeded(window, 7)
        .expect("reconstruction succeeds");
    render(&[
        Check::at_most("psi-periodicity", periodicity, 1e-9),
        Check::at_most("eigen-f", report.eigen_residual_f, 1e-8),
        Check::at_most("eigen-g", report.eigen_residual_g, 1e-8),
        Check::at_most("commutator", report.commutator_norm, 1e-8),
    ])
}

// ---------------------------------------------------------------------------
// 3. two-component family with separated marked points
// ---------------------------------------------------------------------------

fn seprank2_example() -> (bool, String) {
    let data = SepRank2Data::demo();
    let window = Window::new(-6, 6).expect("valid window");
    let report = data.full_report(window).expect("reconstruction succeeds");
    let normalization = report
        .normalization_residuals
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    let residue = report
        .tu_residuals
        .iter()
        .flatten()
        .copied()
        .fold(0.0f64, f64::max);
    render(&[
        Check::at_most("normalization", normalization, 1e-9),
        Check::at_most("residue-relations", residue, 1e-6),
        Check::at_most("commutator", report.commutator_norm, 1e-8),
        Check::at_most("joint-vs-single", report.single_component_agreement, 1e-7),
        Check::at_most("periodicity", report.periodicity_residual, 1e-9),
        Check::at_most(
            "eigen-worst",
            report.eigen_residuals[0].max(report.eigen_residuals[1]),
            1e-8,
        ),
    ])
}

// ---------------------------------------------------------------------------
// 4. dressing-chain consistency over forty steps
// ---------------------------------------------------------------------------

fn tyurin_dynamics() -> (bool, String) {
    let torus = Torus::new(c(1.0, 0.0), c(0.0, 1.07)).expect("valid torus");
    let params = SymmetricParams::generate(&torus, -2, 41, 11).expect("admissible data");
    let chain = TyurinChain::run_symmetric(torus.clone(), &params).expect("chain runs");
    assert_eq!(chain.step_checks().len(), 40, "forty steps expected");

    let chi1 = chain
        .step_checks()
        .iter()
        .map(|s| s.chi1_zero_residual)
        .fold(0.0f64, f64::max);
    let route = chain
        .step_checks()
        .iter()
        .map(|s| s.weight_route_residual)
        .fold(0.0f64, f64::max);

    let start = chain.start();
    let mut xi11 = 0.0f64;
    let mut xi12 = 0.0f64;
    let mut xi21 = 0.0f64;
    for n in start..start + chain.state_count() as i64 - 1 {
        let (a, b, g) = chain.xi_at(n).expect("xi below the last state");
        let wp_here = torus.wp(chain.state_at(n).unwrap().gamma()).unwrap();
        let wp_next = torus.wp(chain.state_at(n + 1).unwrap().gamma()).unwrap();
        xi11 = xi11.max(a.norm());
        xi12 = xi12.max((b - (wp_here - wp_next)).norm());
        xi21 = xi21.max((g - wp_here).norm());
    }

    let window = chain.l4_window().expect("chain long enough");
    let general = chain.build_l4(window, L4Mode::General).expect("assembly");
    let symmetric = chain.build_l4(window, L4Mode::Symmetric).expect("assembly");
    let mut disagreement = 0.0f64;
    for n in window.sites() {
        for i in -2..=2 {
            disagreement = disagreement.max((general.coeff(n, i) - symmetric.coeff(n, i)).norm());
        }
    }
    let assembly = disagreement / symmetric.max_abs_coeff().max(1.0);

    render(&[
        Check::at_most("chi1-zero", chi1, 1e-9),
        Check::at_most("weight-route", route, 1e-9),
        Check::at_most("xi11", xi11, 1e-12),
        Check::at_most("xi12-route", xi12, 1e-9),
        Check::at_most("xi21-wp", xi21, 1e-9),
        Check::at_most("assembly", assembly, 1e-9),
    ])
}

// ---------------------------------------------------------------------------
// 5. headline commutativity on the window [0, 40] with perturbation control
// ---------------------------------------------------------------------------

fn headline_commutativity() -> (bool, String) {
    let torus = Torus::new(c(1.0, 0.0), c(0.0, 1.07)).expect("valid torus");
    let window = Window::new(0, 40).expect("valid window");
    let partner_window = Window::new(3, 37).expect("valid window");
    let mut checks = Vec::new();
    let mut details = Vec::new();
    for seed in [2u64, 6, 19] {
        let params = SymmetricParams::generate(&torus, -2, 45, seed).expect("admissible data");
        let chain = TyurinChain::run_symmetric(torus.clone(), &params).expect("chain runs");
        let l4 = chain.build_l4(window, L4Mode::Symmetric).expect("assembly");
        let (_, residual) =
            find_commuting_partner(&l4, 3, 3, partner_window).expect("solvable system");

        let site = 5i64;
        let original = chain.state_at(site).unwrap().gamma();
        let moved =
            torus.wp(original + c(1e-3, 0.0)).unwrap() - torus.wp(original).unwrap();
        let perturbed = BandedOperator::from_fn(window, 2, 2, |n, i| {
            let base = l4.coeff(n, i);
            if i == 0 && (n == site || n == site + 1) {
                base - moved
            } else {
                base
            }
        });
        let (_, dirty) =
            find_commuting_partner(&perturbed, 3, 3, partner_window).expect("solvable system");

        let ratio = dirty / residual.max(1e-300);
        let clean_ok = residual.is_finite() && residual < 1e-8;
        let dirty_ok = dirty.is_finite() && dirty > 1e-4;
        let ratio_ok = ratio.is_finite() && ratio >= 1e4;
        checks.push(clean_ok && dirty_ok && ratio_ok);
        details.push(format!(
            "seed {seed}: clean {residual:.2e} (< 1e-8){}, perturbed {dirty:.2e} (> 1e-4){}, ratio {ratio:.1e} (>= 1e4){}",
            if clean_ok { "" } else { " [FAIL]" },
            if dirty_ok { "" } else { " [FAIL]" },
            if ratio_ok { "" } else { " [FAIL]" },
        ));
    }
    (checks.iter().all(|&p| p), details.join("; "))
}

// ---------------------------------------------------------------------------
// 6. lattice flow: conservation, convergence order, compatibility, germ Lax
// ---------------------------------------------------------------------------

fn elltoda_flow() -> (bool, String) {
    let torus = Torus::new(c(1.0, 0.0), c(0.0, 1.05)).expect("valid torus");
    let chain = EllTodaChain::from_positions_velocities(
        &torus,
        vec![c(1.44, 0.52), c(1.49, -0.48), c(1.52, 0.55), c(1.56, -0.45)],
        vec![c(0.06, 0.03), c(-0.055, -0.028), c(0.05, -0.005), c(-0.065, 0.018)],
    )
    .expect("admissible chain");

    let long = integrate(&chain, 10.0, 1e-3, 100).expect("flow runs");
    assert!(long.is_complete(), "long trajectory aborted early");
    let h0 = long.energies()[0];
    let drift = long.energy_drift() / (1.0 + h0.norm());

    let coarse = integrate(&chain, 2.0, 0.0125, 1).expect("flow runs");
    let fine = integrate(&chain, 2.0, 0.00625, 2).expect("flow runs");
    let ratio = coarse.energy_drift() / fine.energy_drift();
    let ratio_ok = ratio.is_finite() && (12.0..=20.0).contains(&ratio);

    let sampled = integrate(&chain, 2.0, 1e-3, 5).expect("flow runs");
    let compat = compatibility_check(&torus, &sampled).expect("well-sampled trajectory");

    let doubled = integrate_flow_with_coupling(
        &torus,
        chain.positions(),
        &chain.velocities(),
        2.0,
        1e-3,
        5,
        NeighborCoupling::ForwardDoubled,
    )
    .expect("flow runs");
    let doubled_compat = compatibility_check(&torus, &doubled).expect("well-sampled trajectory");

    let generic = TodaGermState::new(
        vec![c(0.8, 0.1), c(1.2, -0.3), c(0.5, 0.45), c(0.9, -0.2)],
        vec![c(0.3, -0.1), c(-0.2, 0.25), c(0.15, 0.1), c(-0.4, -0.05)],
    )
    .expect("valid germ");
    let (c_dot, v_dot) = toda_consistent_derivatives(&generic);
    let lax = toda1d_lax_residual(&generic, &c_dot, &v_dot).expect("matching lengths");
    let mut wrong_v = v_dot.clone();
    wrong_v[1] += c(0.01, 0.0);
    let lax_off = toda1d_lax_residual(&generic, &c_dot, &wrong_v).expect("matching lengths");

    let mut checks = vec![
        Check::at_most("energy-drift", drift, 1e-8),
        Check::at_most("compat-c", compat.r_c_max, 1e-5),
        Check::at_most("compat-v", compat.r_v_max, 1e-5),
        Check::at_least("doubled-coupling-rc", doubled_compat.r_c_max, 1e-2),
        Check::at_most("lax", lax, 1e-12),
        Check::at_least("lax-off", lax_off, 1e-3),
    ];
    let (mut pass, mut detail) = render(&checks);
    checks.clear();
    pass &= ratio_ok;
    detail.push_str(&format!(
        ", halving-ratio {ratio:.2} (in [12, 20]){}",
        if ratio_ok { "" } else { " [FAIL]" }
    ));
    (pass, detail)
}

// ---------------------------------------------------------------------------
// 7. byte-identical artifacts for identical config and seed
// ---------------------------------------------------------------------------

fn determinism() -> (bool, String) {
    let exe = env!("CARGO_BIN_EXE_ellop");
    let dir = tempfile::tempdir().expect("tempdir");
    let config_path = dir.path().join("config.json");
    std::fs::write(
        &config_path,
        r#"{
  "experiment": "elltoda-run",
  "torus": { "omega": [1.0, 0.0], "omega_prime": [0.0, 1.05] },
  "seed": 17,
  "params": { "t_final": 0.5, "dt": 0.001, "output_stride": 10,
              "calibration_trials": 6 }
}
"#,
    )
    .expect("write config");

    let mut exits = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let output = Command::new(exe)
            .arg("run")
            .arg("--config")
            .arg(&config_path)
            .arg("--out")
            .arg(&out)
            .output()
            .expect("runner starts");
        exits.push(output.status.code());
    }
    let both_passed = exits.iter().all(|&code| code == Some(0));

    let mut identical = true;
    let mut compared = Vec::new();
    for name in ["trajectory.csv", "report.json"] {
        let left = std::fs::read(dir.path().join("a").join(name)).expect("first artifact");
        let right = std::fs::read(dir.path().join("b").join(name)).expect("second artifact");
        let same = left == right;
        identical &= same;
        compared.push(format!(
            "{name} {}",
            if same { "identical" } else { "DIFFERS" }
        ));
    }
    (
        both_passed && identical,
        format!(
            "exit codes {:?}, {}",
            exits,
            compared.join(", ")
        ),
    )
}

// ---------------------------------------------------------------------------

/// A criterion body: returns overall pass plus the residual detail line.
type CriterionFn = fn() -> (bool, String);

fn main() {
    let criteria: [(&str, f64, CriterionFn); 7] = [
        ("elliptic identity suite", 10.0, elliptic_identity_suite),
        ("rank-1 operator pair", 30.0, rank1_pair),
        ("separated rank-2 example", 60.0, seprank2_example),
        ("discrete Tyurin dynamics", 30.0, tyurin_dynamics),
        ("headline commutativity", 120.0, headline_commutativity),
        ("elliptic Toda flow", 120.0, elltoda_flow),
        ("runner determinism", f64::INFINITY, determinism),
    ];

    let mut failures = 0usize;
    for (index, (name, budget, body)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(body));
        let elapsed = started.elapsed().as_secs_f64();
        let (mut pass, detail) = match outcome {
            Ok((pass, detail)) => (pass, detail),
            Err(payload) => {
                let message = payload
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| payload.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "panic".to_string());
                (false, format!("panicked: {message}"))
            }
        };
        let budget_note = if budget.is_finite() {
            if elapsed > *budget {
                pass = false;
                format!("{elapsed:.1}s OVER {budget:.0}s budget")
            } else {
                format!("{elapsed:.1}s < {budget:.0}s budget")
            }
        } else {
            format!("{elapsed:.1}s")
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {} ({name}): {} in {budget_note} — {detail}",
            index + 1,
            if pass { "PASS" } else { "FAIL" },
        );
    }

    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(2);
    }
    println!("all 7 criteria passed");
}
