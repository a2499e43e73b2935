//! The experiments the runner executes: each one computes named residual
//! criteria, free-form metrics, and writes its data series as CSV.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ellop_core::elliptic::complex_central_derivative;
use ellop_core::elltoda::{
    compatibility_check, hamilton_calibration, integrate_flow, momentum_from_velocity,
};
use ellop_core::operators::{commutator_norm, find_commuting_partner, BandedOperator, Window};
use ellop_core::rank1::Rank1Data;
use ellop_core::sample::SamplePlan;
use ellop_core::seprank2::SepRank2Data;
use ellop_core::tyurin::{L4Mode, SymmetricParams, TyurinChain};
use ellop_core::ComplexPoint;
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::config::{
    pair_to_complex, pairs_to_complex, ElltodaParams, EllipticCheckParams, ExperimentKind,
    PartnerSolveParams, Rank1Params, RunConfig, Seprank2Params, TyurinMode, TyurinParams,
};
use crate::report::{complex_metric, Criterion, Report};
use crate::RunnerError;

/// Step used for every finite-difference oracle in the identity suite.
const FD_STEP: f64 = 1e-5;
/// Lattice clearance of the drawn sample points.
const POINT_CLEARANCE: f64 = 0.15;
/// Clearance of pair combinations (sums, differences, doubled points).
const PAIR_CLEARANCE: f64 = 0.1;

/// What a finished run leaves behind.
#[derive(Debug)]
pub struct RunArtifacts {
    pub report: Report,
    pub report_path: PathBuf,
}

/// Execute the configured experiment, writing `report.json` and any CSV
/// series into `out_dir`.  Relative paths inside the config (such as the
/// operator file of a partner solve) resolve against `config_dir`.
pub fn run(
    config: &RunConfig,
    config_dir: &Path,
    out_dir: &Path,
) -> Result<RunArtifacts, RunnerError> {
    std::fs::create_dir_all(out_dir).map_err(|e| RunnerError::io(out_dir, e))?;
    let (criteria, metrics) = match config.experiment {
        ExperimentKind::EllipticCheck => elliptic_check(config, out_dir)?,
        ExperimentKind::Rank1Demo => rank1_demo(config)?,
        ExperimentKind::Seprank2Demo => seprank2_demo(config)?,
        ExperimentKind::TyurinRun => tyurin_run(config, out_dir)?,
        ExperimentKind::ElltodaRun => elltoda_run(config, out_dir)?,
        ExperimentKind::PartnerSolve => partner_solve(config, config_dir, out_dir)?,
    };
    let report = Report::assemble(config, criteria, metrics);
    let report_path = report.write(out_dir)?;
    Ok(RunArtifacts {
        report,
        report_path,
    })
}

type Outcome = (Vec<Criterion>, BTreeMap<String, Value>);

/// Scientific notation with enough digits to reproduce the exact float.
fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn window_from(pair: [i64; 2]) -> Result<Window, RunnerError> {
    Ok(Window::new(pair[0], pair[1])?)
}

fn window_metric(window: Window) -> Value {
    json!([window.n_min(), window.n_max()])
}

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), RunnerError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|e| RunnerError::io(path, e))?;
    Ok(())
}

/// Track the worst value of a named residual.
#[derive(Debug, Clone, Copy)]
struct Worst(f64);

impl Worst {
    fn new() -> Self {
        Self(0.0)
    }
    fn push(&mut self, value: f64) -> f64 {
        self.0 = self.0.max(value);
        value
    }
    fn value(self) -> f64 {
        self.0
    }
}

// ---------------------------------------------------------------------------
// elliptic-check
// ---------------------------------------------------------------------------

const ELLIPTIC_CRITERIA: [&str; 9] = [
    "wp-differential-equation",
    "zeta-derivative",
    "sigma-log-derivative",
    "zeta-quasi-periodicity",
    "sigma-quasi-periodicity",
    "legendre",
    "pair-kernel-quotient",
    "kernel-log-derivative-u",
    "kernel-log-derivative-v",
];

/// Identity suite for ℘, ζ, σ and the two-point kernel on the configured
/// torus: differential equations, quasi-periodicity, the Legendre relation,
/// and the kernel's quotient form and logarithmic derivatives.
fn elliptic_check(config: &RunConfig, out_dir: &Path) -> Result<Outcome, RunnerError> {
    config.check_tolerance_names(&ELLIPTIC_CRITERIA)?;
    let params: EllipticCheckParams = config.typed_params()?;
    if params.points == 0 {
        return Err(RunnerError::ConfigInvalid(
            "params.points: need at least one sample point".into(),
        ));
    }
    let torus = config.torus.to_torus()?;
    let mut plan = SamplePlan::new(&torus, config.seed);

    let mut wp_ode = Worst::new();
    let mut zeta_derivative = Worst::new();
    let mut sigma_log_derivative = Worst::new();
    let mut zeta_qp = Worst::new();
    let mut sigma_qp = Worst::new();
    let periods = [2.0 * torus.omega(), 2.0 * torus.omega_prime()];
    let etas = [torus.eta(), torus.eta_prime()];
    let half_periods = [torus.omega(), torus.omega_prime()];

    let mut point_rows = Vec::with_capacity(params.points);
    for (index, z) in plan.take(params.points, POINT_CLEARANCE).into_iter().enumerate() {
        let wp = torus.wp(z)?;
        let wp_prime = torus.wp_prime(z)?;
        let lhs = wp_prime * wp_prime;
        let rhs = 4.0 * wp * wp * wp - torus.g2() * wp - torus.g3();
        let r_ode = wp_ode.push((lhs - rhs).norm() / lhs.norm().max(1.0));

        let zeta = torus.zeta_w(z)?;
        let fd_zeta = complex_central_derivative(|x| torus.zeta_w(x), z, FD_STEP)?;
        let r_zeta = zeta_derivative.push((fd_zeta + wp).norm() / wp.norm().max(1.0));

        let sigma = torus.sigma_w(z)?;
        let fd_sigma = complex_central_derivative(|x| torus.sigma_w(x), z, FD_STEP)?;
        let r_sigma =
            sigma_log_derivative.push((fd_sigma / sigma - zeta).norm() / zeta.norm().max(1.0));

        let mut r_zqp: f64 = 0.0;
        let mut r_sqp: f64 = 0.0;
        for ((period, eta), half) in periods.iter().zip(etas).zip(half_periods) {
            let jump = torus.zeta_w(z + period)? - zeta - 2.0 * eta;
            r_zqp = r_zqp.max(jump.norm() / (1.0 + zeta.norm()));
            let shifted = torus.sigma_w(z + period)?;
            let expected = -sigma * (2.0 * eta * (z + half)).exp();
            r_sqp = r_sqp.max((shifted - expected).norm() / expected.norm().max(1.0));
        }
        zeta_qp.push(r_zqp);
        sigma_qp.push(r_sqp);

        point_rows.push(vec![
            index.to_string(),
            sci(z.re),
            sci(z.im),
            sci(r_ode),
            sci(r_zeta),
            sci(r_sigma),
            sci(r_zqp),
            sci(r_sqp),
        ]);
    }

    let legendre = (torus.eta() * torus.omega_prime()
        - torus.eta_prime() * torus.omega()
        - Complex64::new(0.0, std::f64::consts::FRAC_PI_2))
    .norm()
        / (1.0 + (torus.eta() * torus.omega_prime()).norm());

    // Pair identities on admissible (u, v) draws: u ± v and 2v clear of the
    // lattice so the kernel, its quotient form and the log-derivative
    // references all stay regular.
    let mut pair_kernel = Worst::new();
    let mut log_derivative_u = Worst::new();
    let mut log_derivative_v = Worst::new();
    let mut pair_rows = Vec::with_capacity(params.points);
    let mut attempts = 0usize;
    while pair_rows.len() < params.points {
        attempts += 1;
        if attempts > 1000 * params.points {
            return Err(RunnerError::ConfigInvalid(format!(
                "could not draw {} admissible sample pairs on this torus",
                params.points
            )));
        }
        let u = plan.take(1, POINT_CLEARANCE)[0];
        let v = plan.take(1, POINT_CLEARANCE)[0];
        if torus.lattice_distance(u - v) < PAIR_CLEARANCE
            || torus.lattice_distance(u + v) < PAIR_CLEARANCE
            || torus.lattice_distance(2.0 * v) < PAIR_CLEARANCE
        {
            continue;
        }
        let f = torus.f(u, v)?;
        let quotient = torus.wp_prime(v)? / (torus.wp(v)? - torus.wp(u)?);
        let r_fk = pair_kernel.push((f - quotient).norm() / (1.0 + f.norm()));
        let residuals = torus.log_f_derivative_identities(u, v, FD_STEP)?;
        let r_u = log_derivative_u.push(residuals.residual_u);
        let r_v = log_derivative_v.push(residuals.residual_v);
        pair_rows.push(vec![
            pair_rows.len().to_string(),
            sci(u.re),
            sci(u.im),
            sci(v.re),
            sci(v.im),
            sci(r_fk),
            sci(r_u),
            sci(r_v),
        ]);
    }

    write_csv(
        &out_dir.join("points.csv"),
        &[
            "index",
            "re_z",
            "im_z",
            "wp_differential_equation",
            "zeta_derivative",
            "sigma_log_derivative",
            "zeta_quasi_periodicity",
            "sigma_quasi_periodicity",
        ],
        point_rows,
    )?;
    write_csv(
        &out_dir.join("pairs.csv"),
        &[
            "index",
            "re_u",
            "im_u",
            "re_v",
            "im_v",
            "pair_kernel_quotient",
            "log_derivative_u",
            "log_derivative_v",
        ],
        pair_rows,
    )?;

    let values = [
        wp_ode.value(),
        zeta_derivative.value(),
        sigma_log_derivative.value(),
        zeta_qp.value(),
        sigma_qp.value(),
        legendre,
        pair_kernel.value(),
        log_derivative_u.value(),
        log_derivative_v.value(),
    ];
    let defaults = [1e-9, 1e-6, 1e-6, 1e-10, 1e-10, 1e-10, 1e-9, 1e-6, 1e-6];
    let criteria = ELLIPTIC_CRITERIA
        .iter()
        .zip(values)
        .zip(defaults)
        .map(|((name, value), default)| {
            Criterion::residual(name, value, config.tolerance(name, default))
        })
        .collect();

    let mut metrics = BTreeMap::new();
    metrics.insert("g2".into(), complex_metric(torus.g2()));
    metrics.insert("g3".into(), complex_metric(torus.g3()));
    metrics.insert("eta".into(), complex_metric(torus.eta()));
    metrics.insert("eta_prime".into(), complex_metric(torus.eta_prime()));
    metrics.insert("tau".into(), complex_metric(torus.tau()));
    metrics.insert("points".into(), json!(params.points));
    Ok((criteria, metrics))
}

// ---------------------------------------------------------------------------
// rank1-demo
// ---------------------------------------------------------------------------

const RANK1_CRITERIA: [&str; 4] = [
    "psi-double-periodicity",
    "eigen-residual-f",
    "eigen-residual-g",
    "commutator",
];

/// One-component family: double periodicity of the eigenfunctions, held-out
/// eigen-residuals of the two reconstructed operators, and their commutator.
fn rank1_demo(config: &RunConfig) -> Result<Outcome, RunnerError> {
    config.check_tolerance_names(&RANK1_CRITERIA)?;
    let params: Rank1Params = config.typed_params()?;
    let torus = config.torus.to_torus()?;
    let data = Rank1Data::new(
        torus.clone(),
        ComplexPoint::new(params.p_plus[0], params.p_plus[1])?,
        ComplexPoint::new(params.p_minus[0], params.p_minus[1])?,
        ComplexPoint::new(params.gamma[0], params.gamma[1])?,
    )?;
    let window = window_from(params.window)?;

    let mut periodicity = Worst::new();
    let periods = [2.0 * torus.omega(), 2.0 * torus.omega_prime()];
    let singular = [data.p_plus(), data.p_minus(), data.gamma()];
    let points = SamplePlan::new(&torus, config.seed).take_filtered(6, 0.2, |z| {
        singular
            .iter()
            .all(|&s| torus.lattice_distance(z - s) >= 0.2)
    });
    for n in -3..=3 {
        for &z in &points {
            let base = data.ba_function(n, z)?;
            for period in periods {
                let shifted = data.ba_function(n, z + period)?;
                periodicity.push((shifted - base).norm() / base.norm().max(1.0));
            }
        }
    }

    let pair = data.rank1_pair_check_seeded(window, config.seed)?;
    let criteria = vec![
        Criterion::residual(
            "psi-double-periodicity",
            periodicity.value(),
            config.tolerance("psi-double-periodicity", 1e-9),
        ),
        Criterion::residual(
            "eigen-residual-f",
            pair.eigen_residual_f,
            config.tolerance("eigen-residual-f", 1e-8),
        ),
        Criterion::residual(
            "eigen-residual-g",
            pair.eigen_residual_g,
            config.tolerance("eigen-residual-g", 1e-8),
        ),
        Criterion::residual(
            "commutator",
            pair.commutator_norm,
            config.tolerance("commutator", 1e-8),
        ),
    ];

    let mut metrics = BTreeMap::new();
    metrics.insert("window".into(), window_metric(window));
    metrics.insert("sample_count".into(), json!(pair.sample_count));
    metrics.insert("periodicity_points".into(), json!(points.len()));
    Ok((criteria, metrics))
}

// ---------------------------------------------------------------------------
// seprank2-demo
// ---------------------------------------------------------------------------

const SEPRANK2_CRITERIA: [&str; 7] = [
    "normalization",
    "psi-double-periodicity",
    "residue-relations",
    "eigen-residual-f",
    "eigen-residual-g",
    "commutator",
    "joint-vs-single",
];

/// Two-component family with separated marked points: normalization,
/// periodicity, residue matching, operator eigen-residuals, commutator, and
/// the agreement of the two reconstruction routes.
fn seprank2_demo(config: &RunConfig) -> Result<Outcome, RunnerError> {
    config.check_tolerance_names(&SEPRANK2_CRITERIA)?;
    let params: Seprank2Params = config.typed_params()?;
    let torus = config.torus.to_torus()?;
    let data = SepRank2Data::new(
        torus,
        ComplexPoint::new(params.z0[0], params.z0[1])?,
        ComplexPoint::new(params.gamma1[0], params.gamma1[1])?,
        ComplexPoint::new(params.gamma2[0], params.gamma2[1])?,
        pair_to_complex(params.a1),
        pair_to_complex(params.a2),
    )?;
    let window = window_from(params.window)?;
    let report = data.full_report(window)?;

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
    let names_values_defaults = [
        ("normalization", normalization, 1e-9),
        (
            "psi-double-periodicity",
            report.periodicity_residual,
            1e-9,
        ),
        ("residue-relations", residue, 1e-6),
        ("eigen-residual-f", report.eigen_residuals[0], 1e-8),
        ("eigen-residual-g", report.eigen_residuals[1], 1e-8),
        ("commutator", report.commutator_norm, 1e-8),
        ("joint-vs-single", report.single_component_agreement, 1e-7),
    ];
    let criteria = names_values_defaults
        .iter()
        .map(|&(name, value, default)| {
            Criterion::residual(name, value, config.tolerance(name, default))
        })
        .collect();

    let mut metrics = BTreeMap::new();
    metrics.insert("window".into(), window_metric(window));
    metrics.insert(
        "tu_residuals".into(),
        json!(report.tu_residuals),
    );
    Ok((criteria, metrics))
}

// ---------------------------------------------------------------------------
// tyurin-run
// ---------------------------------------------------------------------------

const TYURIN_CRITERIA: [&str; 9] = [
    "chi1-zero",
    "weight-two-route",
    "symmetric-c-closed-form",
    "symmetric-s-recovery",
    "xi11-vanishing",
    "xi12-two-route",
    "xi21-wp-value",
    "assembly-agreement",
    "partner-residual",
];

/// Dressing-chain run: step the chain, verify its per-step consistency
/// residuals (plus the closed-form reductions in symmetric mode), assemble
/// the fourth-order operator, and search for its commuting partner.
fn tyurin_run(config: &RunConfig, out_dir: &Path) -> Result<Outcome, RunnerError> {
    config.check_tolerance_names(&TYURIN_CRITERIA)?;
    let params: TyurinParams = config.typed_params()?;
    let torus = config.torus.to_torus()?;
    let c_const = pair_to_complex(params.c_const);

    let chain = match params.mode {
        TyurinMode::Symmetric => {
            if params.v.is_some() || params.a0.is_some() || c_const != Complex64::new(0.0, 0.0) {
                return Err(RunnerError::ConfigInvalid(
                    "params: v, a0 and c_const only apply to the general mode".into(),
                ));
            }
            let sym = match (&params.seed_gamma, &params.gamma, &params.s) {
                (Some(seed_gamma), Some(gamma), Some(s)) => SymmetricParams::new(
                    ComplexPoint::new(seed_gamma[0], seed_gamma[1])?,
                    params.start,
                    pairs_to_complex(gamma),
                    pairs_to_complex(s),
                )?,
                (None, None, None) => {
                    SymmetricParams::generate(&torus, params.start, params.count, config.seed)?
                }
                _ => {
                    return Err(RunnerError::ConfigInvalid(
                        "params: explicit symmetric data needs seed_gamma, gamma and s together"
                            .into(),
                    ))
                }
            };
            TyurinChain::run_symmetric(torus.clone(), &sym)?
        }
        TyurinMode::General => {
            if params.seed_gamma.is_some() || params.s.is_some() {
                return Err(RunnerError::ConfigInvalid(
                    "params: seed_gamma and s only apply to the symmetric mode".into(),
                ));
            }
            let gamma = params.gamma.as_ref().ok_or_else(|| {
                RunnerError::ConfigInvalid("params.gamma: required in general mode".into())
            })?;
            let v = params.v.as_ref().ok_or_else(|| {
                RunnerError::ConfigInvalid("params.v: required in general mode".into())
            })?;
            let a0 = params.a0.ok_or_else(|| {
                RunnerError::ConfigInvalid("params.a0: required in general mode".into())
            })?;
            TyurinChain::run_general(
                torus.clone(),
                params.start,
                &pairs_to_complex(gamma),
                &pairs_to_complex(v),
                (pair_to_complex(a0[0]), pair_to_complex(a0[1])),
                c_const,
            )?
        }
    };

    let mut criteria = Vec::new();
    let mut push = |name: &str, value: f64, default: f64| {
        criteria.push(Criterion::residual(
            name,
            value,
            config.tolerance(name, default),
        ));
    };

    let chi1 = chain
        .step_checks()
        .iter()
        .map(|c| c.chi1_zero_residual)
        .fold(0.0f64, f64::max);
    let weight_route = chain
        .step_checks()
        .iter()
        .map(|c| c.weight_route_residual)
        .fold(0.0f64, f64::max);
    push("chi1-zero", chi1, 1e-9);
    push("weight-two-route", weight_route, 1e-9);

    let start = chain.start();
    let last_state = start + chain.state_count() as i64 - 1;
    if params.mode == TyurinMode::Symmetric {
        let c_closed = chain
            .symmetric_checks()
            .iter()
            .map(|c| c.c_residual)
            .fold(0.0f64, f64::max);
        let s_recovery = chain
            .symmetric_checks()
            .iter()
            .map(|c| c.s_residual)
            .fold(0.0f64, f64::max);
        push("symmetric-c-closed-form", c_closed, 1e-9);
        push("symmetric-s-recovery", s_recovery, 1e-9);

        let mut xi11 = Worst::new();
        let mut xi12 = Worst::new();
        let mut xi21 = Worst::new();
        for n in start..last_state {
            let (a, b, c) = chain.xi_at(n).expect("xi exists below the last state");
            let wp_here = torus.wp(chain.state_at(n).expect("state").gamma())?;
            let wp_next = torus.wp(chain.state_at(n + 1).expect("state").gamma())?;
            xi11.push(a.norm());
            xi12.push((b - (wp_here - wp_next)).norm());
            xi21.push((c - wp_here).norm());
        }
        push("xi11-vanishing", xi11.value(), 1e-12);
        push("xi12-two-route", xi12.value(), 1e-9);
        push("xi21-wp-value", xi21.value(), 1e-9);
    }

    let build_window = match params.build_window {
        Some(pair) => window_from(pair)?,
        None => chain.l4_window().ok_or_else(|| {
            RunnerError::ConfigInvalid("chain too short for a fourth-order assembly".into())
        })?,
    };
    let assembly_mode = match params.mode {
        TyurinMode::Symmetric => L4Mode::Symmetric,
        TyurinMode::General => L4Mode::General,
    };
    let l4 = chain.build_l4(build_window, assembly_mode)?;

    // With zero offset both assembly routes must agree coefficient-wise.
    if c_const == Complex64::new(0.0, 0.0) {
        let general = chain.build_l4(build_window, L4Mode::General)?;
        let symmetric = chain.build_l4(build_window, L4Mode::Symmetric)?;
        let mut worst = 0.0f64;
        for n in build_window.sites() {
            for i in -2..=2 {
                worst = worst.max((general.coeff(n, i) - symmetric.coeff(n, i)).norm());
            }
        }
        push(
            "assembly-agreement",
            worst / symmetric.max_abs_coeff().max(1.0),
            1e-9,
        );
    }

    let [lower, upper] = params.partner_spans;
    let partner_window = match params.partner_window {
        Some(pair) => window_from(pair)?,
        None => Window::new(
            build_window.n_min() + lower as i64,
            build_window.n_max() - upper as i64,
        )?,
    };
    let (partner, residual) = find_commuting_partner(&l4, lower, upper, partner_window)?;
    push("partner-residual", residual, 1e-8);

    std::fs::write(out_dir.join("l4.json"), l4.to_json() + "\n")
        .map_err(|e| RunnerError::io(out_dir.join("l4.json"), e))?;
    std::fs::write(out_dir.join("partner.json"), partner.to_json() + "\n")
        .map_err(|e| RunnerError::io(out_dir.join("partner.json"), e))?;

    let complex_cells = |z: Option<Complex64>| match z {
        Some(z) => vec![sci(z.re), sci(z.im)],
        None => vec![String::new(), String::new()],
    };
    let mut rows = Vec::with_capacity(chain.state_count());
    for n in start..=last_state {
        let state = chain.state_at(n).expect("state in range");
        let xi = chain.xi_at(n);
        let mut row = vec![n.to_string()];
        row.extend(complex_cells(Some(state.gamma())));
        row.extend(complex_cells(Some(state.s())));
        row.extend(complex_cells(chain.c_at(n)));
        row.extend(complex_cells(chain.v_at(n)));
        row.extend(complex_cells(xi.map(|x| x.0)));
        row.extend(complex_cells(xi.map(|x| x.1)));
        row.extend(complex_cells(xi.map(|x| x.2)));
        row.push(sci(residual));
        rows.push(row);
    }
    write_csv(
        &out_dir.join("chain.csv"),
        &[
            "n",
            "re_gamma",
            "im_gamma",
            "re_s",
            "im_s",
            "re_c",
            "im_c",
            "re_v",
            "im_v",
            "re_xi11",
            "im_xi11",
            "re_xi12",
            "im_xi12",
            "re_xi21",
            "im_xi21",
            "partner_residual",
        ],
        rows,
    )?;

    let mut metrics = BTreeMap::new();
    metrics.insert("state_count".into(), json!(chain.state_count()));
    metrics.insert("start".into(), json!(start));
    metrics.insert("build_window".into(), window_metric(build_window));
    metrics.insert("partner_window".into(), window_metric(partner_window));
    metrics.insert("partner_residual".into(), json!(residual));
    metrics.insert(
        "commutator_norm".into(),
        json!(commutator_norm(&l4, &partner)?),
    );
    Ok((criteria, metrics))
}

// ---------------------------------------------------------------------------
// elltoda-run
// ---------------------------------------------------------------------------

const ELLTODA_CRITERIA: [&str; 5] = [
    "energy-drift",
    "flow-completion",
    "compat-c",
    "compat-v",
    "calibration-deviation",
];

/// Lattice-flow run: integrate, measure the energy drift, check the
/// trajectory against the discrete coefficient flow, and calibrate the
/// flow-to-energy-gradient constant.
fn elltoda_run(config: &RunConfig, out_dir: &Path) -> Result<Outcome, RunnerError> {
    config.check_tolerance_names(&ELLTODA_CRITERIA)?;
    let params: ElltodaParams = config.typed_params()?;
    for (name, value, bound) in [
        ("t_final", params.t_final, 0.0),
        ("dt", params.dt, 0.0),
        ("output_stride", params.output_stride as f64, 0.0),
        ("calibration_trials", params.calibration_trials as f64, 0.0),
    ] {
        if !(value.is_finite() && value > bound) {
            return Err(RunnerError::ConfigInvalid(format!(
                "params.{name}: must be positive, got {value}"
            )));
        }
    }
    let torus = config.torus.to_torus()?;
    let positions = pairs_to_complex(&params.positions);
    let velocities = params.resolved_velocities()?;

    let trajectory = integrate_flow(
        &torus,
        &positions,
        &velocities,
        params.t_final,
        params.dt,
        params.output_stride,
    )?;
    let h0 = trajectory
        .energies()
        .iter()
        .find(|h| h.re.is_finite() && h.im.is_finite())
        .copied()
        .unwrap_or(Complex64::new(f64::NAN, f64::NAN));
    let drift = trajectory.energy_drift();
    let drift_factor = config.tolerance("energy-drift", 1e-8);
    let drift_threshold = drift_factor * (1.0 + h0.norm());

    // Zero when the integration reached the horizon; the time still missing
    // when a singular configuration stopped it early.
    let missing_time = if trajectory.is_complete() {
        0.0
    } else {
        params.t_final - trajectory.aborted_at().unwrap_or(0.0)
    };

    let compat = compatibility_check(&torus, &trajectory)?;
    let calibration = hamilton_calibration(&torus, params.calibration_trials, config.seed)?;

    let criteria = vec![
        Criterion::residual("energy-drift", drift, drift_threshold),
        Criterion::residual(
            "flow-completion",
            missing_time,
            config.tolerance("flow-completion", f64::MIN_POSITIVE),
        ),
        Criterion::residual("compat-c", compat.r_c_max, config.tolerance("compat-c", 1e-5)),
        Criterion::residual("compat-v", compat.r_v_max, config.tolerance("compat-v", 1e-5)),
        Criterion::residual(
            "calibration-deviation",
            (calibration.constant - Complex64::new(1.0, 0.0)).norm(),
            config.tolerance("calibration-deviation", 1e-6),
        ),
    ];

    let mut rows = Vec::with_capacity(trajectory.sample_count() * trajectory.site_count());
    for (index, &t) in trajectory.times().iter().enumerate() {
        let xs = trajectory.positions_at(index);
        let vs = trajectory.velocities_at(index);
        let h = trajectory.energies()[index];
        for site in 0..trajectory.site_count() {
            let momentum_cells = if (vs[site] - 1.0).norm() < 1e-9
                || (vs[site] + 1.0).norm() < 1e-9
            {
                // The momentum chart degenerates at the stationary rates.
                vec![String::new(), String::new()]
            } else {
                let p = momentum_from_velocity(vs[site]);
                vec![sci(p.re), sci(p.im)]
            };
            let mut row = vec![
                sci(t),
                site.to_string(),
                sci(xs[site].re),
                sci(xs[site].im),
            ];
            row.extend(momentum_cells);
            row.push(sci(h.re));
            row.push(sci(h.im));
            rows.push(row);
        }
    }
    write_csv(
        &out_dir.join("trajectory.csv"),
        &["t", "site", "re_x", "im_x", "re_p", "im_p", "re_h", "im_h"],
        rows,
    )?;

    let mut metrics = BTreeMap::new();
    metrics.insert("energy_drift".into(), json!(drift));
    metrics.insert("calibration_constant".into(), complex_metric(calibration.constant));
    metrics.insert("calibration_spread".into(), json!(calibration.spread));
    metrics.insert("R_c_max".into(), json!(compat.r_c_max));
    metrics.insert("R_v_max".into(), json!(compat.r_v_max));
    metrics.insert("dt".into(), json!(params.dt));
    metrics.insert("T".into(), json!(params.t_final));
    metrics.insert("N".into(), json!(positions.len()));
    metrics.insert("H0".into(), complex_metric(h0));
    metrics.insert(
        "branch_crossings".into(),
        json!(trajectory.branch_crossings()),
    );
    metrics.insert("samples".into(), json!(trajectory.sample_count()));
    Ok((criteria, metrics))
}

// ---------------------------------------------------------------------------
// partner-solve
// ---------------------------------------------------------------------------

const PARTNER_CRITERIA: [&str; 1] = ["partner-residual"];

/// Stand-alone commuting-partner search for an operator loaded from JSON.
fn partner_solve(
    config: &RunConfig,
    config_dir: &Path,
    out_dir: &Path,
) -> Result<Outcome, RunnerError> {
    config.check_tolerance_names(&PARTNER_CRITERIA)?;
    let params: PartnerSolveParams = config.typed_params()?;
    config.torus.to_torus()?;
    let operator_path = params.operator.as_ref().ok_or_else(|| {
        RunnerError::ConfigInvalid("params.operator: path of the operator JSON is required".into())
    })?;
    let resolved = if operator_path.is_absolute() {
        operator_path.clone()
    } else {
        config_dir.join(operator_path)
    };
    let text =
        std::fs::read_to_string(&resolved).map_err(|e| RunnerError::io(&resolved, e))?;
    let operator = BandedOperator::from_json(&text)?;

    let [lower, upper] = params.spans.unwrap_or([3, 3]);
    let window = match params.window {
        Some(pair) => window_from(pair)?,
        None => Window::new(
            operator.window().n_min() + lower as i64,
            operator.window().n_max() - upper as i64,
        )?,
    };
    let (partner, residual) = find_commuting_partner(&operator, lower, upper, window)?;
    std::fs::write(out_dir.join("partner.json"), partner.to_json() + "\n")
        .map_err(|e| RunnerError::io(out_dir.join("partner.json"), e))?;

    let criteria = vec![Criterion::residual(
        "partner-residual",
        residual,
        config.tolerance("partner-residual", 1e-8),
    )];
    let mut metrics = BTreeMap::new();
    metrics.insert("partner_residual".into(), json!(residual));
    metrics.insert("spans".into(), json!([lower, upper]));
    metrics.insert("window".into(), window_metric(window));
    metrics.insert(
        "operator_window".into(),
        window_metric(operator.window()),
    );
    metrics.insert(
        "commutator_norm".into(),
        json!(commutator_norm(&operator, &partner)?),
    );
    Ok((criteria, metrics))
}
