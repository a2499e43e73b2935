//! Elliptic analog of the periodic Toda lattice.
//!
//! A chain of sites on a torus evolves by a second-order flow whose
//! right-hand side couples each site to its two neighbours through the
//! difference kernel `V` and is damped by the factor `ẋ² − 1`.  The module
//! provides the chain type with its momentum chart, the flow itself with a
//! classical fourth-order integrator, an energy function with branch
//! tracking along trajectories, a compatibility check that ties the flow to
//! the discrete marked-point dynamics, a polynomial Lax check for the
//! degenerate one-dimensional germ, and a calibration routine that measures
//! the constant relating the flow to the Hamiltonian gradient.

use std::f64::consts::TAU;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::elliptic::{complex_central_derivative, Torus};
use crate::error::{EllipticError, TodaError};
use crate::sample::SamplePlan;

/// Generator pair of the two-dimensional Kronecker sequence used for
/// deterministic velocity draws (inverse powers of the plastic number).
const VELOCITY_ALPHA_X: f64 = 0.754_877_666_246_692_8;
const VELOCITY_ALPHA_Y: f64 = 0.569_840_290_998_053_2;

/// Velocity `ẋ = -coth(p/2)` attached to a momentum coordinate.
pub fn velocity_from_momentum(p: Complex64) -> Complex64 {
    let half = p / 2.0;
    -half.cosh() / half.sinh()
}

/// Principal momentum coordinate `p = ln((ẋ - 1)/(ẋ + 1))` attached to a
/// velocity.  Undefined (infinite) at the stationary velocities `ẋ = ±1`.
pub fn momentum_from_velocity(xdot: Complex64) -> Complex64 {
    ((xdot - 1.0) / (xdot + 1.0)).ln()
}

/// Periodic chain of sites with conjugate momenta on a fixed torus.
///
/// Admissible data keeps every neighbour sum and difference, and every
/// doubled position, away from the period lattice, and every momentum away
/// from the zeros of `sinh(p/2)`; construction rejects anything else.
#[derive(Debug, Clone)]
pub struct EllTodaChain {
    torus: Torus,
    positions: Vec<Complex64>,
    momenta: Vec<Complex64>,
}

impl EllTodaChain {
    /// Builds a chain after validating the configuration.
    pub fn new(
        torus: &Torus,
        positions: Vec<Complex64>,
        momenta: Vec<Complex64>,
    ) -> Result<Self, TodaError> {
        if positions.len() < 2 {
            return Err(TodaError::InvalidChain {
                reason: "a periodic chain needs at least two sites".into(),
            });
        }
        if positions.len() != momenta.len() {
            return Err(TodaError::InvalidChain {
                reason: format!(
                    "{} positions but {} momenta",
                    positions.len(),
                    momenta.len()
                ),
            });
        }
        for (n, value) in positions.iter().chain(momenta.iter()).enumerate() {
            if !value.re.is_finite() || !value.im.is_finite() {
                return Err(TodaError::InvalidChain {
                    reason: format!("non-finite entry at flattened index {n}"),
                });
            }
        }
        check_positions(torus, &positions)?;
        for (n, p) in momenta.iter().enumerate() {
            if (p / 2.0).sinh().norm() < 1e-9 {
                return Err(TodaError::SingularConfiguration {
                    reason: format!("sinh(p/2) vanishes at site {n}"),
                });
            }
        }
        Ok(Self {
            torus: torus.clone(),
            positions,
            momenta,
        })
    }

    /// Builds a chain from positions and velocities, converting to momenta
    /// through the principal branch of the momentum chart.  The stationary
    /// velocities `ẋ = ±1` have no momentum coordinate and are rejected.
    pub fn from_positions_velocities(
        torus: &Torus,
        positions: Vec<Complex64>,
        velocities: Vec<Complex64>,
    ) -> Result<Self, TodaError> {
        for (n, v) in velocities.iter().enumerate() {
            if (v - 1.0).norm() < 1e-9 || (v + 1.0).norm() < 1e-9 {
                return Err(TodaError::SingularConfiguration {
                    reason: format!(
                        "velocity at site {n} sits at a stationary value ±1, \
                         outside the momentum chart"
                    ),
                });
            }
        }
        let momenta = velocities.iter().map(|&v| momentum_from_velocity(v)).collect();
        Self::new(torus, positions, momenta)
    }

    /// The torus the chain lives on.
    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    /// Number of sites.
    pub fn site_count(&self) -> usize {
        self.positions.len()
    }

    /// Site positions.
    pub fn positions(&self) -> &[Complex64] {
        &self.positions
    }

    /// Conjugate momenta.
    pub fn momenta(&self) -> &[Complex64] {
        &self.momenta
    }

    /// Velocities `ẋₙ = -coth(pₙ/2)` of all sites.
    pub fn velocities(&self) -> Vec<Complex64> {
        self.momenta.iter().map(|&p| velocity_from_momentum(p)).collect()
    }
}

/// Validates neighbour sums/differences and doubled positions of a periodic
/// configuration against the torus pole guard.
fn check_positions(torus: &Torus, positions: &[Complex64]) -> Result<(), TodaError> {
    let n_sites = positions.len();
    let guard = torus.pole_guard();
    for n in 0..n_sites {
        let next = (n + 1) % n_sites;
        if torus.lattice_distance(positions[n] - positions[next]) < guard {
            return Err(TodaError::SingularConfiguration {
                reason: format!("difference of sites {n} and {next} lies on the lattice"),
            });
        }
        if torus.lattice_distance(positions[n] + positions[next]) < guard {
            return Err(TodaError::SingularConfiguration {
                reason: format!("sum of sites {n} and {next} lies on the lattice"),
            });
        }
        if torus.lattice_distance(2.0 * positions[n]) < guard {
            return Err(TodaError::SingularConfiguration {
                reason: format!("doubled position of site {n} lies on the lattice"),
            });
        }
    }
    Ok(())
}

/// How the right-hand side couples a site to its neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborCoupling {
    /// The coupling implied by the energy function: each site interacts
    /// with both of its neighbours.
    Symmetric,
    /// A deliberately wrong control that uses the forward neighbour twice;
    /// kept so diagnostics can demonstrate they detect the mistake.
    ForwardDoubled,
}

/// Evaluates the difference kernel between two sites, naming the pair on
/// failure.
fn pair_coupling(
    torus: &Torus,
    positions: &[Complex64],
    here: usize,
    there: usize,
) -> Result<Complex64, TodaError> {
    torus
        .v(positions[here], positions[there])
        .map_err(|source| TodaError::SingularConfiguration {
            reason: format!("interaction of sites {here} and {there} is singular: {source}"),
        })
}

/// Right-hand side `ẍₙ = (ẋₙ² - 1)(V(xₙ, xₙ₊₁) + V(xₙ, xₙ₋₁))` over raw
/// position/velocity slices.  An exactly vanishing velocity factor
/// short-circuits the kernel evaluation, so the stationary flows `ẋ = ±1`
/// work even when a neighbour combination crosses the lattice.
fn flow_accelerations(
    torus: &Torus,
    positions: &[Complex64],
    velocities: &[Complex64],
    coupling: NeighborCoupling,
) -> Result<Vec<Complex64>, TodaError> {
    let n_sites = positions.len();
    let mut result = Vec::with_capacity(n_sites);
    for (n, &velocity) in velocities.iter().enumerate() {
        let factor = velocity * velocity - 1.0;
        if factor.norm() == 0.0 {
            result.push(Complex64::new(0.0, 0.0));
            continue;
        }
        let forward = pair_coupling(torus, positions, n, (n + 1) % n_sites)?;
        let backward = match coupling {
            NeighborCoupling::Symmetric => {
                pair_coupling(torus, positions, n, (n + n_sites - 1) % n_sites)?
            }
            NeighborCoupling::ForwardDoubled => forward,
        };
        result.push(factor * (forward + backward));
    }
    Ok(result)
}

/// Acceleration sequence of the chain flow at the chain's current state.
pub fn accelerations(chain: &EllTodaChain) -> Result<Vec<Complex64>, TodaError> {
    flow_accelerations(
        chain.torus(),
        chain.positions(),
        &chain.velocities(),
        NeighborCoupling::Symmetric,
    )
}

/// Argument of the coupling logarithm between two neighbouring sites.
fn coupling_log_argument(
    torus: &Torus,
    a: Complex64,
    b: Complex64,
) -> Result<Complex64, EllipticError> {
    Ok(torus.wp(a - b)? - torus.wp(a + b)?)
}

/// Energy `H = Σₙ [ln sinh⁻²(pₙ/2) + ln(℘(xₙ - xₙ₋₁) - ℘(xₙ + xₙ₋₁))]`
/// of the periodic chain, with principal logarithms.
pub fn hamiltonian(chain: &EllTodaChain) -> Result<Complex64, TodaError> {
    let n_sites = chain.site_count();
    let mut total = Complex64::new(0.0, 0.0);
    for n in 0..n_sites {
        let prev = (n + n_sites - 1) % n_sites;
        let sh = (chain.momenta[n] / 2.0).sinh();
        let kinetic_arg = (sh * sh).finv();
        if !kinetic_arg.re.is_finite() || !kinetic_arg.im.is_finite() {
            return Err(TodaError::SingularConfiguration {
                reason: format!("sinh(p/2) vanishes at site {n}"),
            });
        }
        let coupling_arg = coupling_log_argument(&chain.torus, chain.positions[n], chain.positions[prev])
            .map_err(|source| TodaError::SingularConfiguration {
                reason: format!("coupling of sites {prev} and {n} is singular: {source}"),
            })?;
        if coupling_arg.norm() < 1e-300 {
            return Err(TodaError::SingularConfiguration {
                reason: format!("coupling argument of sites {prev} and {n} vanishes"),
            });
        }
        total += kinetic_arg.ln() + coupling_arg.ln();
    }
    Ok(total)
}

/// Keeps the logarithm branches of consecutive energy samples continuous
/// and counts how often a branch adjustment was needed.
struct BranchTracker {
    previous: Option<Vec<Complex64>>,
    windings: Vec<i64>,
    crossings: usize,
}

impl BranchTracker {
    fn new() -> Self {
        Self {
            previous: None,
            windings: Vec::new(),
            crossings: 0,
        }
    }

    /// Sums the logarithms of the given arguments, continued from the
    /// previous sample.  `None` (an unevaluable state) yields NaN and
    /// leaves the continuation data untouched.
    fn push(&mut self, arguments: Option<Vec<Complex64>>) -> Complex64 {
        let Some(arguments) = arguments else {
            return Complex64::new(f64::NAN, f64::NAN);
        };
        if self.windings.len() != arguments.len() {
            self.windings = vec![0; arguments.len()];
        }
        let mut logs = Vec::with_capacity(arguments.len());
        for (k, argument) in arguments.iter().enumerate() {
            let mut log = argument.ln();
            if let Some(previous) = &self.previous {
                let winding = ((previous[k].im - log.im) / TAU).round();
                log += Complex64::new(0.0, TAU * winding);
                let winding = winding as i64;
                // A crossing is a change of the accumulated winding, not a
                // step that merely keeps an earlier adjustment in place.
                self.crossings += winding.abs_diff(self.windings[k]) as usize;
                self.windings[k] = winding;
            }
            logs.push(log);
        }
        let total = logs.iter().sum();
        self.previous = Some(logs);
        total
    }
}

/// Per-term energy log arguments in the velocity chart, or `None` when the
/// state is outside the energy's domain (stationary velocity, coupling
/// pole or zero).
fn energy_log_arguments(
    torus: &Torus,
    positions: &[Complex64],
    velocities: &[Complex64],
) -> Option<Vec<Complex64>> {
    let n_sites = positions.len();
    let mut arguments = Vec::with_capacity(2 * n_sites);
    for n in 0..n_sites {
        let prev = (n + n_sites - 1) % n_sites;
        let kinetic = velocities[n] * velocities[n] - 1.0;
        let coupling = coupling_log_argument(torus, positions[n], positions[prev]).ok()?;
        for argument in [kinetic, coupling] {
            if !argument.re.is_finite() || !argument.im.is_finite() || argument.norm() < 1e-300 {
                return None;
            }
        }
        arguments.push(kinetic);
        arguments.push(coupling);
    }
    Some(arguments)
}

/// Sampled solution of the chain flow.
///
/// Energy samples use the velocity chart `ln(ẋ² - 1)` for the kinetic
/// terms and are branch-continued from sample to sample; states outside
/// the energy's domain give NaN samples without stopping the flow.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    positions: Vec<Vec<Complex64>>,
    velocities: Vec<Vec<Complex64>>,
    energies: Vec<Complex64>,
    branch_crossings: usize,
    aborted_at: Option<f64>,
}

impl Trajectory {
    /// Number of stored samples.
    pub fn sample_count(&self) -> usize {
        self.times.len()
    }

    /// Number of chain sites.
    pub fn site_count(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    /// Sample times.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Positions of sample `index`.
    pub fn positions_at(&self, index: usize) -> &[Complex64] {
        &self.positions[index]
    }

    /// Velocities of sample `index`.
    pub fn velocities_at(&self, index: usize) -> &[Complex64] {
        &self.velocities[index]
    }

    /// Branch-continued energy samples (NaN where the energy is undefined).
    pub fn energies(&self) -> &[Complex64] {
        &self.energies
    }

    /// How many branch adjustments the energy continuation needed.
    pub fn branch_crossings(&self) -> usize {
        self.branch_crossings
    }

    /// Time of the last valid state when the flow hit a singular
    /// configuration, `None` for a run that completed.
    pub fn aborted_at(&self) -> Option<f64> {
        self.aborted_at
    }

    /// Whether the run reached its final time.
    pub fn is_complete(&self) -> bool {
        self.aborted_at.is_none()
    }

    /// Largest deviation of the finite energy samples from the first
    /// finite one; NaN when no sample is finite.
    pub fn energy_drift(&self) -> f64 {
        let mut base = None;
        let mut worst = 0.0_f64;
        for energy in &self.energies {
            if energy.re.is_finite() && energy.im.is_finite() {
                match base {
                    None => base = Some(*energy),
                    Some(first) => worst = worst.max((energy - first).norm()),
                }
            }
        }
        if base.is_none() {
            f64::NAN
        } else {
            worst
        }
    }
}

/// `base + scale · direction`, element-wise.
fn add_scaled(base: &[Complex64], direction: &[Complex64], scale: f64) -> Vec<Complex64> {
    base.iter()
        .zip(direction)
        .map(|(b, d)| b + scale * d)
        .collect()
}

/// One classical fourth-order step of the flow in the velocity chart.
fn rk4_step(
    torus: &Torus,
    positions: &[Complex64],
    velocities: &[Complex64],
    dt: f64,
    coupling: NeighborCoupling,
) -> Result<(Vec<Complex64>, Vec<Complex64>), TodaError> {
    let a1 = flow_accelerations(torus, positions, velocities, coupling)?;
    let x2 = add_scaled(positions, velocities, dt / 2.0);
    let v2 = add_scaled(velocities, &a1, dt / 2.0);
    let a2 = flow_accelerations(torus, &x2, &v2, coupling)?;
    let x3 = add_scaled(positions, &v2, dt / 2.0);
    let v3 = add_scaled(velocities, &a2, dt / 2.0);
    let a3 = flow_accelerations(torus, &x3, &v3, coupling)?;
    let x4 = add_scaled(positions, &v3, dt);
    let v4 = add_scaled(velocities, &a3, dt);
    let a4 = flow_accelerations(torus, &x4, &v4, coupling)?;
    let sixth = dt / 6.0;
    let next_x = positions
        .iter()
        .enumerate()
        .map(|(i, x)| x + sixth * (velocities[i] + 2.0 * (v2[i] + v3[i]) + v4[i]))
        .collect();
    let next_v = velocities
        .iter()
        .enumerate()
        .map(|(i, v)| v + sixth * (a1[i] + 2.0 * (a2[i] + a3[i]) + a4[i]))
        .collect();
    Ok((next_x, next_v))
}

/// Integrates the chain flow from the chain's current state.  Equivalent to
/// [`integrate_flow`] started at the chain's positions and velocities.
pub fn integrate(
    chain: &EllTodaChain,
    t_final: f64,
    dt: f64,
    output_stride: usize,
) -> Result<Trajectory, TodaError> {
    integrate_flow(
        chain.torus(),
        chain.positions(),
        &chain.velocities(),
        t_final,
        dt,
        output_stride,
    )
}

/// Integrates the flow in the velocity chart with the symmetric neighbour
/// coupling.  Accepts the stationary velocities `ẋ = ±1`, which the
/// momentum chart cannot represent.
pub fn integrate_flow(
    torus: &Torus,
    positions: &[Complex64],
    velocities: &[Complex64],
    t_final: f64,
    dt: f64,
    output_stride: usize,
) -> Result<Trajectory, TodaError> {
    integrate_flow_with_coupling(
        torus,
        positions,
        velocities,
        t_final,
        dt,
        output_stride,
        NeighborCoupling::Symmetric,
    )
}

/// Integrates the flow with an explicit neighbour coupling.
///
/// A fixed step `dt` is used up to `t_final`; every `output_stride`-th
/// state (plus the initial and final ones) is recorded.  A singular
/// configuration along the way stops the run: the trajectory then ends
/// with the last valid state and reports its time through
/// [`Trajectory::aborted_at`].
#[allow(clippy::too_many_arguments)]
pub fn integrate_flow_with_coupling(
    torus: &Torus,
    positions: &[Complex64],
    velocities: &[Complex64],
    t_final: f64,
    dt: f64,
    output_stride: usize,
    coupling: NeighborCoupling,
) -> Result<Trajectory, TodaError> {
    if positions.len() < 2 || positions.len() != velocities.len() {
        return Err(TodaError::InvalidChain {
            reason: "flow data needs matching position/velocity lists with at least two sites"
                .into(),
        });
    }
    if positions
        .iter()
        .chain(velocities.iter())
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(TodaError::InvalidChain {
            reason: "flow data contains a non-finite entry".into(),
        });
    }
    let steps_valid =
        t_final.is_finite() && t_final > 0.0 && dt.is_finite() && dt > 0.0 && dt <= t_final;
    if !steps_valid {
        return Err(TodaError::InvalidChain {
            reason: "integration needs 0 < dt <= t_final".into(),
        });
    }
    if output_stride == 0 {
        return Err(TodaError::InvalidChain {
            reason: "output stride must be positive".into(),
        });
    }
    let steps = ((t_final / dt).round() as usize).max(1);
    let mut x = positions.to_vec();
    let mut v = velocities.to_vec();
    // The branch continuation consumes the energy arguments of every step,
    // not only the recorded ones: between two widely spaced samples an
    // argument can wind arbitrarily far, and only step-level continuity
    // keeps the unwinding faithful.
    let mut tracker = BranchTracker::new();
    let mut trajectory = Trajectory {
        times: Vec::new(),
        positions: Vec::new(),
        velocities: Vec::new(),
        energies: Vec::new(),
        branch_crossings: 0,
        aborted_at: None,
    };
    let record = |trajectory: &mut Trajectory, t: f64, x: &[Complex64], v: &[Complex64], energy: Complex64| {
        trajectory.times.push(t);
        trajectory.positions.push(x.to_vec());
        trajectory.velocities.push(v.to_vec());
        trajectory.energies.push(energy);
    };
    let mut energy = tracker.push(energy_log_arguments(torus, &x, &v));
    record(&mut trajectory, 0.0, &x, &v, energy);
    let mut last_recorded_step = 0usize;
    for step in 1..=steps {
        match rk4_step(torus, &x, &v, dt, coupling) {
            Ok((next_x, next_v)) => {
                x = next_x;
                v = next_v;
            }
            Err(TodaError::SingularConfiguration { .. }) | Err(TodaError::Elliptic(_)) => {
                let last_valid = (step - 1) as f64 * dt;
                if last_recorded_step != step - 1 {
                    record(&mut trajectory, last_valid, &x, &v, energy);
                }
                trajectory.branch_crossings = tracker.crossings;
                trajectory.aborted_at = Some(last_valid);
                return Ok(trajectory);
            }
            Err(other) => return Err(other),
        }
        energy = tracker.push(energy_log_arguments(torus, &x, &v));
        if step % output_stride == 0 || step == steps {
            record(&mut trajectory, step as f64 * dt, &x, &v, energy);
            last_recorded_step = step;
        }
    }
    trajectory.branch_crossings = tracker.crossings;
    Ok(trajectory)
}

/// Result of checking a trajectory against the discrete marked-point flow.
#[derive(Debug, Clone, Copy)]
pub struct CompatibilityReport {
    /// Worst normalized residual of the subdiagonal-coefficient flow law.
    pub r_c_max: f64,
    /// Worst normalized residual of the diagonal-coefficient flow law.
    pub r_v_max: f64,
    /// Number of interior sample times the derivatives were checked at.
    pub interior_samples: usize,
    /// Sample spacing the derivatives were formed with.
    pub spacing: f64,
}

/// Sign convention of the reconstructed subdiagonal coefficient.
#[derive(Debug, Clone, Copy)]
enum SubdiagonalSign {
    /// The correct convention `4c = (1 - ẋ²)·F·F`.
    OneMinusSquare,
    /// The flipped control `4c = (ẋ² - 1)·F·F`, kept to show the diagonal
    /// flow law discriminates the sign.
    #[cfg_attr(not(test), allow(dead_code))]
    SquareMinusOne,
}

/// Evaluates the two-point kernel, naming the sites on failure.
fn kernel_between(
    torus: &Torus,
    positions: &[Complex64],
    from: usize,
    to: usize,
) -> Result<Complex64, TodaError> {
    torus
        .f(positions[from], positions[to])
        .map_err(|source| TodaError::SingularConfiguration {
            reason: format!("kernel between sites {from} and {to} is singular: {source}"),
        })
}

/// Checks that the sampled flow transports the reconstructed operator
/// coefficients the way the discrete marked-point dynamics demands.
///
/// From each sample the subdiagonal coefficients
/// `4cₙ₊₁ = (1 - ẋₙ²)·F(xₙ₊₁, xₙ)·F(xₙ₋₁, xₙ)` and diagonal coefficients
/// `2vₙ₊₁ = ẋₙ·F(xₙ₊₁, xₙ) - ẋₙ₊₁·F(xₙ, xₙ₊₁)` are built; their time
/// derivatives (five-point central differences at the sample spacing) are
/// compared against `ċₙ₊₁ = 2cₙ₊₁(vₙ₊₁ - vₙ)` and
/// `v̇ₙ₊₁ = 2(cₙ₊₂ - cₙ₊₁) + ℘(xₙ) - ℘(xₙ₊₁)`.  Residuals are normalized
/// by `max(1, |derivative|)`.
pub fn compatibility_check(
    torus: &Torus,
    trajectory: &Trajectory,
) -> Result<CompatibilityReport, TodaError> {
    compatibility_check_with(torus, trajectory, SubdiagonalSign::OneMinusSquare)
}

fn compatibility_check_with(
    torus: &Torus,
    trajectory: &Trajectory,
    sign: SubdiagonalSign,
) -> Result<CompatibilityReport, TodaError> {
    let n_sites = trajectory.site_count();
    if n_sites < 2 {
        return Err(TodaError::InvalidChain {
            reason: "compatibility check needs at least two sites".into(),
        });
    }
    let times = trajectory.times();
    let mut usable = times.len();
    if usable >= 3 {
        // A final sample that closes a partial stride is dropped so the
        // remaining grid is uniform.
        let spacing = times[1] - times[0];
        let last_gap = times[usable - 1] - times[usable - 2];
        if (last_gap - spacing).abs() > 1e-9 * spacing.max(1e-12) {
            usable -= 1;
        }
    }
    if usable < 5 {
        return Err(TodaError::InvalidChain {
            reason: "compatibility check needs at least five uniformly spaced samples".into(),
        });
    }
    let spacing = times[1] - times[0];
    if spacing <= 0.0 {
        return Err(TodaError::InvalidChain {
            reason: "samples are not in increasing time order".into(),
        });
    }
    for j in 1..usable {
        if ((times[j] - times[j - 1]) - spacing).abs() > 1e-9 * spacing {
            return Err(TodaError::InvalidChain {
                reason: "compatibility check needs uniformly spaced samples".into(),
            });
        }
    }

    let mut c_series = Vec::with_capacity(usable);
    let mut v_series = Vec::with_capacity(usable);
    let mut wp_series = Vec::with_capacity(usable);
    for j in 0..usable {
        let x = trajectory.positions_at(j);
        let xdot = trajectory.velocities_at(j);
        let mut c_row = Vec::with_capacity(n_sites);
        let mut v_row = Vec::with_capacity(n_sites);
        let mut wp_row = Vec::with_capacity(n_sites);
        for n in 0..n_sites {
            let next = (n + 1) % n_sites;
            let prev = (n + n_sites - 1) % n_sites;
            let f_next = kernel_between(torus, x, next, n)?;
            let f_prev = kernel_between(torus, x, prev, n)?;
            let f_reversed = kernel_between(torus, x, n, next)?;
            let square = xdot[n] * xdot[n];
            let factor = match sign {
                SubdiagonalSign::OneMinusSquare => 1.0 - square,
                SubdiagonalSign::SquareMinusOne => square - 1.0,
            };
            c_row.push(0.25 * factor * f_next * f_prev);
            v_row.push(0.5 * (xdot[n] * f_next - xdot[next] * f_reversed));
            wp_row.push(torus.wp(x[n]).map_err(|source| {
                TodaError::SingularConfiguration {
                    reason: format!("site {n} sits on the lattice: {source}"),
                }
            })?);
        }
        c_series.push(c_row);
        v_series.push(v_row);
        wp_series.push(wp_row);
    }

    let stencil = |series: &Vec<Vec<Complex64>>, j: usize, n: usize| {
        (series[j - 2][n] - 8.0 * series[j - 1][n] + 8.0 * series[j + 1][n] - series[j + 2][n])
            / (12.0 * spacing)
    };
    let mut r_c_max = 0.0_f64;
    let mut r_v_max = 0.0_f64;
    for j in 2..usable - 2 {
        for n in 0..n_sites {
            let next = (n + 1) % n_sites;
            let prev = (n + n_sites - 1) % n_sites;
            let c_dot = stencil(&c_series, j, n);
            let v_dot = stencil(&v_series, j, n);
            let c_residual = c_dot
                - 2.0 * c_series[j][n] * (v_series[j][n] - v_series[j][prev]);
            let v_residual = v_dot
                - 2.0 * (c_series[j][next] - c_series[j][n])
                - wp_series[j][n]
                + wp_series[j][next];
            r_c_max = r_c_max.max(c_residual.norm() / c_dot.norm().max(1.0));
            r_v_max = r_v_max.max(v_residual.norm() / v_dot.norm().max(1.0));
        }
    }
    Ok(CompatibilityReport {
        r_c_max,
        r_v_max,
        interior_samples: usable - 4,
        spacing,
    })
}

/// Degenerate one-dimensional germ of the chain: periodic subdiagonal and
/// diagonal coefficient sequences with every subdiagonal entry nonzero.
#[derive(Debug, Clone)]
pub struct TodaGermState {
    c0: Vec<Complex64>,
    v0: Vec<Complex64>,
}

impl TodaGermState {
    /// Builds a germ state after validating the coefficient sequences.
    pub fn new(c0: Vec<Complex64>, v0: Vec<Complex64>) -> Result<Self, TodaError> {
        if c0.len() < 2 || c0.len() != v0.len() {
            return Err(TodaError::InvalidChain {
                reason: "germ data needs matching coefficient lists with at least two sites"
                    .into(),
            });
        }
        for (n, value) in c0.iter().chain(v0.iter()).enumerate() {
            if !value.re.is_finite() || !value.im.is_finite() {
                return Err(TodaError::InvalidChain {
                    reason: format!("non-finite germ entry at flattened index {n}"),
                });
            }
        }
        if let Some(n) = c0.iter().position(|c| c.norm() == 0.0) {
            return Err(TodaError::InvalidChain {
                reason: format!("subdiagonal germ coefficient {n} vanishes"),
            });
        }
        Ok(Self { c0, v0 })
    }

    /// Number of sites.
    pub fn site_count(&self) -> usize {
        self.c0.len()
    }

    /// Subdiagonal coefficients.
    pub fn c0(&self) -> &[Complex64] {
        &self.c0
    }

    /// Diagonal coefficients.
    pub fn v0(&self) -> &[Complex64] {
        &self.v0
    }
}

/// Coefficient derivatives `ċₙ = 2cₙ(vₙ - vₙ₋₁)` and
/// `v̇ₙ = 2(cₙ₊₁ - cₙ)` of the one-dimensional periodic Toda flow.
pub fn toda_consistent_derivatives(germ: &TodaGermState) -> (Vec<Complex64>, Vec<Complex64>) {
    let n_sites = germ.site_count();
    let c_dot = (0..n_sites)
        .map(|n| 2.0 * germ.c0[n] * (germ.v0[n] - germ.v0[(n + n_sites - 1) % n_sites]))
        .collect();
    let v_dot = (0..n_sites)
        .map(|n| 2.0 * (germ.c0[(n + 1) % n_sites] - germ.c0[n]))
        .collect();
    (c_dot, v_dot)
}

/// Residual of the polynomial Lax identity of the one-dimensional germ.
///
/// With transfer matrix `X(k) = [[0, 1], [-cₙ₊₁, k - vₙ₊₁]]` and generator
/// `M(k) = [[-k + 2vₙ, 2], [-2cₙ₊₁, k]]`, the identity
/// `Ẋₙ = Mₙ₊₁ Xₙ - Xₙ Mₙ` must hold coefficient-wise in the spectral
/// variable when the coefficient derivatives follow the one-dimensional
/// Toda flow.  Returns the largest entry of any power's mismatch over all
/// sites; `c_dot`/`v_dot` are indexed like the germ's own sequences.
pub fn toda1d_lax_residual(
    germ: &TodaGermState,
    c_dot: &[Complex64],
    v_dot: &[Complex64],
) -> Result<f64, TodaError> {
    let n_sites = germ.site_count();
    if c_dot.len() != n_sites || v_dot.len() != n_sites {
        return Err(TodaError::InvalidChain {
            reason: "derivative lists must match the germ's site count".into(),
        });
    }
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let two = Complex64::new(2.0, 0.0);
    let transfer_constant = |n: usize| {
        let next = (n + 1) % n_sites;
        Matrix2::new(zero, one, -germ.c0[next], -germ.v0[next])
    };
    let transfer_linear = Matrix2::new(zero, zero, zero, one);
    let generator_constant = |n: usize| {
        let next = (n + 1) % n_sites;
        Matrix2::new(two * germ.v0[n], two, -two * germ.c0[next], zero)
    };
    let generator_linear = Matrix2::new(-one, zero, zero, one);
    let mut worst = 0.0_f64;
    for n in 0..n_sites {
        let next = (n + 1) % n_sites;
        let x0 = transfer_constant(n);
        let m_here = generator_constant(n);
        let m_next = generator_constant(next);
        let derivative = Matrix2::new(zero, zero, -c_dot[next], -v_dot[next]);
        let degree0 = m_next * x0 - x0 * m_here - derivative;
        let degree1 = m_next * transfer_linear + generator_linear * x0
            - x0 * generator_linear
            - transfer_linear * m_here;
        let degree2 = generator_linear * transfer_linear - transfer_linear * generator_linear;
        for matrix in [degree0, degree1, degree2] {
            for entry in matrix.iter() {
                worst = worst.max(entry.norm());
            }
        }
    }
    Ok(worst)
}

/// Result of measuring the constant that relates the chain flow to the
/// energy gradient.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationReport {
    /// Measured proportionality constant.
    pub constant: Complex64,
    /// Largest deviation of an individual measurement from the constant.
    pub spread: f64,
    /// Number of site measurements the constant was averaged over.
    pub samples: usize,
}

/// Fourth-order derivative of a complex map by step-halved central
/// differences.
fn refined_derivative(
    mut f: impl FnMut(Complex64) -> Result<Complex64, EllipticError>,
    z: Complex64,
) -> Result<Complex64, EllipticError> {
    let step = 2e-4;
    let coarse = complex_central_derivative(&mut f, z, step)?;
    let fine = complex_central_derivative(&mut f, z, step / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Gradient of the coupling part of the energy with respect to one site,
/// formed from finite differences of the coupling log arguments.
fn energy_site_gradient(
    torus: &Torus,
    positions: &[Complex64],
    site: usize,
) -> Result<Complex64, TodaError> {
    let n_sites = positions.len();
    let prev = (site + n_sites - 1) % n_sites;
    let next = (site + 1) % n_sites;
    let here_value = coupling_log_argument(torus, positions[site], positions[prev])?;
    let here_slope = refined_derivative(
        |w| coupling_log_argument(torus, w, positions[prev]),
        positions[site],
    )?;
    let next_value = coupling_log_argument(torus, positions[next], positions[site])?;
    let next_slope = refined_derivative(
        |w| coupling_log_argument(torus, positions[next], w),
        positions[site],
    )?;
    Ok(here_slope / here_value + next_slope / next_value)
}

/// Measures the constant `κ` in
/// `ẍₙ = κ · ½(ẋₙ² - 1)·(-∂H/∂xₙ)` over `trials` deterministic random
/// four-site states, using finite-difference gradients of the energy as
/// the reference.  The constant is reported together with the spread of
/// the individual measurements instead of being hard-coded anywhere.
pub fn hamilton_calibration(
    torus: &Torus,
    trials: usize,
    seed: u64,
) -> Result<CalibrationReport, TodaError> {
    const SITES: usize = 4;
    if trials == 0 {
        return Err(TodaError::InvalidChain {
            reason: "calibration needs at least one trial".into(),
        });
    }
    let shortest = (2.0 * torus.omega())
        .norm()
        .min((2.0 * torus.omega_prime()).norm());
    let clearance = 0.15 * shortest / 2.0;
    let mut plan = SamplePlan::new(torus, seed.wrapping_mul(0x9e37_79b9).wrapping_add(101));
    let mut velocity_index = seed.wrapping_mul(31).wrapping_add(7);
    let mut next_velocity = || {
        for _ in 0..1000 {
            velocity_index = velocity_index.wrapping_add(1);
            let t = velocity_index as f64;
            let a = (0.5 + VELOCITY_ALPHA_X * t).fract();
            let b = (0.5 + VELOCITY_ALPHA_Y * t).fract();
            let candidate = Complex64::new(-1.9 + 3.8 * a, -1.4 + 2.8 * b);
            let square = candidate * candidate;
            if candidate.norm() <= 2.5 && (square - 1.0).norm() >= 0.3 {
                return Some(candidate);
            }
        }
        None
    };

    let mut measurements = Vec::with_capacity(trials * SITES);
    let mut attempts = 0usize;
    let mut completed = 0usize;
    while completed < trials {
        attempts += 1;
        if attempts > 100 * trials {
            return Err(TodaError::InvalidChain {
                reason: "calibration state sampling exhausted its attempt budget".into(),
            });
        }
        let mut positions: Vec<Complex64> = Vec::with_capacity(SITES);
        let mut state_ok = true;
        for k in 0..SITES {
            let required: Vec<Complex64> = match k {
                0 => Vec::new(),
                3 => vec![positions[2], positions[0]],
                _ => vec![positions[k - 1]],
            };
            let accepted = plan.take_filtered(1, clearance, |z| {
                torus.lattice_distance(2.0 * z) >= clearance
                    && required.iter().all(|&w| {
                        torus.lattice_distance(z - w) >= clearance
                            && torus.lattice_distance(z + w) >= clearance
                    })
            });
            match accepted.first() {
                Some(&z) => positions.push(z),
                None => {
                    state_ok = false;
                    break;
                }
            }
        }
        if !state_ok {
            continue;
        }
        let Some(velocities) = (0..SITES)
            .map(|_| next_velocity())
            .collect::<Option<Vec<_>>>()
        else {
            continue;
        };
        let Ok(reference) =
            flow_accelerations(torus, &positions, &velocities, NeighborCoupling::Symmetric)
        else {
            continue;
        };
        if reference.iter().any(|a| a.norm() < 0.02) {
            continue;
        }
        let mut state_measurements = Vec::with_capacity(SITES);
        let mut gradients_ok = true;
        for n in 0..SITES {
            let Ok(gradient) = energy_site_gradient(torus, &positions, n) else {
                gradients_ok = false;
                break;
            };
            let denominator =
                0.5 * (velocities[n] * velocities[n] - 1.0) * (-gradient);
            if denominator.norm() < 5e-3 {
                gradients_ok = false;
                break;
            }
            state_measurements.push(reference[n] / denominator);
        }
        if !gradients_ok {
            continue;
        }
        measurements.extend(state_measurements);
        completed += 1;
    }

    let count = measurements.len();
    let mean = measurements.iter().sum::<Complex64>() / count as f64;
    let spread = measurements
        .iter()
        .map(|k| (k - mean).norm())
        .fold(0.0_f64, f64::max);
    Ok(CalibrationReport {
        constant: mean,
        spread,
        samples: count,
    })
}
