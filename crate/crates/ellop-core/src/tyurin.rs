//! Discrete dressing chain of rank-2 divisor states on a torus, and the
//! lattice operators its coefficients assemble.
//!
//! A chain state couples a base point γₙ on the torus with a pair of residue
//! weights a¹ₙ ≠ a²ₙ and a fixed offset constant c; the marked points of the
//! state are γₙ¹ = γₙ + c and γₙ² = −γₙ + c.  One step of the chain, driven
//! by the next base point γₙ₊₁ and the next diagonal coefficient vₙ₊₁,
//! produces two transfer functions χₙ¹, χₙ² on the torus:
//!
//! * χₙ¹ has simple poles at the current marked points with residues ±g,
//!   g = a¹ₙa²ₙ/(a¹ₙ−a²ₙ), and vanishes at both next marked points;
//! * χₙ² has a unit pole at the distinguished point z = 0 and simple poles
//!   at the current marked points weighted by β₁ = a²ₙ/(a¹ₙ−a²ₙ) and
//!   β₂ = a¹ₙ/(a²ₙ−a¹ₙ), and evaluates the next weights through
//!   aˢₙ₊₁ = −χₙ²(γₙ₊₁ˢ).
//!
//! The step also yields the subdiagonal coefficient cₙ₊₁ = −χₙ¹(0) of the
//! second-order lattice operator L₂ = T + vₙ + cₙT⁻¹, and the Taylor
//! coefficients ξₙ = (ξₙ¹¹, ξₙ¹², ξₙ²¹) of the transfer functions at z = 0,
//! which enter the fourth-order operator
//!
//! ```text
//! L₄ = L₂² + cₙ(ξₙ₋₁¹¹ + ξₙ₋₂¹¹)·T⁻¹ + uₙ .
//! ```
//!
//! In the symmetric mode (c = 0) the chain is driven by the reduced data
//! (γₙ, sₙ) with sₙ = −(a¹ₙ+a²ₙ)/(a¹ₙ−a²ₙ); the coefficients collapse to
//! closed forms in the two-point kernel F — notably
//! 4cₙ₊₁ = (1 − sₙ²)·F(γₙ₊₁,γₙ)·F(γₙ₋₁,γₙ) — and L₄ reduces to
//! L₂² − ℘(γₙ) − ℘(γₙ₋₁).
//!
//! The headline property of the whole construction: the operator L₄ built
//! from arbitrary admissible chain data commutes with an order-six banded
//! partner, found numerically by
//! [`find_commuting_partner`](crate::operators::find_commuting_partner).

use num_complex::Complex64;

use crate::elliptic::{ComplexPoint, Torus};
use crate::error::TyurinError;
use crate::operators::{BandedOperator, Window};
use crate::sample::SamplePlan;

/// Relative gap below which the two residue weights count as coincident.
const WEIGHT_GAP_RELATIVE: f64 = 1e-12;

/// Largest |c| still treated as the symmetric (zero-offset) mode.
const SYMMETRIC_OFFSET_TOLERANCE: f64 = 1e-12;

/// Tolerance on the per-step internal consistency residuals: the zeros of
/// χₙ¹ at the next marked points and the agreement of the two routes to the
/// next weights.
pub const STEP_CONSISTENCY_TOLERANCE: f64 = 1e-9;

/// One state of the chain: base point, residue weights and offset constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TyurinStateRank2 {
    gamma: Complex64,
    a1: Complex64,
    a2: Complex64,
    c_const: Complex64,
}

fn guard_off_lattice(
    torus: &Torus,
    step: i64,
    what: &str,
    z: Complex64,
) -> Result<(), TyurinError> {
    let distance = torus.lattice_distance(z);
    if !distance.is_finite() || distance < torus.pole_guard() {
        return Err(TyurinError::DegenerateState {
            step,
            quantity: format!("{what} within {distance:.3e} of the lattice"),
        });
    }
    Ok(())
}

impl TyurinStateRank2 {
    /// Validates and builds a state: the weights must differ and the marked
    /// points γ ± c as well as their separation 2γ must stay off the lattice.
    pub fn new(
        torus: &Torus,
        gamma: ComplexPoint,
        a1: Complex64,
        a2: Complex64,
        c_const: Complex64,
    ) -> Result<Self, TyurinError> {
        Self::with_step_label(torus, 0, gamma.value(), a1, a2, c_const)
    }

    fn with_step_label(
        torus: &Torus,
        step: i64,
        gamma: Complex64,
        a1: Complex64,
        a2: Complex64,
        c_const: Complex64,
    ) -> Result<Self, TyurinError> {
        for (what, value) in [
            ("base point gamma", gamma),
            ("weight a1", a1),
            ("weight a2", a2),
            ("offset constant c", c_const),
        ] {
            if !value.re.is_finite() || !value.im.is_finite() {
                return Err(TyurinError::DegenerateState {
                    step,
                    quantity: format!("non-finite {what}"),
                });
            }
        }
        guard_off_lattice(torus, step, "marked point gamma + c", gamma + c_const)?;
        guard_off_lattice(torus, step, "marked point -gamma + c", -gamma + c_const)?;
        guard_off_lattice(torus, step, "marked-point separation 2*gamma", 2.0 * gamma)?;
        let scale = a1.norm().max(a2.norm()).max(1.0);
        if (a1 - a2).norm() < WEIGHT_GAP_RELATIVE * scale {
            return Err(TyurinError::DegenerateState {
                step,
                quantity: format!("coincident residue weights a1 = a2 = {a1}"),
            });
        }
        Ok(Self {
            gamma,
            a1,
            a2,
            c_const,
        })
    }

    /// The base point γₙ.
    pub fn gamma(&self) -> Complex64 {
        self.gamma
    }

    /// The first residue weight a¹ₙ.
    pub fn a1(&self) -> Complex64 {
        self.a1
    }

    /// The second residue weight a²ₙ.
    pub fn a2(&self) -> Complex64 {
        self.a2
    }

    /// The offset constant c shared by the whole chain.
    pub fn c_const(&self) -> Complex64 {
        self.c_const
    }

    /// The two marked points (γₙ + c, −γₙ + c).
    pub fn marked_points(&self) -> (Complex64, Complex64) {
        (self.gamma + self.c_const, -self.gamma + self.c_const)
    }

    /// The reduced velocity parameter sₙ = −(a¹ₙ+a²ₙ)/(a¹ₙ−a²ₙ).
    pub fn s(&self) -> Complex64 {
        -(self.a1 + self.a2) / (self.a1 - self.a2)
    }

    /// The common residue factor g = a¹ₙa²ₙ/(a¹ₙ−a²ₙ) of χₙ¹.
    pub fn weight_ratio(&self) -> Complex64 {
        self.a1 * self.a2 / (self.a1 - self.a2)
    }

    fn beta(&self) -> (Complex64, Complex64) {
        let gap = self.a1 - self.a2;
        (self.a2 / gap, -self.a1 / gap)
    }
}

/// Both transfer functions of the step from `state` to the base point
/// `gamma_next`, evaluated at `z`:
///
/// ```text
/// χₙ¹(z) = g·[ζ(z−γₙ−c) − ζ(z+γₙ−c) − ζ(γₙ₊₁−γₙ) + ζ(γₙ₊₁+γₙ)] ,
/// χₙ²(z) = −vₙ₊₁ + ζ(z) + β₁·[ζ(z−γₙ−c) + ζ(γₙ+c)] + β₂·[ζ(z+γₙ−c) + ζ(−γₙ+c)] .
/// ```
///
/// The constant in χₙ¹ is fixed by its zeros at both next marked points
/// ±γₙ₊₁ + c; its value at the distinguished point is χₙ¹(0) = −cₙ₊₁.
pub fn chi_functions(
    torus: &Torus,
    state: &TyurinStateRank2,
    gamma_next: Complex64,
    v_next: Complex64,
    z: Complex64,
) -> Result<(Complex64, Complex64), TyurinError> {
    let (m1, m2) = state.marked_points();
    let g = state.weight_ratio();
    let (beta1, beta2) = state.beta();
    let chi1 = g
        * (torus.zeta_w(z - m1)? - torus.zeta_w(z - m2)?
            - torus.zeta_w(gamma_next - state.gamma)?
            + torus.zeta_w(gamma_next + state.gamma)?);
    let chi2 = -v_next
        + torus.zeta_w(z)?
        + beta1 * (torus.zeta_w(z - m1)? + torus.zeta_w(m1)?)
        + beta2 * (torus.zeta_w(z - m2)? + torus.zeta_w(m2)?);
    Ok((chi1, chi2))
}

/// Internal consistency residuals of one chain step, both relative.
#[derive(Debug, Clone, Copy)]
pub struct StepCheck {
    /// max |χₙ¹(±γₙ₊₁ + c)| / max(|cₙ₊₁|, 1): the transfer function must
    /// vanish at both next marked points.
    pub chi1_zero_residual: f64,
    /// Disagreement between the closed-form next weights and the direct
    /// evaluations −χₙ²(γₙ₊₁ˢ), relative to the weight scale.
    pub weight_route_residual: f64,
}

/// Advances the chain one step; see [`step_general_checked`] for the same
/// step with its internal consistency residuals.
pub fn step_general(
    torus: &Torus,
    state: &TyurinStateRank2,
    gamma_next: Complex64,
    v_next: Complex64,
) -> Result<(Complex64, TyurinStateRank2), TyurinError> {
    step_general_checked(torus, state, gamma_next, v_next)
        .map(|(c_next, next, _)| (c_next, next))
}

/// Advances the chain one step: returns the subdiagonal coefficient cₙ₊₁,
/// the next state at `gamma_next`, and the step's consistency residuals.
///
/// The coefficient and the next weights are
///
/// ```text
/// cₙ₊₁  = g·[ζ(γₙ₊₁−γₙ) − ζ(γₙ₊₁+γₙ) + ζ(γₙ+c) + ζ(γₙ−c)] ,
/// a¹ₙ₊₁ = vₙ₊₁ − ζ(γₙ₊₁+c) − β₁·[ζ(γₙ₊₁−γₙ) + ζ(γₙ+c)] − β₂·[ζ(γₙ₊₁+γₙ) − ζ(γₙ−c)] ,
/// a²ₙ₊₁ = vₙ₊₁ + ζ(γₙ₊₁−c) + β₁·[ζ(γₙ₊₁+γₙ) − ζ(γₙ+c)] + β₂·[ζ(γₙ₊₁−γₙ) + ζ(γₙ−c)] ,
/// ```
///
/// which are the evaluations aˢₙ₊₁ = −χₙ²(γₙ₊₁ˢ) written out; the returned
/// residuals measure how well the implementation honors that identity and
/// the zeros of χₙ¹ (both should sit at rounding level, far below
/// [`STEP_CONSISTENCY_TOLERANCE`]).
pub fn step_general_checked(
    torus: &Torus,
    state: &TyurinStateRank2,
    gamma_next: Complex64,
    v_next: Complex64,
) -> Result<(Complex64, TyurinStateRank2, StepCheck), TyurinError> {
    let gamma = state.gamma;
    let c = state.c_const;
    guard_off_lattice(torus, 0, "base-point gap gamma_next - gamma", gamma_next - gamma)?;
    guard_off_lattice(torus, 0, "base-point sum gamma_next + gamma", gamma_next + gamma)?;

    let g = state.weight_ratio();
    let (beta1, beta2) = state.beta();
    let zeta_diff = torus.zeta_w(gamma_next - gamma)?;
    let zeta_sum = torus.zeta_w(gamma_next + gamma)?;
    let zeta_plus = torus.zeta_w(gamma + c)?;
    let zeta_minus = torus.zeta_w(gamma - c)?;

    let c_next = g * (zeta_diff - zeta_sum + zeta_plus + zeta_minus);
    let a1_next = v_next
        - torus.zeta_w(gamma_next + c)?
        - beta1 * (zeta_diff + zeta_plus)
        - beta2 * (zeta_sum - zeta_minus);
    let a2_next = v_next
        + torus.zeta_w(gamma_next - c)?
        + beta1 * (zeta_sum - zeta_plus)
        + beta2 * (zeta_diff + zeta_minus);

    let next = TyurinStateRank2::with_step_label(torus, 0, gamma_next, a1_next, a2_next, c)?;

    let (next_m1, next_m2) = next.marked_points();
    let (chi1_at_m1, chi2_at_m1) = chi_functions(torus, state, gamma_next, v_next, next_m1)?;
    let (chi1_at_m2, chi2_at_m2) = chi_functions(torus, state, gamma_next, v_next, next_m2)?;
    let chi_scale = c_next.norm().max(1.0);
    let weight_scale = a1_next.norm().max(a2_next.norm()).max(1.0);
    let check = StepCheck {
        chi1_zero_residual: chi1_at_m1.norm().max(chi1_at_m2.norm()) / chi_scale,
        weight_route_residual: (a1_next + chi2_at_m1)
            .norm()
            .max((a2_next + chi2_at_m2).norm())
            / weight_scale,
    };
    Ok((c_next, next, check))
}

/// Taylor coefficients (ξₙ¹¹, ξₙ¹², ξₙ²¹) of the transfer functions at the
/// distinguished point z = 0, defined by the expansions
///
/// ```text
/// χₙ¹(z) = −cₙ₊₁·(1 + ξₙ¹¹·z + ξₙ¹²·z² + …) ,
/// χₙ²(z) = ζ(z) − vₙ₊₁ + ξₙ²¹·z + … .
/// ```
///
/// The values come from the closed-form series of ζ(z−γ) + ζ(γ) — no
/// numerical differentiation is involved — so
/// ξₙ¹¹ = g·(℘(γₙ¹)−℘(γₙ²))/cₙ₊₁, ξₙ¹² = −g·(℘′(γₙ¹)−℘′(γₙ²))/(2cₙ₊₁) and
/// ξₙ²¹ = −β₁℘(γₙ¹) − β₂℘(γₙ²).  (The linear coefficient of χₙ² does not
/// depend on the diagonal shift vₙ₊₁, which only moves the constant term.)
pub fn xi_coefficients(
    torus: &Torus,
    state: &TyurinStateRank2,
    c_next: Complex64,
) -> Result<(Complex64, Complex64, Complex64), TyurinError> {
    let g = state.weight_ratio();
    if c_next.norm() < 1e-12 * g.norm().max(1.0) {
        return Err(TyurinError::DegenerateState {
            step: 0,
            quantity: format!("vanishing subdiagonal coefficient c_next = {c_next}"),
        });
    }
    let (m1, m2) = state.marked_points();
    let (beta1, beta2) = state.beta();
    let series1 = torus.zeta_shift_series(m1, 2)?;
    let series2 = torus.zeta_shift_series(m2, 2)?;
    let xi11 = -g * (series1[1] - series2[1]) / c_next;
    let xi12 = -g * (series1[2] - series2[2]) / c_next;
    let xi21 = beta1 * series1[1] + beta2 * series2[1];
    Ok((xi11, xi12, xi21))
}

/// The second-order lattice operator T + vₙ + cₙ·T⁻¹ on `window`.
pub fn build_l2(
    window: Window,
    mut v: impl FnMut(i64) -> Complex64,
    mut c: impl FnMut(i64) -> Complex64,
) -> BandedOperator {
    BandedOperator::from_fn(window, 1, 1, |n, i| match i {
        -1 => c(n),
        0 => v(n),
        1 => Complex64::new(1.0, 0.0),
        _ => unreachable!("spans (1, 1) admit offsets -1..=1 only"),
    })
}

/// Which assembly of the fourth-order operator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum L4Mode {
    /// L₂² + cₙ(ξₙ₋₁¹¹+ξₙ₋₂¹¹)T⁻¹ + uₙ with the diagonal correction
    /// uₙ = vₙξₙ₋₁¹¹ − vₙ₋₁ξₙ₋₂¹¹ + ξₙ₋₁¹² + ξₙ₋₂¹² − (ξₙ₋₂¹¹)² − (ξₙ₋₁²¹+ξₙ₋₂²¹).
    ///
    /// The band weights are forced by matching the polynomial parts (in
    /// k = 1/z) of the reduction of the doubled-eigenvalue action onto the
    /// neighboring eigenfunction rows; the T band receives no correction
    /// at all, and both corrections vanish in the symmetric mode.
    General,
    /// The zero-offset collapse L₂² − ℘(γₙ) − ℘(γₙ₋₁); requires a chain
    /// whose offset constant vanishes.
    Symmetric,
}

/// Reduced symmetric-mode chain data: base points γₙ and velocity
/// parameters sₙ on a contiguous index range, plus the seed base point one
/// index before the range that anchors the weight reconstruction.
#[derive(Debug, Clone)]
pub struct SymmetricParams {
    seed_gamma: Complex64,
    start: i64,
    gamma: Vec<Complex64>,
    s: Vec<Complex64>,
}

impl SymmetricParams {
    /// Validates the sequences: equal lengths, at least two entries, all
    /// values finite.  `gamma_seq[k]` and `s_seq[k]` belong to index
    /// `start + k`; `seed_gamma` is the base point at index `start − 1`.
    pub fn new(
        seed_gamma: ComplexPoint,
        start: i64,
        gamma_seq: Vec<Complex64>,
        s_seq: Vec<Complex64>,
    ) -> Result<Self, TyurinError> {
        if gamma_seq.len() != s_seq.len() {
            return Err(TyurinError::DegenerateState {
                step: start,
                quantity: format!(
                    "mismatched sequence lengths: {} base points vs {} velocity parameters",
                    gamma_seq.len(),
                    s_seq.len()
                ),
            });
        }
        if gamma_seq.len() < 2 {
            return Err(TyurinError::DegenerateState {
                step: start,
                quantity: "a chain needs at least two base points".to_string(),
            });
        }
        for (k, value) in gamma_seq.iter().chain(s_seq.iter()).enumerate() {
            if !value.re.is_finite() || !value.im.is_finite() {
                return Err(TyurinError::DegenerateState {
                    step: start + (k as i64 % gamma_seq.len() as i64),
                    quantity: format!("non-finite sequence entry {value}"),
                });
            }
        }
        Ok(Self {
            seed_gamma: seed_gamma.value(),
            start,
            gamma: gamma_seq,
            s: s_seq,
        })
    }

    /// Deterministically draws `count` admissible (γₙ, sₙ) pairs (plus the
    /// seed base point) on the torus; equal seeds reproduce equal data.
    ///
    /// The base points are taken from the low-discrepancy stream with
    /// clearance from the lattice, from the half-periods (so ℘′ stays away
    /// from its zeros), from each other in both the sum and the difference,
    /// and with the two-point kernel values between consecutive points kept
    /// in a moderate band so the assembled operators stay well scaled.  The
    /// velocity parameters avoid sₙ² = 1, which would collapse the
    /// subdiagonal coefficients.
    pub fn generate(
        torus: &Torus,
        start: i64,
        count: usize,
        seed: u64,
    ) -> Result<Self, TyurinError> {
        if count < 2 {
            return Err(TyurinError::DegenerateState {
                step: start,
                quantity: "a chain needs at least two base points".to_string(),
            });
        }
        let half_span = shortest_period(torus) / 2.0;
        // Keep every base point in an annulus around the lattice: the lower
        // radius bounds the pole proximity, the upper radius keeps the
        // Weierstrass derivative appreciable (so small base-point errors
        // leave a visible trace in the assembled operators) and structurally
        // avoids the half-periods, where that derivative vanishes.
        let clearance = 0.2 * half_span;
        let outer_radius = 0.5 * half_span;
        let half_periods = [
            torus.omega(),
            torus.omega_prime(),
            torus.omega() + torus.omega_prime(),
        ];
        let mut plan = SamplePlan::new(torus, seed.wrapping_mul(0x9e37_79b9).wrapping_add(17));
        let mut accepted: Vec<Complex64> = Vec::with_capacity(count + 1);
        let mut stalls = 0usize;
        while accepted.len() < count + 1 {
            let prev = accepted.last().copied();
            let candidate = plan.take_filtered(1, clearance, |z| {
                let in_annulus = torus.lattice_distance(z) <= outer_radius;
                let clear_half_periods = half_periods
                    .iter()
                    .all(|h| torus.lattice_distance(z - h) >= clearance);
                let clear_double = torus.lattice_distance(2.0 * z) >= clearance;
                let clear_prev = prev.is_none_or(|p| {
                    torus.lattice_distance(z - p) >= clearance
                        && torus.lattice_distance(z + p) >= clearance
                        && kernel_band_ok(torus, z, p)
                });
                in_annulus && clear_half_periods && clear_double && clear_prev
            });
            match candidate.first() {
                Some(z) => accepted.push(*z),
                None => {
                    // The draw stream is deterministic, so an incompatible
                    // predecessor can exhaust a whole candidate batch; drop
                    // it and continue from fresh draws.
                    stalls += 1;
                    if stalls > 64 {
                        return Err(TyurinError::DegenerateState {
                            step: start + accepted.len() as i64 - 1,
                            quantity: "admissible base-point draw exhausted its candidate budget"
                                .to_string(),
                        });
                    }
                    accepted.pop();
                }
            }
        }
        let seed_gamma = accepted[0];
        let gamma = accepted[1..].to_vec();

        let mut s = Vec::with_capacity(count);
        let mut index = 0u64;
        let phase = (seed as f64 * 0.618_033_988_749_894_9).fract();
        while s.len() < count {
            index += 1;
            if index > 10_000 {
                return Err(TyurinError::DegenerateState {
                    step: start,
                    quantity: "admissible velocity-parameter draw exhausted its candidate budget"
                        .to_string(),
                });
            }
            let t = index as f64;
            let re = -1.6 + 3.2 * (phase + 0.754_877_666_246_692_8 * t).fract();
            let im = -0.7 + 1.4 * (phase + 0.569_840_290_998_053_2 * t + 0.25).fract();
            let candidate = Complex64::new(re, im);
            let square_gap = (candidate * candidate - 1.0).norm();
            if square_gap >= 0.3 && candidate.norm() <= 1.8 {
                s.push(candidate);
            }
        }

        Ok(Self {
            seed_gamma,
            start,
            gamma,
            s,
        })
    }

    /// The seed base point at index `start − 1`.
    pub fn seed_gamma(&self) -> Complex64 {
        self.seed_gamma
    }

    /// First index carrying a (γ, s) pair.
    pub fn start(&self) -> i64 {
        self.start
    }

    /// Number of (γ, s) pairs.
    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    /// Whether the parameter set is empty (never true for validated data).
    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// The base point at chain index `n`, including the seed at `start − 1`.
    pub fn gamma_at(&self, n: i64) -> Option<Complex64> {
        if n == self.start - 1 {
            return Some(self.seed_gamma);
        }
        let offset = usize::try_from(n.checked_sub(self.start)?).ok()?;
        self.gamma.get(offset).copied()
    }

    /// The velocity parameter at chain index `n`.
    pub fn s_at(&self, n: i64) -> Option<Complex64> {
        let offset = usize::try_from(n.checked_sub(self.start)?).ok()?;
        self.s.get(offset).copied()
    }

    /// Shifts every base point (seed included) by `delta`; the velocity
    /// parameters are untouched.  Shifting by a full lattice period must
    /// leave every chain coefficient unchanged.
    pub fn translated(&self, delta: Complex64) -> Self {
        Self {
            seed_gamma: self.seed_gamma + delta,
            start: self.start,
            gamma: self.gamma.iter().map(|z| z + delta).collect(),
            s: self.s.clone(),
        }
    }
}

fn shortest_period(torus: &Torus) -> f64 {
    let a = 2.0 * torus.omega();
    let b = 2.0 * torus.omega_prime();
    a.norm()
        .min(b.norm())
        .min((a + b).norm())
        .min((a - b).norm())
}

fn kernel_band_ok(torus: &Torus, z: Complex64, prev: Complex64) -> bool {
    let forward = torus.f(z, prev);
    let backward = torus.f(prev, z);
    match (forward, backward) {
        (Ok(f), Ok(b)) => {
            let (nf, nb) = (f.norm(), b.norm());
            (0.3..=2.8).contains(&nf) && (0.3..=2.8).contains(&nb)
        }
        _ => false,
    }
}

/// Residuals of the symmetric-mode closed forms against the stepped chain,
/// one entry per step.
#[derive(Debug, Clone, Copy)]
pub struct SymmetricCheck {
    /// |4cₙ₊₁ − (1−sₙ²)F(γₙ₊₁,γₙ)F(γₙ₋₁,γₙ)| / max(4|cₙ₊₁|, 1).
    pub c_residual: f64,
    /// |sₙ₊₁ − input sₙ₊₁| where the left value is recovered from the
    /// stepped weights, relative to max(|sₙ₊₁|, 1).
    pub s_residual: f64,
}

/// A fully stepped chain: states on a contiguous index range together with
/// the coefficient sequences cₙ, vₙ, the expansion coefficients ξₙ and the
/// per-step consistency residuals.
#[derive(Debug, Clone)]
pub struct TyurinChain {
    torus: Torus,
    start: i64,
    states: Vec<TyurinStateRank2>,
    c_seq: Vec<Complex64>,
    v_seq: Vec<Complex64>,
    xi_seq: Vec<(Complex64, Complex64, Complex64)>,
    checks: Vec<StepCheck>,
    symmetric_checks: Vec<SymmetricCheck>,
}

impl TyurinChain {
    /// Steps the chain from explicit general-mode data: base points
    /// `gamma_seq[k]` at index `start + k`, diagonal coefficients
    /// `v_seq[k]` at index `start + 1 + k` (one fewer than the base
    /// points), initial weights `a0` and the offset constant.
    pub fn run_general(
        torus: Torus,
        start: i64,
        gamma_seq: &[Complex64],
        v_seq: &[Complex64],
        a0: (Complex64, Complex64),
        c_const: Complex64,
    ) -> Result<Self, TyurinError> {
        if gamma_seq.len() < 2 {
            return Err(TyurinError::DegenerateState {
                step: start,
                quantity: "a chain needs at least two base points".to_string(),
            });
        }
        if v_seq.len() + 1 != gamma_seq.len() {
            return Err(TyurinError::DegenerateState {
                step: start,
                quantity: format!(
                    "need one diagonal coefficient per step: {} base points require {}, got {}",
                    gamma_seq.len(),
                    gamma_seq.len() - 1,
                    v_seq.len()
                ),
            });
        }
        let mut states = Vec::with_capacity(gamma_seq.len());
        states.push(
            TyurinStateRank2::with_step_label(&torus, start, gamma_seq[0], a0.0, a0.1, c_const)
                .map_err(|e| relabel(e, start))?,
        );
        let mut c_seq = Vec::with_capacity(v_seq.len());
        let mut checks = Vec::with_capacity(v_seq.len());
        for (k, (&gamma_next, &v_next)) in gamma_seq[1..].iter().zip(v_seq).enumerate() {
            let step_index = start + k as i64 + 1;
            let (c_next, next, check) =
                step_general_checked(&torus, states.last().expect("nonempty"), gamma_next, v_next)
                    .map_err(|e| relabel(e, step_index))?;
            states.push(next);
            c_seq.push(c_next);
            checks.push(check);
        }
        let mut xi_seq = Vec::with_capacity(c_seq.len());
        for (k, state) in states[..states.len() - 1].iter().enumerate() {
            xi_seq.push(
                xi_coefficients(&torus, state, c_seq[k])
                    .map_err(|e| relabel(e, start + k as i64))?,
            );
        }
        Ok(Self {
            torus,
            start,
            states,
            c_seq,
            v_seq: v_seq.to_vec(),
            xi_seq,
            checks,
            symmetric_checks: Vec::new(),
        })
    }

    /// Steps the chain from reduced symmetric-mode data (offset constant
    /// zero): the initial weights are reconstructed from s at the first
    /// index through the convention a¹ − a² = F(seed γ, first γ), and every
    /// diagonal coefficient comes from
    /// 2vₙ₊₁ = sₙF(γₙ₊₁,γₙ) − sₙ₊₁F(γₙ,γₙ₊₁).  The returned chain carries
    /// the per-step residuals of the symmetric closed forms.
    pub fn run_symmetric(torus: Torus, params: &SymmetricParams) -> Result<Self, TyurinError> {
        let start = params.start;
        let count = params.len();
        let gamma_seq: Vec<Complex64> = (0..count)
            .map(|k| params.gamma_at(start + k as i64).expect("validated range"))
            .collect();
        let s_seq: Vec<Complex64> = (0..count)
            .map(|k| params.s_at(start + k as i64).expect("validated range"))
            .collect();

        let d0 = torus
            .f(params.seed_gamma(), gamma_seq[0])
            .map_err(|e| relabel(TyurinError::Elliptic(e), start))?;
        let a0 = (
            0.5 * d0 * (Complex64::new(1.0, 0.0) - s_seq[0]),
            -0.5 * d0 * (Complex64::new(1.0, 0.0) + s_seq[0]),
        );

        let mut v_seq = Vec::with_capacity(count - 1);
        for k in 1..count {
            let forward = torus
                .f(gamma_seq[k], gamma_seq[k - 1])
                .map_err(|e| relabel(TyurinError::Elliptic(e), start + k as i64))?;
            let backward = torus
                .f(gamma_seq[k - 1], gamma_seq[k])
                .map_err(|e| relabel(TyurinError::Elliptic(e), start + k as i64))?;
            v_seq.push(0.5 * (s_seq[k - 1] * forward - s_seq[k] * backward));
        }

        let mut chain = Self::run_general(
            torus,
            start,
            &gamma_seq,
            &v_seq,
            a0,
            Complex64::new(0.0, 0.0),
        )?;

        let mut symmetric_checks = Vec::with_capacity(count - 1);
        for k in 1..count {
            let n = start + k as i64;
            let prev_gamma = params.gamma_at(n - 2).expect("seed covers the range");
            let forward = chain.torus.f(gamma_seq[k], gamma_seq[k - 1])?;
            let anchored = chain.torus.f(prev_gamma, gamma_seq[k - 1])?;
            let s_prev = s_seq[k - 1];
            let closed_form = 0.25 * (Complex64::new(1.0, 0.0) - s_prev * s_prev)
                * forward
                * anchored;
            let c_step = chain.c_seq[k - 1];
            let c_residual =
                (c_step - closed_form).norm() / c_step.norm().max(1.0);
            let s_recovered = chain.states[k].s();
            let s_residual = (s_recovered - s_seq[k]).norm() / s_seq[k].norm().max(1.0);
            symmetric_checks.push(SymmetricCheck {
                c_residual,
                s_residual,
            });
        }
        chain.symmetric_checks = symmetric_checks;
        Ok(chain)
    }

    /// The torus the chain lives on.
    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    /// Index of the first state.
    pub fn start(&self) -> i64 {
        self.start
    }

    /// Number of states.
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    /// All states, indexed from [`start`](Self::start).
    pub fn states(&self) -> &[TyurinStateRank2] {
        &self.states
    }

    /// The state at chain index `n`.
    pub fn state_at(&self, n: i64) -> Option<&TyurinStateRank2> {
        let offset = usize::try_from(n.checked_sub(self.start)?).ok()?;
        self.states.get(offset)
    }

    /// The subdiagonal coefficient cₙ (defined from index start + 1 on).
    pub fn c_at(&self, n: i64) -> Option<Complex64> {
        let offset = usize::try_from(n.checked_sub(self.start + 1)?).ok()?;
        self.c_seq.get(offset).copied()
    }

    /// The diagonal coefficient vₙ (defined from index start + 1 on).
    pub fn v_at(&self, n: i64) -> Option<Complex64> {
        let offset = usize::try_from(n.checked_sub(self.start + 1)?).ok()?;
        self.v_seq.get(offset).copied()
    }

    /// The expansion coefficients ξₙ (defined up to the second-to-last
    /// state, since ξₙ involves cₙ₊₁).
    pub fn xi_at(&self, n: i64) -> Option<(Complex64, Complex64, Complex64)> {
        let offset = usize::try_from(n.checked_sub(self.start)?).ok()?;
        self.xi_seq.get(offset).copied()
    }

    /// Per-step consistency residuals, one per step.
    pub fn step_checks(&self) -> &[StepCheck] {
        &self.checks
    }

    /// Symmetric closed-form residuals (empty for general-mode chains).
    pub fn symmetric_checks(&self) -> &[SymmetricCheck] {
        &self.symmetric_checks
    }

    /// The index window on which both coefficient sequences cₙ, vₙ exist.
    pub fn coefficient_window(&self) -> Window {
        Window::new(self.start + 1, self.start + self.states.len() as i64 - 1)
            .expect("a validated chain has at least one step")
    }

    /// The widest window on which [`build_l4`](Self::build_l4) works.
    pub fn l4_window(&self) -> Option<Window> {
        Window::new(self.start + 2, self.start + self.states.len() as i64 - 2).ok()
    }

    /// Assembles T + vₙ + cₙT⁻¹ on `window`, which must sit inside
    /// [`coefficient_window`](Self::coefficient_window).
    pub fn build_l2(&self, window: Window) -> Result<BandedOperator, TyurinError> {
        if !self.coefficient_window().contains_window(window) {
            return Err(TyurinError::Operator(
                crate::error::OperatorError::WindowMismatch {
                    context: format!(
                        "window {window} leaves the coefficient range {}",
                        self.coefficient_window()
                    ),
                },
            ));
        }
        Ok(build_l2(
            window,
            |n| self.v_at(n).expect("window checked"),
            |n| self.c_at(n).expect("window checked"),
        ))
    }

    /// Assembles the fourth-order operator on `window` (which must sit
    /// inside [`l4_window`](Self::l4_window)): the square of L₂ plus the
    /// band corrections of the requested mode.
    pub fn build_l4(&self, window: Window, mode: L4Mode) -> Result<BandedOperator, TyurinError> {
        let allowed = self.l4_window().ok_or_else(|| {
            TyurinError::Operator(crate::error::OperatorError::WindowUnderflow {
                context: "chain too short for a fourth-order assembly".to_string(),
            })
        })?;
        if !allowed.contains_window(window) {
            return Err(TyurinError::Operator(
                crate::error::OperatorError::WindowMismatch {
                    context: format!("window {window} leaves the assembly range {allowed}"),
                },
            ));
        }
        if mode == L4Mode::Symmetric {
            let c_norm = self.states[0].c_const().norm();
            if c_norm > SYMMETRIC_OFFSET_TOLERANCE {
                return Err(TyurinError::DegenerateState {
                    step: self.start,
                    quantity: format!(
                        "symmetric assembly requires a vanishing offset constant, got |c| = {c_norm:.3e}"
                    ),
                });
            }
        }
        let l2 = self.build_l2(Window::new(window.n_min() - 1, window.n_max() + 1)?)?;
        let l2_squared = l2.compose(&l2)?;
        debug_assert_eq!(l2_squared.window(), window);

        match mode {
            L4Mode::General => {
                let correction = |n: i64| {
                    let (xi11_prev, xi12_prev, xi21_prev) =
                        self.xi_at(n - 1).expect("window checked");
                    let (xi11_prev2, xi12_prev2, xi21_prev2) =
                        self.xi_at(n - 2).expect("window checked");
                    let sub = xi11_prev + xi11_prev2;
                    let diagonal = self.v_at(n).expect("window checked") * xi11_prev
                        - self.v_at(n - 1).expect("window checked") * xi11_prev2
                        + xi12_prev
                        + xi12_prev2
                        - xi11_prev2 * xi11_prev2
                        - (xi21_prev + xi21_prev2);
                    (sub, diagonal)
                };
                Ok(BandedOperator::from_fn(window, 2, 2, |n, i| {
                    let base = l2_squared.coeff(n, i);
                    let (sub, diagonal) = correction(n);
                    match i {
                        -1 => base + self.c_at(n).expect("window checked") * sub,
                        0 => base + diagonal,
                        _ => base,
                    }
                }))
            }
            L4Mode::Symmetric => {
                let mut wp_error = None;
                let assembled = BandedOperator::from_fn(window, 2, 2, |n, i| {
                    let base = l2_squared.coeff(n, i);
                    if i != 0 {
                        return base;
                    }
                    let here = self.state_at(n).expect("window checked").gamma();
                    let before = self.state_at(n - 1).expect("window checked").gamma();
                    match (self.torus.wp(here), self.torus.wp(before)) {
                        (Ok(wp_here), Ok(wp_before)) => base - wp_here - wp_before,
                        (Err(e), _) | (_, Err(e)) => {
                            wp_error.get_or_insert(e);
                            base
                        }
                    }
                });
                match wp_error {
                    None => Ok(assembled),
                    Some(e) => Err(TyurinError::Elliptic(e)),
                }
            }
        }
    }
}

fn relabel(error: TyurinError, step: i64) -> TyurinError {
    match error {
        TyurinError::DegenerateState { quantity, .. } => {
            TyurinError::DegenerateState { step, quantity }
        }
        other => other,
    }
}
