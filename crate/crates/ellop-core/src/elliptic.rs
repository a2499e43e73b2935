//! Doubly periodic special functions on a complex torus.
//!
//! A torus is fixed by two half-periods `omega`, `omega_prime` whose ratio
//! τ = ω′/ω lies in the upper half-plane; the period lattice is
//! Λ = 2ωℤ + 2ω′ℤ.  The module evaluates the classical lattice functions
//!
//! * `wp`        — ℘(z), even, double pole on Λ, ℘(z) = z⁻² + O(z²),
//! * `wp_prime`  — ℘′(z), odd, triple pole on Λ,
//! * `zeta_w`    — ζ(z), odd, simple pole on Λ, ζ′ = −℘,
//! * `sigma_w`   — σ(z), entire, odd, simple zeros on Λ, σ′/σ = ζ,
//!
//! together with the two-point combinations
//!
//! * `f(u,v)` = ζ(u+v) − ζ(u−v) − 2ζ(v) = ℘′(v)/(℘(v) − ℘(u)),
//! * `v(u,v)` = ζ(u+v) + ζ(u−v) − ζ(2u),
//!
//! used as interaction kernels by the lattice-flow and dressing-chain
//! modules.
//!
//! # Evaluation strategy
//!
//! All functions are computed from the first Jacobi theta function and its
//! first three derivatives at the reduced argument v = πz/(2ω), using the
//! rapidly convergent series in the nome q = exp(iπτ).  Arguments are first
//! reduced to the fundamental parallelogram centred at the origin, so the
//! series terms decay at least like |q|^(n²-1/4); values at the original
//! argument are recovered through the exact quasi-periodicity factors.
//! Derived lattice constants (g₂, g₃, η = ζ(ω), η′ = ζ(ω′), q) are computed
//! once at construction and cached.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::EllipticError;

/// A validated complex evaluation point: both coordinates finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoint {
    re: f64,
    im: f64,
}

impl ComplexPoint {
    /// Builds a point, rejecting NaN or infinite coordinates.
    pub fn new(re: f64, im: f64) -> Result<Self, EllipticError> {
        if !re.is_finite() || !im.is_finite() {
            return Err(EllipticError::NonFinite {
                what: format!("complex point ({re}, {im})"),
            });
        }
        Ok(Self { re, im })
    }

    /// The underlying complex value.
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

impl From<ComplexPoint> for Complex64 {
    fn from(p: ComplexPoint) -> Self {
        p.value()
    }
}

impl TryFrom<Complex64> for ComplexPoint {
    type Error = EllipticError;

    fn try_from(z: Complex64) -> Result<Self, Self::Error> {
        Self::new(z.re, z.im)
    }
}

/// Taylor data of the shifted combination ζ(z−γ) + ζ(γ) around z = 0.
///
/// The coefficients follow from ζ′ = −℘ and the parity of ℘:
/// c₀ = 0, c₁ = −℘(γ), c₂ = ℘′(γ)/2, c₃ = −℘″(γ)/6 with ℘″ = 6℘² − g₂/2.
pub const ZETA_SHIFT_MAX_ORDER: usize = 3;

/// Residuals of the two logarithmic-derivative identities of `f`, measured
/// by fourth-order finite differences.  See
/// [`Torus::log_f_derivative_identities`].
#[derive(Debug, Clone, Copy)]
pub struct LogFDerivativeResiduals {
    /// |∂ᵤ ln f(u,v) + f(v,u)|
    pub residual_u: f64,
    /// |∂ᵥ ln f(u,v) + f(u,v) − 2ζ(2v) + 4ζ(v)|
    pub residual_v: f64,
}

/// Values of the first theta function and its v-derivatives at one argument.
#[derive(Debug, Clone, Copy)]
struct ThetaSuite {
    t: Complex64,
    dt: Complex64,
    ddt: Complex64,
    dddt: Complex64,
}

/// Maximum number of series terms before evaluation is abandoned.  With the
/// nome bound enforced at construction the series always converges far
/// earlier; the cap only guards against pathological inputs.
const MAX_THETA_TERMS: usize = 160;

/// Largest admissible |q|.  Beyond this the theta series needs impractically
/// many terms for full double precision, so construction is refused.
const MAX_NOME_ABS: f64 = 0.95;

/// A torus Λ = 2ωℤ + 2ω′ℤ with cached lattice constants.
#[derive(Debug, Clone)]
pub struct Torus {
    omega: Complex64,
    omega_prime: Complex64,
    tau: Complex64,
    /// iπτ, the exact logarithm used for nome powers.
    log_nome: Complex64,
    nome: Complex64,
    eta: Complex64,
    eta_prime: Complex64,
    g2: Complex64,
    g3: Complex64,
    /// Distance below which pole-adjacent evaluations are refused.
    pole_guard: f64,
    /// Cached θ₁′(0).
    theta1_prime0: Complex64,
    /// Real 2×2 inverse of the period matrix, for lattice coordinates.
    inv_period: [f64; 4],
}

impl Torus {
    /// Builds the torus for half-periods (ω, ω′).
    ///
    /// Fails if ω = 0, if Im(ω′/ω) ≤ 0, if the nome is too large for the
    /// series evaluation, or if the computed quasi-periods do not satisfy
    /// the Legendre relation ηω′ − η′ω = iπ/2 to the expected accuracy
    /// (which would indicate an invalid parameter regime).
    pub fn new(omega: Complex64, omega_prime: Complex64) -> Result<Self, EllipticError> {
        if !omega.is_finite() || !omega_prime.is_finite() {
            return Err(EllipticError::NonFinite {
                what: "half-periods".to_string(),
            });
        }
        if omega.norm() == 0.0 {
            return Err(EllipticError::InvalidTorus {
                reason: "omega must be nonzero".to_string(),
            });
        }
        let tau = omega_prime / omega;
        if tau.im <= 0.0 {
            return Err(EllipticError::InvalidTorus {
                reason: format!("period ratio must have positive imaginary part, got {tau}"),
            });
        }
        let log_nome = Complex64::i() * PI * tau;
        let nome = log_nome.exp();
        if nome.norm() >= MAX_NOME_ABS {
            return Err(EllipticError::InvalidTorus {
                reason: format!(
                    "nome modulus {:.6} too close to 1 for convergent evaluation",
                    nome.norm()
                ),
            });
        }

        // Inverse of the real period matrix [2ω 2ω′] acting on (x, y).
        let (a, b) = (2.0 * omega.re, 2.0 * omega.im);
        let (c, d) = (2.0 * omega_prime.re, 2.0 * omega_prime.im);
        let det = a * d - b * c;
        if det.abs() < f64::MIN_POSITIVE.sqrt() {
            return Err(EllipticError::InvalidTorus {
                reason: "periods are collinear".to_string(),
            });
        }
        let inv_period = [d / det, -c / det, -b / det, a / det];

        let mut torus = Self {
            omega,
            omega_prime,
            tau,
            log_nome,
            nome,
            eta: Complex64::new(0.0, 0.0),
            eta_prime: Complex64::new(0.0, 0.0),
            g2: Complex64::new(0.0, 0.0),
            g3: Complex64::new(0.0, 0.0),
            pole_guard: 1e-6 * omega.norm(),
            theta1_prime0: Complex64::new(0.0, 0.0),
            inv_period,
        };

        // η = ζ(ω) from the theta derivatives at the origin.
        let origin = torus.theta_suite(Complex64::new(0.0, 0.0));
        if origin.dt.norm() == 0.0 {
            return Err(EllipticError::InvalidTorus {
                reason: "theta derivative vanished at the origin".to_string(),
            });
        }
        torus.theta1_prime0 = origin.dt;
        torus.eta = -(PI * PI) / (12.0 * omega) * (origin.dddt / origin.dt);

        // Lattice invariants from the theta constants.
        let (g2, g3) = torus.invariants_from_theta_nulls();
        torus.g2 = g2;
        torus.g3 = g3;

        // η′ = ζ(ω′) evaluated without argument reduction: the reducing
        // path would need η′ itself for its lattice-shift correction, and
        // the series still converges at the half-period.
        torus.eta_prime = torus.zeta_unreduced(omega_prime);
        let legendre = torus.eta * omega_prime - torus.eta_prime * omega
            - Complex64::new(0.0, PI / 2.0);
        let legendre_scale = 1.0 + torus.eta.norm() * omega_prime.norm();
        if legendre.norm() >= 1e-10 * legendre_scale {
            return Err(EllipticError::InvalidTorus {
                reason: format!(
                    "quasi-period consistency failure: |ηω′ − η′ω − iπ/2| = {:.3e}",
                    legendre.norm()
                ),
            });
        }

        Ok(torus)
    }

    /// Half-period ω.
    pub fn omega(&self) -> Complex64 {
        self.omega
    }

    /// Half-period ω′.
    pub fn omega_prime(&self) -> Complex64 {
        self.omega_prime
    }

    /// Period ratio τ = ω′/ω.
    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    /// Nome q = exp(iπτ), |q| < 1.
    pub fn nome(&self) -> Complex64 {
        self.nome
    }

    /// Lattice invariant g₂ of ℘′² = 4℘³ − g₂℘ − g₃.
    pub fn g2(&self) -> Complex64 {
        self.g2
    }

    /// Lattice invariant g₃ of ℘′² = 4℘³ − g₂℘ − g₃.
    pub fn g3(&self) -> Complex64 {
        self.g3
    }

    /// Quasi-period η = ζ(ω).
    pub fn eta(&self) -> Complex64 {
        self.eta
    }

    /// Quasi-period η′ = ζ(ω′).
    pub fn eta_prime(&self) -> Complex64 {
        self.eta_prime
    }

    /// Current pole-guard distance (default 10⁻⁶·|ω|).
    pub fn pole_guard(&self) -> f64 {
        self.pole_guard
    }

    /// Overrides the pole-guard distance.
    pub fn set_pole_guard(&mut self, guard: f64) {
        self.pole_guard = guard;
    }

    /// Real lattice coordinates (x, y) with z = 2ωx + 2ω′y.
    fn lattice_coordinates(&self, z: Complex64) -> (f64, f64) {
        let [i00, i01, i10, i11] = self.inv_period;
        (i00 * z.re + i01 * z.im, i10 * z.re + i11 * z.im)
    }

    /// Reduces z to the half-open fundamental parallelogram
    /// {2ωx + 2ω′y : x, y ∈ [0, 1)}.
    pub fn reduce(&self, z: Complex64) -> Result<Complex64, EllipticError> {
        self.check_finite(z)?;
        let (x, y) = self.lattice_coordinates(z);
        let (m, k) = (x.floor(), y.floor());
        Ok(z - 2.0 * m * self.omega - 2.0 * k * self.omega_prime)
    }

    /// Reduces z to the parallelogram centred at the origin and returns the
    /// removed lattice multiples: z = z_c + 2mω + 2kω′ with lattice
    /// coordinates of z_c in [−1/2, 1/2).
    fn reduce_centered(&self, z: Complex64) -> (Complex64, i64, i64) {
        let (x, y) = self.lattice_coordinates(z);
        let (m, k) = ((x + 0.5).floor(), (y + 0.5).floor());
        let zc = z - 2.0 * m * self.omega - 2.0 * k * self.omega_prime;
        (zc, m as i64, k as i64)
    }

    /// Distance from z to the nearest lattice point of Λ.
    pub fn lattice_distance(&self, z: Complex64) -> f64 {
        let (zc, _, _) = self.reduce_centered(z);
        let mut best = f64::INFINITY;
        for s in -1..=1 {
            for t in -1..=1 {
                let corner =
                    2.0 * f64::from(s) * self.omega + 2.0 * f64::from(t) * self.omega_prime;
                best = best.min((zc - corner).norm());
            }
        }
        best
    }

    fn check_finite(&self, z: Complex64) -> Result<(), EllipticError> {
        if z.is_finite() {
            Ok(())
        } else {
            Err(EllipticError::NonFinite {
                what: format!("argument {z}"),
            })
        }
    }

    /// Rejects arguments within the pole guard of a lattice point.
    pub(crate) fn check_pole(&self, z: Complex64) -> Result<(), EllipticError> {
        let distance = self.lattice_distance(z);
        if distance < self.pole_guard {
            Err(EllipticError::PoleProximity {
                distance,
                guard: self.pole_guard,
            })
        } else {
            Ok(())
        }
    }

    /// q raised to a (possibly fractional) power, via the exact logarithm.
    fn nome_pow(&self, exponent: f64) -> Complex64 {
        (self.log_nome * exponent).exp()
    }

    /// θ₁ and its first three derivatives at v, by direct series summation.
    ///
    /// θ₁(v) = 2 Σₙ (−1)ⁿ q^((n+1/2)²) sin((2n+1)v).
    fn theta_suite(&self, v: Complex64) -> ThetaSuite {
        let mut t = Complex64::new(0.0, 0.0);
        let mut dt = Complex64::new(0.0, 0.0);
        let mut ddt = Complex64::new(0.0, 0.0);
        let mut dddt = Complex64::new(0.0, 0.0);
        let mut quiet_terms = 0;
        for n in 0..MAX_THETA_TERMS {
            let m = 2.0 * n as f64 + 1.0;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let weight = 2.0 * sign * self.nome_pow((n as f64 + 0.5) * (n as f64 + 0.5));
            let (s, c) = ((m * v).sin(), (m * v).cos());
            let term_t = weight * s;
            let term_dt = weight * m * c;
            let term_ddt = -weight * m * m * s;
            let term_dddt = -weight * m * m * m * c;
            t += term_t;
            dt += term_dt;
            ddt += term_ddt;
            dddt += term_dddt;
            let scale = 1.0 + t.norm().max(dt.norm()).max(ddt.norm()).max(dddt.norm());
            let largest = term_t
                .norm()
                .max(term_dt.norm())
                .max(term_ddt.norm())
                .max(term_dddt.norm());
            if largest < 1e-18 * scale {
                quiet_terms += 1;
                if quiet_terms >= 2 {
                    break;
                }
            } else {
                quiet_terms = 0;
            }
        }
        ThetaSuite { t, dt, ddt, dddt }
    }

    /// Theta constants θ₂(0), θ₃(0), θ₄(0).
    fn theta_nulls(&self) -> (Complex64, Complex64, Complex64) {
        let mut t2 = Complex64::new(0.0, 0.0);
        let mut t3 = Complex64::new(1.0, 0.0);
        let mut t4 = Complex64::new(1.0, 0.0);
        for n in 0..MAX_THETA_TERMS {
            let nf = n as f64;
            let term2 = 2.0 * self.nome_pow((nf + 0.5) * (nf + 0.5));
            t2 += term2;
            let mut biggest = term2.norm();
            if n >= 1 {
                let qnn = self.nome_pow(nf * nf);
                let term3 = 2.0 * qnn;
                let term4 = 2.0 * if n % 2 == 0 { qnn } else { -qnn };
                t3 += term3;
                t4 += term4;
                biggest = biggest.max(term3.norm());
            }
            if biggest < 1e-18 * (1.0 + t2.norm().max(t3.norm())) && n >= 2 {
                break;
            }
        }
        (t2, t3, t4)
    }

    /// g₂, g₃ from the branch values e₁, e₂, e₃ expressed in theta nulls.
    fn invariants_from_theta_nulls(&self) -> (Complex64, Complex64) {
        let (t2, t3, t4) = self.theta_nulls();
        let scale = (PI / (2.0 * self.omega)) * (PI / (2.0 * self.omega));
        let p2 = t2.powu(4);
        let p3 = t3.powu(4);
        let p4 = t4.powu(4);
        let e1 = scale * (p3 + p4) / 3.0;
        let e2 = scale * (p2 - p4) / 3.0;
        let e3 = -scale * (p2 + p3) / 3.0;
        let g2 = -4.0 * (e1 * e2 + e1 * e3 + e2 * e3);
        let g3 = 4.0 * e1 * e2 * e3;
        (g2, g3)
    }

    /// Maps a centred argument to the theta variable v = πz/(2ω).
    fn theta_argument(&self, zc: Complex64) -> Complex64 {
        PI * zc / (2.0 * self.omega)
    }

    /// ℘(z).  Even elliptic function with double poles on Λ.
    pub fn wp(&self, z: Complex64) -> Result<Complex64, EllipticError> {
        self.check_finite(z)?;
        self.check_pole(z)?;
        let (zc, _, _) = self.reduce_centered(z);
        let suite = self.theta_suite(self.theta_argument(zc));
        let ratio1 = suite.dt / suite.t;
        let scale = PI / (2.0 * self.omega);
        Ok(-self.eta / self.omega - scale * scale * (suite.ddt / suite.t - ratio1 * ratio1))
    }

    /// ℘′(z).  Odd elliptic function with triple poles on Λ.
    pub fn wp_prime(&self, z: Complex64) -> Result<Complex64, EllipticError> {
        self.check_finite(z)?;
        self.check_pole(z)?;
        let (zc, _, _) = self.reduce_centered(z);
        let suite = self.theta_suite(self.theta_argument(zc));
        let r1 = suite.dt / suite.t;
        let scale = PI / (2.0 * self.omega);
        let second = suite.dddt / suite.t - 3.0 * (suite.ddt / suite.t) * r1 + 2.0 * r1 * r1 * r1;
        Ok(-scale * scale * scale * second)
    }

    /// ℘″(z) = 6℘(z)² − g₂/2, via the algebraic differential equation.
    pub fn wp_second(&self, z: Complex64) -> Result<Complex64, EllipticError> {
        let p = self.wp(z)?;
        Ok(6.0 * p * p - self.g2 / 2.0)
    }

    /// ζ at an argument assumed close enough to the origin cell for the
    /// series to converge, with no lattice reduction applied.
    fn zeta_unreduced(&self, z: Complex64) -> Complex64 {
        let suite = self.theta_suite(self.theta_argument(z));
        self.eta * z / self.omega + PI / (2.0 * self.omega) * (suite.dt / suite.t)
    }

    /// ζ(z).  Odd, quasi-periodic: ζ(z + 2ω) = ζ(z) + 2η,
    /// ζ(z + 2ω′) = ζ(z) + 2η′.
    pub fn zeta_w(&self, z: Complex64) -> Result<Complex64, EllipticError> {
        self.check_finite(z)?;
        self.check_pole(z)?;
        let (zc, m, k) = self.reduce_centered(z);
        let suite = self.theta_suite(self.theta_argument(zc));
        let base = self.eta * zc / self.omega + PI / (2.0 * self.omega) * (suite.dt / suite.t);
        Ok(base + 2.0 * (m as f64) * self.eta + 2.0 * (k as f64) * self.eta_prime)
    }

    /// σ(z).  Entire, odd, simple zeros exactly on Λ, σ(z) = z + O(z⁵),
    /// quasi-periodic: σ(z + 2ω) = −σ(z)·exp(2η(z + ω)).
    pub fn sigma_w(&self, z: Complex64) -> Result<Complex64, EllipticError> {
        self.check_finite(z)?;
        let (zc, m, k) = self.reduce_centered(z);
        let suite = self.theta_suite(self.theta_argument(zc));
        let base = (2.0 * self.omega / PI)
            * (self.eta * zc * zc / (2.0 * self.omega)).exp()
            * (suite.t / self.theta1_prime0);
        // σ(z_c + Ω) = ±σ(z_c) exp(η_Ω (z_c + Ω/2)) with Ω = 2mω + 2kω′,
        // η_Ω = 2mη + 2kη′ and sign −1 unless both m and k are even.
        let (mf, kf) = (m as f64, k as f64);
        let eta_shift = 2.0 * mf * self.eta + 2.0 * kf * self.eta_prime;
        let half_shift = mf * self.omega + kf * self.omega_prime;
        let sign = if (m + k + m * k) % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign * base * (eta_shift * (zc + half_shift)).exp())
    }

    /// Interaction kernel f(u, v) = ζ(u+v) − ζ(u−v) − 2ζ(v).
    ///
    /// Elliptic in u with simple poles at u ≡ ±v; equal to
    /// ℘′(v)/(℘(v) − ℘(u)).
    pub fn f(&self, u: Complex64, v: Complex64) -> Result<Complex64, EllipticError> {
        Ok(self.zeta_w(u + v)? - self.zeta_w(u - v)? - 2.0 * self.zeta_w(v)?)
    }

    /// Interaction kernel v(u, w) = ζ(u+w) + ζ(u−w) − ζ(2u).
    ///
    /// Doubly periodic in w; simple poles at w ≡ ±u.
    pub fn v(&self, u: Complex64, w: Complex64) -> Result<Complex64, EllipticError> {
        Ok(self.zeta_w(u + w)? + self.zeta_w(u - w)? - self.zeta_w(2.0 * u)?)
    }

    /// Numerically verifies the two logarithmic-derivative identities
    ///
    /// ∂ᵤ ln f(u,v) = −f(v,u),
    /// ∂ᵥ ln f(u,v) = −f(u,v) + 2ζ(2v) − 4ζ(v),
    ///
    /// returning both residuals.  The derivatives are formed as
    /// (∂f)/f with fourth-order central differences (step `step`, averaged
    /// over the real and imaginary directions so the h² truncation terms of
    /// the two holomorphic difference quotients cancel), which avoids any
    /// branch choice for the logarithm.
    pub fn log_f_derivative_identities(
        &self,
        u: Complex64,
        v: Complex64,
        step: f64,
    ) -> Result<LogFDerivativeResiduals, EllipticError> {
        let f_uv = self.f(u, v)?;
        let du = {
            let g = |x: Complex64| self.f(x, v);
            complex_central_derivative(g, u, step)?
        };
        let dv = {
            let g = |x: Complex64| self.f(u, x);
            complex_central_derivative(g, v, step)?
        };
        let residual_u = (du / f_uv + self.f(v, u)?).norm();
        let residual_v = (dv / f_uv + f_uv - 2.0 * self.zeta_w(2.0 * v)?
            + 4.0 * self.zeta_w(v)?)
        .norm();
        Ok(LogFDerivativeResiduals {
            residual_u,
            residual_v,
        })
    }

    /// Taylor coefficients c₀..c_order at z = 0 of ζ(z−γ) + ζ(γ).
    ///
    /// c₀ = 0, c₁ = −℘(γ), c₂ = ℘′(γ)/2, c₃ = −℘″(γ)/6.  Orders above
    /// [`ZETA_SHIFT_MAX_ORDER`] are clamped to it.
    pub fn zeta_shift_series(
        &self,
        gamma: Complex64,
        order: usize,
    ) -> Result<Vec<Complex64>, EllipticError> {
        let order = order.min(ZETA_SHIFT_MAX_ORDER);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); order + 1];
        if order >= 1 {
            coeffs[1] = -self.wp(gamma)?;
        }
        if order >= 2 {
            coeffs[2] = self.wp_prime(gamma)? / 2.0;
        }
        if order >= 3 {
            coeffs[3] = -self.wp_second(gamma)? / 6.0;
        }
        Ok(coeffs)
    }
}

/// Central-difference derivative of a holomorphic function, averaged over
/// the real and imaginary step directions.
///
/// Each direction alone has truncation error f‴h²/6·d² for direction d;
/// with d = 1 and d = i these errors are opposite, so the average is
/// fourth-order accurate.
pub fn complex_central_derivative<E>(
    mut f: impl FnMut(Complex64) -> Result<Complex64, E>,
    z: Complex64,
    h: f64,
) -> Result<Complex64, E> {
    let re_step = Complex64::new(h, 0.0);
    let im_step = Complex64::new(0.0, h);
    let d_re = (f(z + re_step)? - f(z - re_step)?) / (2.0 * h);
    let d_im = (f(z + im_step)? - f(z - im_step)?) / (2.0 * im_step);
    Ok((d_re + d_im) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_torus() -> Torus {
        Torus::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)).unwrap()
    }

    #[test]
    fn rejects_degenerate_periods() {
        let zero = Complex64::new(0.0, 0.0);
        assert!(Torus::new(zero, Complex64::new(0.0, 1.0)).is_err());
        // Ratio in the lower half-plane.
        assert!(Torus::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0)).is_err());
        // Collinear periods.
        assert!(Torus::new(Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)).is_err());
    }

    #[test]
    fn square_lattice_constants() {
        let torus = square_torus();
        // ζ(ω) = π/4 for ω = 1, ω′ = i.
        assert!((torus.eta() - Complex64::new(PI / 4.0, 0.0)).norm() < 1e-12);
        // The square lattice has g₃ = 0 by four-fold symmetry.
        assert!(torus.g3().norm() < 1e-10 * (1.0 + torus.g2().norm()));
        // |q| = e^{−π}.
        assert!((torus.nome().norm() - (-PI).exp()).abs() < 1e-14);
    }

    #[test]
    fn reduce_into_half_open_cell() {
        let torus = square_torus();
        let z = Complex64::new(7.3, -4.1);
        let r = torus.reduce(z).unwrap();
        let (x, y) = torus.lattice_coordinates(r);
        assert!((0.0..1.0).contains(&x), "x = {x}");
        assert!((0.0..1.0).contains(&y), "y = {y}");
        // The reduction only removed lattice vectors.
        let diff = z - r;
        let (dx, dy) = torus.lattice_coordinates(diff);
        assert!((dx - dx.round()).abs() < 1e-9);
        assert!((dy - dy.round()).abs() < 1e-9);
    }

    #[test]
    fn pole_guard_triggers_near_lattice_points() {
        let torus = square_torus();
        let near_pole = Complex64::new(2.0 + 1e-9, 2.0);
        match torus.wp(near_pole) {
            Err(EllipticError::PoleProximity { .. }) => {}
            other => panic!("expected pole-proximity error, got {other:?}"),
        }
        // σ has no poles and must accept the same point.
        assert!(torus.sigma_w(near_pole).is_ok());
    }

    #[test]
    fn sigma_behaves_like_z_near_origin() {
        let torus = square_torus();
        let z = Complex64::new(1e-4, -2e-4);
        let s = torus.sigma_w(z).unwrap();
        // σ(z) = z(1 + O(z⁴)).
        assert!((s / z - 1.0).norm() < 1e-12);
    }

    #[test]
    fn zeta_is_odd_and_sigma_is_odd() {
        let torus = square_torus();
        let z = Complex64::new(0.31, 0.17);
        let zp = torus.zeta_w(z).unwrap();
        let zm = torus.zeta_w(-z).unwrap();
        assert!((zp + zm).norm() < 1e-12 * zp.norm().max(1.0));
        let sp = torus.sigma_w(z).unwrap();
        let sm = torus.sigma_w(-z).unwrap();
        assert!((sp + sm).norm() < 1e-12 * sp.norm().max(1.0));
    }

    #[test]
    fn zeta_shift_series_is_clamped_and_starts_at_zero() {
        let torus = square_torus();
        let gamma = Complex64::new(0.37, 0.21);
        let coeffs = torus.zeta_shift_series(gamma, 9).unwrap();
        assert_eq!(coeffs.len(), ZETA_SHIFT_MAX_ORDER + 1);
        assert_eq!(coeffs[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn complex_point_rejects_non_finite() {
        assert!(ComplexPoint::new(f64::NAN, 0.0).is_err());
        assert!(ComplexPoint::new(0.0, f64::INFINITY).is_err());
        let p = ComplexPoint::new(1.5, -2.5).unwrap();
        assert_eq!(p.value(), Complex64::new(1.5, -2.5));
    }
}
