//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by elliptic-function evaluation and torus construction.
#[derive(Debug, Clone, Error)]
pub enum EllipticError {
    /// The half-periods do not span a valid torus: `omega` must be nonzero,
    /// the period ratio must lie in the upper half-plane and the resulting
    /// nome must be small enough for the series evaluation to converge.
    #[error("invalid torus: {reason}")]
    InvalidTorus { reason: String },

    /// An evaluation point came too close to a pole of the requested function.
    #[error("evaluation point within {distance:.3e} of a lattice pole (guard {guard:.3e})")]
    PoleProximity { distance: f64, guard: f64 },

    /// An input coordinate was NaN or infinite.
    #[error("non-finite input: {what}")]
    NonFinite { what: String },
}

/// Errors raised by the banded-operator algebra.
#[derive(Debug, Clone, Error)]
pub enum OperatorError {
    /// A window became empty after accounting for the bands an operation needs.
    #[error("window underflow: {context}")]
    WindowUnderflow { context: String },

    /// Two objects that had to share grid geometry did not.
    #[error("window mismatch: {context}")]
    WindowMismatch { context: String },

    /// A grid function was numerically indistinguishable from zero, so a
    /// relative residual against it is meaningless.
    #[error("degenerate grid function: max |psi| = {max_abs:.3e}")]
    DegenerateFunction { max_abs: f64 },

    /// A least-squares system was too ill-conditioned to trust.
    #[error("rank-deficient least-squares system: condition number {condition:.3e} at site {site}")]
    RankDeficient { condition: f64, site: i64 },

    /// Malformed serialized operator data.
    #[error("invalid operator data: {reason}")]
    InvalidData { reason: String },
}

/// Errors raised while evaluating the eigenfunction families.
#[derive(Debug, Clone, Error)]
pub enum FamilyError {
    /// Construction parameters collide (points congruent mod the lattice,
    /// matching residue weights, vanishing normalizing factors, ...).
    #[error("degenerate data: {reason}")]
    DegenerateData { reason: String },

    /// At this family index a translated divisor point fell onto the lattice
    /// (or onto a puncture), so a σ factor the formulas divide by vanishes.
    #[error("degenerate divisor at index {n}: σ argument within {distance:.3e} of the lattice")]
    DegenerateDivisor { n: i64, distance: f64 },

    /// Wrapped elliptic evaluation failure.
    #[error(transparent)]
    Elliptic(#[from] EllipticError),

    /// Wrapped operator-algebra failure.
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Errors raised by the discrete dressing-chain driver.
#[derive(Debug, Clone, Error)]
pub enum TyurinError {
    /// A state quantity degenerated (coincident weights, vanishing
    /// normalization, pole collision); the offending quantity is named.
    #[error("degenerate state at step {step}: {quantity}")]
    DegenerateState { step: i64, quantity: String },

    #[error(transparent)]
    Elliptic(#[from] EllipticError),

    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Errors raised by the lattice-flow integrator.
#[derive(Debug, Clone, Error)]
pub enum TodaError {
    /// A configuration hit a pole of the interaction (site sum or difference
    /// on the period lattice).
    #[error("singular configuration: {reason}")]
    SingularConfiguration { reason: String },

    /// Chain construction with inconsistent lengths or too few sites.
    #[error("invalid chain: {reason}")]
    InvalidChain { reason: String },

    #[error(transparent)]
    Elliptic(#[from] EllipticError),
}
