//! Numerical laboratory for banded difference operators built from elliptic
//! functions.
//!
//! The crate provides, bottom-up:
//!
//! * [`elliptic`] — Weierstrass-type special functions (℘, ℘′, ζ, σ) on a
//!   complex torus, evaluated through theta series with argument reduction,
//!   plus the two-point interaction kernels used throughout.
//! * [`operators`] — banded difference operators on finite index windows:
//!   application, composition, commutators, eigen-residuals, least-squares
//!   reconstruction from eigenfunction samples, and the search for a
//!   commuting partner.
//! * [`rank1`] — the one-dimensional family of quasi-periodic eigenfunctions
//!   with two marked points, and the pair of commuting operators it carries.
//! * [`seprank2`] — the two-component eigenfunction family with separated
//!   marked points, residue-matching checks and its operator pair.
//! * [`tyurin`] — the discrete dressing chain for the two-component family
//!   with glued marked points, its transfer matrix, expansion coefficients
//!   and the fourth-order lattice operator they assemble.
//! * [`elltoda`] — the elliptic lattice flow equivalent to that chain, with
//!   a conserved Hamiltonian, a classical Runge-Kutta integrator and
//!   consistency checks against the chain coefficients.
//! * [`sample`] — deterministic low-discrepancy sample points on a torus,
//!   used by the reconstruction routines and the test suites.

pub mod elliptic;
pub mod elltoda;
pub mod error;
pub mod operators;
pub mod rank1;
pub mod sample;
pub mod seprank2;
pub mod tyurin;

pub use elliptic::{ComplexPoint, Torus};
pub use error::{EllipticError, FamilyError, OperatorError, TodaError, TyurinError};

/// Crate version, for embedding in generated reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
