//! Run configuration: JSON schema, validation, and the experiment-specific
//! parameter blocks.
//!
//! A config names one experiment, the torus it runs on, a seed for the
//! deterministic sample streams, an output directory, optional tolerance
//! overrides keyed by criterion name, and an experiment-specific `params`
//! block.  Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use ellop_core::Torus;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::RunnerError;

/// The experiments the runner knows how to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Identity suite for the special functions on one torus.
    EllipticCheck,
    /// One-component eigenfunction family and its commuting operator pair.
    Rank1Demo,
    /// Two-component family with separated marked points.
    Seprank2Demo,
    /// Discrete dressing chain, fourth-order assembly and partner search.
    TyurinRun,
    /// Lattice flow integration with conservation and consistency checks.
    ElltodaRun,
    /// Commuting-partner search for an operator loaded from a file.
    PartnerSolve,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::EllipticCheck => "elliptic-check",
            Self::Rank1Demo => "rank1-demo",
            Self::Seprank2Demo => "seprank2-demo",
            Self::TyurinRun => "tyurin-run",
            Self::ElltodaRun => "elltoda-run",
            Self::PartnerSolve => "partner-solve",
        };
        f.write_str(name)
    }
}

/// Half-periods of the torus as `[re, im]` pairs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusSpec {
    pub omega: [f64; 2],
    pub omega_prime: [f64; 2],
}

impl TorusSpec {
    /// Build the torus, surfacing invalid lattice data as a config error.
    pub fn to_torus(&self) -> Result<Torus, RunnerError> {
        Torus::new(pair_to_complex(self.omega), pair_to_complex(self.omega_prime))
            .map_err(|e| RunnerError::ConfigInvalid(format!("torus: {e}")))
    }
}

/// One experiment run: what to execute, where, and with which knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub torus: TorusSpec,
    /// Seed for the deterministic sample streams.
    pub seed: u64,
    /// Where reports and series go; the `--out` flag overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Optional per-criterion threshold overrides, keyed by criterion name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    /// Experiment-specific block; each experiment documents its own schema.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub params: Value,
}

impl RunConfig {
    /// Parse and validate a config from JSON text.
    pub fn from_json(text: &str) -> Result<Self, RunnerError> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| RunnerError::ConfigInvalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Read, parse and validate a config file.
    pub fn from_file(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Structural invariants that the serde schema cannot express.
    fn validate(&self) -> Result<(), RunnerError> {
        self.torus.to_torus()?;
        for (name, value) in &self.tolerances {
            if !(value.is_finite() && *value > 0.0) {
                return Err(RunnerError::ConfigInvalid(format!(
                    "tolerances.{name}: must be a positive finite number, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Deserialize the `params` block into the experiment's parameter type;
    /// an absent block means all defaults.
    pub fn typed_params<T>(&self) -> Result<T, RunnerError>
    where
        T: DeserializeOwned + Default,
    {
        if self.params.is_null() {
            return Ok(T::default());
        }
        serde_json::from_value(self.params.clone())
            .map_err(|e| RunnerError::ConfigInvalid(format!("params: {e}")))
    }

    /// The threshold for a named criterion: the config override if present,
    /// otherwise the built-in default.
    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    /// Reject tolerance overrides whose names no criterion of this
    /// experiment carries.
    pub fn check_tolerance_names(&self, known: &[&str]) -> Result<(), RunnerError> {
        for name in self.tolerances.keys() {
            if !known.contains(&name.as_str()) {
                return Err(RunnerError::ConfigInvalid(format!(
                    "tolerances: no criterion named `{name}` in {} (known: {})",
                    self.experiment,
                    known.join(", ")
                )));
            }
        }
        Ok(())
    }
}

/// Convert a `[re, im]` pair from a config into a complex number.
pub fn pair_to_complex(pair: [f64; 2]) -> Complex64 {
    Complex64::new(pair[0], pair[1])
}

/// Convert a list of `[re, im]` pairs.
pub fn pairs_to_complex(pairs: &[[f64; 2]]) -> Vec<Complex64> {
    pairs.iter().map(|&p| pair_to_complex(p)).collect()
}

/// Parameters of the special-function identity suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EllipticCheckParams {
    /// Number of sample points per single-point identity.
    pub points: usize,
}

impl Default for EllipticCheckParams {
    fn default() -> Self {
        Self { points: 100 }
    }
}

/// Parameters of the one-component family demo: the two marked points, the
/// pole point, and the reconstruction window.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Rank1Params {
    pub p_plus: [f64; 2],
    pub p_minus: [f64; 2],
    pub gamma: [f64; 2],
    pub window: [i64; 2],
}

impl Default for Rank1Params {
    fn default() -> Self {
        Self {
            p_plus: [0.41, 0.27],
            p_minus: [-0.13, 0.52],
            gamma: [0.77, 0.31],
            window: [-5, 5],
        }
    }
}

/// Parameters of the separated-marked-points demo: puncture, pole points,
/// residue weights, and the reconstruction window.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seprank2Params {
    pub z0: [f64; 2],
    pub gamma1: [f64; 2],
    pub gamma2: [f64; 2],
    pub a1: [f64; 2],
    pub a2: [f64; 2],
    pub window: [i64; 2],
}

impl Default for Seprank2Params {
    fn default() -> Self {
        Self {
            z0: [0.23, 0.11],
            gamma1: [0.61, 0.0],
            gamma2: [1.17, 0.4],
            a1: [1.3, 0.0],
            a2: [-0.7, 0.0],
            window: [-6, 6],
        }
    }
}

/// Which coefficient data drives the dressing chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TyurinMode {
    /// Zero offset constant; data is (base points, velocity parameters).
    Symmetric,
    /// Arbitrary offset; data is (base points, diagonal coefficients,
    /// initial residue weights).
    General,
}

/// Parameters of a dressing-chain run.
///
/// In symmetric mode the chain data is either generated deterministically
/// (`count` points from the seed) or given explicitly as `seed_gamma` +
/// `gamma` + `s`.  In general mode `gamma`, `v` and `a0` are required and
/// `c_const` sets the offset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TyurinParams {
    pub mode: TyurinMode,
    /// Chain index of the first state.
    pub start: i64,
    /// Number of generated base points (symmetric mode without explicit data).
    pub count: usize,
    /// Base point at index `start - 1` (explicit symmetric data only).
    pub seed_gamma: Option<[f64; 2]>,
    /// Explicit base points for indices `start`, `start + 1`, ...
    pub gamma: Option<Vec<[f64; 2]>>,
    /// Explicit velocity parameters (symmetric mode), same length as `gamma`.
    pub s: Option<Vec<[f64; 2]>>,
    /// Explicit diagonal coefficients (general mode), one per step.
    pub v: Option<Vec<[f64; 2]>>,
    /// Initial residue weights (general mode).
    pub a0: Option<[[f64; 2]; 2]>,
    /// Offset constant (general mode).
    pub c_const: [f64; 2],
    /// Assembly window for the fourth-order operator; defaults to the
    /// widest window the chain supports.
    pub build_window: Option<[i64; 2]>,
    /// Residual window of the partner search; defaults to the assembly
    /// window shrunk by the partner spans.
    pub partner_window: Option<[i64; 2]>,
    /// (lower, upper) shift spans of the partner operator.
    pub partner_spans: [usize; 2],
}

impl Default for TyurinParams {
    fn default() -> Self {
        Self {
            mode: TyurinMode::Symmetric,
            start: -2,
            count: 24,
            seed_gamma: None,
            gamma: None,
            s: None,
            v: None,
            a0: None,
            c_const: [0.0, 0.0],
            build_window: None,
            partner_window: None,
            partner_spans: [3, 3],
        }
    }
}

/// Parameters of a lattice-flow run.
///
/// Initial data defaults to a four-site configuration that stays clear of
/// the lattice for the default torus and horizon.  Velocities and momenta
/// are mutually exclusive ways to give the initial rates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElltodaParams {
    pub positions: Vec<[f64; 2]>,
    pub velocities: Option<Vec<[f64; 2]>>,
    pub momenta: Option<Vec<[f64; 2]>>,
    /// Integration horizon.
    pub t_final: f64,
    /// Fixed integrator step.
    pub dt: f64,
    /// Every how many steps a sample is recorded.
    pub output_stride: usize,
    /// Trials for measuring the flow-to-energy-gradient constant.
    pub calibration_trials: usize,
}

impl Default for ElltodaParams {
    fn default() -> Self {
        Self {
            positions: vec![
                [1.44, 0.52],
                [1.49, -0.48],
                [1.52, 0.55],
                [1.56, -0.45],
            ],
            velocities: None,
            momenta: None,
            t_final: 2.0,
            dt: 1e-3,
            output_stride: 5,
            calibration_trials: 12,
        }
    }
}

impl ElltodaParams {
    /// The default initial rates paired with the default positions.
    pub fn default_velocities() -> Vec<[f64; 2]> {
        vec![
            [0.06, 0.03],
            [-0.055, -0.028],
            [0.05, -0.005],
            [-0.065, 0.018],
        ]
    }

    /// Resolve the configured rates into velocities.
    pub fn resolved_velocities(&self) -> Result<Vec<Complex64>, RunnerError> {
        match (&self.velocities, &self.momenta) {
            (Some(_), Some(_)) => Err(RunnerError::ConfigInvalid(
                "params: give either velocities or momenta, not both".into(),
            )),
            (Some(v), None) => Ok(pairs_to_complex(v)),
            (None, Some(p)) => Ok(pairs_to_complex(p)
                .into_iter()
                .map(ellop_core::elltoda::velocity_from_momentum)
                .collect()),
            (None, None) => Ok(pairs_to_complex(&Self::default_velocities())),
        }
    }
}

/// Parameters of a stand-alone partner search on a serialized operator.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PartnerSolveParams {
    /// Path of the operator JSON file, relative to the config file.
    pub operator: Option<PathBuf>,
    /// (lower, upper) shift spans of the partner, default (3, 3).
    pub spans: Option<[usize; 2]>,
    /// Residual window; defaults to the operator window shrunk by the spans.
    pub window: Option<[i64; 2]>,
}
