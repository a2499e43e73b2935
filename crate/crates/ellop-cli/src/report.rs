//! Run reports: named pass/fail criteria, free-form metrics, versions and
//! the config echo, serialized as `report.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{ExperimentKind, RunConfig};
use crate::RunnerError;

/// One acceptance criterion of a run: a scalar against its threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Criterion {
    /// A residual-style criterion: passes when the value is finite and at
    /// most the threshold.
    pub fn residual(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            threshold,
            pass: value.is_finite() && value <= threshold,
        }
    }
}

/// The full outcome of one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub experiment: ExperimentKind,
    /// Crate versions the run was produced with.
    pub versions: BTreeMap<String, String>,
    /// The exact config the run executed, for reproduction.
    pub config: RunConfig,
    /// All pass/fail criteria, in a fixed order per experiment.
    pub criteria: Vec<Criterion>,
    /// Experiment-specific scalars worth diffing between runs.
    pub metrics: BTreeMap<String, Value>,
    /// True iff every criterion passed.
    pub pass: bool,
}

impl Report {
    /// Assemble a report; `pass` is derived from the criteria.
    pub fn assemble(
        config: &RunConfig,
        criteria: Vec<Criterion>,
        metrics: BTreeMap<String, Value>,
    ) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("ellop-core".to_string(), ellop_core::VERSION.to_string());
        versions.insert(
            "ellop-cli".to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        );
        let pass = criteria.iter().all(|c| c.pass);
        Self {
            experiment: config.experiment,
            versions,
            config: config.clone(),
            criteria,
            metrics,
            pass,
        }
    }

    /// Write `report.json` into `dir` and return its path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, RunnerError> {
        let path = dir.join("report.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| RunnerError::io(&path, e))?;
        Ok(path)
    }

    /// Load a report back from disk.
    pub fn from_file(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// A complex scalar as a `[re, im]` JSON value, for the metrics map.
pub fn complex_metric(z: Complex64) -> Value {
    serde_json::json!([z.re, z.im])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_config() -> RunConfig {
        RunConfig::from_json(
            r#"{
                "experiment": "elliptic-check",
                "torus": { "omega": [1.0, 0.0], "omega_prime": [0.0, 1.0] },
                "seed": 3
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn pass_flag_aggregates_criteria() {
        let config = demo_config();
        let good = Report::assemble(
            &config,
            vec![Criterion::residual("a", 1e-12, 1e-9)],
            BTreeMap::new(),
        );
        assert!(good.pass);
        let bad = Report::assemble(
            &config,
            vec![
                Criterion::residual("a", 1e-12, 1e-9),
                Criterion::residual("b", 1e-3, 1e-9),
            ],
            BTreeMap::new(),
        );
        assert!(!bad.pass);
        assert!(bad.criteria[0].pass && !bad.criteria[1].pass);
    }

    #[test]
    fn non_finite_values_never_pass() {
        assert!(!Criterion::residual("a", f64::NAN, 1.0).pass);
        assert!(!Criterion::residual("a", f64::INFINITY, f64::INFINITY).pass);
    }

    #[test]
    fn report_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let config = demo_config();
        let mut metrics = BTreeMap::new();
        metrics.insert("g2".to_string(), complex_metric(Complex64::new(1.5, -0.25)));
        let report = Report::assemble(
            &config,
            vec![Criterion::residual("legendre", 3.2e-13, 1e-10)],
            metrics,
        );
        let path = report.write(dir.path()).unwrap();
        let loaded = Report::from_file(&path).unwrap();
        assert_eq!(loaded.criteria[0].name, "legendre");
        assert_eq!(loaded.criteria[0].value, 3.2e-13);
        assert_eq!(loaded.metrics["g2"], serde_json::json!([1.5, -0.25]));
        assert_eq!(loaded.versions["ellop-core"], ellop_core::VERSION);
        assert!(loaded.pass);
    }
}
