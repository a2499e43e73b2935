//! Reproducible experiment runner for the elliptic difference-operator
//! laboratory.
//!
//! The library behind the `ellop` binary: JSON run configs ([`config`]),
//! experiment orchestration ([`experiments`]), JSON reports with pass/fail
//! criteria ([`report`]) and field-wise report comparison ([`diff`]).
//!
//! Every run is deterministic: the same config and seed reproduce the same
//! report numerics and byte-identical CSV series.

use std::path::PathBuf;

pub mod config;
pub mod diff;
pub mod experiments;
pub mod report;

use ellop_core::{EllipticError, FamilyError, OperatorError, TodaError, TyurinError};

/// Everything that can go wrong while loading a config, running an
/// experiment, or comparing reports.  All variants map to process exit
/// code 1; criterion failures are not errors and map to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    /// The config file parsed but violates the schema or an invariant.
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    /// Two reports cannot be compared field by field.
    #[error("report schema mismatch: {0}")]
    SchemaMismatch(String),
    /// A filesystem operation failed; the path names the file involved.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Tyurin(#[from] TyurinError),
    #[error(transparent)]
    Toda(#[from] TodaError),
}

impl RunnerError {
    /// Wrap an I/O error with the path it happened on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
