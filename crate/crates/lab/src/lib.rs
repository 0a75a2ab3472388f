//! Seeded experiment harness for `fpp-core`: TOML configs, replicated runs on
//! a rayon pool, mergeable reports.
//!
//! A run is a pure function of its config. Replica k draws its field from
//! `split_seed(master_seed, k, stream)`, estimators pool through exact
//! accumulators, and every row list is kept sorted, so the output does not
//! depend on the number of worker threads or on the order of merges.

pub mod checks;
pub mod config;
pub mod experiment;
pub mod report;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{Experiment, ExperimentConfig, MuReference, Thresholds};
pub use experiment::{execute, State};
pub use report::{merge_dirs, merge_reports, Report, Summary, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("{0}")]
    Run(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed report {}: {msg}", path.display())]
    Report { path: PathBuf, msg: String },
}

impl LabError {
    /// Bad input rather than a failed computation.
    pub fn is_config(&self) -> bool {
        matches!(self, LabError::Config(_) | LabError::ConfigMismatch(_))
    }
}

impl From<fpp_core::DeviationError> for LabError {
    fn from(e: fpp_core::DeviationError) -> Self {
        use fpp_core::DeviationError as D;
        match e {
            D::InvalidArgument(_) | D::TooFewReplicas { .. } | D::EmptyFan | D::MuTooUncertain { .. } => {
                LabError::Config(e.to_string())
            }
            D::Weights(fpp_core::WeightsError::InvalidParameter(_)) => LabError::Config(e.to_string()),
            _ => LabError::Run(e.to_string()),
        }
    }
}

impl From<fpp_core::RegenError> for LabError {
    fn from(e: fpp_core::RegenError) -> Self {
        match e {
            fpp_core::RegenError::InsufficientData(_) | fpp_core::RegenError::Lattice(_) => LabError::Config(e.to_string()),
            _ => LabError::Run(e.to_string()),
        }
    }
}

impl From<fpp_core::ShellError> for LabError {
    fn from(e: fpp_core::ShellError) -> Self {
        LabError::Run(e.to_string())
    }
}

impl From<fpp_core::WeightsError> for LabError {
    fn from(e: fpp_core::WeightsError) -> Self {
        LabError::Config(e.to_string())
    }
}

/// Run `config` on a dedicated pool of `threads` workers (0 picks the rayon
/// default).
pub fn run(config: &ExperimentConfig, threads: usize) -> Result<Report, LabError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LabError::Run(e.to_string()))?;
    let outcome = pool.install(|| execute(config))?;
    Ok(Report::from_outcome(config.clone(), outcome))
}
