//! Experiment report files.
//!
//! Reports are TOML with a fixed key order:
//!
//! ```toml
//! schema = 1
//! method = "dnsnmf"
//!
//! [metrics]            # present when clustering ran
//! accuracy = 0.95      # present when labels were available
//! nmi = 0.88
//! kmeans_objective = 12.5
//! restarts_used = 20
//!
//! [sparseness]
//! z = [0.41, 0.37]     # Hoyer sparseness of each Z_i
//! h = 0.62             # Hoyer sparseness of H_m
//!
//! [trace]
//! objective = [...]    # start value, then one entry per sweep
//! inner_iterations = [[...], ...]
//!
//! [seeds]
//! global = 7
//! kmeans = 7
//!
//! [config]             # echo of the experiment configuration
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::ClusteringReport;
use crate::runner::{ExperimentConfig, Method};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmi: Option<f64>,
    pub kmeans_objective: f64,
    pub restarts_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsenessSection {
    pub z: Vec<f64>,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSection {
    pub objective: Vec<f64>,
    /// Per fine-tuning sweep, APG iterations for `Z₁, …, Z_m, H_m`.
    #[serde(default)]
    pub inner_iterations: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSection {
    pub global: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmeans: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: u32,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsSection>,
    pub sparseness: SparsenessSection,
    pub trace: TraceSection,
    pub seeds: SeedSection,
    pub config: ExperimentConfig,
}

impl ExperimentReport {
    /// Assembles a report; clustering metrics are optional, sparseness is
    /// taken from `sparseness` when no clustering ran.
    pub fn new(
        config: &ExperimentConfig,
        clustering: Option<&ClusteringReport>,
        sparseness: SparsenessSection,
        trace: TraceSection,
        kmeans_seed: Option<u64>,
    ) -> Self {
        let metrics = clustering.map(|c| MetricsSection {
            accuracy: c.accuracy,
            nmi: c.nmi,
            kmeans_objective: c.kmeans_objective,
            restarts_used: c.restarts_used,
        });
        Self {
            schema: REPORT_SCHEMA,
            method: config.method,
            metrics,
            sparseness,
            trace,
            seeds: SeedSection {
                global: config.seed,
                kmeans: kmeans_seed,
            },
            config: config.clone(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("report serialization: {e}")))
    }
}

pub fn export_report(report: &ExperimentReport, path: &Path) -> Result<()> {
    fs::write(path, report.to_toml()?).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
