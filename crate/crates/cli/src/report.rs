//! JSON sidecar reports written next to every output.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use trcm::evalsim::Score;
use trcm::imputation::ImputationReport;

use crate::config::{RunConfig, REPORT_SCHEMA};

#[derive(Clone, Debug, Serialize)]
pub struct Metrics {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub cells: usize,
}

impl From<&Score> for Metrics {
    fn from(s: &Score) -> Self {
        Self { mse: s.mse, rmse: s.rmse, mae: s.mae, cells: s.abs_errors.len() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Sidecar<'a> {
    pub schema: &'static str,
    pub command: &'static str,
    pub method: String,
    pub parameters: Value,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
    pub initial_objective: Option<f64>,
    pub notes: Vec<String>,
    pub metrics: Option<Metrics>,
    /// Command-specific results such as a cross-validation table.
    pub details: Value,
    pub config: &'a RunConfig,
}

impl<'a> Sidecar<'a> {
    pub fn new(command: &'static str, method: String, config: &'a RunConfig) -> Self {
        Self {
            schema: REPORT_SCHEMA,
            command,
            method,
            parameters: Value::Null,
            iterations: 0,
            converged: true,
            objective_trace: Vec::new(),
            initial_objective: None,
            notes: Vec::new(),
            metrics: None,
            details: Value::Null,
            config,
        }
    }

    pub fn from_imputation(command: &'static str, report: &ImputationReport<f64>, config: &'a RunConfig) -> Self {
        let mut s = Self::new(command, report.method.tag().to_string(), config);
        s.parameters = serde_json::json!({
            "penalty": report.penalty,
            "rank": report.rank,
            "k": report.k,
        });
        s.iterations = report.iterations;
        s.converged = report.converged;
        s.objective_trace = report.trace.clone();
        s.initial_objective = report.initial_objective;
        s.notes = report.notes.clone();
        s
    }

    pub fn write(&self, output: &Path) -> Result<PathBuf> {
        let path = sidecar_path(output);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// `<output>.report.json`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".report.json");
    PathBuf::from(name)
}
