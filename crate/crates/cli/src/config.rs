//! Run configuration: defaults, overlaid by a config file, overlaid by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use trcm::baselines::MeanAxis;
use trcm::evalsim::{EvalOptions, ExperimentSpec, MethodConfig};
use trcm::imputation::Method;
use trcm::{Norm, PenaltySpec};

/// Every setting of a run. Serialized into each report so the run can be
/// repeated with `--config <report>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Held-out complete matrix used to score the imputation.
    pub truth: Option<PathBuf>,
    /// Method tag, e.g. `trcm-onestep` or `svd`. `mean` is accepted as
    /// shorthand for the mean fill along `axis`.
    pub method: String,
    pub axis: MeanAxis,
    pub q_row: u32,
    pub q_col: u32,
    pub rho_row: f64,
    pub rho_col: f64,
    pub rank: usize,
    pub k: usize,
    /// Grids searched by `cv`; unset grids use the built-in defaults.
    pub rho_grid: Option<Vec<f64>>,
    pub rank_grid: Option<Vec<usize>>,
    pub k_grid: Option<Vec<usize>>,
    pub folds: usize,
    pub seed: u64,
    pub na_token: String,
    pub delimiter: char,
    /// First line holds column names.
    pub header: bool,
    /// First field of every line holds a row name.
    pub rownames: bool,
    /// Work on the transpose when the matrix has fewer rows than columns.
    pub transpose: bool,
    pub options: EvalOptions,
    /// Simulation design for `simulate`.
    pub experiment: Option<ExperimentSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            output: None,
            truth: None,
            method: Method::TrcmOnestep.tag().to_string(),
            axis: MeanAxis::Cols,
            q_row: 2,
            q_col: 2,
            rho_row: 1.0,
            rho_col: 1.0,
            rank: 5,
            k: 5,
            rho_grid: None,
            rank_grid: None,
            k_grid: None,
            folds: 5,
            seed: 0,
            na_token: "NA".to_string(),
            delimiter: ',',
            header: false,
            rownames: false,
            transpose: false,
            options: EvalOptions::default(),
            experiment: None,
        }
    }
}

/// Schema tag of report sidecars.
pub const REPORT_SCHEMA: &str = "trcm-report/1";

impl RunConfig {
    /// Reads a TOML config (dotted keys allowed) or a JSON report sidecar,
    /// whose embedded `config` is used.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            let value: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let config = match value.get("schema") {
                Some(s) if s == REPORT_SCHEMA => value.get("config").cloned().context("report has no config")?,
                Some(s) => bail!("unsupported report schema {s}"),
                None => value,
            };
            serde_json::from_value(config).with_context(|| format!("reading config from {}", path.display()))
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.na_token.trim().parse::<f64>().is_ok() {
            bail!("missing-value token {:?} is numeric", self.na_token);
        }
        if self.delimiter == '"' || !self.delimiter.is_ascii() {
            bail!("delimiter must be a single ASCII character other than a quote");
        }
        if self.folds < 2 {
            bail!("folds must be at least 2, got {}", self.folds);
        }
        for rho in [self.rho_row, self.rho_col] {
            if !(rho.is_finite() && rho >= 0.0) {
                bail!("penalty weights must be finite and nonnegative, got {rho}");
            }
        }
        Norm::from_exponent(self.q_row)?;
        Norm::from_exponent(self.q_col)?;
        if self.rank == 0 || self.k == 0 {
            bail!("rank and k must be positive");
        }
        self.options.impute.validate()?;
        self.options.impute.solver.validate()?;
        Ok(())
    }

    pub fn penalty(&self) -> Result<PenaltySpec> {
        Ok(PenaltySpec::new(
            Norm::from_exponent(self.q_row)?,
            Norm::from_exponent(self.q_col)?,
            self.rho_row,
            self.rho_col,
        )?)
    }

    pub fn method(&self) -> Result<Method> {
        if self.method == "mean" {
            return Ok(match self.axis {
                MeanAxis::Cols => Method::MeanCols,
                MeanAxis::Rows => Method::MeanRows,
                MeanAxis::Additive => Method::MeanAdditive,
            });
        }
        Method::from_tag(&self.method).with_context(|| {
            let tags: Vec<&str> = Method::ALL.iter().map(|m| m.tag()).collect();
            format!("unknown method {:?}; expected mean or one of {}", self.method, tags.join(", "))
        })
    }

    /// The configured method with its single parameter setting.
    pub fn method_config(&self) -> Result<MethodConfig> {
        let pen = self.penalty()?;
        Ok(match self.method()? {
            Method::RcmRows => MethodConfig::RcmRows { q: pen.q_row, rho: pen.rho_row },
            Method::RcmCols => MethodConfig::RcmCols { q: pen.q_col, rho: pen.rho_col },
            Method::TrcmMcecm => MethodConfig::TrcmMcecm { penalty: pen },
            Method::TrcmOnestep => MethodConfig::TrcmOnestep { penalty: pen },
            Method::Svd => MethodConfig::Svd { rank: self.rank },
            Method::Knn => MethodConfig::Knn { k: self.k },
            Method::MeanCols => MethodConfig::Mean { axis: MeanAxis::Cols },
            Method::MeanRows => MethodConfig::Mean { axis: MeanAxis::Rows },
            Method::MeanAdditive => MethodConfig::Mean { axis: MeanAxis::Additive },
        })
    }
}
