use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::model::{MaskedMatrix, PenaltySpec, TrcmModel};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "rcm-rows")]
    RcmRows,
    #[serde(rename = "rcm-cols")]
    RcmCols,
    #[serde(rename = "trcm-mcecm")]
    TrcmMcecm,
    #[serde(rename = "trcm-onestep")]
    TrcmOnestep,
    #[serde(rename = "svd")]
    Svd,
    #[serde(rename = "knn")]
    Knn,
    #[serde(rename = "mean-cols")]
    MeanCols,
    #[serde(rename = "mean-rows")]
    MeanRows,
    #[serde(rename = "mean-additive")]
    MeanAdditive,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::RcmRows,
        Method::RcmCols,
        Method::TrcmMcecm,
        Method::TrcmOnestep,
        Method::Svd,
        Method::Knn,
        Method::MeanCols,
        Method::MeanRows,
        Method::MeanAdditive,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::RcmRows => "rcm-rows",
            Method::RcmCols => "rcm-cols",
            Method::TrcmMcecm => "trcm-mcecm",
            Method::TrcmOnestep => "trcm-onestep",
            Method::Svd => "svd",
            Method::Knn => "knn",
            Method::MeanCols => "mean-cols",
            Method::MeanRows => "mean-rows",
            Method::MeanAdditive => "mean-additive",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.tag() == tag)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// One of several completions produced by a single run.
#[derive(Clone, Debug)]
pub struct Candidate<T: Real> {
    pub label: String,
    pub completed: DMatrix<T>,
}

#[derive(Clone, Debug)]
pub struct ImputationReport<T: Real> {
    /// Input values on observed cells, imputations elsewhere.
    pub completed: DMatrix<T>,
    pub model: Option<TrcmModel<T>>,
    pub method: Method,
    pub penalty: Option<PenaltySpec>,
    pub rank: Option<usize>,
    pub k: Option<usize>,
    /// Objective after each iteration (EM, MCECM) or of the final fit.
    pub trace: Vec<f64>,
    /// Objective at the starting point, before the first iteration.
    pub initial_objective: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub candidates: Vec<Candidate<T>>,
    /// Non-fatal conditions met during the run.
    pub notes: Vec<String>,
}

impl<T: Real> ImputationReport<T> {
    pub(crate) fn basic(completed: DMatrix<T>, method: Method) -> Self {
        Self {
            completed,
            model: None,
            method,
            penalty: None,
            rank: None,
            k: None,
            trace: Vec::new(),
            initial_objective: None,
            iterations: 0,
            converged: true,
            candidates: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// True when the completion equals `x` exactly on every observed cell.
    pub fn preserves_observed(&self, x: &MaskedMatrix<T>) -> bool {
        x.shape() == self.completed.shape()
            && x.observed_cells().into_iter().all(|(i, j)| Some(self.completed[(i, j)]) == x.get(i, j))
    }

    pub fn candidate(&self, label: &str) -> Option<&DMatrix<T>> {
        self.candidates.iter().find(|c| c.label == label).map(|c| &c.completed)
    }
}
