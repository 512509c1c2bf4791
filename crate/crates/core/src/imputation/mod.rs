//! Imputation of missing entries: single-covariance EM, the transposable
//! MCECM algorithm, and the one-step approximation built on alternating
//! conditional expectations.

mod ace;
mod conditional;
mod estep;
mod kron;
mod mcecm;
mod onestep;
mod rcm_impute;
mod report;

use serde::{Deserialize, Serialize};

use crate::estimation::SolverOptions;
use crate::model::DEFAULT_VEC_CAP;

pub use ace::{ace_expectation, ace_outcome, AceOutcome};
pub use conditional::{col_conditional, row_conditional, RowConditional};
pub use estep::{correction_f, correction_g, e_step, EStepResult, EStepRoute};
pub use kron::{kron_conditional_covariance, kron_conditional_expectation, kron_conditional_expectation_with_cap};
pub use mcecm::trcm_impute_mcecm;
pub use onestep::{onestep_from_marginals, trcm_impute_onestep, CANDIDATE_COLS, CANDIDATE_ROWS, CANDIDATE_TRCM};
pub use rcm_impute::{rcm_impute, Axis};
pub use report::{Candidate, ImputationReport, Method};

/// How the MCECM covariances are initialized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McecmInit {
    /// Penalized MLE of the matrix with missing cells fixed at `ν_i + μ_j`.
    FixedMle,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputeOptions {
    pub solver: SolverOptions,
    /// Relative change of the observed penalized log-likelihood that ends
    /// the EM and MCECM loops.
    pub em_rel_tol: f64,
    pub em_max_iters: usize,
    /// Max-abs change over a full sweep that ends alternating conditional
    /// expectations.
    pub ace_tol: f64,
    pub ace_max_sweeps: usize,
    pub estep_route: EStepRoute,
    /// Largest `np` for which `Δ⊗Σ` may be formed.
    pub vec_cap: usize,
    /// Largest number of missing cells whose joint conditional covariance
    /// the E-step will compute.
    pub cross_cap: usize,
    pub mcecm_init: McecmInit,
}

impl Default for ImputeOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            em_rel_tol: 1e-6,
            em_max_iters: 200,
            ace_tol: 1e-8,
            ace_max_sweeps: 1000,
            estep_route: EStepRoute::Precision,
            vec_cap: DEFAULT_VEC_CAP,
            cross_cap: 2000,
            mcecm_init: McecmInit::FixedMle,
        }
    }
}

impl ImputeOptions {
    pub fn validate(&self) -> crate::Result<()> {
        self.solver.validate()?;
        if !(self.em_rel_tol > 0.0 && self.ace_tol > 0.0) || self.em_max_iters == 0 || self.ace_max_sweeps == 0 {
            return Err(crate::Error::InvalidArgument("imputation tolerances must be positive and caps at least 1".into()));
        }
        Ok(())
    }
}
