//! One-step transposable imputation: average two single-covariance EM
//! completions, fit the transposable model to the averaged matrix with the
//! missing cells held fixed, then take conditional expectations under that
//! fit by alternating sweeps.

use crate::error::Result;
use crate::estimation::{estimate_means, trcm_fit};
use crate::model::{MaskedMatrix, PenaltySpec, TrcmModel};
use crate::scalar::Real;

use super::ace::ace_outcome;
use super::rcm_impute::{rcm_impute, Axis};
use super::report::{Candidate, ImputationReport, Method};
use super::ImputeOptions;

/// Label of the candidate completion from the column-covariance EM.
pub const CANDIDATE_COLS: &str = "rcm-cols";
/// Label of the candidate completion from the row-covariance EM.
pub const CANDIDATE_ROWS: &str = "rcm-rows";
/// Label of the final transposable completion.
pub const CANDIDATE_TRCM: &str = "trcm";

pub fn trcm_impute_onestep<T: Real>(
    x: &MaskedMatrix<T>,
    pen: &PenaltySpec,
    opts: &ImputeOptions,
) -> Result<ImputationReport<T>> {
    opts.validate()?;
    let by_cols = rcm_impute(x, pen.rho_col, pen.q_col, Axis::Cols, opts)?;
    let by_rows = rcm_impute(x, pen.rho_row, pen.q_row, Axis::Rows, opts)?;
    onestep_from_marginals(x, &by_cols, &by_rows, pen, opts)
}

/// The transposable steps of [`trcm_impute_onestep`] given the two marginal
/// EM results (column-covariance run first), so callers scanning a penalty
/// grid can reuse marginal fits.
pub fn onestep_from_marginals<T: Real>(
    x: &MaskedMatrix<T>,
    by_cols: &ImputationReport<T>,
    by_rows: &ImputationReport<T>,
    pen: &PenaltySpec,
    opts: &ImputeOptions,
) -> Result<ImputationReport<T>> {
    let half = T::lit(0.5);
    let mut averaged = x.raw_values().clone();
    for (i, j) in x.missing_cells() {
        averaged[(i, j)] = half * (by_cols.completed[(i, j)] + by_rows.completed[(i, j)]);
    }
    let fixed = MaskedMatrix::complete(averaged)?;
    let means = estimate_means(&fixed, &opts.solver)?;
    let fit = trcm_fit(&(fixed.raw_values() - means.mean_matrix()), pen, &opts.solver)?;
    let model = TrcmModel::new(means, fit.covs)?;
    let ace = ace_outcome(x, &model, opts)?;

    let mut notes = Vec::new();
    for (label, r) in [(CANDIDATE_COLS, by_cols), (CANDIDATE_ROWS, by_rows)] {
        if !r.converged {
            notes.push(format!("{label} EM stopped at the iteration cap"));
        }
    }
    if !fit.converged {
        notes.push("covariance fit stopped at the iteration cap".into());
    }
    if !ace.converged {
        notes.push(format!("conditional expectation sweeps stopped at the cap (last change {})", ace.residual));
    }
    let mut report = ImputationReport::basic(ace.completed.clone(), Method::TrcmOnestep);
    report.converged = by_cols.converged && by_rows.converged && fit.converged && ace.converged;
    report.model = Some(model);
    report.penalty = Some(*pen);
    // closed-form fits record only their final objective
    let objectives: Vec<f64> = fit.trace.iter().map(|v| v.to_f64_lossy()).collect();
    match objectives.split_first() {
        Some((first, rest)) if !rest.is_empty() => {
            report.initial_objective = Some(*first);
            report.trace = rest.to_vec();
        }
        _ => report.trace = objectives,
    }
    report.iterations = report.trace.len();
    report.candidates = vec![
        Candidate { label: CANDIDATE_COLS.into(), completed: by_cols.completed.clone() },
        Candidate { label: CANDIDATE_ROWS.into(), completed: by_rows.completed.clone() },
        Candidate { label: CANDIDATE_TRCM.into(), completed: ace.completed },
    ];
    notes.push(format!("conditional expectations took {} sweeps", ace.sweeps));
    report.notes = notes;
    Ok(report)
}
