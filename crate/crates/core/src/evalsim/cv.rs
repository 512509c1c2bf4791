use std::cmp::Ordering;
use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::missing::MASK_RETRIES;
use super::score::score_cells;
use crate::baselines::{knn_impute, mean_impute, svd_impute, BaselineOptions, MeanAxis};
use crate::error::{Error, Result};
use crate::imputation::{
    onestep_from_marginals, rcm_impute, trcm_impute_mcecm, trcm_impute_onestep, Axis, ImputationReport, ImputeOptions,
    Method, CANDIDATE_COLS, CANDIDATE_ROWS, CANDIDATE_TRCM,
};
use crate::model::{MaskedMatrix, Norm, PenaltySpec};
use crate::scalar::Real;

/// Tolerances for every method an evaluation may run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub impute: ImputeOptions,
    pub baseline: BaselineOptions,
}

/// A fully parameterized imputation method.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum MethodConfig {
    RcmRows { q: Norm, rho: f64 },
    RcmCols { q: Norm, rho: f64 },
    TrcmMcecm { penalty: PenaltySpec },
    TrcmOnestep { penalty: PenaltySpec },
    Svd { rank: usize },
    Knn { k: usize },
    Mean { axis: MeanAxis },
}

impl MethodConfig {
    pub fn method(&self) -> Method {
        match self {
            MethodConfig::RcmRows { .. } => Method::RcmRows,
            MethodConfig::RcmCols { .. } => Method::RcmCols,
            MethodConfig::TrcmMcecm { .. } => Method::TrcmMcecm,
            MethodConfig::TrcmOnestep { .. } => Method::TrcmOnestep,
            MethodConfig::Svd { .. } => Method::Svd,
            MethodConfig::Knn { .. } => Method::Knn,
            MethodConfig::Mean { axis: MeanAxis::Cols } => Method::MeanCols,
            MethodConfig::Mean { axis: MeanAxis::Rows } => Method::MeanRows,
            MethodConfig::Mean { axis: MeanAxis::Additive } => Method::MeanAdditive,
        }
    }

    pub fn run<T: Real>(&self, x: &MaskedMatrix<T>, opts: &EvalOptions) -> Result<ImputationReport<T>> {
        match *self {
            MethodConfig::RcmRows { q, rho } => rcm_impute(x, rho, q, Axis::Rows, &opts.impute),
            MethodConfig::RcmCols { q, rho } => rcm_impute(x, rho, q, Axis::Cols, &opts.impute),
            MethodConfig::TrcmMcecm { penalty } => trcm_impute_mcecm(x, &penalty, &opts.impute),
            MethodConfig::TrcmOnestep { penalty } => trcm_impute_onestep(x, &penalty, &opts.impute),
            MethodConfig::Svd { rank } => svd_impute(x, rank, &opts.baseline),
            MethodConfig::Knn { k } => knn_impute(x, k, &opts.baseline),
            MethodConfig::Mean { axis } => mean_impute(x, axis),
        }
    }

    /// Smaller is simpler: heavier penalties, lower ranks, fewer neighbors.
    fn complexity(&self) -> f64 {
        match *self {
            MethodConfig::RcmRows { rho, .. } | MethodConfig::RcmCols { rho, .. } => -rho,
            MethodConfig::TrcmMcecm { penalty } | MethodConfig::TrcmOnestep { penalty } => {
                -(penalty.rho_row + penalty.rho_col)
            }
            MethodConfig::Svd { rank } => rank as f64,
            MethodConfig::Knn { k } => k as f64,
            MethodConfig::Mean { .. } => 0.0,
        }
    }
}

/// Training matrix with one fold of observed cells hidden.
#[derive(Clone, Debug)]
pub struct Fold<T: Real> {
    pub train: MaskedMatrix<T>,
    pub held_out: Vec<(usize, usize)>,
}

/// Splits the observed cells of `x` into `folds` disjoint random groups of
/// near-equal size. The whole split is redrawn when hiding some group would
/// empty a row or column.
pub fn fold_partition<T: Real>(x: &MaskedMatrix<T>, folds: usize, seed: u64) -> Result<Vec<Fold<T>>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    let observed = x.observed_cells();
    if observed.len() < folds {
        return Err(Error::InvalidArgument(format!("{} observed cells cannot fill {folds} folds", observed.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'attempt: for _ in 0..MASK_RETRIES {
        let mut cells = observed.clone();
        cells.shuffle(&mut rng);
        let mut out = Vec::with_capacity(folds);
        for f in 0..folds {
            let mut held_out: Vec<(usize, usize)> = cells.iter().skip(f).step_by(folds).copied().collect();
            held_out.sort_by_key(|&(i, j)| (j, i));
            match x.hide(&held_out) {
                Ok(train) => out.push(Fold { train, held_out }),
                Err(Error::EmptyRow(_) | Error::EmptyColumn(_)) => continue 'attempt,
                Err(e) => return Err(e),
            }
        }
        return Ok(out);
    }
    Err(Error::MaskRetries(MASK_RETRIES))
}

/// Held-out error of one grid point across folds.
#[derive(Clone, Debug, Serialize)]
pub struct CvRow<P> {
    pub point: P,
    /// Per-fold MSE, `None` where the method failed.
    pub fold_mse: Vec<Option<f64>>,
    /// Mean over folds, or `None` when any fold failed.
    pub mean_mse: Option<f64>,
    pub failures: Vec<String>,
}

impl<P> CvRow<P> {
    fn new(point: P, results: Vec<Result<f64>>) -> Self {
        let failures: Vec<String> = results.iter().filter_map(|r| r.as_ref().err().map(|e| e.to_string())).collect();
        let fold_mse: Vec<Option<f64>> = results.into_iter().map(|r| r.ok()).collect();
        let mean_mse = if failures.is_empty() {
            Some(fold_mse.iter().flatten().sum::<f64>() / fold_mse.len() as f64)
        } else {
            None
        };
        Self { point, fold_mse, mean_mse, failures }
    }
}

/// Index of the row with the lowest mean error, ties to the lower key.
fn argmin<P>(rows: &[CvRow<P>], key: impl Fn(&P) -> f64) -> Option<usize> {
    rows.iter()
        .enumerate()
        .filter_map(|(i, r)| r.mean_mse.filter(|m| m.is_finite()).map(|m| (i, m, key(&r.point))))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal).then(a.2.total_cmp(&b.2)).then(a.0.cmp(&b.0)))
        .map(|(i, _, _)| i)
}

#[derive(Clone, Debug, Serialize)]
pub struct CvResult {
    pub best: MethodConfig,
    pub best_index: usize,
    pub folds: usize,
    pub rows: Vec<CvRow<MethodConfig>>,
}

fn fold_error<T: Real>(fold: &Fold<T>, truth: &MaskedMatrix<T>, completed: &nalgebra::DMatrix<T>) -> Result<f64> {
    score_cells(completed, truth.raw_values(), &fold.held_out).map(|s| s.mse)
}

/// Entry-wise K-fold cross-validation over a grid of method settings.
///
/// Each fold is hidden in turn, every grid point imputes the remaining
/// matrix, and the held-out MSE is averaged over folds. The grid point with
/// the lowest mean error wins; exact ties go to the simpler setting.
pub fn cross_validate<T: Real>(
    x: &MaskedMatrix<T>,
    grid: &[MethodConfig],
    folds: usize,
    seed: u64,
    opts: &EvalOptions,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("cross-validation grid is empty".into()));
    }
    let parts = fold_partition(x, folds, seed)?;
    let rows: Vec<CvRow<MethodConfig>> = grid
        .par_iter()
        .map(|point| {
            let results = parts
                .iter()
                .map(|fold| point.run(&fold.train, opts).and_then(|r| fold_error(fold, x, &r.completed)))
                .collect();
            CvRow::new(*point, results)
        })
        .collect();
    let best_index = argmin(&rows, MethodConfig::complexity)
        .ok_or_else(|| Error::Numerical(format!("every grid point failed: {}", rows[0].failures.join("; "))))?;
    Ok(CvResult { best: rows[best_index].point, best_index, folds, rows })
}

/// Cross-validates and then refits the winning setting on all of `x`.
pub fn fit_with_cv<T: Real>(
    x: &MaskedMatrix<T>,
    grid: &[MethodConfig],
    folds: usize,
    seed: u64,
    opts: &EvalOptions,
) -> Result<(CvResult, ImputationReport<T>)> {
    let cv = cross_validate(x, grid, folds, seed, opts)?;
    let report = cv.best.run(x, opts)?;
    Ok((cv, report))
}

/// One candidate of the one-step imputer at one penalty.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OnestepPoint {
    pub candidate: &'static str,
    pub penalty: PenaltySpec,
}

#[derive(Clone, Debug)]
pub struct OnestepSelection<T: Real> {
    /// One of the candidate labels of the one-step imputer.
    pub choice: &'static str,
    pub penalty: PenaltySpec,
    pub rows: Vec<CvRow<OnestepPoint>>,
    /// The full-data one-step run, with `completed` set to the chosen
    /// candidate.
    pub report: ImputationReport<T>,
}

impl<T: Real> OnestepSelection<T> {
    pub fn chose_marginal(&self) -> bool {
        self.choice != CANDIDATE_TRCM
    }
}

const CANDIDATES: [&str; 3] = [CANDIDATE_COLS, CANDIDATE_ROWS, CANDIDATE_TRCM];

type MarginalKey = (bool, Norm, u64);

/// Cross-validates the three completions of the one-step imputer over a
/// penalty grid and returns the best candidate refit on all of `x`.
///
/// Marginal EM fits depend on one axis' penalty only, so each is computed
/// once per fold and shared by every grid point using it.
pub fn select_onestep_model<T: Real>(
    x: &MaskedMatrix<T>,
    grid: &[PenaltySpec],
    folds: usize,
    seed: u64,
    opts: &EvalOptions,
) -> Result<OnestepSelection<T>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("penalty grid is empty".into()));
    }
    let parts = fold_partition(x, folds, seed)?;
    let mut keys: Vec<MarginalKey> = Vec::new();
    for pen in grid {
        for key in [(false, pen.q_col, pen.rho_col.to_bits()), (true, pen.q_row, pen.rho_row.to_bits())] {
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
    }
    let run_marginal = |train: &MaskedMatrix<T>, &(rows, q, rho): &MarginalKey| {
        let axis = if rows { Axis::Rows } else { Axis::Cols };
        rcm_impute(train, f64::from_bits(rho), q, axis, &opts.impute)
    };

    // fold × grid × candidate errors
    let per_fold: Vec<Vec<[Result<f64>; 3]>> = parts
        .par_iter()
        .map(|fold| {
            let marginals: HashMap<MarginalKey, Result<ImputationReport<T>>> =
                keys.iter().map(|k| (*k, run_marginal(&fold.train, k))).collect();
            grid.iter()
                .map(|pen| {
                    let cols = &marginals[&(false, pen.q_col, pen.rho_col.to_bits())];
                    let rows = &marginals[&(true, pen.q_row, pen.rho_row.to_bits())];
                    let err_of = |r: &Result<ImputationReport<T>>| -> Result<f64> {
                        match r {
                            Ok(r) => fold_error(fold, x, &r.completed),
                            Err(e) => Err(Error::Numerical(e.to_string())),
                        }
                    };
                    let trcm = match (cols, rows) {
                        (Ok(c), Ok(r)) => onestep_from_marginals(&fold.train, c, r, pen, &opts.impute)
                            .and_then(|o| fold_error(fold, x, &o.completed)),
                        (Err(e), _) | (_, Err(e)) => Err(Error::Numerical(e.to_string())),
                    };
                    [err_of(cols), err_of(rows), trcm]
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(grid.len() * 3);
    for (g, pen) in grid.iter().enumerate() {
        for (c, &candidate) in CANDIDATES.iter().enumerate() {
            let results = per_fold
                .iter()
                .map(|f| match &f[g][c] {
                    Ok(v) => Ok(*v),
                    Err(e) => Err(Error::Numerical(e.to_string())),
                })
                .collect();
            rows.push(CvRow::new(OnestepPoint { candidate, penalty: *pen }, results));
        }
    }
    let best = argmin(&rows, |p: &OnestepPoint| -(p.penalty.rho_row + p.penalty.rho_col))
        .ok_or_else(|| Error::Numerical(format!("every one-step candidate failed: {}", rows[0].failures.join("; "))))?;
    let OnestepPoint { candidate: choice, penalty } = rows[best].point.clone();
    let mut report = trcm_impute_onestep(x, &penalty, &opts.impute)?;
    report.completed = report.candidate(choice).expect("one-step reports carry every candidate").clone();
    report.notes.push(format!("cross-validation selected the {choice} candidate"));
    Ok(OnestepSelection { choice, penalty, rows, report })
}
