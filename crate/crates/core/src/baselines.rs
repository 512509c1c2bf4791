//! Comparison imputers: iterative low-rank SVD with a column mean effect,
//! correlation-based nearest neighbors, and mean fill.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{estimate_means, SolverOptions};
use crate::imputation::{ImputationReport, Method};
use crate::model::MaskedMatrix;
use crate::scalar::Real;

/// How neighbor values are combined in [`knn_impute`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnWeighting {
    /// Weight each neighbor by the absolute value of its correlation.
    AbsCorrelation,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineOptions {
    /// Max-abs change of the imputed cells that ends the SVD iteration.
    pub svd_rel_tol: f64,
    pub svd_max_iters: usize,
    /// Fewest co-observed columns for a valid row correlation.
    pub knn_min_overlap: usize,
    pub knn_weighting: KnnWeighting,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self { svd_rel_tol: 1e-6, svd_max_iters: 500, knn_min_overlap: 2, knn_weighting: KnnWeighting::AbsCorrelation }
    }
}

/// Which means [`mean_impute`] fills with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanAxis {
    Cols,
    Rows,
    /// The additive fit `ν_i + μ_j` to the observed cells.
    Additive,
}

fn observed_col_means<T: Real>(x: &MaskedMatrix<T>) -> DVector<T> {
    let v = x.raw_values();
    DVector::from_fn(x.ncols(), |j, _| {
        let obs = x.col_observed(j);
        obs.iter().fold(T::zero(), |a, &i| a + v[(i, j)]) / T::from_usize_lossy(obs.len())
    })
}

fn observed_row_means<T: Real>(x: &MaskedMatrix<T>) -> DVector<T> {
    let v = x.raw_values();
    DVector::from_fn(x.nrows(), |i, _| {
        let obs = x.row_observed(i);
        obs.iter().fold(T::zero(), |a, &j| a + v[(i, j)]) / T::from_usize_lossy(obs.len())
    })
}

/// Rank-`k` reconstruction of `c` from its leading singular triplets.
fn truncated<T: Real>(c: &DMatrix<T>, rank: usize) -> DMatrix<T> {
    let svd = c.clone().svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let u = svd.u.as_ref().expect("left vectors requested");
    let vt = svd.v_t.as_ref().expect("right vectors requested");
    let mut out = DMatrix::zeros(c.nrows(), c.ncols());
    for &k in order.iter().take(rank) {
        out += u.column(k) * vt.row(k) * svd.singular_values[k];
    }
    out
}

/// Iterative rank-`k` SVD imputation with a column mean effect.
///
/// Missing cells start at their column means. Each iteration centers the
/// columns of the current completion, reconstructs it from the top `rank`
/// singular triplets (no shrinkage), and refills the missing cells from the
/// reconstruction plus the column means, until no missing cell moves by
/// more than `opts.svd_rel_tol`. The per-iteration change is the trace.
pub fn svd_impute<T: Real>(x: &MaskedMatrix<T>, rank: usize, opts: &BaselineOptions) -> Result<ImputationReport<T>> {
    let (n, p) = x.shape();
    if rank == 0 || rank > n.min(p) {
        return Err(Error::InvalidArgument(format!("rank must be in 1..={}, got {rank}", n.min(p))));
    }
    let means = observed_col_means(x);
    let mut current = x.fill_with(&DMatrix::from_fn(n, p, |_, j| means[j]));
    let mut report = ImputationReport::basic(current.clone(), Method::Svd);
    report.rank = Some(rank);
    if x.is_complete() {
        return Ok(report);
    }
    let cells = x.missing_cells();
    let tol = T::lit(opts.svd_rel_tol);
    report.converged = false;
    for it in 1..=opts.svd_max_iters {
        let col_means = current.row_mean();
        let mut centered = current.clone();
        for mut row in centered.row_iter_mut() {
            row -= &col_means;
        }
        let recon = truncated(&centered, rank);
        let mut change = T::zero();
        for &(i, j) in &cells {
            let new = recon[(i, j)] + col_means[j];
            change = change.max((new - current[(i, j)]).abs());
            current[(i, j)] = new;
        }
        report.trace.push(change.to_f64_lossy());
        report.iterations = it;
        if change < tol {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        report.notes.push(format!("SVD iteration stopped at the cap with change {:e}", report.trace.last().unwrap()));
    }
    report.completed = current;
    Ok(report)
}

/// Pearson correlation of two rows over their co-observed columns, or `None`
/// with fewer than `min_overlap` such columns or zero variance.
fn pairwise_correlation<T: Real>(
    x: &MaskedMatrix<T>,
    centered: &DMatrix<T>,
    a: usize,
    b: usize,
    min_overlap: usize,
) -> Option<T> {
    let cols: Vec<usize> = x.row_observed(a).iter().copied().filter(|&j| x.is_observed(b, j)).collect();
    if cols.len() < min_overlap.max(2) {
        return None;
    }
    let k = T::from_usize_lossy(cols.len());
    let ma = cols.iter().fold(T::zero(), |s, &j| s + centered[(a, j)]) / k;
    let mb = cols.iter().fold(T::zero(), |s, &j| s + centered[(b, j)]) / k;
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for &j in &cols {
        let (da, db) = (centered[(a, j)] - ma, centered[(b, j)] - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    let denom = (saa * sbb).sqrt();
    if !(denom > T::zero()) {
        return None;
    }
    Some(sab / denom)
}

/// Nearest-neighbor imputation over rows ranked by pairwise-complete
/// correlation.
///
/// Column means over observed cells are removed first. A missing cell
/// `(i, j)` gets the weighted average of the centered values in column `j`
/// of the `k` rows with largest `|corr(i, ·)|` that observe `j` (ties go to
/// the lower row index), plus the column mean. Cells with no valid neighbor
/// get the column mean; their count is recorded in the report notes.
pub fn knn_impute<T: Real>(x: &MaskedMatrix<T>, k: usize, opts: &BaselineOptions) -> Result<ImputationReport<T>> {
    let (n, p) = x.shape();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!("k must be in 1..{n}, got {k}")));
    }
    let means = observed_col_means(x);
    let centered = x.fill_with(&DMatrix::from_fn(n, p, |_, j| means[j])) - DMatrix::from_fn(n, p, |_, j| means[j]);
    let mut completed = x.raw_values().clone();
    let mut fallbacks = 0usize;
    for i in (0..n).filter(|&i| !x.row_missing(i).is_empty()) {
        let mut corr: Vec<(usize, T)> = (0..n)
            .filter(|&l| l != i)
            .filter_map(|l| pairwise_correlation(x, &centered, i, l, opts.knn_min_overlap).map(|c| (l, c)))
            .collect();
        // stable sort keeps ascending row index among equal |corr|
        corr.sort_by(|a, b| b.1.abs().partial_cmp(&a.1.abs()).unwrap());
        for &j in x.row_missing(i) {
            let neighbors: Vec<(usize, T)> = corr.iter().copied().filter(|&(l, _)| x.is_observed(l, j)).take(k).collect();
            if neighbors.is_empty() {
                fallbacks += 1;
                completed[(i, j)] = means[j];
                continue;
            }
            let weight = |c: T| match opts.knn_weighting {
                KnnWeighting::AbsCorrelation => c.abs(),
                KnnWeighting::Uniform => T::one(),
            };
            let mut total = neighbors.iter().fold(T::zero(), |s, &(_, c)| s + weight(c));
            let uniform = !(total > T::zero());
            if uniform {
                total = T::from_usize_lossy(neighbors.len());
            }
            let sum = neighbors
                .iter()
                .fold(T::zero(), |s, &(l, c)| s + if uniform { T::one() } else { weight(c) } * centered[(l, j)]);
            completed[(i, j)] = sum / total + means[j];
        }
    }
    let mut report = ImputationReport::basic(completed, Method::Knn);
    report.k = Some(k);
    if fallbacks > 0 {
        report.notes.push(format!("{fallbacks} cells had no valid neighbor and were filled with the column mean"));
    }
    Ok(report)
}

/// Fills missing cells with column means, row means, or the additive fit.
pub fn mean_impute<T: Real>(x: &MaskedMatrix<T>, axis: MeanAxis) -> Result<ImputationReport<T>> {
    let (n, p) = x.shape();
    let (fill, method) = match axis {
        MeanAxis::Cols => {
            let m = observed_col_means(x);
            (DMatrix::from_fn(n, p, |_, j| m[j]), Method::MeanCols)
        }
        MeanAxis::Rows => {
            let m = observed_row_means(x);
            (DMatrix::from_fn(n, p, |i, _| m[i]), Method::MeanRows)
        }
        MeanAxis::Additive => (estimate_means(x, &SolverOptions::default())?.mean_matrix(), Method::MeanAdditive),
    };
    Ok(ImputationReport::basic(x.fill_with(&fill), method))
}
