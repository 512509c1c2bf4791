use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MaskedMatrix;
use crate::scalar::Real;

/// Errors of a completion over held-out cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    /// `|completed − truth|` per held-out cell, in the order given.
    pub abs_errors: Vec<f64>,
}

pub fn score_cells<T: Real>(completed: &DMatrix<T>, truth: &DMatrix<T>, cells: &[(usize, usize)]) -> Result<Score> {
    if completed.shape() != truth.shape() {
        return Err(Error::Dimension(format!("completion is {:?}, truth is {:?}", completed.shape(), truth.shape())));
    }
    if cells.is_empty() {
        return Err(Error::InvalidArgument("no held-out cells to score".into()));
    }
    let abs_errors: Vec<f64> =
        cells.iter().map(|&(i, j)| (completed[(i, j)] - truth[(i, j)]).abs().to_f64_lossy()).collect();
    let k = abs_errors.len() as f64;
    let mse = abs_errors.iter().map(|e| e * e).sum::<f64>() / k;
    let mae = abs_errors.iter().sum::<f64>() / k;
    Ok(Score { mse, rmse: mse.sqrt(), mae, abs_errors })
}

/// Scores `completed` against `truth` on the cells missing from `masked`.
pub fn score<T: Real>(completed: &DMatrix<T>, truth: &DMatrix<T>, masked: &MaskedMatrix<T>) -> Result<Score> {
    score_cells(completed, truth, &masked.missing_cells())
}
