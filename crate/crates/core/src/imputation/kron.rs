//! Conditional moments of the missing cells by dense conditioning of
//! `vec(X) ~ N(vec(M), Δ⊗Σ)`. Exact but quadratic in `np` for memory, so
//! guarded by a size cap; used as the reference the structured routes are
//! checked against.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linalg::gaussian_condition;
use crate::model::{vec_form_with_cap, MaskedMatrix, TrcmModel, DEFAULT_VEC_CAP};
use crate::scalar::Real;

fn condition<T: Real>(x: &MaskedMatrix<T>, model: &TrcmModel<T>, cap: usize) -> Result<(DVector<T>, DMatrix<T>)> {
    model.check_shape(x.shape())?;
    let n = x.nrows();
    let (mean, cov) = vec_form_with_cap(model, cap)?;
    let target: Vec<usize> = x.missing_cells().iter().map(|&(i, j)| j * n + i).collect();
    let observed = x.observed_cells();
    let given: Vec<usize> = observed.iter().map(|&(i, j)| j * n + i).collect();
    let value = DVector::from_iterator(observed.len(), observed.iter().map(|&(i, j)| x.raw_values()[(i, j)]));
    gaussian_condition(&mean, &cov, &target, &given, &value)
}

/// `E(X_m | X_o)` in the missing cells, observed values passed through.
pub fn kron_conditional_expectation<T: Real>(x: &MaskedMatrix<T>, model: &TrcmModel<T>) -> Result<DMatrix<T>> {
    kron_conditional_expectation_with_cap(x, model, DEFAULT_VEC_CAP)
}

pub fn kron_conditional_expectation_with_cap<T: Real>(
    x: &MaskedMatrix<T>,
    model: &TrcmModel<T>,
    cap: usize,
) -> Result<DMatrix<T>> {
    let mut out = x.raw_values().clone();
    if x.is_complete() {
        return Ok(out);
    }
    let (mean, _) = condition(x, model, cap)?;
    for (k, (i, j)) in x.missing_cells().into_iter().enumerate() {
        out[(i, j)] = mean[k];
    }
    Ok(out)
}

/// `Cov(X_m | X_o)`, rows and columns in [`MaskedMatrix::missing_cells`]
/// order.
pub fn kron_conditional_covariance<T: Real>(x: &MaskedMatrix<T>, model: &TrcmModel<T>) -> Result<DMatrix<T>> {
    if x.is_complete() {
        return Ok(DMatrix::zeros(0, 0));
    }
    Ok(condition(x, model, DEFAULT_VEC_CAP)?.1)
}
