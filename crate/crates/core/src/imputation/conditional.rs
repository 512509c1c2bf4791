//! Conditional distribution of the missing cells of one row (or column)
//! given the rest of the matrix, computed in two steps without forming
//! `Δ⊗Σ`: first the row given all other rows, `N(ψ, γΔ)`, then that
//! `p`-variate normal given the observed cells of the row.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{submatrix, symmetrize};
use crate::model::{MaskedMatrix, TrcmModel};
use crate::scalar::Real;

/// Conditional distribution of the missing cells of one row (or column).
#[derive(Clone, Debug)]
pub struct RowConditional<T: Real> {
    pub index: usize,
    /// Mean of the whole row given every other row.
    pub psi: DVector<T>,
    /// `γΔ`: covariance of the whole row given every other row.
    pub gamma: DMatrix<T>,
    /// The scalar Schur complement `γ = Σ_ii − Σ_{i,k}Σ_{k,k}⁻¹Σ_{k,i}`.
    pub gamma_scale: T,
    pub missing: Vec<usize>,
    pub observed: Vec<usize>,
    /// Mean of the missing cells given everything else.
    pub mean: DVector<T>,
    /// Covariance of the missing cells given everything else.
    pub cov: DMatrix<T>,
}

/// Maps the observed-cell residual of one line to the conditional mean
/// residual of its missing cells under `N(0, cΘ⁻¹)` for any `c > 0`:
/// `r_m = gain · r_o`. Uses the cheaper of the precision route
/// (`−Θ_mm⁻¹Θ_mo`, a `|m|`-sized solve) and the covariance route
/// (`C_mo C_oo⁻¹`, an `|o|`-sized solve). Also returns `(Θ_mm)⁻¹`, the
/// conditional covariance for `c = 1`.
pub(crate) fn line_gain<T: Real>(
    cov: &DMatrix<T>,
    prec: &DMatrix<T>,
    missing: &[usize],
    observed: &[usize],
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let singular = || Error::Numerical("conditioning block is singular".into());
    if missing.len() <= observed.len() {
        let chol = Cholesky::new(submatrix(prec, missing, missing)).ok_or_else(singular)?;
        let gain = -chol.solve(&submatrix(prec, missing, observed));
        Ok((gain, symmetrize(&chol.inverse())))
    } else {
        let c_mo = submatrix(cov, missing, observed);
        let chol = Cholesky::new(submatrix(cov, observed, observed)).ok_or_else(singular)?;
        // C_mo C_oo⁻¹ = (C_oo⁻¹ C_om)ᵀ
        let gain = chol.solve(&c_mo.transpose()).transpose();
        let schur = submatrix(cov, missing, missing) - &gain * c_mo.transpose();
        Ok((gain, symmetrize(&schur)))
    }
}

/// Conditional distribution of the missing cells of row `i` given every
/// other cell, where `current` supplies the values of all other rows
/// (observed or previously imputed) and the observed cells of row `i`.
///
/// Step one uses the precision `P = Σ⁻¹`: the regression weights of row `i`
/// on the other rows are `−P_ik/P_ii` and `γ = 1/P_ii`.
pub fn row_conditional<T: Real>(
    current: &DMatrix<T>,
    x: &MaskedMatrix<T>,
    model: &TrcmModel<T>,
    i: usize,
) -> Result<RowConditional<T>> {
    model.check_shape(x.shape())?;
    if current.shape() != x.shape() {
        return Err(Error::Dimension("current values must match the data shape".into()));
    }
    if i >= x.nrows() {
        return Err(Error::InvalidArgument(format!("row {i} out of range")));
    }
    let p = x.ncols();
    let missing = x.row_missing(i).to_vec();
    let observed = x.row_observed(i).to_vec();
    let m = model.mean_matrix();
    let prec = model.covs.sigma_inv();
    let pii = prec[(i, i)];
    let gamma_scale = T::one() / pii;
    let resid = current - &m;
    let mut psi_res = DVector::<T>::zeros(p);
    for k in (0..x.nrows()).filter(|&k| k != i) {
        let w = -prec[(i, k)] / pii;
        if w != T::zero() {
            psi_res += resid.row(k).transpose() * w;
        }
    }
    let psi = DVector::from_fn(p, |j, _| m[(i, j)] + psi_res[j]);
    let gamma = model.covs.delta() * gamma_scale;
    if missing.is_empty() {
        return Ok(RowConditional {
            index: i,
            psi,
            gamma,
            gamma_scale,
            missing,
            observed,
            mean: DVector::zeros(0),
            cov: DMatrix::zeros(0, 0),
        });
    }
    let (gain, unit_cov) = line_gain(model.covs.delta(), model.covs.delta_inv(), &missing, &observed)?;
    let r_o = DVector::from_fn(observed.len(), |a, _| resid[(i, observed[a])] - psi_res[observed[a]]);
    let shift = &gain * r_o;
    let mean = DVector::from_fn(missing.len(), |a, _| psi[missing[a]] + shift[a]);
    let cov = unit_cov * gamma_scale;
    Ok(RowConditional { index: i, psi, gamma, gamma_scale, missing, observed, mean, cov })
}

/// Column counterpart of [`row_conditional`], with the roles of `Σ` and `Δ`
/// exchanged.
pub fn col_conditional<T: Real>(
    current: &DMatrix<T>,
    x: &MaskedMatrix<T>,
    model: &TrcmModel<T>,
    j: usize,
) -> Result<RowConditional<T>> {
    row_conditional(&current.transpose(), &x.transpose(), &model.transpose(), j)
}
