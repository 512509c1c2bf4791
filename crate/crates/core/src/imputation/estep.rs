//! Conditional moments of the missing cells and the covariance corrections
//! that turn a completed matrix into expected sufficient statistics:
//!
//! `E[(X−M)ᵀΣ⁻¹(X−M)] = (X̂−M)ᵀΣ⁻¹(X̂−M) + G`, `G_jj' = Σ Cov(X_ij, X_i'j') Σ⁻¹_i'i`
//! `E[(X−M)Δ⁻¹(X−M)ᵀ] = (X̂−M)Δ⁻¹(X̂−M)ᵀ + F`, `F_ii' = Σ Cov(X_ij, X_i'j') Δ⁻¹_j'j`

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MaskedMatrix, TrcmModel};
use crate::scalar::Real;
use crate::structured::MissingBlock;

use super::ace::ace_expectation;
use super::kron::kron_conditional_expectation_with_cap;
use super::ImputeOptions;

/// How the E-step computes `X̂ = E(X | X_o)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EStepRoute {
    /// Alternating conditional expectations, to `ace_tol`.
    Ace,
    /// Dense conditioning of `vec(X)`; refused above `vec_cap`.
    Kronecker,
    /// Direct solve with the precision of the missing block.
    Precision,
}

#[derive(Clone, Debug)]
pub struct EStepResult<T: Real> {
    pub x_hat: DMatrix<T>,
    /// `p × p` correction for the column scatter.
    pub g_mat: DMatrix<T>,
    /// `n × n` correction for the row scatter.
    pub f_mat: DMatrix<T>,
    /// Missing cells, in the order used by `cond_cov`.
    pub cells: Vec<(usize, usize)>,
    /// `Cov(X_m | X_o)`.
    pub cond_cov: DMatrix<T>,
}

/// `G_jj' = Σ_{a=(i,j), b=(i',j')} C_ab Σ⁻¹_{i'i}` over pairs of missing cells.
pub fn correction_g<T: Real>(
    cells: &[(usize, usize)],
    cond_cov: &DMatrix<T>,
    sigma_inv: &DMatrix<T>,
    p: usize,
) -> DMatrix<T> {
    let mut g = DMatrix::zeros(p, p);
    for (a, &(ia, ja)) in cells.iter().enumerate() {
        for (b, &(ib, jb)) in cells.iter().enumerate() {
            g[(ja, jb)] += cond_cov[(a, b)] * sigma_inv[(ib, ia)];
        }
    }
    g
}

/// `F_ii' = Σ_{a=(i,j), b=(i',j')} C_ab Δ⁻¹_{j'j}` over pairs of missing cells.
pub fn correction_f<T: Real>(
    cells: &[(usize, usize)],
    cond_cov: &DMatrix<T>,
    delta_inv: &DMatrix<T>,
    n: usize,
) -> DMatrix<T> {
    let mut f = DMatrix::zeros(n, n);
    for (a, &(ia, ja)) in cells.iter().enumerate() {
        for (b, &(ib, jb)) in cells.iter().enumerate() {
            f[(ia, ib)] += cond_cov[(a, b)] * delta_inv[(jb, ja)];
        }
    }
    f
}

/// Conditional expectation of the missing cells and their joint conditional
/// covariance, computed with the precision of the missing block.
pub(crate) fn precision_moments<T: Real>(
    x: &MaskedMatrix<T>,
    model: &TrcmModel<T>,
) -> Result<(DMatrix<T>, MissingBlock<T>)> {
    let m = model.mean_matrix();
    let resid0 = x.fill_with(&m) - &m;
    let block = MissingBlock::new(x, &model.covs)?;
    let r_m = block.conditional_residual(&resid0, &model.covs);
    let mut x_hat = x.raw_values().clone();
    for (k, &(i, j)) in block.cells().iter().enumerate() {
        x_hat[(i, j)] = m[(i, j)] + r_m[k];
    }
    Ok((x_hat, block))
}

/// Completed matrix plus both scatter corrections under `model`.
pub fn e_step<T: Real>(x: &MaskedMatrix<T>, model: &TrcmModel<T>, opts: &ImputeOptions) -> Result<EStepResult<T>> {
    model.check_shape(x.shape())?;
    let (n, p) = x.shape();
    let missing = x.n_missing();
    if missing == 0 {
        return Ok(EStepResult {
            x_hat: x.raw_values().clone(),
            g_mat: DMatrix::zeros(p, p),
            f_mat: DMatrix::zeros(n, n),
            cells: Vec::new(),
            cond_cov: DMatrix::zeros(0, 0),
        });
    }
    if missing > opts.cross_cap {
        return Err(Error::CrossCap { missing, cap: opts.cross_cap });
    }
    let (x_hat, block) = match opts.estep_route {
        EStepRoute::Precision => precision_moments(x, model)?,
        EStepRoute::Ace => (ace_expectation(x, model, opts)?, MissingBlock::new(x, &model.covs)?),
        EStepRoute::Kronecker => {
            (kron_conditional_expectation_with_cap(x, model, opts.vec_cap)?, MissingBlock::new(x, &model.covs)?)
        }
    };
    let cells = block.cells().to_vec();
    let cond_cov = block.covariance();
    let g_mat = correction_g(&cells, &cond_cov, model.covs.sigma_inv(), p);
    let f_mat = correction_f(&cells, &cond_cov, model.covs.delta_inv(), n);
    Ok(EStepResult { x_hat, g_mat, f_mat, cells, cond_cov })
}
