//! Computations on the missing block of `vec(X)` that exploit the Kronecker
//! structure of the precision `(Δ⊗Σ)⁻¹ = Δ⁻¹⊗Σ⁻¹`.
//!
//! For missing cells `a = (i, j)` and `b = (i', j')` the precision entry is
//! `Δ⁻¹_{jj'} Σ⁻¹_{ii'}`. Grouped by row, the diagonal blocks
//! `Σ⁻¹_{ii} Δ⁻¹_{m_i m_i}` are the precisions of the row conditionals of
//! each row given the rest of the matrix, and the off-diagonal blocks couple
//! rows through `Σ⁻¹_{ii'}`. Conditioning on the observed cells only needs
//! this `|m| × |m|` block:
//!
//! * `Cov(X_m | X_o) = Λ_mm⁻¹`
//! * `E(X_m | X_o) − M_m = −Λ_mm⁻¹ Λ_mo r_o`
//! * `log|Ω_oo| = log|Ω| + log|Λ_mm|`

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{CovParams, MaskedMatrix};
use crate::scalar::Real;

pub struct MissingBlock<T: Real> {
    cells: Vec<(usize, usize)>,
    chol: Option<Cholesky<T, Dyn>>,
}

impl<T: Real> MissingBlock<T> {
    pub fn new(x: &MaskedMatrix<T>, covs: &CovParams<T>) -> Result<Self> {
        let cells = x.missing_cells();
        if cells.is_empty() {
            return Ok(Self { cells, chol: None });
        }
        let lambda = Self::precision(&cells, covs);
        let chol = Cholesky::new(lambda)
            .ok_or_else(|| Error::Numerical("missing-block precision is not positive definite".into()))?;
        Ok(Self { cells, chol: Some(chol) })
    }

    /// `Λ_mm` for the listed cells.
    pub fn precision(cells: &[(usize, usize)], covs: &CovParams<T>) -> DMatrix<T> {
        let p_inv = covs.sigma_inv();
        let q_inv = covs.delta_inv();
        let m = cells.len();
        let mut lambda = DMatrix::zeros(m, m);
        for (a, &(ia, ja)) in cells.iter().enumerate() {
            for (b, &(ib, jb)) in cells.iter().enumerate().skip(a) {
                let v = q_inv[(ja, jb)] * p_inv[(ia, ib)];
                lambda[(a, b)] = v;
                lambda[(b, a)] = v;
            }
        }
        lambda
    }

    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    /// `Λ_mo r_o` where `resid0` holds `r_o` and zeros on missing cells.
    fn coupling(&self, resid0: &DMatrix<T>, covs: &CovParams<T>) -> DVector<T> {
        let full = covs.sigma_inv() * resid0 * covs.delta_inv();
        DVector::from_iterator(self.cells.len(), self.cells.iter().map(|&(i, j)| full[(i, j)]))
    }

    /// `E(X_m | X_o) − M_m`, in cell order.
    pub fn conditional_residual(&self, resid0: &DMatrix<T>, covs: &CovParams<T>) -> DVector<T> {
        match &self.chol {
            None => DVector::zeros(0),
            Some(chol) => -chol.solve(&self.coupling(resid0, covs)),
        }
    }

    /// `(Λ_mo r_o)ᵀ Λ_mm⁻¹ (Λ_mo r_o)`, the amount by which the full quadratic
    /// form over `r_o` (with zeros elsewhere) exceeds `r_oᵀ Ω_oo⁻¹ r_o`.
    pub fn schur_correction(&self, resid0: &DMatrix<T>, covs: &CovParams<T>) -> T {
        match &self.chol {
            None => T::zero(),
            Some(chol) => {
                let b = self.coupling(resid0, covs);
                b.dot(&chol.solve(&b))
            }
        }
    }

    /// `Cov(X_m | X_o)`, in cell order.
    pub fn covariance(&self) -> DMatrix<T> {
        match &self.chol {
            None => DMatrix::zeros(0, 0),
            Some(chol) => linalg::symmetrize(&chol.inverse()),
        }
    }

    pub fn log_det_precision(&self) -> T {
        self.chol.as_ref().map_or(T::zero(), linalg::chol_log_det)
    }
}
