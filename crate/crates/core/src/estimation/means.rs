use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{CovParams, MaskedMatrix, MeanParams};
use crate::scalar::Real;

use super::SolverOptions;

/// Least-squares additive fit `x_ij ≈ ν_i + μ_j` over the observed cells.
///
/// A complete matrix takes one pass of row then column centering. With
/// missing cells the two centerings alternate over observed entries until
/// the fitted `M̂` moves by less than `opts.rel_tol` (max-abs).
pub fn estimate_means<T: Real>(x: &MaskedMatrix<T>, opts: &SolverOptions) -> Result<MeanParams<T>> {
    let (n, p) = x.shape();
    let v = x.raw_values();
    let mut nu = DVector::<T>::zeros(n);
    let mut mu = DVector::<T>::zeros(p);
    let tol = T::lit(opts.rel_tol);

    let sweep = |nu: &mut DVector<T>, mu: &mut DVector<T>| {
        for i in 0..n {
            let obs = x.row_observed(i);
            let s = obs.iter().fold(T::zero(), |a, &j| a + v[(i, j)] - mu[j]);
            nu[i] = s / T::from_usize_lossy(obs.len());
        }
        for j in 0..p {
            let obs = x.col_observed(j);
            let s = obs.iter().fold(T::zero(), |a, &i| a + v[(i, j)] - nu[i]);
            mu[j] = s / T::from_usize_lossy(obs.len());
        }
    };

    if x.is_complete() {
        sweep(&mut nu, &mut mu);
        return MeanParams::new(nu, mu);
    }

    let mut residual = T::zero();
    for _ in 0..opts.max_outer_iters {
        let (old_nu, old_mu) = (nu.clone(), mu.clone());
        sweep(&mut nu, &mut mu);
        // max_ij |Δν_i + Δμ_j|
        let dnu = &nu - &old_nu;
        let dmu = &mu - &old_mu;
        let (lo_nu, hi_nu) = (dnu.min(), dnu.max());
        let (lo_mu, hi_mu) = (dmu.min(), dmu.max());
        residual = (hi_nu + hi_mu).abs().max((lo_nu + lo_mu).abs());
        if residual < tol {
            return MeanParams::new(nu, mu);
        }
    }
    Err(Error::NoConvergence {
        what: "mean estimation",
        iterations: opts.max_outer_iters,
        residual: residual.to_f64_lossy(),
    })
}

/// Generalized-least-squares additive mean of a complete matrix under fixed
/// covariances: minimizes `tr(Σ⁻¹(X−M)Δ⁻¹(X−M)ᵀ)` over `M = ν1ᵀ + 1μᵀ`.
///
/// The normal equations are `(X−M)Δ⁻¹1 = 0` and `(X−M)ᵀΣ⁻¹1 = 0`; with the
/// shift freedom fixed they have the closed-form solution used here. With
/// identity covariances this is ordinary row/column centering.
pub fn gls_means<T: Real>(x: &DMatrix<T>, covs: &CovParams<T>) -> Result<MeanParams<T>> {
    let (n, p) = x.shape();
    let q = covs.delta_inv() * DVector::from_element(p, T::one());
    let w = covs.sigma_inv() * DVector::from_element(n, T::one());
    let sq = q.sum();
    let sw = w.sum();
    let xq = x * &q;
    let alpha = w.dot(&xq) / sw;
    let nu = (xq.add_scalar(-alpha)) / sq;
    let mu = x.transpose() * &w / sw;
    MeanParams::new(nu, mu)
}
