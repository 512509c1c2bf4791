use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, SpdMatrix};
use crate::model::Norm;
use crate::scalar::Real;

use super::glasso::{glasso_iterate, glasso_warm};
use super::SolverOptions;

/// Covariance eigenvalue maximizing `(k/2)log θ⁻¹ − sθ⁻¹/2 − ρθ⁻²` for a
/// scatter eigenvalue `s` and effective sample size `k`:
/// `(s + √(s² + 16kρ)) / (2k)`.
pub fn l2_eigenvalue<T: Real>(s: T, k: T, rho: T) -> T {
    let sixteen = T::lit(16.0);
    (s + (s * s + sixteen * k * rho).sqrt()) / (k + k)
}

/// An L2-regularized covariance with its spectral decomposition.
#[derive(Clone, Debug)]
pub struct RegularizedCov<T: Real> {
    pub cov: SpdMatrix<T>,
    /// Covariance eigenvalues, in the order of `basis` columns.
    pub eigenvalues: DVector<T>,
    pub basis: DMatrix<T>,
}

/// Closed-form maximizer of the L2-penalized covariance likelihood for rows
/// of a centered `n × p` matrix: the singular values `d_i` of `x` become
/// covariance eigenvalues `(d_i² + √(d_i⁴ + 16nρ))/(2n)`, and directions
/// outside the row space get `2√(ρ/n)`.
pub fn rcm_l2_cov<T: Real>(x: &DMatrix<T>, rho: f64) -> Result<RegularizedCov<T>> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidArgument(format!("rho must be finite and nonnegative, got {rho}")));
    }
    if x.iter().any(|v| !v.is_finite_value()) {
        return Err(Error::NonFinite("data matrix"));
    }
    let (n, p) = x.shape();
    let svd = linalg::full_svd(x);
    let nt = T::from_usize_lossy(n);
    let r = T::lit(rho);
    let eigenvalues = DVector::from_fn(p, |k, _| {
        let d = if k < svd.rank { svd.d[k] } else { T::zero() };
        if k < svd.rank {
            l2_eigenvalue(d * d, nt, r)
        } else {
            // exact tail value, not the general formula evaluated at zero
            T::lit(2.0) * (r / nt).sqrt()
        }
    });
    let cov = SpdMatrix::from_eigen(&svd.v, &eigenvalues, "regularized covariance")?;
    Ok(RegularizedCov { cov, eigenvalues, basis: svd.v })
}

/// Maximizer of the L1-penalized covariance likelihood for rows of a centered
/// matrix, via the graphical lasso on `XᵀX/n` with weight `2ρ/n`.
pub fn rcm_l1_cov<T: Real>(x: &DMatrix<T>, rho: f64, opts: &SolverOptions) -> Result<SpdMatrix<T>> {
    let n = x.nrows();
    let scatter = x.transpose() * x;
    concentration_update(&scatter, n, rho, Norm::L1, opts, None)
}

/// Objective of one covariance sub-problem in terms of the precision `Θ`:
/// `(k/2)log|Θ| − ½tr(SΘ) − ρ‖Θ‖^q`.
pub(crate) fn sub_objective<T: Real>(scatter: &DMatrix<T>, k: usize, rho: f64, q: Norm, cand: &SpdMatrix<T>) -> T {
    let half = T::lit(0.5);
    let theta = cand.inverse();
    let trace = scatter.component_mul(theta).sum();
    -half * T::from_usize_lossy(k) * cand.log_det()
        - half * trace
        - T::lit(rho) * crate::model::entrywise_norm(theta, q)
}

/// Maximizes `(k/2)log|Θ| − ½tr(SΘ) − ρ‖Θ‖^q` over precision matrices `Θ`
/// for an unnormalized scatter `S` with effective sample size `k`, and
/// returns the covariance `Θ⁻¹`.
///
/// With `previous` given, the result is never worse than `previous` under
/// the sub-problem objective; an iterative solve that lands lower (possible
/// only within its tolerance) keeps `previous` instead. In that case a
/// graphical lasso that reaches its sweep cap contributes its last iterate
/// rather than an error.
pub fn concentration_update<T: Real>(
    scatter: &DMatrix<T>,
    k: usize,
    rho: f64,
    q: Norm,
    opts: &SolverOptions,
    previous: Option<&SpdMatrix<T>>,
) -> Result<SpdMatrix<T>> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidArgument(format!("rho must be finite and nonnegative, got {rho}")));
    }
    if scatter.iter().any(|v| !v.is_finite_value()) {
        return Err(Error::NonFinite("scatter matrix"));
    }
    let kt = T::from_usize_lossy(k);
    let candidate = if rho == 0.0 {
        SpdMatrix::from_cov(scatter / kt, "unpenalized covariance")?
    } else {
        match q {
            Norm::L2 => {
                let (vals, vecs) = linalg::sym_eigen_desc(scatter);
                let r = T::lit(rho);
                let eig = vals.map(|s| l2_eigenvalue(s.max(T::zero()), kt, r));
                SpdMatrix::from_eigen(&vecs, &eig, "regularized covariance")?
            }
            Norm::L1 => {
                let (s, r) = (scatter / kt, 2.0 * rho / k as f64);
                let fit = match previous {
                    None => glasso_warm(&s, r, opts, None)?,
                    // inside an ascent only improvement is needed, and the
                    // guard below rejects an iterate that does not improve
                    Some(_) => match glasso_iterate(&s, r, opts, previous)? {
                        (Some(fit), converged) => {
                            if !converged {
                                log::warn!(
                                    "graphical lasso stopped at {} sweeps with duality gap {:e}; using its last iterate",
                                    fit.sweeps,
                                    fit.gap.to_f64_lossy()
                                );
                            }
                            fit
                        }
                        (None, _) => {
                            return Err(Error::NoConvergence {
                                what: "graphical lasso",
                                iterations: opts.glasso_max_sweeps,
                                residual: f64::INFINITY,
                            })
                        }
                    },
                };
                SpdMatrix::from_prec(fit.w_inv, "graphical lasso precision")?
            }
        }
    };
    if let Some(prev) = previous {
        if sub_objective(scatter, k, rho, q, &candidate) < sub_objective(scatter, k, rho, q, prev) {
            return Ok(prev.clone());
        }
    }
    Ok(candidate)
}
