//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative eigenvalue floor used for positive-definiteness checks.
pub const PD_RELATIVE_FLOOR: f64 = 1e-12;

pub fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let half = T::lit(0.5);
    (m + m.transpose()) * half
}

pub fn max_abs<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
}

pub fn max_abs_diff<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    a.iter().zip(b.iter()).fold(T::zero(), |acc, (x, y)| acc.max((*x - *y).abs()))
}

/// Symmetric eigendecomposition with eigenvalues sorted in decreasing order.
pub fn sym_eigen_desc<T: Real>(m: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Extends the orthonormal columns of `q` to an orthonormal basis of the
/// full space. The first `q.ncols()` columns of the result are `q`.
pub fn complete_basis<T: Real>(q: &DMatrix<T>) -> DMatrix<T> {
    let n = q.nrows();
    let k = q.ncols();
    // The trailing columns of the QR factor of [q | I] span the orthogonal
    // complement of q.
    let mut stacked = DMatrix::zeros(n, k + n);
    stacked.columns_mut(0, k).copy_from(q);
    stacked.columns_mut(k, n).fill_with_identity();
    let mut basis = stacked.qr().q();
    basis.columns_mut(0, k).copy_from(q);
    basis
}

/// Full SVD `x = U diag(d) Vᵀ` with square, orthonormal `U` (n×n) and `V` (p×p).
#[derive(Clone, Debug)]
pub struct FullSvd<T: Real> {
    pub u: DMatrix<T>,
    /// Singular values in decreasing order (length `min(n, p)`).
    pub d: DVector<T>,
    pub v: DMatrix<T>,
    /// Numerical rank.
    pub rank: usize,
}

pub fn full_svd<T: Real>(x: &DMatrix<T>) -> FullSvd<T> {
    let (n, p) = x.shape();
    let svd = SVD::new(x.clone(), true, true);
    let u_thin = svd.u.expect("u requested");
    let v_thin = svd.v_t.expect("v requested").transpose();
    let d = svd.singular_values;
    let d_max = d.iter().fold(T::zero(), |a, b| a.max(*b));
    let tol = T::from_usize_lossy(n.max(p)) * T::machine_epsilon() * d_max;
    let rank = d.iter().filter(|&&v| v > tol).count();
    // Only the leading `rank` singular vectors are meaningful; the rest of
    // each basis is rebuilt as an exact orthogonal complement.
    let u = complete_basis(&u_thin.columns(0, rank).into_owned());
    let v = complete_basis(&v_thin.columns(0, rank).into_owned());
    FullSvd { u, d, v, rank }
}

/// Cholesky factorization, retrying with a growing diagonal jitter when the
/// plain factorization fails. Returns `None` if every attempt fails.
pub fn cholesky_with_jitter<T: Real>(m: &DMatrix<T>, jitter: T) -> Option<Cholesky<T, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let n = m.nrows();
    let scale = (0..n).fold(T::zero(), |a, i| a.max(m[(i, i)].abs())).max(T::one());
    let mut eps = jitter * scale;
    for _ in 0..8 {
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[(i, i)] += eps;
        }
        if let Some(c) = Cholesky::new(shifted) {
            return Some(c);
        }
        eps *= T::lit(100.0);
    }
    None
}

pub fn chol_log_det<T: Real>(c: &Cholesky<T, Dyn>) -> T {
    let l = c.l_dirty();
    (0..l.nrows()).fold(T::zero(), |acc, i| acc + l[(i, i)].ln()) * T::lit(2.0)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_range<T: Real>(m: &DMatrix<T>) -> (T, T) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let lo = eig.eigenvalues.iter().fold(T::max_value().unwrap(), |a, b| a.min(*b));
    let hi = eig.eigenvalues.iter().fold(T::min_value().unwrap(), |a, b| a.max(*b));
    (lo, hi)
}

pub fn check_pd<T: Real>(m: &DMatrix<T>, what: &'static str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite_value()) {
        return Err(Error::NonFinite(what));
    }
    let (lo, hi) = eigen_range(m);
    if !(lo > T::lit(PD_RELATIVE_FLOOR) * hi.abs()) || hi <= T::zero() {
        return Err(Error::NotPositiveDefinite { what, min_eigenvalue: lo.to_f64_lossy() });
    }
    Ok(())
}

/// A symmetric positive-definite matrix together with its inverse and the
/// log-determinant of the matrix itself.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix<T: Real> {
    mat: DMatrix<T>,
    inv: DMatrix<T>,
    log_det: T,
}

impl<T: Real> SpdMatrix<T> {
    pub fn identity(n: usize) -> Self {
        Self { mat: DMatrix::identity(n, n), inv: DMatrix::identity(n, n), log_det: T::zero() }
    }

    /// Validates and inverts a covariance matrix.
    pub fn from_cov(cov: DMatrix<T>, what: &'static str) -> Result<Self> {
        if !cov.is_square() {
            return Err(Error::Dimension(format!("{what} must be square")));
        }
        let mat = symmetrize(&cov);
        check_pd(&mat, what)?;
        let chol = Cholesky::new(mat.clone())
            .ok_or(Error::NotPositiveDefinite { what, min_eigenvalue: f64::NAN })?;
        let log_det = chol_log_det(&chol);
        let inv = symmetrize(&chol.inverse());
        Ok(Self { mat, inv, log_det })
    }

    /// Builds the pair from a precision (inverse covariance) matrix, keeping
    /// the precision entries untouched (exact zeros stay zero).
    pub fn from_prec(prec: DMatrix<T>, what: &'static str) -> Result<Self> {
        let inv = symmetrize(&prec);
        check_pd(&inv, what)?;
        let chol = Cholesky::new(inv.clone())
            .ok_or(Error::NotPositiveDefinite { what, min_eigenvalue: f64::NAN })?;
        let log_det = -chol_log_det(&chol);
        let mat = symmetrize(&chol.inverse());
        Ok(Self { mat, inv, log_det })
    }

    /// `basis · diag(eigenvalues) · basisᵀ` for an orthonormal basis.
    pub fn from_eigen(basis: &DMatrix<T>, eigenvalues: &DVector<T>, what: &'static str) -> Result<Self> {
        let hi = eigenvalues.iter().fold(T::zero(), |a, b| a.max(*b));
        let lo = eigenvalues.iter().fold(T::max_value().unwrap(), |a, b| a.min(*b));
        if eigenvalues.iter().any(|v| !v.is_finite_value()) {
            return Err(Error::NonFinite(what));
        }
        if !(lo > T::lit(PD_RELATIVE_FLOOR) * hi) || hi <= T::zero() {
            return Err(Error::NotPositiveDefinite { what, min_eigenvalue: lo.to_f64_lossy() });
        }
        let mat = symmetrize(&(basis * DMatrix::from_diagonal(eigenvalues) * basis.transpose()));
        let inv_vals = eigenvalues.map(|v| T::one() / v);
        let inv = symmetrize(&(basis * DMatrix::from_diagonal(&inv_vals) * basis.transpose()));
        let log_det = eigenvalues.iter().fold(T::zero(), |a, v| a + v.ln());
        Ok(Self { mat, inv, log_det })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.mat
    }

    pub fn inverse(&self) -> &DMatrix<T> {
        &self.inv
    }

    /// log |A| of the covariance (not of the inverse).
    pub fn log_det(&self) -> T {
        self.log_det
    }

    /// The same matrix multiplied by `c > 0`.
    pub fn scaled(&self, c: T) -> Self {
        let n = T::from_usize_lossy(self.dim());
        Self { mat: &self.mat * c, inv: &self.inv / c, log_det: self.log_det + n * c.ln() }
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a.kronecker(b)
}

pub fn submatrix<T: Real>(m: &DMatrix<T>, rows: &[usize], cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

pub fn subvector<T: Real>(v: &DVector<T>, idx: &[usize]) -> DVector<T> {
    DVector::from_fn(idx.len(), |a, _| v[idx[a]])
}

/// Conditional mean and covariance of the `target` block of `N(mean, cov)`
/// given the `given` block takes value `value`, by direct covariance solve.
pub fn gaussian_condition<T: Real>(
    mean: &DVector<T>,
    cov: &DMatrix<T>,
    target: &[usize],
    given: &[usize],
    value: &DVector<T>,
) -> Result<(DVector<T>, DMatrix<T>)> {
    let mu_t = subvector(mean, target);
    let cov_tt = submatrix(cov, target, target);
    if given.is_empty() {
        return Ok((mu_t, cov_tt));
    }
    let mu_g = subvector(mean, given);
    let cov_tg = submatrix(cov, target, given);
    let cov_gg = submatrix(cov, given, given);
    let chol = Cholesky::new(cov_gg)
        .ok_or_else(|| Error::Numerical("conditioning block is singular".into()))?;
    let resid = value - mu_g;
    let mean_c = mu_t + &cov_tg * chol.solve(&resid);
    let cov_c = cov_tt - &cov_tg * chol.solve(&cov_tg.transpose());
    Ok((mean_c, symmetrize(&cov_c)))
}
