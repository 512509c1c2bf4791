//! The mean-restricted matrix-variate normal: data containers, parameters,
//! likelihoods, sampling, and the dense `vec` view.
//!
//! Conventions used throughout the crate:
//! * `vec(X)` stacks columns, so cell `(i, j)` of an `n × p` matrix sits at
//!   index `j * n + i` and the covariance of `vec(X)` is `Δ ⊗ Σ`.
//! * `Σ` (n×n) is the row covariance, `Δ` (p×p) the column covariance.
//! * The additive mean is `M = ν 1ᵀ + 1 μᵀ`, canonicalized to `mean(ν) = 0`.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SpdMatrix};
use crate::scalar::Real;
use crate::structured::MissingBlock;

/// Default ceiling on `n·p` for anything that materializes `Δ ⊗ Σ`.
pub const DEFAULT_VEC_CAP: usize = 4096;

/// An `n × p` matrix with an observed/missing mask.
///
/// Missing cells hold NaN in `values`; the mask is authoritative and the
/// stored value under a missing cell is never read.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedMatrix<T: Real> {
    values: DMatrix<T>,
    mask: DMatrix<bool>,
    row_observed: Vec<Vec<usize>>,
    row_missing: Vec<Vec<usize>>,
    col_observed: Vec<Vec<usize>>,
    col_missing: Vec<Vec<usize>>,
}

impl<T: Real> MaskedMatrix<T> {
    /// `mask[(i, j)] == true` marks an observed cell.
    pub fn new(values: DMatrix<T>, mask: DMatrix<bool>) -> Result<Self> {
        let (n, p) = values.shape();
        if mask.shape() != (n, p) {
            return Err(Error::Dimension(format!(
                "mask is {:?}, values are {:?}",
                mask.shape(),
                (n, p)
            )));
        }
        if n == 0 || p == 0 {
            return Err(Error::Dimension("matrix must be at least 1x1".into()));
        }
        let mut values = values;
        for j in 0..p {
            for i in 0..n {
                if mask[(i, j)] {
                    if !values[(i, j)].is_finite_value() {
                        return Err(Error::NonFinite("observed cell"));
                    }
                } else {
                    values[(i, j)] = T::nan();
                }
            }
        }
        let row_observed: Vec<Vec<usize>> =
            (0..n).map(|i| (0..p).filter(|&j| mask[(i, j)]).collect()).collect();
        let row_missing = (0..n).map(|i| (0..p).filter(|&j| !mask[(i, j)]).collect()).collect();
        let col_observed: Vec<Vec<usize>> =
            (0..p).map(|j| (0..n).filter(|&i| mask[(i, j)]).collect()).collect();
        let col_missing = (0..p).map(|j| (0..n).filter(|&i| !mask[(i, j)]).collect()).collect();
        if let Some(i) = row_observed.iter().position(Vec::is_empty) {
            return Err(Error::EmptyRow(i));
        }
        if let Some(j) = col_observed.iter().position(Vec::is_empty) {
            return Err(Error::EmptyColumn(j));
        }
        Ok(Self { values, mask, row_observed, row_missing, col_observed, col_missing })
    }

    /// Treats NaN entries as missing.
    pub fn from_nan(values: DMatrix<T>) -> Result<Self> {
        let mask = values.map(|v| !v.is_nan_value());
        Self::new(values, mask)
    }

    pub fn complete(values: DMatrix<T>) -> Result<Self> {
        let mask = DMatrix::from_element(values.nrows(), values.ncols(), true);
        Self::new(values, mask)
    }

    pub fn from_rows(rows: &[Vec<Option<T>>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let values = DMatrix::from_fn(n, p, |i, j| rows[i][j].unwrap_or_else(T::nan));
        let mask = DMatrix::from_fn(n, p, |i, j| rows[i][j].is_some());
        Self::new(values, mask)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    /// Raw storage; missing cells are NaN.
    pub fn raw_values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[(i, j)]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        self.mask[(i, j)].then(|| self.values[(i, j)])
    }

    pub fn row_observed(&self, i: usize) -> &[usize] {
        &self.row_observed[i]
    }

    pub fn row_missing(&self, i: usize) -> &[usize] {
        &self.row_missing[i]
    }

    pub fn col_observed(&self, j: usize) -> &[usize] {
        &self.col_observed[j]
    }

    pub fn col_missing(&self, j: usize) -> &[usize] {
        &self.col_missing[j]
    }

    pub fn n_missing(&self) -> usize {
        self.row_missing.iter().map(Vec::len).sum()
    }

    pub fn missing_fraction(&self) -> f64 {
        self.n_missing() as f64 / (self.nrows() * self.ncols()) as f64
    }

    pub fn is_complete(&self) -> bool {
        self.n_missing() == 0
    }

    /// Missing cells in `vec` order (column by column).
    pub fn missing_cells(&self) -> Vec<(usize, usize)> {
        (0..self.ncols())
            .flat_map(|j| self.col_missing[j].iter().map(move |&i| (i, j)))
            .collect()
    }

    /// Observed cells in `vec` order.
    pub fn observed_cells(&self) -> Vec<(usize, usize)> {
        (0..self.ncols())
            .flat_map(|j| self.col_observed[j].iter().map(move |&i| (i, j)))
            .collect()
    }

    /// Observed values where present, `fill` elsewhere.
    pub fn fill_with(&self, fill: &DMatrix<T>) -> DMatrix<T> {
        DMatrix::from_fn(self.nrows(), self.ncols(), |i, j| {
            if self.mask[(i, j)] {
                self.values[(i, j)]
            } else {
                fill[(i, j)]
            }
        })
    }

    /// A copy with the listed (currently observed) cells hidden as well.
    pub fn hide(&self, cells: &[(usize, usize)]) -> Result<Self> {
        let mut mask = self.mask.clone();
        for &(i, j) in cells {
            mask[(i, j)] = false;
        }
        Self::new(self.values.clone(), mask)
    }

    pub fn transpose(&self) -> Self {
        Self {
            values: self.values.transpose(),
            mask: self.mask.transpose(),
            row_observed: self.col_observed.clone(),
            row_missing: self.col_missing.clone(),
            col_observed: self.row_observed.clone(),
            col_missing: self.row_missing.clone(),
        }
    }

    /// Whether every pair of rows shares an observed column and every pair of
    /// columns shares an observed row.
    pub fn has_pairwise_overlap(&self) -> bool {
        let overlap = |sets: &[Vec<usize>], len: usize| {
            let bits: Vec<Vec<bool>> = sets
                .iter()
                .map(|s| {
                    let mut b = vec![false; len];
                    s.iter().for_each(|&k| b[k] = true);
                    b
                })
                .collect();
            (0..bits.len()).all(|a| {
                (a + 1..bits.len()).all(|b| (0..len).any(|k| bits[a][k] && bits[b][k]))
            })
        };
        overlap(&self.row_observed, self.ncols()) && overlap(&self.col_observed, self.nrows())
    }
}

/// Row and column mean vectors of the additive mean `M = ν1ᵀ + 1μᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanParams<T: Real> {
    nu: DVector<T>,
    mu: DVector<T>,
}

impl<T: Real> MeanParams<T> {
    /// Canonicalizes so that `mean(ν) = 0`, moving the shift into `μ`.
    pub fn new(nu: DVector<T>, mu: DVector<T>) -> Result<Self> {
        if nu.is_empty() || mu.is_empty() {
            return Err(Error::Dimension("mean vectors must be nonempty".into()));
        }
        if nu.iter().chain(mu.iter()).any(|v| !v.is_finite_value()) {
            return Err(Error::NonFinite("mean vector"));
        }
        let shift = nu.mean();
        Ok(Self { nu: nu.add_scalar(-shift), mu: mu.add_scalar(shift) })
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        Self { nu: DVector::zeros(n), mu: DVector::zeros(p) }
    }

    pub fn nu(&self) -> &DVector<T> {
        &self.nu
    }

    pub fn mu(&self) -> &DVector<T> {
        &self.mu
    }

    pub fn mean_matrix(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.nu.len(), self.mu.len(), |i, j| self.nu[i] + self.mu[j])
    }
}

/// Row covariance `Σ` and column covariance `Δ` with cached inverses.
#[derive(Clone, Debug, PartialEq)]
pub struct CovParams<T: Real> {
    sigma: SpdMatrix<T>,
    delta: SpdMatrix<T>,
}

impl<T: Real> CovParams<T> {
    pub fn new(sigma: DMatrix<T>, delta: DMatrix<T>) -> Result<Self> {
        Ok(Self {
            sigma: SpdMatrix::from_cov(sigma, "row covariance")?,
            delta: SpdMatrix::from_cov(delta, "column covariance")?,
        })
    }

    pub fn from_parts(sigma: SpdMatrix<T>, delta: SpdMatrix<T>) -> Self {
        Self { sigma, delta }
    }

    pub fn identity(n: usize, p: usize) -> Self {
        Self { sigma: SpdMatrix::identity(n), delta: SpdMatrix::identity(p) }
    }

    pub fn n(&self) -> usize {
        self.sigma.dim()
    }

    pub fn p(&self) -> usize {
        self.delta.dim()
    }

    pub fn sigma(&self) -> &DMatrix<T> {
        self.sigma.matrix()
    }

    pub fn delta(&self) -> &DMatrix<T> {
        self.delta.matrix()
    }

    pub fn sigma_inv(&self) -> &DMatrix<T> {
        self.sigma.inverse()
    }

    pub fn delta_inv(&self) -> &DMatrix<T> {
        self.delta.inverse()
    }

    pub fn sigma_spd(&self) -> &SpdMatrix<T> {
        &self.sigma
    }

    pub fn delta_spd(&self) -> &SpdMatrix<T> {
        &self.delta
    }

    /// `(cΣ, Δ/c)`, which leaves `Δ ⊗ Σ` unchanged.
    pub fn rescaled(&self, c: T) -> Self {
        Self { sigma: self.sigma.scaled(c), delta: self.delta.scaled(T::one() / c) }
    }

    pub fn transpose(&self) -> Self {
        Self { sigma: self.delta.clone(), delta: self.sigma.clone() }
    }
}

/// `X ~ N_{n,p}(ν, μ, Σ, Δ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrcmModel<T: Real> {
    pub means: MeanParams<T>,
    pub covs: CovParams<T>,
}

impl<T: Real> TrcmModel<T> {
    pub fn new(means: MeanParams<T>, covs: CovParams<T>) -> Result<Self> {
        if means.nu.len() != covs.n() || means.mu.len() != covs.p() {
            return Err(Error::Dimension(format!(
                "means are {}x{}, covariances are {}x{}",
                means.nu.len(),
                means.mu.len(),
                covs.n(),
                covs.p()
            )));
        }
        Ok(Self { means, covs })
    }

    /// Zero means with identity covariances.
    pub fn standard(n: usize, p: usize) -> Self {
        Self { means: MeanParams::zeros(n, p), covs: CovParams::identity(n, p) }
    }

    pub fn n(&self) -> usize {
        self.covs.n()
    }

    pub fn p(&self) -> usize {
        self.covs.p()
    }

    pub fn mean_matrix(&self) -> DMatrix<T> {
        self.means.mean_matrix()
    }

    /// The model of `Xᵀ`.
    pub fn transpose(&self) -> Self {
        let means = MeanParams::new(self.means.mu.clone(), self.means.nu.clone())
            .expect("finite means stay finite");
        Self { means, covs: self.covs.transpose() }
    }

    pub fn check_shape(&self, shape: (usize, usize)) -> Result<()> {
        if shape != (self.n(), self.p()) {
            return Err(Error::Dimension(format!(
                "data is {:?}, model is {:?}",
                shape,
                (self.n(), self.p())
            )));
        }
        Ok(())
    }
}

/// Entry-wise penalty exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub fn exponent(self) -> u32 {
        match self {
            Norm::L1 => 1,
            Norm::L2 => 2,
        }
    }

    pub fn from_exponent(q: u32) -> Result<Self> {
        match q {
            1 => Ok(Norm::L1),
            2 => Ok(Norm::L2),
            _ => Err(Error::InvalidArgument(format!("penalty exponent must be 1 or 2, got {q}"))),
        }
    }
}

/// Penalty exponents and weights on the row and column concentration matrices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub q_row: Norm,
    pub q_col: Norm,
    pub rho_row: f64,
    pub rho_col: f64,
}

impl PenaltySpec {
    pub fn new(q_row: Norm, q_col: Norm, rho_row: f64, rho_col: f64) -> Result<Self> {
        for rho in [rho_row, rho_col] {
            if !(rho.is_finite() && rho >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "penalty weight must be finite and nonnegative, got {rho}"
                )));
            }
        }
        Ok(Self { q_row, q_col, rho_row, rho_col })
    }

    pub fn l2l2(rho_row: f64, rho_col: f64) -> Self {
        Self { q_row: Norm::L2, q_col: Norm::L2, rho_row, rho_col }
    }

    pub fn l1l1(rho_row: f64, rho_col: f64) -> Self {
        Self { q_row: Norm::L1, q_col: Norm::L1, rho_row, rho_col }
    }

    pub fn is_l2l2(&self) -> bool {
        self.q_row == Norm::L2 && self.q_col == Norm::L2
    }

    pub fn label(&self) -> String {
        format!("L{}:L{}", self.q_row.exponent(), self.q_col.exponent())
    }

    /// Roles of rows and columns swapped.
    pub fn transpose(&self) -> Self {
        Self { q_row: self.q_col, q_col: self.q_row, rho_row: self.rho_col, rho_col: self.rho_row }
    }
}

/// `Σ_{k,l} |A_kl|^q` over every entry, diagonal included.
pub fn entrywise_norm<T: Real>(a: &DMatrix<T>, q: Norm) -> T {
    match q {
        Norm::L1 => a.iter().fold(T::zero(), |s, v| s + v.abs()),
        Norm::L2 => a.iter().fold(T::zero(), |s, v| s + *v * *v),
    }
}

/// The two penalty terms `ρ_r‖Σ⁻¹‖^{q_r} + ρ_c‖Δ⁻¹‖^{q_c}`.
pub fn penalty<T: Real>(covs: &CovParams<T>, pen: &PenaltySpec) -> T {
    let mut total = T::zero();
    if pen.rho_row != 0.0 {
        total += T::lit(pen.rho_row) * entrywise_norm(covs.sigma_inv(), pen.q_row);
    }
    if pen.rho_col != 0.0 {
        total += T::lit(pen.rho_col) * entrywise_norm(covs.delta_inv(), pen.q_col);
    }
    total
}

fn check_finite<T: Real>(x: &DMatrix<T>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite_value()) {
        return Err(Error::NonFinite("data matrix"));
    }
    Ok(())
}

/// `tr(Σ⁻¹ R Δ⁻¹ Rᵀ)`.
pub(crate) fn kron_quadratic<T: Real>(covs: &CovParams<T>, resid: &DMatrix<T>) -> T {
    let left = covs.sigma_inv() * resid;
    let right = resid * covs.delta_inv();
    left.component_mul(&right).sum()
}

/// Log density of a fully observed matrix.
pub fn log_density<T: Real>(x: &DMatrix<T>, model: &TrcmModel<T>) -> Result<T> {
    model.check_shape(x.shape())?;
    check_finite(x)?;
    let (n, p) = (T::from_usize_lossy(model.n()), T::from_usize_lossy(model.p()));
    let half = T::lit(0.5);
    let resid = x - model.mean_matrix();
    Ok(-half * n * p * T::two_pi().ln()
        - half * p * model.covs.sigma_spd().log_det()
        - half * n * model.covs.delta_spd().log_det()
        - half * kron_quadratic(&model.covs, &resid))
}

/// Penalized log-likelihood of a fully observed matrix:
/// `(p/2)log|Σ⁻¹| + (n/2)log|Δ⁻¹| − ½tr(Σ⁻¹(X−M)Δ⁻¹(X−M)ᵀ) − ρ_r‖Σ⁻¹‖^{q_r} − ρ_c‖Δ⁻¹‖^{q_c}`.
pub fn penalized_loglik<T: Real>(x: &DMatrix<T>, model: &TrcmModel<T>, pen: &PenaltySpec) -> Result<T> {
    model.check_shape(x.shape())?;
    check_finite(x)?;
    let resid = x - model.mean_matrix();
    Ok(penalized_loglik_centered(&resid, &model.covs, pen))
}

pub(crate) fn penalized_loglik_centered<T: Real>(resid: &DMatrix<T>, covs: &CovParams<T>, pen: &PenaltySpec) -> T {
    let (n, p) = (T::from_usize_lossy(covs.n()), T::from_usize_lossy(covs.p()));
    let half = T::lit(0.5);
    -half * p * covs.sigma_spd().log_det() - half * n * covs.delta_spd().log_det()
        - half * kron_quadratic(covs, resid)
        - penalty(covs, pen)
}

/// Penalized log-likelihood of the observed cells.
///
/// This is the Gaussian log density of the observed part of `vec(X)` under
/// `(vec(M), Δ⊗Σ)` without the `2π` constant, minus the two penalties, so a
/// fully observed matrix gives exactly [`penalized_loglik`]. It is evaluated
/// through the precision of the missing block, never forming `Δ⊗Σ`.
pub fn observed_loglik<T: Real>(x: &MaskedMatrix<T>, model: &TrcmModel<T>, pen: &PenaltySpec) -> Result<T> {
    model.check_shape(x.shape())?;
    let m = model.mean_matrix();
    // residual on observed cells, exactly zero on missing ones
    let resid0 = x.fill_with(&m) - m;
    let (n, p) = (T::from_usize_lossy(model.n()), T::from_usize_lossy(model.p()));
    let half = T::lit(0.5);
    let block = MissingBlock::new(x, &model.covs)?;
    let quad = kron_quadratic(&model.covs, &resid0) - block.schur_correction(&resid0, &model.covs);
    let log_det_oo = p * model.covs.sigma_spd().log_det()
        + n * model.covs.delta_spd().log_det()
        + block.log_det_precision();
    Ok(-half * log_det_oo - half * quad - penalty(&model.covs, pen))
}

/// `(vec(M), Δ⊗Σ)` with the default size cap.
pub fn vec_form<T: Real>(model: &TrcmModel<T>) -> Result<(DVector<T>, DMatrix<T>)> {
    vec_form_with_cap(model, DEFAULT_VEC_CAP)
}

pub fn vec_form_with_cap<T: Real>(model: &TrcmModel<T>, cap: usize) -> Result<(DVector<T>, DMatrix<T>)> {
    let size = model.n() * model.p();
    if size > cap {
        return Err(Error::KroneckerCap { size, cap });
    }
    let m = model.mean_matrix();
    let mean = DVector::from_column_slice(m.as_slice());
    Ok((mean, linalg::kron(model.covs.delta(), model.covs.sigma())))
}

/// Draws `M + L_Σ Z L_Δᵀ` with `Z` i.i.d. standard normal.
pub fn sample<T: Real>(model: &TrcmModel<T>, seed: u64) -> DMatrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(model, &mut rng)
}

pub fn sample_with<T: Real, R: Rng + ?Sized>(model: &TrcmModel<T>, rng: &mut R) -> DMatrix<T> {
    let (n, p) = (model.n(), model.p());
    let l_row = Cholesky::new(model.covs.sigma().clone()).expect("validated SPD").l();
    let l_col = Cholesky::new(model.covs.delta().clone()).expect("validated SPD").l();
    let z = DMatrix::from_fn(n, p, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)));
    model.mean_matrix() + l_row * z * l_col.transpose()
}

/// Distribution of row `i`: `N(ν_i + μ, Σ_ii Δ)`.
pub fn marginal_row<T: Real>(model: &TrcmModel<T>, i: usize) -> Result<(DVector<T>, DMatrix<T>)> {
    if i >= model.n() {
        return Err(Error::InvalidArgument(format!("row {i} out of range")));
    }
    let mean = model.means.mu.add_scalar(model.means.nu[i]);
    Ok((mean, model.covs.delta() * model.covs.sigma()[(i, i)]))
}

/// Distribution of column `j`: `N(ν + μ_j, Δ_jj Σ)`.
pub fn marginal_col<T: Real>(model: &TrcmModel<T>, j: usize) -> Result<(DVector<T>, DMatrix<T>)> {
    if j >= model.p() {
        return Err(Error::InvalidArgument(format!("column {j} out of range")));
    }
    let mean = model.means.nu.add_scalar(model.means.mu[j]);
    Ok((mean, model.covs.sigma() * model.covs.delta()[(j, j)]))
}
