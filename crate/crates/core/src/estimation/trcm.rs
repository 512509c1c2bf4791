//! Covariance estimation for the transposable model with known (zero) mean.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, SpdMatrix};
use crate::model::{penalized_loglik_centered, CovParams, Norm, PenaltySpec};
use crate::scalar::Real;

use super::rcm::concentration_update;
use super::{CycleOrder, InitScheme, SolverOptions};

/// The closed-form L2:L2 solution in spectral form.
#[derive(Clone, Debug)]
pub struct SpectralSolution<T: Real> {
    /// Nonzero singular values of `x`, descending.
    pub d: DVector<T>,
    /// Eigenvalues of `Σ*`, matched to the columns of `u_basis`.
    pub beta: DVector<T>,
    /// Eigenvalues of `Δ*`, matched to the columns of `v_basis`.
    pub theta: DVector<T>,
    /// `(c1, c2, c3)` of the quadratic in `β_i²` for each `i < rank`.
    pub coeffs: Vec<[T; 3]>,
    /// Full `n × n` left basis.
    pub u_basis: DMatrix<T>,
    /// Full `p × p` right basis.
    pub v_basis: DMatrix<T>,
    pub rank: usize,
}

/// Penalized log-likelihood of a centered matrix under `covs`.
pub fn trcm_objective<T: Real>(x_centered: &DMatrix<T>, covs: &CovParams<T>, pen: &PenaltySpec) -> T {
    penalized_loglik_centered(x_centered, covs, pen)
}

/// Global maximizer of the L2:L2 penalized likelihood of a centered matrix.
///
/// With `X = UDVᵀ`, `Σ* = U diag(β) Uᵀ` and `Δ* = V diag(θ) Vᵀ`, where for
/// each nonzero `d_i`, `β_i²` is the root of `c1 z² + c2 z + c3` and
/// `θ_i = d_i² β_i / (pβ_i² − 4ρ_r)`; directions with no singular value get
/// `β = 2√(ρ_r/p)` and `θ = 2√(ρ_c/n)`.
pub fn trcm_l2l2<T: Real>(x: &DMatrix<T>, rho_r: f64, rho_c: f64) -> Result<(CovParams<T>, SpectralSolution<T>)> {
    if !(rho_r > 0.0 && rho_c > 0.0) || !rho_r.is_finite() || !rho_c.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "closed form needs positive penalties, got rho_row={rho_r}, rho_col={rho_c}"
        )));
    }
    if x.iter().any(|v| !v.is_finite_value()) {
        return Err(Error::NonFinite("data matrix"));
    }
    let (n, p) = x.shape();
    let (nt, pt) = (T::from_usize_lossy(n), T::from_usize_lossy(p));
    let (rr, rc) = (T::lit(rho_r), T::lit(rho_c));
    let four = T::lit(4.0);
    let two = T::lit(2.0);
    let svd = linalg::full_svd(x);
    let rank = svd.rank;

    let mut beta = DVector::from_element(n, two * (rr / pt).sqrt());
    let mut theta = DVector::from_element(p, two * (rc / nt).sqrt());
    let mut coeffs = Vec::with_capacity(rank);
    for i in 0..rank {
        let d2 = svd.d[i] * svd.d[i];
        let d4 = d2 * d2;
        let c1 = -four * rc * pt * pt;
        let c2 = T::lit(32.0) * rr * rc * pt + d4 * (nt - pt);
        let c3 = four * rr * (d4 - T::lit(16.0) * rr * rc);
        coeffs.push([c1, c2, c3]);
        // c2² − 4c1c3 with the d-independent terms cancelled analytically:
        // d⁴(64ρ_rρ_c np + d⁴(n−p)²). The unexpanded form loses all
        // precision as d → 0, where both sides tend to (32ρ_rρ_c p)².
        let disc = d4 * (T::lit(64.0) * rr * rc * nt * pt + d4 * (nt - pt) * (nt - pt));
        if !(disc > T::zero()) {
            return Err(Error::Numerical(format!("nonpositive discriminant at index {i}")));
        }
        let sq = disc.sqrt();
        // (−c2 − √disc)/(2c1), rewritten to avoid cancellation when c2 < 0
        let b2 = if c2 >= T::zero() { (c2 + sq) / (-two * c1) } else { two * c3 / (sq - c2) };
        if !(b2 > T::zero()) {
            return Err(Error::Numerical(format!("nonpositive root at index {i}")));
        }
        let b = b2.sqrt();
        let denom = pt * b2 - four * rr;
        beta[i] = b;
        theta[i] = if denom > T::machine_epsilon().sqrt() * pt * b2 {
            d2 * b / denom
        } else {
            // The denominator is positive for every d > 0 but vanishes with
            // d, so rounding can push it to zero or below. The positive root
            // of nβθ² − d²θ − 4ρ_cβ = 0 is the same value, computed stably.
            (d2 + (d4 + T::lit(16.0) * nt * rc * b2).sqrt()) / (two * nt * b)
        };
        if !(theta[i] > T::zero()) || !theta[i].is_finite_value() {
            return Err(Error::Numerical(format!("nonpositive column eigenvalue at index {i}")));
        }
    }
    let sigma = SpdMatrix::from_eigen(&svd.u, &beta, "row covariance")?;
    let delta = SpdMatrix::from_eigen(&svd.v, &theta, "column covariance")?;
    let d = DVector::from_fn(rank, |i, _| svd.d[i]);
    Ok((
        CovParams::from_parts(sigma, delta),
        SpectralSolution { d, beta, theta, coeffs, u_basis: svd.u, v_basis: svd.v, rank },
    ))
}

/// Result of the coordinate-wise solver.
#[derive(Clone, Debug)]
pub struct CoordwiseFit<T: Real> {
    pub covs: CovParams<T>,
    /// Objective at the start and after every half-step.
    pub trace: Vec<T>,
    /// Completed full cycles.
    pub cycles: usize,
    pub converged: bool,
}

impl<T: Real> CoordwiseFit<T> {
    pub fn objective(&self) -> T {
        *self.trace.last().expect("trace holds the initial objective")
    }
}

fn random_spd<T: Real>(dim: usize, rng: &mut ChaCha8Rng) -> Result<SpdMatrix<T>> {
    let a = DMatrix::<T>::from_fn(dim, dim, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        T::lit(z)
    });
    let m = &a * a.transpose() / T::from_usize_lossy(dim) + DMatrix::identity(dim, dim);
    SpdMatrix::from_cov(m, "random initial covariance")
}

fn initial_covs<T: Real>(n: usize, p: usize, init: InitScheme) -> Result<CovParams<T>> {
    match init {
        InitScheme::Identity => Ok(CovParams::identity(n, p)),
        InitScheme::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sigma = random_spd(n, &mut rng)?;
            let delta = random_spd(p, &mut rng)?;
            Ok(CovParams::from_parts(sigma, delta))
        }
    }
}

/// One conditional-maximization half-step over `Δ` (`rows == false`) or
/// `Σ` (`rows == true`) with the other matrix held fixed.
pub(crate) fn cm_half_step<T: Real>(
    x: &DMatrix<T>,
    covs: &CovParams<T>,
    pen: &PenaltySpec,
    opts: &SolverOptions,
    rows: bool,
) -> Result<CovParams<T>> {
    cm_half_step_with(x, covs, pen, opts, rows, None)
}

/// As [`cm_half_step`], with an optional additive correction to the scatter
/// matrix (used when the data holds conditional expectations).
pub(crate) fn cm_half_step_with<T: Real>(
    x: &DMatrix<T>,
    covs: &CovParams<T>,
    pen: &PenaltySpec,
    opts: &SolverOptions,
    rows: bool,
    correction: Option<&DMatrix<T>>,
) -> Result<CovParams<T>> {
    let (n, p) = x.shape();
    if rows {
        let mut scatter = linalg::symmetrize(&(x * covs.delta_inv() * x.transpose()));
        if let Some(c) = correction {
            scatter += c;
        }
        let sigma = concentration_update(&scatter, p, pen.rho_row, pen.q_row, opts, Some(covs.sigma_spd()))?;
        Ok(CovParams::from_parts(sigma, covs.delta_spd().clone()))
    } else {
        let mut scatter = linalg::symmetrize(&(x.transpose() * covs.sigma_inv() * x));
        if let Some(c) = correction {
            scatter += c;
        }
        let delta = concentration_update(&scatter, n, pen.rho_col, pen.q_col, opts, Some(covs.delta_spd()))?;
        Ok(CovParams::from_parts(covs.sigma_spd().clone(), delta))
    }
}

pub(crate) fn objective_converged<T: Real>(prev: T, cur: T, rel_tol: f64) -> bool {
    (cur - prev).abs() <= T::lit(rel_tol) * prev.abs().max(T::one())
}

/// Block coordinate-wise maximization from `opts.init`; fails if the
/// iteration cap is reached.
pub fn trcm_coordwise<T: Real>(x: &DMatrix<T>, pen: &PenaltySpec, opts: &SolverOptions) -> Result<CoordwiseFit<T>> {
    let init = initial_covs(x.nrows(), x.ncols(), opts.init)?;
    let fit = trcm_coordwise_from(x, pen, opts, init)?;
    if !fit.converged {
        let k = fit.trace.len();
        let residual = if k >= 3 { (fit.trace[k - 1] - fit.trace[k - 3]).abs().to_f64_lossy() } else { f64::NAN };
        return Err(Error::NoConvergence { what: "coordinate-wise covariance solver", iterations: fit.cycles, residual });
    }
    Ok(fit)
}

/// Block coordinate-wise maximization from given covariances. Each cycle
/// updates `Δ` then `Σ` (or the reverse per `opts.order`); every half-step
/// is guarded so the objective never decreases. Stops when a full cycle
/// changes the objective by less than `opts.rel_tol` relative; reaching
/// the cycle cap is reported through `converged`.
pub fn trcm_coordwise_from<T: Real>(
    x: &DMatrix<T>,
    pen: &PenaltySpec,
    opts: &SolverOptions,
    init: CovParams<T>,
) -> Result<CoordwiseFit<T>> {
    opts.validate()?;
    if init.n() != x.nrows() || init.p() != x.ncols() {
        return Err(Error::Dimension(format!(
            "initial covariances are {}x{} for a {}x{} matrix",
            init.n(),
            init.p(),
            x.nrows(),
            x.ncols()
        )));
    }
    if x.iter().any(|v| !v.is_finite_value()) {
        return Err(Error::NonFinite("data matrix"));
    }
    let order = match opts.order {
        CycleOrder::DeltaFirst => [false, true],
        CycleOrder::SigmaFirst => [true, false],
    };
    let mut covs = init;
    let mut trace = vec![trcm_objective(x, &covs, pen)];
    for cycle in 1..=opts.max_outer_iters {
        let start = *trace.last().unwrap();
        for rows in order {
            covs = cm_half_step(x, &covs, pen, opts, rows)?;
            let obj = trcm_objective(x, &covs, pen);
            if !obj.is_finite_value() {
                return Err(Error::NonFinite("penalized log-likelihood"));
            }
            trace.push(obj);
        }
        if objective_converged(start, *trace.last().unwrap(), opts.rel_tol) {
            return Ok(CoordwiseFit { covs, trace, cycles: cycle, converged: true });
        }
    }
    Ok(CoordwiseFit { covs, trace, cycles: opts.max_outer_iters, converged: false })
}

/// Closed form when both penalties are positive L2, coordinate-wise
/// maximization otherwise. A coordinate-wise run that hits the cycle cap is
/// returned with `converged == false`.
pub fn trcm_fit<T: Real>(x: &DMatrix<T>, pen: &PenaltySpec, opts: &SolverOptions) -> Result<CoordwiseFit<T>> {
    if pen.is_l2l2() && pen.rho_row > 0.0 && pen.rho_col > 0.0 {
        let (covs, _) = trcm_l2l2(x, pen.rho_row, pen.rho_col)?;
        let obj = trcm_objective(x, &covs, pen);
        return Ok(CoordwiseFit { covs, trace: vec![obj], cycles: 0, converged: true });
    }
    let init = initial_covs(x.nrows(), x.ncols(), opts.init)?;
    trcm_coordwise_from(x, pen, opts, init)
}

fn gradient_residual<T: Real>(cov: &SpdMatrix<T>, scatter: &DMatrix<T>, k: usize, rho: f64, q: Norm) -> T {
    let kt = T::from_usize_lossy(k);
    let smooth = cov.matrix() - scatter / kt;
    if rho == 0.0 {
        return linalg::max_abs(&smooth);
    }
    match q {
        Norm::L2 => linalg::max_abs(&(smooth - cov.inverse() * (T::lit(4.0 * rho) / kt))),
        Norm::L1 => {
            let r = T::lit(2.0 * rho) / kt;
            let prec = cov.inverse();
            let mut worst = T::zero();
            for (g, t) in smooth.iter().zip(prec.iter()) {
                let v = if *t > T::zero() {
                    (*g - r).abs()
                } else if *t < T::zero() {
                    (*g + r).abs()
                } else {
                    (g.abs() - r).max(T::zero())
                };
                worst = worst.max(v);
            }
            worst
        }
    }
}

/// Max-abs entries of the two scaled gradients of the penalized likelihood:
/// `Σ − XΔ⁻¹Xᵀ/p − (4ρ_r/p)Σ⁻¹` and `Δ − XᵀΣ⁻¹X/n − (4ρ_c/n)Δ⁻¹` for L2
/// penalties. For L1 penalties the last term is a subgradient with weight
/// `2ρ/k`, and entries where the precision is zero count only the excess
/// over that weight. Returned as `(row, column)`.
pub fn stationarity_residual<T: Real>(covs: &CovParams<T>, x: &DMatrix<T>, pen: &PenaltySpec) -> (T, T) {
    let (n, p) = x.shape();
    let row_scatter = x * covs.delta_inv() * x.transpose();
    let col_scatter = x.transpose() * covs.sigma_inv() * x;
    (
        gradient_residual(covs.sigma_spd(), &row_scatter, p, pen.rho_row, pen.q_row),
        gradient_residual(covs.delta_spd(), &col_scatter, n, pen.rho_col, pen.q_col),
    )
}
