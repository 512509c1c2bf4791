//! Graphical lasso with the diagonal included in the penalty.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, SpdMatrix};
use crate::scalar::Real;

use super::SolverOptions;

#[derive(Clone, Debug)]
pub struct GlassoFit<T: Real> {
    /// Covariance estimate `Θ⁻¹`.
    pub w: DMatrix<T>,
    /// Concentration estimate `Θ`, with exact zeros where the lasso set them.
    pub w_inv: DMatrix<T>,
    pub sweeps: usize,
    /// Duality gap at exit.
    pub gap: T,
}

/// `log|Θ| − tr(SΘ) − ρ Σ_kl |Θ_kl|`, the quantity the graphical lasso
/// maximizes. Returns `-inf` when `Θ` is not positive definite.
pub fn glasso_objective<T: Real>(s: &DMatrix<T>, theta: &DMatrix<T>, rho: f64) -> T {
    match Cholesky::new(linalg::symmetrize(theta)) {
        None => -T::max_value().unwrap(),
        Some(c) => {
            linalg::chol_log_det(&c)
                - s.component_mul(theta).sum()
                - T::lit(rho) * theta.iter().fold(T::zero(), |a, v| a + v.abs())
        }
    }
}

pub fn glasso<T: Real>(s: &DMatrix<T>, rho: f64, opts: &SolverOptions) -> Result<GlassoFit<T>> {
    glasso_warm(s, rho, opts, None)
}

fn soft<T: Real>(v: T, t: T) -> T {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        T::zero()
    }
}

/// Block coordinate descent over columns (one lasso per column), optionally
/// started from a previous estimate. Stops once the duality gap and the
/// entry-wise optimality residual both fall below `opts.glasso_tol`.
pub fn glasso_warm<T: Real>(
    s: &DMatrix<T>,
    rho: f64,
    opts: &SolverOptions,
    warm: Option<&SpdMatrix<T>>,
) -> Result<GlassoFit<T>> {
    let (fit, converged) = glasso_iterate(s, rho, opts, warm)?;
    match fit {
        Some(fit) if converged => Ok(fit),
        _ => Err(Error::NoConvergence {
            what: "graphical lasso",
            iterations: opts.glasso_max_sweeps,
            residual: fit.map_or(f64::INFINITY, |f| f.gap.to_f64_lossy()),
        }),
    }
}

/// The sweeps behind [`glasso_warm`]. Returns the last positive definite
/// iterate (if any) and whether it met the stopping rule.
pub(crate) fn glasso_iterate<T: Real>(
    s: &DMatrix<T>,
    rho: f64,
    opts: &SolverOptions,
    warm: Option<&SpdMatrix<T>>,
) -> Result<(Option<GlassoFit<T>>, bool)> {
    if !s.is_square() {
        return Err(Error::Dimension("glasso input must be square".into()));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidArgument(format!("glasso penalty must be positive, got {rho}")));
    }
    if s.iter().any(|v| !v.is_finite_value()) {
        return Err(Error::NonFinite("glasso input"));
    }
    let p = s.nrows();
    let r = T::lit(rho);
    let tol = T::lit(opts.glasso_tol);
    let s = linalg::symmetrize(s);

    // W holds the working covariance, started at S + ρI; column j of `beta`
    // holds the lasso coefficients of column j (entry j unused). A warm
    // start seeds only the coefficients, which keeps W positive definite.
    let mut w = s.clone();
    for k in 0..p {
        w[(k, k)] = s[(k, k)] + r;
    }
    let mut beta = DMatrix::<T>::zeros(p, p);
    if let Some(prev) = warm.filter(|prev| prev.dim() == p) {
        let th = prev.inverse();
        for j in 0..p {
            for k in 0..p {
                if k != j {
                    beta[(k, j)] = -th[(k, j)] / th[(j, j)];
                }
            }
        }
    }

    let inner_tol = tol * T::lit(1e-3);
    let mut last = None;
    for sweep in 1..=opts.glasso_max_sweeps {
        for j in 0..p {
            let idx: Vec<usize> = (0..p).filter(|&k| k != j).collect();
            let mut b = DVector::from_fn(p - 1, |a, _| beta[(idx[a], j)]);
            // wb = W11 β, kept current as coordinates move
            let mut wb = DVector::from_fn(p - 1, |a, _| {
                (0..p - 1).fold(T::zero(), |acc, c| acc + w[(idx[a], idx[c])] * b[c])
            });
            for _ in 0..10_000 {
                let mut delta = T::zero();
                for a in 0..p - 1 {
                    let waa = w[(idx[a], idx[a])];
                    let partial = s[(idx[a], j)] - wb[a] + waa * b[a];
                    let new = soft(partial, r) / waa;
                    let change = new - b[a];
                    if change != T::zero() {
                        for c in 0..p - 1 {
                            wb[c] += w[(idx[c], idx[a])] * change;
                        }
                        b[a] = new;
                        delta = delta.max(change.abs());
                    }
                }
                if delta <= inner_tol {
                    break;
                }
            }
            if !b.iter().all(|v| v.is_finite_value()) {
                return Err(Error::Numerical("graphical lasso coefficients diverged".into()));
            }
            for (a, &k) in idx.iter().enumerate() {
                beta[(k, j)] = b[a];
                w[(k, j)] = wb[a];
                w[(j, k)] = wb[a];
            }
        }

        let theta = precision_from_columns(&w, &beta);
        let Some(chol) = Cholesky::new(theta.clone()) else { continue };
        let cov = linalg::symmetrize(&chol.inverse());
        let gap = duality_gap(&s, &theta, &cov, &chol, r);
        let done = gap <= tol && kkt_residual(&s, &theta, &cov, r) <= tol;
        last = Some(GlassoFit { w: cov, w_inv: theta, sweeps: sweep, gap });
        if done {
            return Ok((last, true));
        }
    }
    Ok((last, false))
}

/// `Θ` from the column coefficients: `θ_jj = 1/(w_jj − w_12ᵀβ)`,
/// `θ_12 = −β θ_jj`, then symmetrized. Entries where both column solves
/// returned zero stay exactly zero.
fn precision_from_columns<T: Real>(w: &DMatrix<T>, beta: &DMatrix<T>) -> DMatrix<T> {
    let p = w.nrows();
    let mut theta = DMatrix::zeros(p, p);
    for j in 0..p {
        let dot = (0..p).filter(|&k| k != j).fold(T::zero(), |a, k| a + w[(k, j)] * beta[(k, j)]);
        let tjj = T::one() / (w[(j, j)] - dot);
        theta[(j, j)] = tjj;
        for k in 0..p {
            if k != j {
                theta[(k, j)] = -beta[(k, j)] * tjj;
            }
        }
    }
    let half = T::lit(0.5);
    DMatrix::from_fn(p, p, |a, b| {
        if a == b {
            theta[(a, a)]
        } else if theta[(a, b)] == T::zero() && theta[(b, a)] == T::zero() {
            T::zero()
        } else {
            half * (theta[(a, b)] + theta[(b, a)])
        }
    })
}

/// Primal `−log|Θ| + tr(SΘ) + ρ‖Θ‖₁` minus the dual value `log|S + U| + p`
/// at the feasible point `U = clip(Θ⁻¹ − S, ±ρ)`.
fn duality_gap<T: Real>(s: &DMatrix<T>, theta: &DMatrix<T>, cov: &DMatrix<T>, chol: &Cholesky<T, nalgebra::Dyn>, r: T) -> T {
    let p = s.nrows();
    let primal = -linalg::chol_log_det(chol) + s.component_mul(theta).sum()
        + r * theta.iter().fold(T::zero(), |a, v| a + v.abs());
    let feasible = DMatrix::from_fn(p, p, |a, b| s[(a, b)] + (cov[(a, b)] - s[(a, b)]).max(-r).min(r));
    match Cholesky::new(feasible) {
        Some(c) => primal - linalg::chol_log_det(&c) - T::from_usize_lossy(p),
        None => T::max_value().unwrap(),
    }
}

/// Largest entry-wise violation of `Θ⁻¹ − S − ρ·sign(Θ) = 0` (with
/// `|Θ⁻¹ − S| ≤ ρ` on zero entries).
pub(crate) fn kkt_residual<T: Real>(s: &DMatrix<T>, theta: &DMatrix<T>, cov: &DMatrix<T>, r: T) -> T {
    let mut worst = T::zero();
    for ((&t, &c), &sv) in theta.iter().zip(cov.iter()).zip(s.iter()) {
        let g = c - sv;
        let v = if t > T::zero() {
            (g - r).abs()
        } else if t < T::zero() {
            (g + r).abs()
        } else {
            (g.abs() - r).max(T::zero())
        };
        worst = worst.max(v);
    }
    worst
}
