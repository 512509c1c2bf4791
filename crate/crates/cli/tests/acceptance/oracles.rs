//! Independent reference computations: dense Gaussian conditioning on
//! `vec(X)`, objectives written out term by term, and a generic ascent
//! maximizer. None of these call into the library's solvers.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use trcm::{CovParams, MaskedMatrix, MeanParams, Norm, PenaltySpec, TrcmModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

pub fn random_spd(k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = gaussian(k, k, rng);
    &a * a.transpose() / k as f64 + DMatrix::identity(k, k) * 0.5
}

pub fn random_model(n: usize, p: usize, rng: &mut ChaCha8Rng) -> TrcmModel<f64> {
    let nu = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mu = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let covs = CovParams::new(random_spd(n, rng), random_spd(p, rng)).unwrap();
    TrcmModel::new(MeanParams::new(nu, mu).unwrap(), covs).unwrap()
}

/// Hides `round(frac·n·p)` cells (at least one), redrawing until every row
/// and column keeps an observed cell.
pub fn random_mask(values: &DMatrix<f64>, frac: f64, rng: &mut ChaCha8Rng) -> MaskedMatrix<f64> {
    let (n, p) = values.shape();
    let count = ((frac * (n * p) as f64).round() as usize).max(1);
    loop {
        let mut mask = DMatrix::from_element(n, p, true);
        for idx in rand::seq::index::sample(rng, n * p, count) {
            mask[(idx % n, idx / n)] = false;
        }
        if let Ok(m) = MaskedMatrix::new(values.clone(), mask) {
            return m;
        }
    }
}

pub fn log_det(m: &DMatrix<f64>) -> Option<f64> {
    m.clone().cholesky().map(|c| 2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

pub fn inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().expect("invertible")
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

/// `Cov(vec X)` entry by entry: `Cov(X_ij, X_kl) = Σ_ik Δ_jl`.
pub fn dense_cov(sigma: &DMatrix<f64>, delta: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = (sigma.nrows(), delta.nrows());
    DMatrix::from_fn(n * p, n * p, |a, b| sigma[(a % n, b % n)] * delta[(a / n, b / n)])
}

/// Moments of the `target` entries of `N(mean, cov)` given the `given`
/// entries equal `value`.
pub fn dense_condition(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    target: &[usize],
    given: &[usize],
    value: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let sub = |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |a, b| cov[(r[a], c[b])]);
    let c_tg = sub(target, given);
    let lu = sub(given, given).lu();
    let resid = DVector::from_fn(given.len(), |a, _| value[a] - mean[given[a]]);
    let m = DVector::from_fn(target.len(), |a, _| mean[target[a]]) + &c_tg * lu.solve(&resid).unwrap();
    let c = sub(target, target) - &c_tg * lu.solve(&c_tg.transpose()).unwrap();
    (m, c)
}

/// `E(X_m | X_o)` and `Cov(X_m | X_o)` by conditioning the full `vec(X)`,
/// cells in column-major order.
pub fn oracle_moments(x: &MaskedMatrix<f64>, model: &TrcmModel<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.nrows();
    let mean = DVector::from_column_slice(model.mean_matrix().as_slice());
    let cov = dense_cov(model.covs.sigma(), model.covs.delta());
    let target: Vec<usize> = x.missing_cells().iter().map(|&(i, j)| j * n + i).collect();
    let obs = x.observed_cells();
    let given: Vec<usize> = obs.iter().map(|&(i, j)| j * n + i).collect();
    let value = DVector::from_iterator(obs.len(), obs.iter().map(|&(i, j)| x.raw_values()[(i, j)]));
    dense_condition(&mean, &cov, &target, &given, &value)
}

fn penalty_term(theta: &DMatrix<f64>, q: Norm) -> f64 {
    match q {
        Norm::L1 => theta.iter().map(|v| v.abs()).sum(),
        Norm::L2 => theta.iter().map(|v| v * v).sum(),
    }
}

/// `(p/2)log|Σ⁻¹| + (n/2)log|Δ⁻¹| − ½tr(Σ⁻¹XΔ⁻¹Xᵀ) − ρ_r‖Σ⁻¹‖ − ρ_c‖Δ⁻¹‖`.
pub fn transposable_objective(x: &DMatrix<f64>, sigma: &DMatrix<f64>, delta: &DMatrix<f64>, pen: &PenaltySpec) -> f64 {
    let (n, p) = x.shape();
    let (si, di) = (inverse(sigma), inverse(delta));
    0.5 * p as f64 * log_det(&si).unwrap() + 0.5 * n as f64 * log_det(&di).unwrap()
        - 0.5 * (&si * x * &di * x.transpose()).trace()
        - pen.rho_row * penalty_term(&si, pen.q_row)
        - pen.rho_col * penalty_term(&di, pen.q_col)
}

/// Gaussian log density of the observed cells without the `2π` constant,
/// minus both penalties, from the dense observed covariance block.
pub fn observed_objective(x: &MaskedMatrix<f64>, model: &TrcmModel<f64>, pen: &PenaltySpec) -> f64 {
    let n = x.nrows();
    let cov = dense_cov(model.covs.sigma(), model.covs.delta());
    let mean = model.mean_matrix();
    let obs: Vec<usize> = x.observed_cells().iter().map(|&(i, j)| j * n + i).collect();
    let c_oo = DMatrix::from_fn(obs.len(), obs.len(), |a, b| cov[(obs[a], obs[b])]);
    let r = DVector::from_fn(obs.len(), |a, _| {
        let (i, j) = (obs[a] % n, obs[a] / n);
        x.raw_values()[(i, j)] - mean[(i, j)]
    });
    let chol = c_oo.clone().cholesky().expect("observed block is positive definite");
    let quad = r.dot(&chol.solve(&r));
    let (si, di) = (inverse(model.covs.sigma()), inverse(model.covs.delta()));
    -0.5 * log_det(&c_oo).unwrap() - 0.5 * quad - pen.rho_row * penalty_term(&si, pen.q_row)
        - pen.rho_col * penalty_term(&di, pen.q_col)
}

/// Backtracking gradient ascent on `(n/2)log|Θ| − ½tr(XᵀXΘ) − ρ‖Θ‖²_F`;
/// returns `Θ⁻¹`.
pub fn l2_covariance_by_ascent(x: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let s = x.transpose() * x;
    let f = |t: &DMatrix<f64>| log_det(t).map(|ld| 0.5 * n * ld - 0.5 * (&s * t).trace() - rho * t.norm_squared());
    let mut theta = DMatrix::identity(x.ncols(), x.ncols());
    let mut step = 0.1;
    for _ in 0..500_000 {
        let inv = inverse(&theta);
        let grad = &inv * (0.5 * n) - &s * 0.5 - &theta * (2.0 * rho);
        if grad.abs().max() < 1e-12 {
            break;
        }
        let cur = f(&theta).unwrap();
        loop {
            let cand = &theta + &grad * step;
            if f(&cand).is_some_and(|v| v >= cur + 0.25 * step * grad.norm_squared()) {
                theta = cand;
                step *= 1.5;
                break;
            }
            step *= 0.5;
            if step < 1e-30 {
                return inverse(&theta);
            }
        }
    }
    inverse(&theta)
}
