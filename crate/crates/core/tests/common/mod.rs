#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use trcm::{CovParams, MaskedMatrix, MeanParams, TrcmModel};

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

/// Hides roughly `frac` of the cells of `values`, redrawing until every row
/// and column keeps at least one observed cell.
pub fn random_mask(values: &DMatrix<f64>, frac: f64, rng: &mut ChaCha8Rng) -> MaskedMatrix<f64> {
    let (n, p) = values.shape();
    loop {
        let mask = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() >= frac);
        if let Ok(m) = MaskedMatrix::new(values.clone(), mask) {
            if m.n_missing() > 0 {
                return m;
            }
        }
    }
}

pub fn hide(values: &DMatrix<f64>, cells: &[(usize, usize)]) -> MaskedMatrix<f64> {
    MaskedMatrix::complete(values.clone()).unwrap().hide(cells).unwrap()
}

/// `Cov(vec X)` assembled entry by entry: `Cov(X_ij, X_kl) = Σ_ik Δ_jl`.
pub fn dense_cov(sigma: &DMatrix<f64>, delta: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = (sigma.nrows(), delta.nrows());
    DMatrix::from_fn(n * p, n * p, |a, b| sigma[(a % n, b % n)] * delta[(a / n, b / n)])
}

/// Mean and covariance of the `target` entries of `N(mean, cov)` given the
/// `given` entries, by LU solves on the covariance.
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

/// `E(X_m | X_o)` and `Cov(X_m | X_o)` of a masked matrix by dense
/// conditioning, cells in column-major order.
pub fn oracle_moments(x: &MaskedMatrix<f64>, model: &TrcmModel<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.nrows();
    let m = model.mean_matrix();
    let mean = DVector::from_column_slice(m.as_slice());
    let cov = dense_cov(model.covs.sigma(), model.covs.delta());
    let target: Vec<usize> = x.missing_cells().iter().map(|&(i, j)| j * n + i).collect();
    let obs = x.observed_cells();
    let given: Vec<usize> = obs.iter().map(|&(i, j)| j * n + i).collect();
    let value = DVector::from_iterator(obs.len(), obs.iter().map(|&(i, j)| x.raw_values()[(i, j)]));
    dense_condition(&mean, &cov, &target, &given, &value)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}
