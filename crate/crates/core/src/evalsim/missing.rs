use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::MaskedMatrix;
use crate::scalar::Real;

/// Draws allowed before giving up on a mask that empties a row or column.
pub const MASK_RETRIES: usize = 100;

/// Hides exactly `⌊fraction·n·p⌋` cells chosen uniformly without
/// replacement, redrawing when a row or column would be left empty.
pub fn inject_mcar<T: Real>(x: &DMatrix<T>, fraction: f64, seed: u64) -> Result<MaskedMatrix<T>> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("missing fraction must be in [0, 1), got {fraction}")));
    }
    let (n, p) = x.shape();
    let count = (fraction * (n * p) as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MASK_RETRIES {
        let mut mask = DMatrix::from_element(n, p, true);
        for idx in index::sample(&mut rng, n * p, count) {
            mask[(idx % n, idx / n)] = false;
        }
        match MaskedMatrix::new(x.clone(), mask) {
            Ok(m) => return Ok(m),
            Err(Error::EmptyRow(_) | Error::EmptyColumn(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::MaskRetries(MASK_RETRIES))
}

/// Gives each row of `x` the missingness pattern of a uniformly drawn row of
/// `template`. Returns the masked matrix and the template row used for each
/// row.
pub fn inject_pattern_with_sources<T: Real, U: Real>(
    x: &DMatrix<T>,
    template: &MaskedMatrix<U>,
    seed: u64,
) -> Result<(MaskedMatrix<T>, Vec<usize>)> {
    let (n, p) = x.shape();
    if template.ncols() != p {
        return Err(Error::Dimension(format!("template has {} columns, data has {p}", template.ncols())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MASK_RETRIES {
        let sources: Vec<usize> = (0..n).map(|_| rng.random_range(0..template.nrows())).collect();
        let mask = DMatrix::from_fn(n, p, |i, j| template.is_observed(sources[i], j));
        match MaskedMatrix::new(x.clone(), mask) {
            Ok(m) => return Ok((m, sources)),
            Err(Error::EmptyRow(_) | Error::EmptyColumn(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::MaskRetries(MASK_RETRIES))
}

pub fn inject_pattern<T: Real, U: Real>(x: &DMatrix<T>, template: &MaskedMatrix<U>, seed: u64) -> Result<MaskedMatrix<T>> {
    inject_pattern_with_sources(x, template, seed).map(|(m, _)| m)
}
