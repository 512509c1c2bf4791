use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Block size of the blocked structure and lag period of the banded one.
pub const STRUCTURE_PERIOD: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovKind {
    /// `value^|i−j|`.
    Autoregressive,
    /// `value` on every off-diagonal entry.
    EqualOffdiag,
    /// `value` within consecutive blocks of [`STRUCTURE_PERIOD`], zero between.
    Blocked,
    /// `value` at lags divisible by [`STRUCTURE_PERIOD`], zero elsewhere.
    Banded,
    Identity,
}

/// A unit-diagonal correlation structure of a given dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovStructure {
    pub kind: CovKind,
    pub dim: usize,
    #[serde(default)]
    pub value: f64,
}

impl CovStructure {
    pub fn new(kind: CovKind, dim: usize, value: f64) -> Self {
        Self { kind, dim, value }
    }

    pub fn autoregressive(dim: usize, base: f64) -> Self {
        Self::new(CovKind::Autoregressive, dim, base)
    }

    pub fn equal_offdiag(dim: usize, value: f64) -> Self {
        Self::new(CovKind::EqualOffdiag, dim, value)
    }

    pub fn blocked(dim: usize, value: f64) -> Self {
        Self::new(CovKind::Blocked, dim, value)
    }

    pub fn banded(dim: usize, value: f64) -> Self {
        Self::new(CovKind::Banded, dim, value)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(CovKind::Identity, dim, 0.0)
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 1.0;
        }
        let lag = i.abs_diff(j);
        let v = self.value;
        match self.kind {
            CovKind::Autoregressive => v.powi(lag as i32),
            CovKind::EqualOffdiag => v,
            CovKind::Blocked if i / STRUCTURE_PERIOD == j / STRUCTURE_PERIOD => v,
            CovKind::Banded if lag.is_multiple_of(STRUCTURE_PERIOD) => v,
            _ => 0.0,
        }
    }
}

/// Builds the matrix described by `spec` and checks it is positive definite.
pub fn gen_covariance(spec: &CovStructure) -> Result<DMatrix<f64>> {
    if spec.dim == 0 {
        return Err(Error::InvalidArgument("covariance dimension must be positive".into()));
    }
    if !spec.value.is_finite() {
        return Err(Error::NonFinite("covariance structure value"));
    }
    let m = DMatrix::from_fn(spec.dim, spec.dim, |i, j| spec.entry(i, j));
    linalg::check_pd(&m, "generated covariance")?;
    Ok(m)
}
