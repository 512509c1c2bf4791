//! Transposable regularized covariance models: penalized estimation of row
//! and column covariances of a matrix-variate normal, and imputation of
//! missing entries under that model.

pub mod baselines;
pub mod error;
pub mod estimation;
pub mod evalsim;
pub mod imputation;
pub mod linalg;
pub mod model;
pub mod scalar;
mod structured;

pub use error::{Error, Result};
pub use linalg::SpdMatrix;
pub use model::{CovParams, MaskedMatrix, MeanParams, Norm, PenaltySpec, TrcmModel};
pub use scalar::Real;

pub type MaskedMatrix64 = MaskedMatrix<f64>;
pub type MeanParams64 = MeanParams<f64>;
pub type CovParams64 = CovParams<f64>;
pub type TrcmModel64 = TrcmModel<f64>;
pub type MaskedMatrix32 = MaskedMatrix<f32>;
pub type TrcmModel32 = TrcmModel<f32>;
