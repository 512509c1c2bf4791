//! Penalized maximum-likelihood estimation of means and covariances.

mod glasso;
mod means;
mod rcm;
mod trcm;

use serde::{Deserialize, Serialize};

pub use glasso::{glasso, glasso_objective, glasso_warm, GlassoFit};
pub use means::{estimate_means, gls_means};
pub use rcm::{concentration_update, l2_eigenvalue, rcm_l1_cov, rcm_l2_cov, RegularizedCov};
pub(crate) use trcm::{cm_half_step_with, objective_converged};
pub use trcm::{
    stationarity_residual, trcm_coordwise, trcm_coordwise_from, trcm_fit, trcm_l2l2, trcm_objective,
    CoordwiseFit, SpectralSolution,
};

/// Starting point of the coordinate-wise solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    Identity,
    /// `AAᵀ/k + I` with `A` standard normal, drawn from the given seed.
    Random { seed: u64 },
}

/// Which concentration matrix the coordinate-wise solver updates first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleOrder {
    DeltaFirst,
    SigmaFirst,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_outer_iters: usize,
    /// Relative change of the objective that ends the outer loop.
    pub rel_tol: f64,
    /// Duality gap that ends a graphical-lasso solve.
    pub glasso_tol: f64,
    pub glasso_max_sweeps: usize,
    /// Diagonal jitter, applied only when a factorization fails.
    pub jitter: f64,
    pub init: InitScheme,
    pub order: CycleOrder,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_outer_iters: 500,
            rel_tol: 1e-8,
            glasso_tol: 1e-6,
            glasso_max_sweeps: 1000,
            jitter: 1e-10,
            init: InitScheme::Identity,
            order: CycleOrder::DeltaFirst,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.max_outer_iters >= 1
            && self.glasso_max_sweeps >= 1
            && self.rel_tol > 0.0
            && self.glasso_tol > 0.0
            && self.jitter > 0.0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::InvalidArgument("solver tolerances must be positive and caps at least 1".into()))
        }
    }
}
