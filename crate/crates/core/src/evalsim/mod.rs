//! Simulation studies: covariance structures, missingness injection,
//! scoring, entry-wise cross-validation and the replicate harness.

mod covstruct;
mod cv;
mod experiment;
mod missing;
mod score;

pub use covstruct::{gen_covariance, CovKind, CovStructure, STRUCTURE_PERIOD};
pub use cv::{
    cross_validate, fit_with_cv, fold_partition, select_onestep_model, CvResult, CvRow, EvalOptions, Fold,
    MethodConfig, OnestepPoint, OnestepSelection,
};
pub use experiment::{
    default_k_grid, default_rank_grid, default_rho_grid, derive_seed, generate_truth, run_experiment,
    ExperimentResults, ExperimentSpec, MethodPlan, MethodSummary, Missingness, Noise, ReplicateRow,
};
pub use missing::{inject_mcar, inject_pattern, inject_pattern_with_sources, MASK_RETRIES};
pub use score::{score, score_cells, Score};
