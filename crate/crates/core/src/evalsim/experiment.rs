use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, DiscreteCDF, Normal, Poisson};

use super::covstruct::{gen_covariance, CovStructure};
use super::cv::{fit_with_cv, select_onestep_model, EvalOptions, MethodConfig};
use super::missing::{inject_mcar, inject_pattern};
use super::score::score;
use crate::baselines::MeanAxis;
use crate::error::{Error, Result};
use crate::model::{sample_with, CovParams, MaskedMatrix, MeanParams, Norm, PenaltySpec, TrcmModel};

/// Marginal distribution of the simulated entries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    #[default]
    Gaussian,
    /// Chi-square with 3 degrees of freedom, standardized.
    Chisq3,
    /// Poisson with mean 3, standardized.
    Poisson3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Missingness {
    Mcar { fraction: f64 },
    /// Rows copy the observed/missing pattern of random template rows
    /// (`true` = observed).
    Pattern { template: Vec<Vec<bool>> },
}

/// A method with its tuning grid. Missing grids fall back to the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum MethodPlan {
    TrcmOnestep {
        q_row: Norm,
        q_col: Norm,
        #[serde(default)]
        rho_grid: Option<Vec<f64>>,
    },
    TrcmMcecm {
        q_row: Norm,
        q_col: Norm,
        #[serde(default)]
        rho_grid: Option<Vec<f64>>,
    },
    RcmRows {
        q: Norm,
        #[serde(default)]
        rho_grid: Option<Vec<f64>>,
    },
    RcmCols {
        q: Norm,
        #[serde(default)]
        rho_grid: Option<Vec<f64>>,
    },
    Svd {
        #[serde(default)]
        ranks: Option<Vec<usize>>,
    },
    Knn {
        #[serde(default)]
        ks: Option<Vec<usize>>,
    },
    Mean {
        axis: MeanAxis,
    },
}

/// `10^-2, 10^-1.5, …, 10^2`.
pub fn default_rho_grid() -> Vec<f64> {
    (0..9).map(|k| 10f64.powf(-2.0 + 0.5 * k as f64)).collect()
}

/// `1..=min(10, n, p)`.
pub fn default_rank_grid(n: usize, p: usize) -> Vec<usize> {
    (1..=10.min(n.min(p))).collect()
}

/// `{1, 3, 5, 10, 15}` restricted to fewer than `n` neighbors.
pub fn default_k_grid(n: usize) -> Vec<usize> {
    [1, 3, 5, 10, 15].into_iter().filter(|&k| k < n).collect()
}

impl MethodPlan {
    pub fn label(&self) -> String {
        let pen = |a: Norm, b: Norm| PenaltySpec { q_row: a, q_col: b, rho_row: 0.0, rho_col: 0.0 }.label();
        match self {
            MethodPlan::TrcmOnestep { q_row, q_col, .. } => format!("trcm-onestep {}", pen(*q_row, *q_col)),
            MethodPlan::TrcmMcecm { q_row, q_col, .. } => format!("trcm-mcecm {}", pen(*q_row, *q_col)),
            MethodPlan::RcmRows { q, .. } => format!("rcm-rows L{}", q.exponent()),
            MethodPlan::RcmCols { q, .. } => format!("rcm-cols L{}", q.exponent()),
            MethodPlan::Svd { .. } => "svd".into(),
            MethodPlan::Knn { .. } => "knn".into(),
            MethodPlan::Mean { axis } => format!("mean-{}", serde_plain_axis(*axis)),
        }
    }

    /// Penalty grid of the transposable methods: the product of the ρ grid
    /// with itself.
    pub fn penalty_grid(q_row: Norm, q_col: Norm, rho: &[f64]) -> Vec<PenaltySpec> {
        rho.iter()
            .flat_map(|&r| rho.iter().map(move |&c| PenaltySpec { q_row, q_col, rho_row: r, rho_col: c }))
            .collect()
    }

    pub fn grid(&self, n: usize, p: usize) -> Vec<MethodConfig> {
        let rho = |g: &Option<Vec<f64>>| g.clone().unwrap_or_else(default_rho_grid);
        match self {
            MethodPlan::TrcmOnestep { q_row, q_col, rho_grid } => Self::penalty_grid(*q_row, *q_col, &rho(rho_grid))
                .into_iter()
                .map(|penalty| MethodConfig::TrcmOnestep { penalty })
                .collect(),
            MethodPlan::TrcmMcecm { q_row, q_col, rho_grid } => Self::penalty_grid(*q_row, *q_col, &rho(rho_grid))
                .into_iter()
                .map(|penalty| MethodConfig::TrcmMcecm { penalty })
                .collect(),
            MethodPlan::RcmRows { q, rho_grid } => {
                rho(rho_grid).into_iter().map(|rho| MethodConfig::RcmRows { q: *q, rho }).collect()
            }
            MethodPlan::RcmCols { q, rho_grid } => {
                rho(rho_grid).into_iter().map(|rho| MethodConfig::RcmCols { q: *q, rho }).collect()
            }
            MethodPlan::Svd { ranks } => ranks
                .clone()
                .unwrap_or_else(|| default_rank_grid(n, p))
                .into_iter()
                .map(|rank| MethodConfig::Svd { rank })
                .collect(),
            MethodPlan::Knn { ks } => {
                ks.clone().unwrap_or_else(|| default_k_grid(n)).into_iter().map(|k| MethodConfig::Knn { k }).collect()
            }
            MethodPlan::Mean { axis } => vec![MethodConfig::Mean { axis: *axis }],
        }
    }
}

fn serde_plain_axis(axis: MeanAxis) -> &'static str {
    match axis {
        MeanAxis::Cols => "cols",
        MeanAxis::Rows => "rows",
        MeanAxis::Additive => "additive",
    }
}

fn default_folds() -> usize {
    5
}

/// A simulation design: truth generator, missingness, methods, replicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub n: usize,
    pub p: usize,
    /// Row covariance `Σ`; its dimension must be `n`.
    pub row_cov: CovStructure,
    /// Column covariance `Δ`; its dimension must be `p`.
    pub col_cov: CovStructure,
    #[serde(default)]
    pub noise: Noise,
    pub missingness: Missingness,
    pub replicates: usize,
    pub seed: u64,
    pub methods: Vec<MethodPlan>,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.row_cov.dim != self.n || self.col_cov.dim != self.p {
            return bad(format!(
                "covariance dimensions {}x{} do not match the {}x{} data",
                self.row_cov.dim, self.col_cov.dim, self.n, self.p
            ));
        }
        if self.replicates == 0 {
            return bad("replicate count must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods to run".into());
        }
        if let Missingness::Mcar { fraction } = self.missingness {
            if !(0.0..1.0).contains(&fraction) {
                return bad(format!("missing fraction must be in [0, 1), got {fraction}"));
            }
        }
        Ok(())
    }
}

/// Seed of work unit `index` within `stream`, independent of execution order.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}

const STREAM_TRUTH: u64 = 1;
const STREAM_MASK: u64 = 2;
const STREAM_FOLDS: u64 = 3;

/// Maps matrix-normal draws through `Φ` and the target quantile function,
/// then standardizes with the target's mean and variance.
fn transform_marginals(z: &DMatrix<f64>, sd_row: &[f64], sd_col: &[f64], noise: Noise) -> Result<DMatrix<f64>> {
    let normal = Normal::standard();
    let u = |i: usize, j: usize| normal.cdf(z[(i, j)] / (sd_row[i] * sd_col[j])).clamp(1e-16, 1.0 - 1e-16);
    let (n, p) = z.shape();
    Ok(match noise {
        Noise::Gaussian => z.clone(),
        Noise::Chisq3 => {
            let chi = ChiSquared::new(3.0).map_err(|e| Error::Numerical(e.to_string()))?;
            DMatrix::from_fn(n, p, |i, j| (chi.inverse_cdf(u(i, j)) - 3.0) / 6f64.sqrt())
        }
        Noise::Poisson3 => {
            let pois = Poisson::new(3.0).map_err(|e| Error::Numerical(e.to_string()))?;
            DMatrix::from_fn(n, p, |i, j| (pois.inverse_cdf(u(i, j)) as f64 - 3.0) / 3f64.sqrt())
        }
    })
}

/// Draws the complete matrix of replicate `seed`.
pub fn generate_truth(spec: &ExperimentSpec, seed: u64) -> Result<DMatrix<f64>> {
    let covs = CovParams::new(gen_covariance(&spec.row_cov)?, gen_covariance(&spec.col_cov)?)?;
    let sd_row: Vec<f64> = covs.sigma().diagonal().iter().map(|v| v.sqrt()).collect();
    let sd_col: Vec<f64> = covs.delta().diagonal().iter().map(|v| v.sqrt()).collect();
    let model = TrcmModel::new(MeanParams::zeros(spec.n, spec.p), covs)?;
    let z = sample_with(&model, &mut ChaCha8Rng::seed_from_u64(seed));
    transform_marginals(&z, &sd_row, &sd_col, spec.noise)
}

fn apply_missingness(truth: &DMatrix<f64>, missingness: &Missingness, seed: u64) -> Result<MaskedMatrix<f64>> {
    match missingness {
        Missingness::Mcar { fraction } => inject_mcar(truth, *fraction, seed),
        Missingness::Pattern { template } => {
            let rows = template.len();
            let cols = template.first().map_or(0, Vec::len);
            if template.iter().any(|r| r.len() != cols) {
                return Err(Error::Dimension("pattern template rows differ in length".into()));
            }
            let mask = DMatrix::from_fn(rows, cols, |i, j| template[i][j]);
            let t = MaskedMatrix::new(DMatrix::<f64>::zeros(rows, cols), mask)?;
            inject_pattern(truth, &t, seed)
        }
    }
}

/// One method on one replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub method: String,
    pub mse: Option<f64>,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    /// The cross-validated setting, serialized.
    pub selected: Option<String>,
    /// For the one-step imputer, the selected candidate.
    pub candidate: Option<String>,
    pub converged: bool,
    pub error: Option<String>,
}

/// Mean MSE with its standard error over the successful replicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean_mse: f64,
    /// Sample standard deviation over `√replicates`.
    pub se: f64,
    pub succeeded: usize,
    pub failed: usize,
    pub not_converged: usize,
    /// For the one-step imputer, replicates where a marginal candidate won.
    pub marginal_chosen: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub rows: Vec<ReplicateRow>,
    pub summary: Vec<MethodSummary>,
    pub notes: Vec<String>,
}

impl ExperimentResults {
    pub fn summary_for(&self, method: &str) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }
}

fn failed_row(replicate: usize, method: String, e: &Error) -> ReplicateRow {
    ReplicateRow {
        replicate,
        method,
        mse: None,
        rmse: None,
        mae: None,
        selected: None,
        candidate: None,
        converged: false,
        error: Some(e.to_string()),
    }
}

fn run_method(
    plan: &MethodPlan,
    truth: &DMatrix<f64>,
    x: &MaskedMatrix<f64>,
    replicate: usize,
    fold_seed: u64,
    folds: usize,
    opts: &EvalOptions,
) -> ReplicateRow {
    let label = plan.label();
    let (n, p) = x.shape();
    let outcome = match plan {
        MethodPlan::TrcmOnestep { q_row, q_col, rho_grid } => {
            let grid = MethodPlan::penalty_grid(*q_row, *q_col, rho_grid.as_deref().unwrap_or(&default_rho_grid()));
            select_onestep_model(x, &grid, folds, fold_seed, opts).map(|sel| {
                let selected = format!("rho_row={} rho_col={}", sel.penalty.rho_row, sel.penalty.rho_col);
                (sel.report, selected, Some(sel.choice.to_string()))
            })
        }
        _ => fit_with_cv(x, &plan.grid(n, p), folds, fold_seed, opts)
            .map(|(cv, report)| (report, format!("{:?}", cv.best), None)),
    };
    match outcome.and_then(|(report, selected, candidate)| {
        score(&report.completed, truth, x).map(|s| (s, report.converged, selected, candidate))
    }) {
        Ok((s, converged, selected, candidate)) => ReplicateRow {
            replicate,
            method: label,
            mse: Some(s.mse),
            rmse: Some(s.rmse),
            mae: Some(s.mae),
            selected: Some(selected),
            candidate,
            converged,
            error: None,
        },
        Err(e) => failed_row(replicate, label, &e),
    }
}

fn run_replicate(spec: &ExperimentSpec, r: usize, opts: &EvalOptions) -> Vec<ReplicateRow> {
    let data = generate_truth(spec, derive_seed(spec.seed, STREAM_TRUTH, r as u64)).and_then(|truth| {
        let x = apply_missingness(&truth, &spec.missingness, derive_seed(spec.seed, STREAM_MASK, r as u64))?;
        Ok((truth, x))
    });
    let fold_seed = derive_seed(spec.seed, STREAM_FOLDS, r as u64);
    match data {
        Ok((truth, x)) => {
            spec.methods.iter().map(|m| run_method(m, &truth, &x, r, fold_seed, spec.folds, opts)).collect()
        }
        Err(e) => spec.methods.iter().map(|m| failed_row(r, m.label(), &e)).collect(),
    }
}

fn summarize(spec: &ExperimentSpec, rows: &[ReplicateRow]) -> Vec<MethodSummary> {
    spec.methods
        .iter()
        .map(|plan| {
            let label = plan.label();
            let mine: Vec<&ReplicateRow> = rows.iter().filter(|r| r.method == label).collect();
            let mses: Vec<f64> = mine.iter().filter_map(|r| r.mse).collect();
            let k = mses.len() as f64;
            let mean_mse = mses.iter().sum::<f64>() / k;
            let se = if mses.len() > 1 {
                (mses.iter().map(|m| (m - mean_mse).powi(2)).sum::<f64>() / (k - 1.0)).sqrt() / k.sqrt()
            } else {
                f64::NAN
            };
            let marginal_chosen = matches!(plan, MethodPlan::TrcmOnestep { .. }).then(|| {
                mine.iter().filter(|r| r.candidate.as_deref().is_some_and(|c| c != "trcm")).count()
            });
            MethodSummary {
                method: label,
                mean_mse,
                se,
                succeeded: mses.len(),
                failed: mine.len() - mses.len(),
                not_converged: mine.iter().filter(|r| r.error.is_none() && !r.converged).count(),
                marginal_chosen,
            }
        })
        .collect()
}

/// Runs every replicate of `spec` and aggregates the held-out MSE per
/// method. Replicates run in parallel; each derives its seeds from the
/// master seed and its index, so results do not depend on scheduling.
pub fn run_experiment(spec: &ExperimentSpec, opts: &EvalOptions) -> Result<ExperimentResults> {
    spec.validate()?;
    let rows: Vec<ReplicateRow> =
        (0..spec.replicates).into_par_iter().flat_map_iter(|r| run_replicate(spec, r, opts)).collect();
    let summary = summarize(spec, &rows);
    let mut notes = Vec::new();
    if spec.noise != Noise::Gaussian {
        notes.push(
            "non-Gaussian entries are transformed matrix-normal draws; their correlation only approximates the \
             nominal structure"
                .to_string(),
        );
    }
    for s in &summary {
        if s.failed > 0 {
            notes.push(format!("{}: {} replicates failed", s.method, s.failed));
        }
    }
    Ok(ExperimentResults { rows, summary, notes })
}
