//! The four subcommands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use serde_json::json;
use trcm::estimation::{estimate_means, trcm_fit, trcm_l2l2, trcm_objective, stationarity_residual};
use trcm::evalsim::{
    default_rho_grid, fit_with_cv, run_experiment, score, select_onestep_model, ExperimentResults, MethodPlan,
};
use trcm::imputation::{ImputationReport, Method};
use trcm::linalg::eigen_range;
use trcm::MaskedMatrix64;

use crate::config::RunConfig;
use crate::io::{parse_complete, parse_matrix, write_matrix, LabeledMatrix};
use crate::report::{Metrics, Sidecar};

/// Whether every iterative part of a run converged.
pub type Converged = bool;

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref().with_context(|| format!("no {what} path given"))
}

/// Input matrix, in working orientation, and whether it was transposed.
fn load_input(cfg: &RunConfig) -> Result<(LabeledMatrix, bool)> {
    let data = parse_matrix(required(&cfg.input, "input")?, cfg)?;
    let flip = cfg.transpose && data.matrix.nrows() < data.matrix.ncols();
    if flip {
        log::info!("working on the transpose");
        Ok((data.transpose(), true))
    } else {
        Ok((data, false))
    }
}

/// Writes `completed` in the caller's orientation and returns it.
fn write_completion(cfg: &RunConfig, data: &LabeledMatrix, flip: bool, completed: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (values, labels) = if flip { (completed.transpose(), data.transpose()) } else { (completed.clone(), data.clone()) };
    write_matrix(
        required(&cfg.output, "output")?,
        &values,
        labels.header.as_deref(),
        labels.rownames.as_deref(),
        &labels.corner,
        cfg.delimiter,
    )?;
    Ok(values)
}

fn truth_metrics(cfg: &RunConfig, original: &MaskedMatrix64, completed: &DMatrix<f64>) -> Result<Option<Metrics>> {
    let Some(path) = &cfg.truth else { return Ok(None) };
    let truth = parse_complete(path, cfg)?;
    if truth.matrix.shape() != original.shape() {
        bail!("truth is {:?} but input is {:?}", truth.matrix.shape(), original.shape());
    }
    if original.is_complete() {
        bail!("input has no missing cells to score");
    }
    let s = score(completed, truth.matrix.raw_values(), original)?;
    Ok(Some(Metrics::from(&s)))
}

fn finish(
    cfg: &RunConfig,
    command: &'static str,
    data: &LabeledMatrix,
    flip: bool,
    report: &ImputationReport<f64>,
    details: serde_json::Value,
) -> Result<Converged> {
    let values = write_completion(cfg, data, flip, &report.completed)?;
    let original = if flip { data.matrix.transpose() } else { data.matrix.clone() };
    let mut sidecar = Sidecar::from_imputation(command, report, cfg);
    sidecar.metrics = truth_metrics(cfg, &original, &values)?;
    sidecar.details = details;
    sidecar.write(required(&cfg.output, "output")?)?;
    Ok(report.converged)
}

pub fn impute(cfg: &RunConfig) -> Result<Converged> {
    let method = cfg.method_config()?;
    let (data, flip) = load_input(cfg)?;
    let report = method.run(&data.matrix, &cfg.options)?;
    finish(cfg, "impute", &data, flip, &report, json!({ "method_config": method }))
}

pub fn cv(cfg: &RunConfig) -> Result<Converged> {
    let (data, flip) = load_input(cfg)?;
    let x = &data.matrix;
    let rho = cfg.rho_grid.clone().unwrap_or_else(default_rho_grid);
    let pen = cfg.penalty()?;
    let plan = match cfg.method()? {
        Method::TrcmOnestep => {
            let grid = MethodPlan::penalty_grid(pen.q_row, pen.q_col, &rho);
            let sel = select_onestep_model(x, &grid, cfg.folds, cfg.seed, &cfg.options)?;
            let details = json!({
                "selected": { "candidate": sel.choice, "penalty": sel.penalty },
                "folds": cfg.folds,
                "table": sel.rows,
            });
            return finish(cfg, "cv", &data, flip, &sel.report, details);
        }
        Method::TrcmMcecm => MethodPlan::TrcmMcecm { q_row: pen.q_row, q_col: pen.q_col, rho_grid: Some(rho) },
        Method::RcmRows => MethodPlan::RcmRows { q: pen.q_row, rho_grid: Some(rho) },
        Method::RcmCols => MethodPlan::RcmCols { q: pen.q_col, rho_grid: Some(rho) },
        Method::Svd => MethodPlan::Svd { ranks: cfg.rank_grid.clone() },
        Method::Knn => MethodPlan::Knn { ks: cfg.k_grid.clone() },
        Method::MeanCols | Method::MeanRows | Method::MeanAdditive => MethodPlan::Mean { axis: cfg.axis },
    };
    let grid = plan.grid(x.nrows(), x.ncols());
    let (result, report) = fit_with_cv(x, &grid, cfg.folds, cfg.seed, &cfg.options)?;
    let details = json!({ "selected": result.best, "folds": result.folds, "table": result.rows });
    finish(cfg, "cv", &data, flip, &report, details)
}

pub fn estimate(cfg: &RunConfig) -> Result<Converged> {
    let (data, flip) = load_input(cfg)?;
    let x = &data.matrix;
    let pen = cfg.penalty()?;
    let solver = &cfg.options.impute.solver;
    let mut notes = Vec::new();
    let filled = if x.is_complete() {
        x.raw_values().clone()
    } else {
        notes.push(format!("{} missing cells filled with the additive mean fit", x.n_missing()));
        x.fill_with(&estimate_means(x, solver)?.mean_matrix())
    };
    let means = estimate_means(&MaskedMatrix64::complete(filled.clone())?, solver)?;
    let resid = &filled - means.mean_matrix();
    let fit = trcm_fit(&resid, &pen, solver)?;
    let covs = if flip { fit.covs.transpose() } else { fit.covs.clone() };
    let (nu, mu) = if flip { (means.mu(), means.nu()) } else { (means.nu(), means.mu()) };

    let output = required(&cfg.output, "output")?;
    let with_suffix = |s: &str| {
        let mut name = output.as_os_str().to_owned();
        name.push(s);
        PathBuf::from(name)
    };
    let labels = if flip { data.transpose() } else { data.clone() };
    let (rown, coln) = (labels.rownames.as_deref(), labels.header.as_deref());
    write_matrix(&with_suffix(".sigma.csv"), covs.sigma(), rown, rown, "", cfg.delimiter)?;
    write_matrix(&with_suffix(".delta.csv"), covs.delta(), coln, coln, "", cfg.delimiter)?;
    write_matrix(&with_suffix(".row_means.csv"), &DMatrix::from_column_slice(nu.len(), 1, nu.as_slice()), None, rown, "", cfg.delimiter)?;
    write_matrix(&with_suffix(".col_means.csv"), &DMatrix::from_column_slice(mu.len(), 1, mu.as_slice()), None, coln, "", cfg.delimiter)?;

    let (sig_min, sig_max) = eigen_range(fit.covs.sigma());
    let (del_min, del_max) = eigen_range(fit.covs.delta());
    let (stat_row, stat_col) = stationarity_residual(&fit.covs, &resid, &pen);
    let spectral = if pen.is_l2l2() && pen.rho_row > 0.0 && pen.rho_col > 0.0 {
        let (_, sol) = trcm_l2l2(&resid, pen.rho_row, pen.rho_col)?;
        json!({ "rank": sol.rank, "singular_values": sol.d.as_slice() })
    } else {
        serde_json::Value::Null
    };
    let mut sidecar = Sidecar::new("estimate", format!("trcm {}", pen.label()), cfg);
    sidecar.parameters = json!({ "penalty": pen });
    sidecar.iterations = fit.cycles;
    sidecar.converged = fit.converged;
    sidecar.objective_trace = fit.trace.clone();
    sidecar.notes = notes;
    sidecar.details = json!({
        "objective": trcm_objective(&resid, &fit.covs, &pen),
        "row_cov_eigenvalue_range": [sig_min, sig_max],
        "col_cov_eigenvalue_range": [del_min, del_max],
        "stationarity_residual": { "row": stat_row, "col": stat_col },
        "spectral": spectral,
        "transposed": flip,
    });
    sidecar.write(output)?;
    Ok(fit.converged)
}

/// Writes the replicate rows followed by one aggregate row per method.
fn write_results_table(path: &Path, results: &ExperimentResults, delimiter: char) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::WriterBuilder::new().delimiter(delimiter as u8).from_writer(file);
    w.write_record(["replicate", "method", "mse", "rmse", "mae", "se", "selected", "candidate", "converged", "error"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for r in &results.rows {
        w.write_record([
            r.replicate.to_string(),
            r.method.clone(),
            opt(r.mse),
            opt(r.rmse),
            opt(r.mae),
            String::new(),
            r.selected.clone().unwrap_or_default(),
            r.candidate.clone().unwrap_or_default(),
            r.converged.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    for s in &results.summary {
        w.write_record([
            "mean".to_string(),
            s.method.clone(),
            s.mean_mse.to_string(),
            String::new(),
            String::new(),
            s.se.to_string(),
            s.marginal_chosen.map_or(String::new(), |m| format!("marginal chosen {m}")),
            String::new(),
            (s.not_converged == 0).to_string(),
            if s.failed > 0 { format!("{} failed", s.failed) } else { String::new() },
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<Converged> {
    let spec = cfg.experiment.as_ref().context("no experiment given; set the experiment.* keys in --config")?;
    let results = run_experiment(spec, &cfg.options)?;
    let output = required(&cfg.output, "output")?;
    write_results_table(output, &results, cfg.delimiter)?;
    let converged = results.rows.iter().all(|r| r.error.is_none() && r.converged);
    let mut sidecar = Sidecar::new("simulate", "experiment".into(), cfg);
    sidecar.converged = converged;
    sidecar.notes = results.notes.clone();
    sidecar.details = json!({ "summary": results.summary, "rows": results.rows });
    sidecar.write(output)?;
    Ok(converged)
}
