//! Simulation criteria: reference mean squared errors and comparisons.

use trcm::evalsim::{
    derive_seed, generate_truth, inject_mcar, run_experiment, score, CovStructure, EvalOptions, ExperimentResults,
    ExperimentSpec, MethodPlan, Missingness, Noise,
};
use trcm::imputation::{trcm_impute_mcecm, trcm_impute_onestep, ImputeOptions};
use trcm::{Norm, PenaltySpec};

use crate::exact::first_error;
use crate::Verdict;

const ONESTEP: &str = "trcm-onestep L2:L2";

fn ar_spec(n: usize, p: usize, fraction: f64, replicates: usize, seed: u64, methods: Vec<MethodPlan>) -> ExperimentSpec {
    ExperimentSpec {
        n,
        p,
        row_cov: CovStructure::autoregressive(n, 0.8),
        col_cov: CovStructure::autoregressive(p, 0.6),
        noise: Noise::Gaussian,
        missingness: Missingness::Mcar { fraction },
        replicates,
        seed,
        methods,
        folds: 5,
    }
}

fn onestep_plan() -> MethodPlan {
    MethodPlan::TrcmOnestep { q_row: Norm::L2, q_col: Norm::L2, rho_grid: None }
}

fn baselines() -> Vec<MethodPlan> {
    vec![onestep_plan(), MethodPlan::Svd { ranks: None }, MethodPlan::Knn { ks: None }]
}

/// `(mean, se, failed)` for one method, or a description of why not.
fn summary(results: &ExperimentResults, method: &str) -> Result<(f64, f64, usize), String> {
    let s = results.summary_for(method).ok_or_else(|| format!("no summary for {method}"))?;
    if s.succeeded == 0 {
        return Err(format!("{method}: every replicate failed"));
    }
    Ok((s.mean_mse, s.se, s.failed))
}

fn run(spec: &ExperimentSpec) -> Result<ExperimentResults, String> {
    run_experiment(spec, &EvalOptions::default()).map_err(|e| e.to_string())
}

/// One-step against the full MCECM fit at fixed penalties.
pub fn onestep_vs_mcecm() -> Verdict {
    let pen = PenaltySpec::l2l2(1.0, 1.0);
    let opts = ImputeOptions::default();
    let mut parts = Vec::new();
    let mut errors = Vec::new();
    let mut pass = true;
    for (level, fraction) in [0.10, 0.25, 0.40].into_iter().enumerate() {
        let spec = ar_spec(25, 25, fraction, 20, 600 + level as u64, Vec::new());
        let (mut one, mut full) = (Vec::new(), Vec::new());
        for r in 0..spec.replicates as u64 {
            let outcome = generate_truth(&spec, derive_seed(spec.seed, 1, r)).and_then(|truth| {
                let x = inject_mcar(&truth, fraction, derive_seed(spec.seed, 2, r))?;
                let a = trcm_impute_onestep(&x, &pen, &opts)?;
                let b = trcm_impute_mcecm(&x, &pen, &opts)?;
                Ok((score(&a.completed, &truth, &x)?.mse, score(&b.completed, &truth, &x)?.mse))
            });
            match outcome {
                Ok((a, b)) => {
                    one.push(a);
                    full.push(b);
                }
                Err(e) => errors.push(format!("{fraction} replicate {r}: {e}")),
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        let (a, b) = (mean(&one), mean(&full));
        pass &= !one.is_empty() && a <= 1.1 * b;
        parts.push(format!("{:.0}%: one-step {a:.4} vs MCECM {b:.4}", fraction * 100.0));
    }
    pass &= errors.is_empty();
    Verdict::new(pass, format!("{}{}", parts.join(", "), first_error(&errors)))
}

fn within(label: &str, got: (f64, f64, usize), target: f64, se: f64, width: f64) -> (bool, String) {
    let (mean, own_se, failed) = got;
    let ok = (mean - target).abs() <= width * se && failed == 0;
    let fails = if failed > 0 { format!(", {failed} failed") } else { String::new() };
    (
        ok,
        format!("{label} {mean:.4} (se {own_se:.4}{fails}) target {target} +/- {:.4}", width * se),
    )
}

/// Gaussian 50×50 table: one-step, SVD and KNN means near the reference values.
pub fn table_square() -> Verdict {
    let spec = ar_spec(50, 50, 0.25, 50, 700, baselines());
    let results = match run(&spec) {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, e),
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (method, label, target, se, width) in
        [(ONESTEP, "TRCMA", 0.5402, 0.0067, 3.0), ("svd", "SVD", 0.4603, 0.0083, 5.0), ("knn", "KNN", 0.8034, 0.016, 5.0)]
    {
        match summary(&results, method) {
            Ok(got) => {
                let (ok, text) = within(label, got, target, se, width);
                pass &= ok;
                parts.push(text);
            }
            Err(e) => {
                pass = false;
                parts.push(e);
            }
        }
    }
    Verdict::new(pass, parts.join("; "))
}

/// Gaussian 100×10 table: one-step mean near the reference value.
pub fn table_tall() -> Verdict {
    let spec = ar_spec(100, 10, 0.10, 50, 800, vec![onestep_plan()]);
    let results = match run(&spec) {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, e),
    };
    match summary(&results, ONESTEP) {
        Ok(got) => {
            let (ok, text) = within("TRCMA", got, 0.7072, 0.016, 3.0);
            Verdict::new(ok, text)
        }
        Err(e) => Verdict::new(false, e),
    }
}

/// Chi-square(3) noise: one-step below both baselines.
pub fn table_chisq() -> Verdict {
    let mut spec = ar_spec(50, 50, 0.25, 20, 900, baselines());
    spec.noise = Noise::Chisq3;
    let results = match run(&spec) {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, e),
    };
    let got: Result<Vec<_>, String> = [ONESTEP, "svd", "knn"].iter().map(|m| summary(&results, m)).collect();
    match got {
        Ok(v) => {
            let (a, s, k) = (v[0].0, v[1].0, v[2].0);
            Verdict::new(a < s && a < k, format!("TRCMA {a:.4}, SVD {s:.4}, KNN {k:.4}"))
        }
        Err(e) => Verdict::new(false, e),
    }
}
