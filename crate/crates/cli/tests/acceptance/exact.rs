//! Criteria checked against exact references on small random instances.

use nalgebra::DMatrix;
use rand::Rng;
use trcm::estimation::{rcm_l2_cov, trcm_coordwise_from, trcm_l2l2, SolverOptions};
use trcm::imputation::{
    ace_expectation, col_conditional, e_step, row_conditional, trcm_impute_mcecm, ImputeOptions,
};
use trcm::model::sample;
use trcm::{CovParams, PenaltySpec};

use crate::oracles::*;
use crate::Verdict;

const RHOS: [f64; 3] = [0.1, 1.0, 10.0];

/// Closed-form L2:L2 estimates: eigenvalue stationarity, matrix gradients,
/// and global optimality against coordinate-wise runs from random starts.
pub fn closed_form_l2l2() -> Verdict {
    let mut g = rng(101);
    let (mut quad, mut grad, mut gap) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    let mut errors = Vec::new();
    for inst in 0..200u64 {
        let (n, p) = (g.random_range(2..=12usize), g.random_range(2..=12usize));
        let x = gaussian(n, p, &mut g);
        let (rr, rc) = (RHOS[g.random_range(0..3)], RHOS[g.random_range(0..3)]);
        let pen = PenaltySpec::l2l2(rr, rc);
        let covs = match trcm_l2l2::<f64>(&x, rr, rc) {
            Ok((c, _)) => c,
            Err(e) => {
                errors.push(format!("instance {inst}: {e}"));
                continue;
            }
        };
        let (sigma, delta) = (covs.sigma().clone(), covs.delta().clone());
        let (si, di) = (inverse(&sigma), inverse(&delta));

        let svd = x.clone().svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        for (i, &d) in svd.singular_values.iter().enumerate() {
            let ui = u.column(i);
            let vi = vt.row(i).transpose();
            let beta = (ui.transpose() * &sigma * ui)[(0, 0)];
            let theta = (vi.transpose() * &delta * &vi)[(0, 0)];
            let d2 = d * d;
            let r1 = (p as f64 * theta * beta * beta - d2 * beta - 4.0 * rr * theta).abs() / (1.0 + d2);
            let r2 = (n as f64 * beta * theta * theta - d2 * theta - 4.0 * rc * beta).abs() / (1.0 + d2);
            quad = quad.max(r1).max(r2);
        }

        let g_row = &sigma - &x * &di * x.transpose() / p as f64 - &si * (4.0 * rr / p as f64);
        let g_col = &delta - x.transpose() * &si * &x / n as f64 - &di * (4.0 * rc / n as f64);
        grad = grad.max(g_row.abs().max()).max(g_col.abs().max());

        let best = transposable_objective(&x, &sigma, &delta, &pen);
        let opts = SolverOptions { max_outer_iters: 20_000, ..SolverOptions::default() };
        for _ in 0..5 {
            let init = CovParams::new(random_spd(n, &mut g) * 2.0, random_spd(p, &mut g) * 2.0).unwrap();
            match trcm_coordwise_from(&x, &pen, &opts, init) {
                Ok(fit) => {
                    let other = transposable_objective(&x, fit.covs.sigma(), fit.covs.delta(), &pen);
                    gap = gap.max((other - best) / best.abs().max(1.0));
                }
                Err(e) => errors.push(format!("instance {inst}: coordinate-wise solver: {e}")),
            }
        }
    }
    let pass = errors.is_empty() && quad <= 1e-8 && grad <= 1e-8 && gap <= 1e-6;
    Verdict::new(
        pass,
        format!(
            "200 instances: eigen-quadratic residual {quad:.2e}, gradient {grad:.2e}, best coordinate-wise excess {gap:.2e}{}",
            first_error(&errors)
        ),
    )
}

/// Single-covariance L2 estimate against a generic maximizer, plus the
/// exact tail eigenvalue outside the row space.
pub fn single_covariance_l2() -> Verdict {
    let mut g = rng(202);
    let mut worst = 0.0f64;
    let mut tails = 0usize;
    let mut bad_tails = 0usize;
    let mut errors = Vec::new();
    for inst in 0..40 {
        // the first 20 are the 5×4 comparison; the rest have p > n
        let (n, p) = if inst < 20 { (5, 4) } else { (g.random_range(2..=5usize), g.random_range(6..=8usize)) };
        let x = gaussian(n, p, &mut g);
        let rho = RHOS[inst % 3];
        let ours = match rcm_l2_cov::<f64>(&x, rho) {
            Ok(c) => c,
            Err(e) => {
                errors.push(format!("instance {inst}: {e}"));
                continue;
            }
        };
        if inst < 20 {
            worst = worst.max(max_abs_diff(ours.cov.matrix(), &l2_covariance_by_ascent(&x, rho)));
        } else {
            let tail = 2.0 * (rho / n as f64).sqrt();
            for k in n..p {
                tails += 1;
                if ours.eigenvalues[k] != tail {
                    bad_tails += 1;
                }
            }
        }
    }
    let pass = errors.is_empty() && worst <= 1e-5 && bad_tails == 0;
    Verdict::new(
        pass,
        format!(
            "20 instances 5x4: max entry error {worst:.2e}; {}/{tails} tail eigenvalues exactly 2*sqrt(rho/n){}",
            tails - bad_tails,
            first_error(&errors)
        ),
    )
}

/// Alternating conditional expectations against dense conditioning of the
/// whole matrix, and the row/column conditionals against dense
/// conditioning on everything else.
pub fn conditional_expectations() -> Verdict {
    let mut g = rng(303);
    let (mut ace_err, mut line_err) = (0.0f64, 0.0f64);
    let mut errors = Vec::new();
    let opts = ImputeOptions::default();
    let mut inst = 0u64;
    while inst < 100 {
        let (n, p) = (g.random_range(2..=8usize), g.random_range(2..=8usize));
        if n * p > 64 || n * p < 6 {
            continue;
        }
        let model = random_model(n, p, &mut g);
        let values = sample(&model, 3000 + inst);
        let frac = g.random_range(0.1..=0.4);
        let x = random_mask(&values, frac, &mut g);
        inst += 1;

        let (mean, _) = oracle_moments(&x, &model);
        match ace_expectation(&x, &model, &opts) {
            Ok(got) => {
                for (k, (i, j)) in x.missing_cells().into_iter().enumerate() {
                    ace_err = ace_err.max((got[(i, j)] - mean[k]).abs());
                }
                if x.observed_cells().into_iter().any(|(i, j)| got[(i, j)] != values[(i, j)]) {
                    errors.push(format!("instance {inst}: observed cell changed"));
                }
            }
            Err(e) => errors.push(format!("instance {inst}: {e}")),
        }

        // arbitrary current values on the missing cells of the other lines
        let mut current = values.clone();
        for (i, j) in x.missing_cells() {
            current[(i, j)] = g.sample::<f64, _>(rand_distr::StandardNormal) * 3.0;
        }
        let full_mean = nalgebra::DVector::from_column_slice(model.mean_matrix().as_slice());
        let cov = dense_cov(model.covs.sigma(), model.covs.delta());
        let cur = nalgebra::DVector::from_column_slice(current.as_slice());
        for by_row in [true, false] {
            for line in 0..if by_row { n } else { p } {
                let rc = if by_row {
                    row_conditional(&current, &x, &model, line)
                } else {
                    col_conditional(&current, &x, &model, line)
                };
                let rc = match rc {
                    Ok(rc) => rc,
                    Err(e) => {
                        errors.push(format!("instance {inst}: {e}"));
                        continue;
                    }
                };
                if rc.missing.is_empty() {
                    continue;
                }
                let target: Vec<usize> =
                    rc.missing.iter().map(|&k| if by_row { k * n + line } else { line * n + k }).collect();
                let given: Vec<usize> = (0..n * p).filter(|k| !target.contains(k)).collect();
                let val = nalgebra::DVector::from_fn(given.len(), |a, _| cur[given[a]]);
                let (m, c) = dense_condition(&full_mean, &cov, &target, &given, &val);
                line_err = line_err.max((&rc.mean - m).amax()).max(max_abs_diff(&rc.cov, &c));
            }
        }
    }
    let pass = errors.is_empty() && ace_err <= 1e-8 && line_err <= 1e-10;
    Verdict::new(
        pass,
        format!(
            "100 instances: expectation error {ace_err:.2e}, row/column conditional error {line_err:.2e}{}",
            first_error(&errors)
        ),
    )
}

/// Scatter corrections of the E-step against brute-force sums over the
/// dense conditional covariance, and agreement of the two trace forms.
pub fn e_step_corrections() -> Verdict {
    let mut g = rng(404);
    let (mut entry_err, mut trace_err) = (0.0f64, 0.0f64);
    let mut errors = Vec::new();
    let opts = ImputeOptions::default();
    for inst in 0..50u64 {
        let (n, p) = (g.random_range(2..=8usize), g.random_range(2..=6usize));
        let model = random_model(n, p, &mut g);
        let values = sample(&model, 4000 + inst);
        let frac = g.random_range(0.1..=0.4);
        let x = random_mask(&values, frac, &mut g);
        let e = match e_step(&x, &model, &opts) {
            Ok(e) => e,
            Err(err) => {
                errors.push(format!("instance {inst}: {err}"));
                continue;
            }
        };
        let (_, c) = oracle_moments(&x, &model);
        let cells = x.missing_cells();
        let (si, di) = (inverse(model.covs.sigma()), inverse(model.covs.delta()));
        let mut g_ref = DMatrix::zeros(p, p);
        let mut f_ref = DMatrix::zeros(n, n);
        for (a, &(ia, ja)) in cells.iter().enumerate() {
            for (b, &(ib, jb)) in cells.iter().enumerate() {
                g_ref[(ja, jb)] += c[(a, b)] * si[(ib, ia)];
                f_ref[(ia, ib)] += c[(a, b)] * di[(jb, ja)];
            }
        }
        entry_err = entry_err.max(max_abs_diff(&e.g_mat, &g_ref)).max(max_abs_diff(&e.f_mat, &f_ref));
        let r = &e.x_hat - model.mean_matrix();
        let lhs = (&di * (r.transpose() * &si * &r + &e.g_mat)).trace();
        let rhs = (&si * (&r * &di * r.transpose() + &e.f_mat)).trace();
        trace_err = trace_err.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
    }
    let pass = errors.is_empty() && entry_err <= 1e-10 && trace_err <= 1e-9;
    Verdict::new(
        pass,
        format!(
            "50 instances: correction entry error {entry_err:.2e}, trace forms relative gap {trace_err:.2e}{}",
            first_error(&errors)
        ),
    )
}

/// The observed penalized log-likelihood never decreases across MCECM
/// cycles, and the recorded values are that likelihood.
pub fn mcecm_monotone() -> Verdict {
    let mut g = rng(505);
    let (mut worst_drop, mut worst_mismatch) = (0.0f64, 0.0f64);
    let mut cycles = 0usize;
    let mut errors = Vec::new();
    let opts = ImputeOptions::default();
    for inst in 0..20u64 {
        let model = random_model(12, 8, &mut g);
        let values = sample(&model, 5000 + inst);
        let x = random_mask(&values, 0.2, &mut g);
        let (rr, rc) = (RHOS[g.random_range(0..3)], RHOS[g.random_range(0..3)]);
        for pen in [PenaltySpec::l2l2(rr, rc), PenaltySpec::l1l1(rr, rc)] {
            let report = match trcm_impute_mcecm(&x, &pen, &opts) {
                Ok(r) => r,
                Err(e) => {
                    errors.push(format!("instance {inst} {}: {e}", pen.label()));
                    continue;
                }
            };
            let mut seq = vec![report.initial_objective.expect("initial objective recorded")];
            seq.extend(&report.trace);
            cycles += report.trace.len();
            for w in seq.windows(2) {
                worst_drop = worst_drop.max(w[0] - w[1]);
            }
            let fitted = report.model.as_ref().expect("model recorded");
            let oracle = observed_objective(&x, fitted, &pen);
            let last = *seq.last().unwrap();
            worst_mismatch = worst_mismatch.max((last - oracle).abs() / oracle.abs().max(1.0));
        }
    }
    let pass = errors.is_empty() && worst_drop <= 1e-9 && worst_mismatch <= 1e-8;
    Verdict::new(
        pass,
        format!(
            "40 runs, {cycles} cycles: largest decrease {worst_drop:.2e}, recorded vs dense likelihood {worst_mismatch:.2e}{}",
            first_error(&errors)
        ),
    )
}

pub fn first_error(errors: &[String]) -> String {
    match errors.first() {
        None => String::new(),
        Some(e) => format!("; {} errors, first: {e}", errors.len()),
    }
}
