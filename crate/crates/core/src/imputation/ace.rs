//! Alternating conditional expectations: Gauss–Seidel sweeps that replace
//! the missing cells of each row, then each column, by their conditional
//! mean given the current values of everything else. The fixed point is
//! `E(X_m | X_o)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{MaskedMatrix, TrcmModel};
use crate::scalar::Real;

use super::conditional::line_gain;
use super::ImputeOptions;

#[derive(Clone, Debug)]
pub struct AceOutcome<T: Real> {
    pub completed: DMatrix<T>,
    /// Full sweeps performed (rows then columns).
    pub sweeps: usize,
    /// Max-abs change over the last sweep.
    pub residual: T,
    pub converged: bool,
}

struct LineOp<T: Real> {
    index: usize,
    missing: Vec<usize>,
    observed: Vec<usize>,
    gain: DMatrix<T>,
}

fn line_ops<T: Real>(
    lines: usize,
    missing: impl Fn(usize) -> Vec<usize>,
    observed: impl Fn(usize) -> Vec<usize>,
    cov: &DMatrix<T>,
    prec: &DMatrix<T>,
) -> Result<Vec<LineOp<T>>> {
    let mut ops = Vec::new();
    for index in 0..lines {
        let miss = missing(index);
        if miss.is_empty() {
            continue;
        }
        let obs = observed(index);
        let (gain, _) = line_gain(cov, prec, &miss, &obs)?;
        ops.push(LineOp { index, missing: miss, observed: obs, gain });
    }
    Ok(ops)
}

/// Runs the sweeps and reports whether the tolerance was met within the cap.
///
/// Missing cells start at `ν_i + μ_j`. Rows are visited in ascending order,
/// then columns, each update using the latest values (in place).
pub fn ace_outcome<T: Real>(x: &MaskedMatrix<T>, model: &TrcmModel<T>, opts: &ImputeOptions) -> Result<AceOutcome<T>> {
    model.check_shape(x.shape())?;
    let m = model.mean_matrix();
    if x.is_complete() {
        return Ok(AceOutcome { completed: x.raw_values().clone(), sweeps: 0, residual: T::zero(), converged: true });
    }
    let (n, p) = x.shape();
    let sigma_inv = model.covs.sigma_inv();
    let delta_inv = model.covs.delta_inv();
    let rows = line_ops(n, |i| x.row_missing(i).to_vec(), |i| x.row_observed(i).to_vec(), model.covs.delta(), delta_inv)?;
    let cols = line_ops(p, |j| x.col_missing(j).to_vec(), |j| x.col_observed(j).to_vec(), model.covs.sigma(), sigma_inv)?;

    let mut resid = x.fill_with(&m) - &m;
    let tol = T::lit(opts.ace_tol);
    let mut residual = T::zero();
    for sweep in 1..=opts.ace_max_sweeps {
        residual = T::zero();
        for op in &rows {
            let i = op.index;
            let pii = sigma_inv[(i, i)];
            // ψ − M_i = R_i − (P_i· R)/P_ii
            let v = sigma_inv.row(i) * &resid;
            let psi = DVector::from_fn(p, |j, _| resid[(i, j)] - v[j] / pii);
            let r_o = DVector::from_fn(op.observed.len(), |a, _| {
                let j = op.observed[a];
                resid[(i, j)] - psi[j]
            });
            let shift = &op.gain * r_o;
            for (a, &j) in op.missing.iter().enumerate() {
                let new = psi[j] + shift[a];
                residual = residual.max((new - resid[(i, j)]).abs());
                resid[(i, j)] = new;
            }
        }
        for op in &cols {
            let j = op.index;
            let qjj = delta_inv[(j, j)];
            let v = &resid * delta_inv.column(j);
            let phi = DVector::from_fn(n, |i, _| resid[(i, j)] - v[i] / qjj);
            let r_o = DVector::from_fn(op.observed.len(), |a, _| {
                let i = op.observed[a];
                resid[(i, j)] - phi[i]
            });
            let shift = &op.gain * r_o;
            for (a, &i) in op.missing.iter().enumerate() {
                let new = phi[i] + shift[a];
                residual = residual.max((new - resid[(i, j)]).abs());
                resid[(i, j)] = new;
            }
        }
        if residual < tol {
            return Ok(AceOutcome { completed: complete(x, &m, &resid), sweeps: sweep, residual, converged: true });
        }
    }
    Ok(AceOutcome { completed: complete(x, &m, &resid), sweeps: opts.ace_max_sweeps, residual, converged: false })
}

fn complete<T: Real>(x: &MaskedMatrix<T>, m: &DMatrix<T>, resid: &DMatrix<T>) -> DMatrix<T> {
    let mut out = x.raw_values().clone();
    for (i, j) in x.missing_cells() {
        out[(i, j)] = m[(i, j)] + resid[(i, j)];
    }
    out
}

/// `E(X_m | X_o)` by alternating conditional expectations, observed values
/// passed through. Fails if the sweep cap is reached.
pub fn ace_expectation<T: Real>(x: &MaskedMatrix<T>, model: &TrcmModel<T>, opts: &ImputeOptions) -> Result<DMatrix<T>> {
    let out = ace_outcome(x, model, opts)?;
    if !out.converged {
        return Err(Error::NoConvergence {
            what: "alternating conditional expectations",
            iterations: out.sweeps,
            residual: out.residual.to_f64_lossy(),
        });
    }
    Ok(out.completed)
}
