//! `trcm`: impute, estimate, cross-validate and simulate from the command line.

mod commands;
mod config;
mod io;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use trcm::baselines::MeanAxis;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "trcm", version, about = "Imputation and covariance estimation for transposable data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Impute the missing cells with one method and fixed parameters.
    Impute(Flags),
    /// Fit means and penalized row/column covariances.
    Estimate(Flags),
    /// Choose method parameters by entry-wise K-fold cross-validation, then impute.
    Cv(Flags),
    /// Run a simulation study described by the experiment.* keys of --config.
    Simulate(Flags),
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Args, Debug)]
struct Flags {
    /// TOML config with dotted keys, or a JSON report to repeat its run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Complete matrix to score the imputed cells against.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// rcm-rows, rcm-cols, trcm-mcecm, trcm-onestep, svd, knn, mean,
    /// mean-cols, mean-rows or mean-additive.
    #[arg(long)]
    method: Option<String>,
    #[arg(long, value_enum)]
    axis: Option<AxisArg>,
    #[arg(long)]
    q_row: Option<u32>,
    #[arg(long)]
    q_col: Option<u32>,
    #[arg(long)]
    rho_row: Option<f64>,
    #[arg(long)]
    rho_col: Option<f64>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated penalty weights searched by cv.
    #[arg(long, value_delimiter = ',')]
    rho_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    rank_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    k_grid: Option<Vec<usize>>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    na_token: Option<String>,
    #[arg(long)]
    delimiter: Option<char>,
    /// The first line holds column names.
    #[arg(long)]
    header: bool,
    /// The first field of each line holds a row name.
    #[arg(long)]
    rownames: bool,
    /// Work on the transpose when there are fewer rows than columns.
    #[arg(long)]
    transpose: bool,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum AxisArg {
    Cols,
    Rows,
    Additive,
}

impl Flags {
    fn resolve(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$( if let Some(v) = self.$field { cfg.$field = v; } )*};
        }
        macro_rules! set_some {
            ($($field:ident),*) => {$( if self.$field.is_some() { cfg.$field = self.$field; } )*};
        }
        set!(method, q_row, q_col, rho_row, rho_col, rank, k, folds, seed, na_token, delimiter);
        set_some!(input, output, truth, rho_grid, rank_grid, k_grid);
        if let Some(a) = self.axis {
            cfg.axis = match a {
                AxisArg::Cols => MeanAxis::Cols,
                AxisArg::Rows => MeanAxis::Rows,
                AxisArg::Additive => MeanAxis::Additive,
            };
        }
        cfg.header |= self.header;
        cfg.rownames |= self.rownames;
        cfg.transpose |= self.transpose;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Exit status for runs that finished but did not converge.
const EXIT_NOT_CONVERGED: u8 = 2;

fn run(cli: Cli) -> Result<bool> {
    let (flags, cmd): (Flags, fn(&RunConfig) -> Result<bool>) = match cli.command {
        Command::Impute(f) => (f, commands::impute),
        Command::Estimate(f) => (f, commands::estimate),
        Command::Cv(f) => (f, commands::cv),
        Command::Simulate(f) => (f, commands::simulate),
    };
    cmd(&flags.resolve()?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: an iterative step stopped before converging; results were written with converged = false");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let diverged = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<trcm::Error>(), Some(trcm::Error::NoConvergence { .. })));
            ExitCode::from(if diverged { EXIT_NOT_CONVERGED } else { 1 })
        }
    }
}
