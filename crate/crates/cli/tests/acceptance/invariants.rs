//! Pattern deletion invariants and command-line reproducibility.

use std::path::Path;
use std::process::Command;

use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::Rng;
use tempfile::TempDir;
use trcm::evalsim::{inject_pattern, inject_pattern_with_sources};
use trcm::{Error, MaskedMatrix};

use crate::oracles::rng;
use crate::Verdict;

fn pattern_case(n: usize, p: usize, t: usize, bits: &[bool], seed: u64) -> Result<(), TestCaseError> {
    let mask = DMatrix::from_fn(t, p, |i, j| bits[i * p + j]);
    let Ok(template) = MaskedMatrix::new(DMatrix::<f64>::zeros(t, p), mask) else {
        return Ok(());
    };
    let x = DMatrix::from_fn(n, p, |i, j| (i * p + j) as f64 + 0.25);
    let first = inject_pattern_with_sources(&x, &template, seed);
    let again = inject_pattern_with_sources(&x, &template, seed);
    match (first, again) {
        (Ok((m, src)), Ok((m2, src2))) => {
            prop_assert_eq!(&src, &src2);
            prop_assert_eq!(m.mask(), m2.mask());
            prop_assert_eq!(src.len(), n);
            for i in 0..n {
                prop_assert!(src[i] < t);
                prop_assert!(!m.row_observed(i).is_empty());
                for j in 0..p {
                    prop_assert_eq!(m.is_observed(i, j), template.is_observed(src[i], j));
                    if m.is_observed(i, j) {
                        prop_assert_eq!(m.get(i, j), Some(x[(i, j)]));
                    }
                }
            }
            for j in 0..p {
                prop_assert!(!m.col_observed(j).is_empty());
            }
            let plain = inject_pattern(&x, &template, seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(plain.mask(), m.mask());
        }
        (Err(Error::MaskRetries(_)), Err(Error::MaskRetries(_))) => {}
        (a, b) => {
            return Err(TestCaseError::fail(format!("unexpected outcome {:?} / {:?}", a.err(), b.err())));
        }
    }
    Ok(())
}

/// Pattern deletion copies whole template rows, keeps observed values,
/// never empties a row or column and is reproducible from its seed.
pub fn pattern_deletion(earlier: &[(usize, bool)]) -> Verdict {
    let config = Config { cases: 512, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let strategy = (1usize..14, 1usize..9, 1usize..10, any::<u64>()).prop_flat_map(|(n, p, t, seed)| {
        (Just(n), Just(p), Just(t), prop::collection::vec(prop::bool::weighted(0.75), t * p), Just(seed))
    });
    let property = runner.run(&strategy, |(n, p, t, bits, seed)| pattern_case(n, p, t, &bits, seed));
    let failed: Vec<String> = earlier.iter().filter(|(_, ok)| !ok).map(|(c, _)| c.to_string()).collect();
    let missing = (1..=9).filter(|c| !earlier.iter().any(|(k, _)| k == c)).count();
    let mut detail = match &property {
        Ok(()) => "pattern property held on 512 cases".to_string(),
        Err(e) => format!("pattern property failed: {e}"),
    };
    if !failed.is_empty() {
        detail.push_str(&format!("; criteria {} failed", failed.join(", ")));
    }
    if missing > 0 {
        detail.push_str(&format!("; {missing} of criteria 1-9 not run"));
    }
    Verdict::new(property.is_ok() && failed.is_empty() && missing == 0, detail)
}

fn trcm(args: &[&str], dir: &Path) -> Option<i32> {
    Command::new(env!("CARGO_BIN_EXE_trcm")).args(args).current_dir(dir).output().expect("binary runs").status.code()
}

fn small_matrix() -> String {
    let mut s = String::new();
    for i in 0..12 {
        let row: Vec<String> = (0..7)
            .map(|j| {
                if (i * 7 + j) % 6 == 4 {
                    "NA".to_string()
                } else {
                    format!("{}", ((i * 7 + j) as f64 * 0.73).sin() + 0.2 * i as f64 - 0.1 * j as f64)
                }
            })
            .collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

const SIMULATION: &str = r#"
experiment.n = 10
experiment.p = 6
experiment.row_cov = { kind = "autoregressive", dim = 10, value = 0.8 }
experiment.col_cov = { kind = "banded", dim = 6, value = 0.5 }
experiment.missingness = { kind = "mcar", fraction = 0.2 }
experiment.replicates = 2
experiment.seed = 9
experiment.folds = 3
experiment.methods = [{ method = "mean", axis = "rows" }, { method = "knn", ks = [1, 3] }, { method = "trcm-onestep", q_row = "l2", q_col = "l1", rho_grid = [0.5, 2.0] }]
"#;

/// Everything a run wrote, keyed by file suffix, with the sidecar's own
/// output path blanked.
fn outputs(dir: &Path, stem: &str) -> Vec<(String, Vec<u8>)> {
    let mut found = Vec::new();
    for suffix in ["", ".sigma.csv", ".delta.csv", ".row_means.csv", ".col_means.csv", ".report.json"] {
        let path = dir.join(format!("{stem}{suffix}"));
        let Ok(bytes) = std::fs::read(&path) else { continue };
        let bytes = if suffix == ".report.json" {
            let mut v: serde_json::Value = serde_json::from_slice(&bytes).expect("sidecar is JSON");
            v["config"]["output"] = serde_json::Value::Null;
            serde_json::to_vec(&v).unwrap()
        } else {
            bytes
        };
        found.push((suffix.to_string(), bytes));
    }
    found
}

fn random_value(g: &mut rand_chacha::ChaCha8Rng) -> f64 {
    if g.random_bool(0.1) {
        // subnormal
        return f64::from_bits(g.random::<u64>() & 0x800F_FFFF_FFFF_FFFF);
    }
    let mantissa = f64::from_bits((g.random::<u64>() & 0x000F_FFFF_FFFF_FFFF) | 0x3FF0_0000_0000_0000);
    let sign = if g.random_bool(0.5) { -1.0 } else { 1.0 };
    sign * mantissa * 2f64.powi(g.random_range(-1000..990))
}

/// Random matrices written with shortest round-trip formatting keep every
/// observed bit pattern through a parse and write.
fn round_trip(dir: &Path, seed: u64) -> Result<(), String> {
    let mut g = rng(seed);
    let (n, p) = (g.random_range(1..8usize), g.random_range(1..6usize));
    let labelled = seed % 2 == 1;
    let (delim, token) = if labelled { (';', "-") } else { (',', "NA") };
    let values = DMatrix::from_fn(n, p, |_, _| random_value(&mut g));
    // every row and column keeps the cell on its wrapped diagonal
    let observed = DMatrix::from_fn(n, p, |i, j| i == j % n || j == i % p || g.random_bool(0.7));
    let mut text = String::new();
    if labelled {
        let names: Vec<String> = (0..p).map(|j| format!("c{j}")).collect();
        text.push_str(&format!("id{delim}{}\n", names.join(&delim.to_string())));
    }
    for i in 0..n {
        let mut fields: Vec<String> = Vec::new();
        if labelled {
            fields.push(format!("r{i}"));
        }
        for j in 0..p {
            fields.push(if observed[(i, j)] { format!("{}", values[(i, j)]) } else { token.to_string() });
        }
        text.push_str(&fields.join(&delim.to_string()));
        text.push('\n');
    }
    std::fs::write(dir.join("rt.csv"), &text).map_err(|e| e.to_string())?;
    let delim_s = delim.to_string();
    let mut args = vec!["impute", "--input", "rt.csv", "--output", "rt_out.csv", "--method", "mean-cols"];
    args.extend(["--delimiter", &delim_s, "--na-token", token]);
    if labelled {
        args.extend(["--header", "--rownames"]);
    }
    if trcm(&args, dir) != Some(0) {
        return Err(format!("seed {seed}: impute failed"));
    }
    let written = std::fs::read_to_string(dir.join("rt_out.csv")).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = written.lines().collect();
    let orig: Vec<&str> = text.lines().collect();
    if lines.len() != orig.len() {
        return Err(format!("seed {seed}: {} lines written for {}", lines.len(), orig.len()));
    }
    let skip = usize::from(labelled);
    if labelled && lines[0] != orig[0] {
        return Err(format!("seed {seed}: header changed"));
    }
    for i in 0..n {
        let fields: Vec<&str> = lines[i + skip].split(delim).collect();
        if labelled && fields[0] != format!("r{i}") {
            return Err(format!("seed {seed}: row name {i} changed"));
        }
        for j in 0..p {
            let got: f64 = fields[j + skip].parse().map_err(|_| format!("seed {seed}: unparsable output"))?;
            if observed[(i, j)] && got.to_bits() != values[(i, j)].to_bits() {
                return Err(format!("seed {seed}: cell ({i}, {j}) {} became {got}", values[(i, j)]));
            }
        }
    }
    Ok(())
}

/// Re-running every command from its sidecar reproduces all outputs byte for
/// byte; parse and write preserve observed cells exactly.
pub fn cli_reproducible() -> Verdict {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(d.join("in.csv"), small_matrix()).unwrap();
    std::fs::write(d.join("sim.toml"), SIMULATION).unwrap();
    let input = ["--input", "in.csv"];
    let mut runs: Vec<(&str, Vec<&str>)> = Vec::new();
    for method in ["trcm-onestep", "trcm-mcecm", "rcm-rows", "rcm-cols", "svd", "knn", "mean-additive"] {
        let mut a = vec!["--method", method, "--rank", "2", "--k", "3", "--rho-row", "0.7", "--rho-col", "1.3"];
        a.extend(input);
        runs.push(("impute", a));
    }
    let mut l1 = vec!["--method", "trcm-onestep", "--q-row", "1", "--q-col", "1", "--rho-row", "2", "--rho-col", "2"];
    l1.extend(input);
    runs.push(("impute", l1));
    for (method, grid) in [("svd", "--rank-grid"), ("knn", "--k-grid"), ("trcm-onestep", "--rho-grid")] {
        let values = if method == "trcm-onestep" { "0.3,3" } else { "1,2,4" };
        let mut a = vec!["--method", method, grid, values, "--folds", "3", "--seed", "21"];
        a.extend(input);
        runs.push(("cv", a));
    }
    let mut est = vec!["--rho-row", "0.5", "--rho-col", "2", "--q-col", "1"];
    est.extend(input);
    runs.push(("estimate", est));
    runs.push(("simulate", vec!["--config", "sim.toml"]));

    let mut problems = Vec::new();
    for (k, (cmd, args)) in runs.iter().enumerate() {
        let (first, second) = (format!("a{k}.csv"), format!("b{k}.csv"));
        let mut a: Vec<&str> = vec![cmd];
        a.extend(args.iter());
        a.extend(["--output", &first]);
        let code = trcm(&a, d);
        if !matches!(code, Some(0 | 2)) {
            problems.push(format!("{cmd} {}: exit {code:?}", args.join(" ")));
            continue;
        }
        let sidecar = format!("{first}.report.json");
        let rerun = trcm(&[cmd, "--config", &sidecar, "--output", &second], d);
        if rerun != code {
            problems.push(format!("{cmd} {}: re-run exit {rerun:?} vs {code:?}", args.join(" ")));
            continue;
        }
        let (x, y) = (outputs(d, &first), outputs(d, &second));
        if x.is_empty() || x != y {
            problems.push(format!("{cmd} {}: outputs differ", args.join(" ")));
        }
    }
    let trips = 40;
    for seed in 0..trips {
        if let Err(e) = round_trip(d, seed) {
            problems.push(e);
        }
    }
    let detail = format!(
        "{} sidecar re-runs, {trips} random round trips{}",
        runs.len(),
        crate::exact::first_error(&problems)
    );
    Verdict::new(problems.is_empty(), detail)
}
