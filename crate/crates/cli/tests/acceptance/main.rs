//! Acceptance suite: runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero if any fails. `TRCM_ACCEPTANCE=1,3,11` restricts the
//! run to the listed criteria.

mod exact;
mod invariants;
mod oracles;
mod tables;

use std::time::{Duration, Instant};

pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    run: fn(&[(usize, bool)]) -> Verdict,
}

const MIN: u64 = 60;

fn criteria() -> Vec<Criterion> {
    vec![
        Criterion {
            id: 1,
            name: "closed-form L2:L2 estimate",
            budget: Duration::from_secs(MIN),
            run: |_| exact::closed_form_l2l2(),
        },
        Criterion {
            id: 2,
            name: "single-covariance L2 estimate",
            budget: Duration::from_secs(MIN),
            run: |_| exact::single_covariance_l2(),
        },
        Criterion {
            id: 3,
            name: "conditional expectations",
            budget: Duration::from_secs(2 * MIN),
            run: |_| exact::conditional_expectations(),
        },
        Criterion {
            id: 4,
            name: "E-step corrections",
            budget: Duration::from_secs(MIN),
            run: |_| exact::e_step_corrections(),
        },
        Criterion {
            id: 5,
            name: "MCECM monotonicity",
            budget: Duration::from_secs(5 * MIN),
            run: |_| exact::mcecm_monotone(),
        },
        Criterion {
            id: 6,
            name: "one-step vs MCECM, 25x25",
            budget: Duration::from_secs(20 * MIN),
            run: |_| tables::onestep_vs_mcecm(),
        },
        Criterion {
            id: 7,
            name: "Gaussian 50x50 MSE table",
            budget: Duration::from_secs(120 * MIN),
            run: |_| tables::table_square(),
        },
        Criterion {
            id: 8,
            name: "Gaussian 100x10 MSE table",
            budget: Duration::from_secs(30 * MIN),
            run: |_| tables::table_tall(),
        },
        Criterion {
            id: 9,
            name: "chi-square 50x50 ordering",
            budget: Duration::from_secs(60 * MIN),
            run: |_| tables::table_chisq(),
        },
        Criterion {
            id: 10,
            name: "pattern deletion and criteria 1-9",
            budget: Duration::from_secs(MIN),
            run: invariants::pattern_deletion,
        },
        Criterion {
            id: 11,
            name: "CLI determinism and round trip",
            budget: Duration::from_secs(5 * MIN),
            run: |_| invariants::cli_reproducible(),
        },
    ]
}

fn selected() -> Option<Vec<usize>> {
    let spec = std::env::var("TRCM_ACCEPTANCE").ok()?;
    Some(spec.split(',').filter_map(|s| s.trim().parse().ok()).collect())
}

fn main() {
    let only = selected();
    let mut results: Vec<(usize, bool)> = Vec::new();
    for c in criteria() {
        if only.as_ref().is_some_and(|ids| !ids.contains(&c.id)) {
            continue;
        }
        let start = Instant::now();
        let verdict = (c.run)(&results);
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let pass = verdict.pass && in_time;
        let late = if in_time { String::new() } else { format!(", over the {}s budget", c.budget.as_secs()) };
        println!(
            "[criterion {}] {} {} ({:.1}s{late}): {}",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.name,
            elapsed.as_secs_f64(),
            verdict.detail
        );
        results.push((c.id, pass));
    }
    let failed = results.iter().filter(|(_, ok)| !ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
