//! Helpers for the acceptance suite: grid sweeps on the manufactured problem,
//! per-curve rate extraction and PASS/FAIL reporting.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use quadip::harness::{run_experiment, ConvergenceRecord, ExperimentSpec};
use quadip::postprocess::rates;

/// Outcome of one criterion.
#[derive(Debug, Clone)]
pub struct Check {
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }

    /// Combine several sub-checks; passes only if all of them do.
    pub fn all(parts: Vec<Check>) -> Self {
        let passed = parts.iter().all(|c| c.passed);
        let detail = parts.iter().map(|c| c.detail.as_str()).collect::<Vec<_>>().join("; ");
        Self { passed, detail }
    }
}

pub struct Criterion {
    pub number: u32,
    pub name: &'static str,
    pub run: fn() -> Check,
    /// Wall-clock limit, checked in addition to the criterion's own conditions.
    pub time_limit: Option<Duration>,
}

/// Run every criterion, print one line each and return the number of failures.
pub fn run_all(criteria: &[Criterion]) -> usize {
    let mut failures = 0;
    for c in criteria {
        let start = Instant::now();
        let mut check = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Check::new(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        if let Some(limit) = c.time_limit {
            if elapsed > limit {
                check.passed = false;
                check.detail.push_str(&format!(
                    "; runtime {:.1} s exceeds {:.0} s",
                    elapsed.as_secs_f64(),
                    limit.as_secs_f64()
                ));
            }
        }
        if !check.passed {
            failures += 1;
        }
        println!(
            "{} criterion {:>2} ({}) [{:.1} s]: {}",
            if check.passed { "PASS" } else { "FAIL" },
            c.number,
            c.name,
            elapsed.as_secs_f64(),
            check.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    failures
}

fn list<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// Sweep the manufactured plate problem over the given grid.
pub fn sweep(methods: &[&str], nu: &[f64], df: &[f64], levels: [u32; 2]) -> Vec<ConvergenceRecord> {
    let quoted: Vec<String> = methods.iter().map(|m| format!("\"{m}\"")).collect();
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let text = format!(
        "problem = \"manufactured\"\nfield = \"plate\"\nmethods = [{}]\nnu = [{}]\ndf = [{}]\nseed = 1\nlevels = [{}, {}]\njobs = {jobs}\n",
        quoted.join(", "),
        list(nu),
        list(df),
        levels[0],
        levels[1],
    );
    let spec = ExperimentSpec::from_toml(&text).expect("valid sweep spec");
    let records = run_experiment(&spec).expect("sweep runs");
    for r in &records {
        assert!(
            r.is_ok(),
            "{} nu = {} df = {} level = {}: {}",
            r.method,
            r.nu,
            r.df,
            r.level,
            r.status
        );
    }
    records
}

/// One convergence curve, ordered by level.
pub fn curve<'a>(records: &'a [ConvergenceRecord], method: &str, nu: f64, df: f64) -> Vec<&'a ConvergenceRecord> {
    let mut out: Vec<_> = records.iter().filter(|r| r.method == method && r.nu == nu && r.df == df).collect();
    out.sort_by_key(|r| r.level);
    out
}

pub fn h1_rates(curve: &[&ConvergenceRecord]) -> Vec<f64> {
    let h: Vec<f64> = curve.iter().map(|r| r.h).collect();
    let e: Vec<f64> = curve.iter().map(|r| r.disp_h1.expect("ok row")).collect();
    rates(&h, &e).expect("rates")
}

pub fn stress_rates(curve: &[&ConvergenceRecord]) -> Vec<f64> {
    let h: Vec<f64> = curve.iter().map(|r| r.h).collect();
    let e: Vec<f64> = curve.iter().map(|r| r.stress_l2.expect("ok row")).collect();
    rates(&h, &e).expect("rates")
}

pub fn fmt_rates(r: &[f64]) -> String {
    format!("[{}]", r.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", "))
}
