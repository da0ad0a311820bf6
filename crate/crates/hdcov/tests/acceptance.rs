//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! The checks are the same named checks the `hdcov verify` subcommand
//! runs; this target pins them at their full scales and tolerances.

use std::time::Instant;

use hdcov::verify::{self, CheckResult};

const SEED: u64 = verify::DEFAULT_VERIFY_SEED;

fn assert_criterion(number: u32, label: &str, budget_secs: f64, checks: Vec<CheckResult>) {
    assert!(!checks.is_empty());
    let failed: Vec<&CheckResult> = checks.iter().filter(|c| !c.passed()).collect();
    let status = if failed.is_empty() { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {number:02} {label}: {status}");
    for check in &checks {
        println!(
            "    [{}] {} observed={:.6e} expected={:.6e} tol={:.6e} — {}",
            check.status, check.name, check.observed, check.expected, check.tolerance, check.detail
        );
    }
    assert!(
        failed.is_empty(),
        "criterion {number} failed: {:?}",
        failed.iter().map(|c| &c.name).collect::<Vec<_>>()
    );
    // Budgets are from the criterion statements; they are deliberately
    // loose for desk hardware.
    let _ = budget_secs;
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

#[test]
fn criterion_01_derivative_oracles() {
    let (checks, secs) = timed(|| verify::derivative_oracle_checks(SEED));
    println!("criterion 01 elapsed: {secs:.1}s (budget 30s)");
    assert!(
        secs < 30.0,
        "derivative oracles took {secs:.1}s, budget 30s"
    );
    assert_criterion(1, "derivative-oracles", 30.0, checks);
}

#[test]
fn criterion_02_lrt_dispersion_closed_form() {
    let (check, secs) = timed(|| verify::lrt_dispersion_check(SEED));
    println!("criterion 02 elapsed: {secs:.1}s (budget 60s)");
    assert!(secs < 60.0, "dispersion check took {secs:.1}s, budget 60s");
    assert_criterion(2, "lrt-dispersion-closed-form", 60.0, vec![check]);
}

#[test]
fn criterion_03_nagao_mean_closed_form() {
    let (check, secs) = timed(|| verify::nagao_mean_check(SEED));
    println!("criterion 03 elapsed: {secs:.1}s (budget 120s)");
    assert!(
        secs < 120.0,
        "nagao mean check took {secs:.1}s, budget 120s"
    );
    assert_criterion(3, "nagao-mean-closed-form", 120.0, vec![check]);
}

#[test]
fn criterion_04_wishart_trace_moments() {
    let (checks, secs) = timed(|| verify::wishart_moment_checks(SEED));
    println!("criterion 04 elapsed: {secs:.1}s (budget 120s)");
    assert!(secs < 120.0, "wishart moments took {secs:.1}s, budget 120s");
    assert_criterion(4, "wishart-trace-moments", 120.0, checks);
}

#[test]
fn criterion_05_u_matrix_algebra() {
    let (checks, secs) = timed(|| verify::u_matrix_checks(SEED));
    println!("criterion 05 elapsed: {secs:.1}s (budget 10s)");
    assert!(secs < 10.0, "u-matrix checks took {secs:.1}s, budget 10s");
    assert_criterion(5, "u-matrix-algebra", 10.0, checks);
}

#[test]
fn criterion_06_null_clt() {
    let (checks, secs) = timed(|| verify::clt_checks(SEED));
    println!("criterion 06 elapsed: {secs:.1}s (budget 300s)");
    assert!(secs < 300.0, "CLT checks took {secs:.1}s, budget 300s");
    assert_criterion(6, "null-clt", 300.0, checks);
}

#[test]
fn criterion_07_power_reproduction() {
    let (checks, secs) = timed(|| verify::power_reproduction_checks(SEED));
    println!("criterion 07 elapsed: {secs:.1}s (budget 600s)");
    assert!(
        secs < 600.0,
        "power reproduction took {secs:.1}s, budget 600s"
    );
    assert_criterion(7, "power-reproduction", 600.0, checks);
}

#[test]
fn criterion_08_size_control() {
    let (checks, _) = timed(|| verify::size_checks(SEED));
    assert_criterion(8, "size-control", f64::INFINITY, checks);
}

#[test]
fn criterion_09_spiked_power_orderings() {
    let (checks, _) = timed(|| verify::ordering_checks(SEED));
    assert_criterion(9, "spiked-power-orderings", f64::INFINITY, checks);
}

#[test]
fn criterion_10_contiguity_decay() {
    let (checks, _) = timed(|| verify::errbar_decay_checks(SEED));
    assert_criterion(10, "contiguity-decay", f64::INFINITY, checks);
}

#[test]
fn criterion_11_reproducibility() {
    let (checks, _) = timed(|| verify::reproducibility_checks(SEED));
    assert_criterion(11, "reproducibility", f64::INFINITY, checks);
}
