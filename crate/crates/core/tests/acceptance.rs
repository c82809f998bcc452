//! Acceptance suite at the stated tolerances. Each test prints one
//! PASS/FAIL line; run with `--nocapture` to see them.

use rcmlab::verify::{run_criterion, Profile, VerifyOptions};

const SEED: u64 = 20_240_601;

fn options() -> VerifyOptions {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    VerifyOptions::new(SEED, workers, Profile::Full)
}

fn check(id: u8) {
    let t = run_criterion(id, &options());
    println!("{}  ({:.1}s)", t.outcome.line(), t.elapsed.as_secs_f64());
    println!("{}", serde_json::to_string(&t.outcome.details).unwrap());
    assert!(
        t.outcome.passed,
        "{}",
        serde_json::to_string_pretty(&t.outcome.details).unwrap()
    );
}

#[test]
fn criterion_01_coupling_identity() {
    check(1);
}

#[test]
fn criterion_02_exact_mean() {
    check(2);
}

#[test]
fn criterion_03_exact_variance() {
    check(3);
}

#[test]
fn criterion_04_moment_limits() {
    check(4);
}

#[test]
fn criterion_05_truncation_limits() {
    check(5);
}

#[test]
fn criterion_06_degenerate_family() {
    check(6);
}

#[test]
fn criterion_07_limiting_variance() {
    check(7);
}

#[test]
fn criterion_08_normal_approximation() {
    check(8);
}

#[test]
fn criterion_09_domination() {
    check(9);
}

#[test]
fn criterion_10_variance_ratio() {
    check(10);
}

#[test]
fn criterion_11_martingale_identity() {
    check(11);
}

#[test]
fn criterion_12_covariance_field() {
    check(12);
}

#[test]
fn criterion_13_variance_lower_bound() {
    check(13);
}

#[test]
fn criterion_14_determinism() {
    check(14);
}
