//! The acceptance suite. Runs every criterion in sequence, so that timings are
//! not distorted by other tests, and prints one line each.

use std::process::ExitCode;

use stochopt::experiments::{run_all, CRITERIA};

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance_suite: test");
        return ExitCode::SUCCESS;
    }
    let reports = run_all();
    assert_eq!(reports.len(), CRITERIA.len());
    for r in &reports {
        println!("{}", r.line());
    }
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !(r.passed && r.within_time()))
        .map(|r| format!("{} ({})", r.id, r.name))
        .collect();
    println!(
        "{}/{} criteria passed",
        reports.len() - failed.len(),
        reports.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed criteria: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
