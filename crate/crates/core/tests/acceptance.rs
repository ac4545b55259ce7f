//! Reproduction criteria, one PASS/FAIL line each. Exits nonzero if any
//! criterion fails.

use std::process::ExitCode;
use std::thread;

use chartchirp::repro::{self, CriterionResult};

fn main() -> ExitCode {
    // criterion 1 carries a wall-clock limit, so it runs alone
    let first = repro::criterion_1();
    println!("{first}");
    let rest: Vec<CriterionResult> = thread::scope(|s| {
        let handles: Vec<_> = repro::CRITERIA[1..].iter().map(|c| s.spawn(c)).collect();
        handles.into_iter().map(|h| h.join().expect("criterion panicked")).collect()
    });
    for r in &rest {
        println!("{r}");
    }
    let failed: Vec<u32> = std::iter::once(&first).chain(&rest).filter(|r| !r.passed).map(|r| r.id).collect();
    println!("acceptance: {} of 9 criteria passed", 9 - failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
