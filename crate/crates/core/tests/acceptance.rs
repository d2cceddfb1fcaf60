//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line with
//! the measured quantities; the process fails if any criterion fails.

use std::process::ExitCode;

use epstar::invariants;

fn main() -> ExitCode {
    let results = invariants::run_all(42, |r| println!("{r}"));
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed} of {} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
