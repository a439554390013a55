//! Runs every acceptance criterion and prints one PASS/FAIL line each.
//! Thresholds live in `cbv_core::bench::acceptance`. Exits non-zero if any
//! criterion fails.

use std::process::ExitCode;

use cbv_core::bench::acceptance::check;

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for id in 1..=9 {
        match check(id) {
            Ok(result) => {
                println!("{result}");
                if !result.passed {
                    failed.push(id);
                }
            }
            Err(e) => {
                println!("criterion {id} FAIL: error {e}");
                failed.push(id);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 9 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} of 9 criteria failed: {failed:?}", failed.len());
        ExitCode::FAILURE
    }
}
