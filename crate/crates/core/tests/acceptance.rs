//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Positional arguments select checks by id (`C1` … `C10`); with none, all run.

use gaugebeam::checks::{checks, SuiteOptions};

fn main() {
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let opts = SuiteOptions::default();
    let mut failed = 0;
    for check in checks() {
        if !wanted.is_empty() && !wanted.iter().any(|w| w.eq_ignore_ascii_case(check.id)) {
            continue;
        }
        let report = check.run(&opts);
        println!("{}", report.line());
        if !report.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criterion check(s) failed");
        std::process::exit(1);
    }
}
