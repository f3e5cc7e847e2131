//! One line per acceptance criterion; exits nonzero if any fails.

use std::process::ExitCode;

fn main() -> ExitCode {
    let outcomes = cityroad::acceptance::run_all();
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
