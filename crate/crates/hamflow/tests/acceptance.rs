//! Every acceptance criterion at its stated tolerance, one line each.
//! Runs without the libtest harness so the lines are never captured.

use std::process::ExitCode;

use hamflow::acceptance::{run, select};

fn main() -> ExitCode {
    let outcomes = run(&select(None).expect("all criteria"), 1.0);
    for o in &outcomes {
        println!("{}", o.line());
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("{passed}/{} criteria passed", outcomes.len());
    if passed == outcomes.len() && outcomes.len() == 13 {
        ExitCode::SUCCESS
    } else {
        for o in outcomes.iter().filter(|o| !o.pass) {
            for c in o.checks.iter().filter(|c| !c.pass) {
                eprintln!("{}: {}", o.name, c.line());
            }
        }
        ExitCode::FAILURE
    }
}
