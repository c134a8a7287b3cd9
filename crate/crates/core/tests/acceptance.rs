//! Runs every acceptance criterion and prints one line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use octabush::acceptance::{run_one, AcceptanceOptions};

fn main() -> ExitCode {
    let opts = AcceptanceOptions::default();
    let mut failed = Vec::new();
    for id in 1..=11 {
        let start = Instant::now();
        let result = run_one(id, &opts).expect("criteria are numbered 1 to 11");
        println!("{result} [{:.2}s]", start.elapsed().as_secs_f64());
        for c in result.failures() {
            println!("        failed {}: measured {:e}, target {} {}", c.name, c.measured, c.target, c.tolerance);
        }
        for note in &result.notes {
            println!("        note: {note}");
        }
        if !result.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 11 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
