//! Runs the finite-difference gradient suite and prints one row per check.
//!
//! cargo run --release --example gradient_check

use vw4c::gradcheck;

fn main() -> vw4c::Result<()> {
    let results = gradcheck::suite(0)?;
    println!("{:<40} {:>7} {:>12} {:>10}", "check", "probes", "max rel err", "tolerance");
    for r in &results {
        println!(
            "{:<40} {:>7} {:>12.3e} {:>10.0e} {}",
            r.name,
            r.probes,
            r.max_relative_error,
            r.tolerance,
            if r.passed() { "ok" } else { "FAILED" }
        );
    }
    let passed = results.iter().filter(|r| r.passed()).count();
    println!("{passed} of {} checks passed", results.len());
    Ok(())
}
