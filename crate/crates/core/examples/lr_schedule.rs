//! Prints two cycles of the cyclic cosine learning-rate schedule.
//!
//! cargo run --release --example lr_schedule

use vw4c::training::ScheduleState;

fn main() -> vw4c::Result<()> {
    let schedule = ScheduleState::new(8, 2e-4, 0.0)?;
    for (step, lr) in schedule.table(2) {
        let bar = "#".repeat((lr / 2e-4 * 40.0).round() as usize);
        println!("{step:>3} cycle {} {lr:.3e} {bar}", step / schedule.steps_per_cycle + 1);
    }
    Ok(())
}
