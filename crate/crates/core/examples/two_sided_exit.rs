//! The exit time of (−1, 1) against twice the one-sided passage hazard. The
//! two passages of one path are not independent, so the hazards do not add.

use slmj::compensator::{cumulative_intensity, exit_cumulative_hazard};

fn main() -> slmj::Result<()> {
    println!("{:>5} {:>12} {:>14} {:>10}", "t", "exit hazard", "2 x one-sided", "excess");
    for t in [0.25, 0.5, 1.0, 1.5, 2.0] {
        let exit = exit_cumulative_hazard(1.0, t)?;
        let two = 2.0 * cumulative_intensity(1.0, 0.0, t)?;
        println!("{t:>5} {exit:>12.5} {two:>14.5} {:>10.5}", exit - two);
    }
    Ok(())
}
