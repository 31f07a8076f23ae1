//! Which passage times make the filtration jump, and which are announced.

use slmj::filtration::{classify_inaccessible, detect_passages, filtration_jump_intervals, left_isolated, DriverKind, LevelSet};
use slmj::stochastics::{sample_brownian, TimeGrid};
use slmj::RngSpec;

fn main() -> slmj::Result<()> {
    // 1 - 1/n for n = 2..6, then their limit 1
    let mut lv: Vec<f64> = (2..=6).map(|n| 1.0 - 1.0 / n as f64).collect();
    lv.push(1.0);
    let mut from_below = vec![false; lv.len()];
    *from_below.last_mut().unwrap() = true;
    let levels = LevelSet::with_accumulation(lv, from_below)?;
    for l in levels.levels() {
        let v = classify_inaccessible(*l, &levels, DriverKind::Brownian)?;
        println!("{l:.3}: {:?} ({})", v.class, v.reason);
    }
    println!("left-isolated: {:?}", left_isolated(&levels).iter().map(|i| i.beta).collect::<Vec<_>>());

    let grid = TimeGrid::with_step(5.0, 1.0 / 1024.0)?;
    let b = sample_brownian(grid, RngSpec::new(12, 0))?;
    let rec = detect_passages(&b, &levels, Some(RngSpec::new(12, 0).substream(slmj::rng::purpose::BRIDGE)))?;
    for j in filtration_jump_intervals(&rec, &levels)? {
        println!("no information on ({:.4}, {:.4}) then level {:.3} is reached", j.s, j.t_beta, j.beta);
    }
    Ok(())
}
