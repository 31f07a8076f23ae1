//! Prices seen only through a tick lattice: passage records refine as the
//! tick shrinks, and `X` projected onto tick passages.

use slmj::market::{project_ticks, tick_observe, TickGrid};
use slmj::projection::{extract_jumps, CoupledModel, ProjectionSpec};
use slmj::stochastics::{inverse_path, sample_bessel3, TimeGrid};
use slmj::RngSpec;

fn main() -> slmj::Result<()> {
    let grid = TimeGrid::with_step(1.0, 1.0 / 1024.0)?;
    let x = inverse_path(&sample_bessel3(grid, 1.0, RngSpec::new(8, 0))?)?;
    for tick in [0.5, 0.25, 0.1, 0.05] {
        let rec = tick_observe(&x, &TickGrid::new(tick, 1.0)?)?;
        let first = rec.events().first().map(|e| format!("{} at {:.4}", e.level, e.time)).unwrap_or_else(|| "none".into());
        println!("tick {tick:<5} {:>3} passages, first {first}", rec.events().len());
    }

    let model = CoupledModel::inverse_bessel(1.0)?;
    let spec = ProjectionSpec::new(TimeGrid::with_step(1.0, 1.0 / 128.0)?, 20_000, vec![0.5, 1.0], RngSpec::new(8, 0));
    let out = project_ticks(&model, TickGrid::new(0.25, 1.0)?, &spec)?;
    let jumps: usize = out.paths.iter().map(|p| extract_jumps(p, 0.4).len()).sum();
    for (i, t) in out.summary.eval_times.iter().enumerate() {
        println!("t = {t}: mean M {:.4}, mean X {:.4}", out.summary.mean_m[i].mean, out.summary.mean_x[i].mean);
    }
    println!("{jumps} jumps above 0.4");
    Ok(())
}
