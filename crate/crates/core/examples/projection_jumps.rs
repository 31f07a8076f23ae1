//! Project the inverse Bessel process onto the passage filtration of its
//! driver at levels {1, 2}: `M` stays strict and jumps at passage times.

use slmj::classify::defect_estimate;
use slmj::filtration::LevelSet;
use slmj::projection::{extract_jumps, jump_localization, project_ensemble, CoupledModel, ProjectionSpec};
use slmj::stochastics::TimeGrid;
use slmj::RngSpec;

fn main() -> slmj::Result<()> {
    let model = CoupledModel::inverse_bessel(1.0)?;
    let levels = LevelSet::new(vec![1.0, 2.0])?;
    let grid = TimeGrid::with_step(2.0, 1.0 / 256.0)?;
    let spec = ProjectionSpec::new(grid, 40_000, vec![0.5, 1.0, 2.0], RngSpec::new(7, 0));
    let out = project_ensemble(&model, &levels, &spec)?;

    for (i, t) in out.summary.eval_times.iter().enumerate() {
        let (m, x) = out.held_out_tower(i);
        let held: Vec<f64> = out.paths.iter().filter_map(|p| p.m_held_out[i]).collect();
        let d = defect_estimate(&held, 1.0, *t)?;
        println!(
            "t = {t}: mean M {:.4} ± {:.4}, mean X {:.4} ± {:.4}, defect of M {:.4} ({:.0} SE)",
            m.mean, m.se, x.mean, x.se, d.defect, d.defect / d.se
        );
    }
    let jumps: Vec<_> = out.paths.iter().flat_map(|p| extract_jumps(p, 0.4)).collect();
    let up1 = jumps.iter().filter(|j| j.beta == 1.0).count();
    let mean_jump = jumps.iter().map(|j| j.delta_m).sum::<f64>() / jumps.len() as f64;
    println!("{} jumps above 0.4 ({} at level 1), mean size {:.3}", jumps.len(), up1, mean_jump);
    let loc = jump_localization(&out, 0.4)?;
    println!("moves at events {}, off events {} ({:.2}%)", loc.at_events + loc.near_events, loc.off_events, 100.0 * loc.off_fraction);
    Ok(())
}
