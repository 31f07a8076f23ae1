//! `E[X_t | history]` for one event history, by nested simulation with
//! rejection, next to the ensemble group mean.

use slmj::filtration::LevelSet;
use slmj::projection::{project_conditional_exact, project_ensemble, ConditioningKey, CoupledModel, ProjectionSpec};
use slmj::stochastics::TimeGrid;
use slmj::RngSpec;

fn main() -> slmj::Result<()> {
    let model = CoupledModel::inverse_bessel(1.0)?;
    let levels = LevelSet::new(vec![0.5, 1.0])?;
    let grid = TimeGrid::with_step(1.0, 1.0 / 64.0)?;
    let mut spec = ProjectionSpec::new(grid, 20_000, vec![0.75], RngSpec::new(3, 0));
    spec.bucket_steps = 8;
    // level 0.5 crossed during the first eight steps, level 1 not yet
    let key = ConditioningKey { tokens: vec![(0, 0)], bucket_steps: 8 };

    let nested = project_conditional_exact(&model, &levels, &spec, &key, 0.75, 20)?;
    println!(
        "nested: {:.4} ± {:.4} from {} states, acceptance {:.2}",
        nested.mean, nested.se, nested.states, nested.acceptance_rate
    );
    let out = project_ensemble(&model, &levels, &spec)?;
    let g = out.group_mean(&key, 0);
    println!("ensemble group mean: {:.4} ± {:.4} over {} paths", g.mean, g.se, g.n);
    Ok(())
}
