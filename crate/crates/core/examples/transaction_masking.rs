//! Observation only while trading: `Y = ∫ H J dB` with `J` switched at
//! renewal times, and `X` projected onto what the renewals reveal.

use slmj::market::{family_project, mask_transactions, qv_check, MarketSpec, RenewalSpec, Weight};
use slmj::projection::{CoupledModel, ProjectionSpec};
use slmj::stochastics::{sample_brownian, TimeGrid};
use slmj::RngSpec;

fn main() -> slmj::Result<()> {
    let renewal = RenewalSpec::Exponential { rate: 2.0 };
    let fine = TimeGrid::with_step(2.0, 1.0 / 4096.0)?;
    let obs = (0..200u64)
        .map(|s| mask_transactions(&sample_brownian(fine, RngSpec::new(4, s))?, Weight::default(), &renewal, RngSpec::new(4, s)))
        .collect::<slmj::Result<Vec<_>>>()?;
    let qv = qv_check(&obs)?;
    println!("quadratic variation {:.3} against {:.3} ({:.2}% off)", qv.qv, qv.integral, 100.0 * qv.relative_error);
    let first = &obs[0];
    println!("path 0: renewals at {:?}", first.taus.iter().map(|t| (t * 1000.0).round() / 1000.0).collect::<Vec<_>>());

    let model = CoupledModel::inverse_bessel(1.0)?;
    let market = MarketSpec { renewal, weight: Weight::default(), y_bin: 1.0 };
    let mut spec = ProjectionSpec::new(TimeGrid::with_step(2.0, 1.0 / 256.0)?, 30_000, vec![1.0, 2.0], RngSpec::new(4, 0));
    spec.bucket_steps = 128;
    let fam = family_project(&model, &market, &spec)?;
    let r = &fam.jumps;
    println!(
        "jump mass {:.1}: {:.1}% at blackout ends, {:.1}% at blackout starts",
        r.total_mass,
        100.0 * r.blackout_end_fraction,
        100.0 * r.blackout_start_fraction
    );
    for (i, m) in r.mass_by_index.iter().enumerate().take(5) {
        println!("  renewal {}: {:.1}%", i + 1, 100.0 * m / r.total_mass);
    }
    Ok(())
}
