//! Hazard of `T_β − T_α` for a left-isolated level: Nelson–Aalen against the
//! analytic intensity, the compensated counting process, and the minimum of
//! two independent passage times.

use slmj::compensator::{
    compensated_check, cumulative_intensity, min_intensity, nelson_aalen, CountingSample, FirstPassageHazard, IntensityCurve,
};
use slmj::stochastics::sample_first_passages;
use slmj::RngSpec;

fn main() -> slmj::Result<()> {
    let n = 100_000;
    let gaps = sample_first_passages(1.0, n, RngSpec::new(5, 0))?;
    let samples: Vec<_> = gaps.iter().map(|&g| CountingSample::censored(0.0, g, 3.0)).collect::<slmj::Result<_>>()?;
    let grid: Vec<f64> = (1..=12).map(|i| 0.25 * i as f64).collect();
    let na = nelson_aalen(&samples, &grid)?;
    for (t, v) in na.times.iter().zip(&na.values) {
        println!("t = {t:<5} NA {v:.4}  analytic {:.4}", cumulative_intensity(1.0, 0.0, *t)?);
    }
    println!("sup distance {:.4}", na.sup_distance(|t| cumulative_intensity(1.0, 0.0, t))?);

    let check = compensated_check(&samples, &FirstPassageHazard::new(1.0), &grid)?;
    let doubled = compensated_check(&samples, &FirstPassageHazard { gap: 1.0, scale: 2.0 }, &grid)?;
    println!("compensated: worst |z| {:.2}; doubled hazard: worst |z| {:.1}", check.worst_z(), doubled.worst_z());

    // levels 1 and 2 apart on independent drivers: the minimum adds intensities
    let times: Vec<f64> = (1..=8).map(|i| 0.5 * i as f64).collect();
    let a = IntensityCurve::analytic(1.0, 0.0, times.clone())?;
    let b = IntensityCurve::analytic(2.0, 0.0, times)?;
    let m = min_intensity(&a, &b)?;
    for i in [0, 3, 7] {
        println!("t = {}: {:.4} + {:.4} = {:.4}", m.times[i], a.values[i], b.values[i], m.values[i]);
    }
    Ok(())
}
