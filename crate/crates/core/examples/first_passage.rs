//! Exact first-passage sampling, its CDF against quadrature, and the hazard.

use slmj::compensator::{fp_cdf, intensity};
use slmj::oracle::fp_cdf_quadrature;
use slmj::stats::ks_test;
use slmj::stochastics::sample_first_passages;
use slmj::RngSpec;

fn main() -> slmj::Result<()> {
    let gap = 1.0;
    let xs = sample_first_passages(gap, 100_000, RngSpec::new(1, 0))?;
    let ks = ks_test(&xs, |u| fp_cdf(gap, u).unwrap(), 0.01)?;
    println!("KS D = {:.5} (1% critical {:.5}), p = {:.3}", ks.statistic, ks.critical, ks.p_value);

    println!("{:>8} {:>14} {:>14} {:>10}", "u", "closed form", "quadrature", "hazard");
    for u in [0.01, 0.1, 1.0, 10.0, 100.0] {
        println!("{u:>8} {:>14.10} {:>14.10} {:>10.5}", fp_cdf(gap, u)?, fp_cdf_quadrature(gap, u)?, intensity(gap, 0.0, u)?);
    }
    Ok(())
}
