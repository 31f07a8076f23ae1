//! The inverse Bessel(3) process loses mass: `E[X_t] = 2Φ(1/√t) − 1 < X_0`.

use slmj::classify::defect_estimate;
use slmj::oracle::{inverse_bessel_mean, inverse_bessel_mean_quadrature};
use slmj::stochastics::Bessel3Stepper;
use slmj::RngSpec;

fn main() -> slmj::Result<()> {
    let n = 100_000;
    println!("{:>5} {:>10} {:>10} {:>12} {:>10}", "t", "mean", "se", "closed form", "defect z");
    for t in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let xs: Vec<f64> = (0..n as u64)
            .map(|s| {
                let mut st = Bessel3Stepper::new(1.0);
                st.step(&mut RngSpec::new(2, s).rng(), f64::sqrt(t));
                1.0 / st.radius()
            })
            .collect();
        let d = defect_estimate(&xs, 1.0, t)?;
        let closed = inverse_bessel_mean(1.0, t);
        assert!((closed - inverse_bessel_mean_quadrature(1.0, t)?).abs() < 1e-8);
        println!("{t:>5} {:>10.5} {:>10.5} {closed:>12.5} {:>10.1}", 1.0 - d.defect, d.se, d.defect / d.se);
    }
    Ok(())
}
