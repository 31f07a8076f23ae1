//! Brute-force reference computations used to validate closed forms.
//! These are deliberately slow and independent of the formulas they check.

use crate::compensator::fp_density;
use crate::error::Result;
use crate::numerics::{adaptive_simpson, normal_cdf};
use std::f64::consts::PI;

/// `∫_a^b f` split into log-spaced panels so that a narrow bulk of mass is
/// never skipped by the initial sampling.
fn log_panels(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, tol: f64) -> Result<f64> {
    let (la, lb) = (a.ln(), b.ln());
    let mut total = 0.0;
    for i in 0..panels {
        let x0 = (la + (lb - la) * i as f64 / panels as f64).exp();
        let x1 = (la + (lb - la) * (i + 1) as f64 / panels as f64).exp();
        total += adaptive_simpson(&f, x0, x1, tol / panels as f64)?.value;
    }
    Ok(total)
}

/// `∫_0^u f_γ(s) ds` by quadrature of the density.
pub fn fp_cdf_quadrature(gap: f64, u: f64) -> Result<f64> {
    if u <= 0.0 {
        return Ok(0.0);
    }
    // below γ²·1e-3 the density is < e^-500
    let lo = gap * gap * 1e-3;
    if u <= lo {
        return Ok(0.0);
    }
    log_panels(|s| fp_density(gap, s).unwrap_or(f64::NAN), lo, u, 64, 1e-13)
}

/// Total mass of the first-passage density: quadrature on `(0, 10^8]`
/// plus the exact power-law tail `∫_U^∞ γ(2π)^{-1/2} s^{-3/2} ds`.
pub fn fp_mass(gap: f64) -> Result<f64> {
    let upper = 1e8 * gap * gap;
    let body = log_panels(|s| fp_density(gap, s).unwrap_or(f64::NAN), gap * gap * 1e-3, upper, 200, 1e-13)?;
    let tail = gap * (2.0 / (PI * upper)).sqrt();
    Ok(body + tail)
}

/// `E[1/|W_t|]` for a 3-d Brownian motion started at `(r0, 0, 0)`, by
/// integrating the Gaussian density in spherical coordinates about the
/// origin (azimuth exact, polar angle and radius by nested quadrature).
pub fn inverse_bessel_mean_quadrature(r0: f64, t: f64) -> Result<f64> {
    let norm = (2.0 * PI * t).powf(-1.5) * 2.0 * PI;
    let sd = t.sqrt();
    let r_max = r0 + 14.0 * sd;
    let radial = |r: f64| -> f64 {
        // ∫_0^π exp(-(r² - 2 r r0 cos θ + r0²)/2t) sin θ dθ, weight r²·(1/r)
        let inner = adaptive_simpson(
            |th: f64| (-(r * r - 2.0 * r * r0 * th.cos() + r0 * r0) / (2.0 * t)).exp() * th.sin(),
            0.0,
            PI,
            1e-14,
        );
        match inner {
            Ok(q) => norm * r * q.value,
            Err(_) => f64::NAN,
        }
    };
    let panels = 64;
    let mut total = 0.0;
    for i in 0..panels {
        let a = r_max * i as f64 / panels as f64;
        let b = r_max * (i + 1) as f64 / panels as f64;
        total += adaptive_simpson(radial, a, b, 1e-13)?.value;
    }
    Ok(total)
}

/// Closed form `(1/r0)(2Φ(r0/√t) - 1)`.
pub fn inverse_bessel_mean(r0: f64, t: f64) -> f64 {
    (2.0 * normal_cdf(r0 / t.sqrt()) - 1.0) / r0
}

/// `E[R_t²]` by quadrature of the same density (checks the sampler's second moment).
pub fn bessel_second_moment_quadrature(r0: f64, t: f64) -> Result<f64> {
    let norm = (2.0 * PI * t).powf(-1.5) * 2.0 * PI;
    let r_max = r0 + 14.0 * t.sqrt();
    let radial = |r: f64| -> f64 {
        let inner = adaptive_simpson(
            |th: f64| (-(r * r - 2.0 * r * r0 * th.cos() + r0 * r0) / (2.0 * t)).exp() * th.sin(),
            0.0,
            PI,
            1e-14,
        );
        inner.map(|q| norm * r.powi(4) * q.value).unwrap_or(f64::NAN)
    };
    let panels = 64;
    let mut total = 0.0;
    for i in 0..panels {
        let a = r_max * i as f64 / panels as f64;
        let b = r_max * (i + 1) as f64 / panels as f64;
        total += adaptive_simpson(radial, a, b, 1e-12)?.value;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_bessel_closed_form_matches_quadrature() {
        for &(r0, t) in &[(1.0, 1.0), (1.0, 0.5), (1.0, 2.0), (2.0, 1.0), (0.5, 3.0)] {
            let q = inverse_bessel_mean_quadrature(r0, t).unwrap();
            let c = inverse_bessel_mean(r0, t);
            assert!((q - c).abs() < 1e-9, "r0={r0} t={t}: {q} vs {c}");
        }
        assert!((inverse_bessel_mean(1.0, 1.0) - 0.682_689_492_137_085_9).abs() < 1e-12);
    }

    #[test]
    fn second_moment_oracle() {
        let q = bessel_second_moment_quadrature(1.0, 1.0).unwrap();
        assert!((q - 4.0).abs() < 1e-8, "{q}");
    }

    #[test]
    fn first_passage_median() {
        // median of 1/Z² solves 2(1 - Φ(1/√u)) = 1/2
        let z75 = 0.674_489_750_196_081_7f64;
        let m = 1.0 / (z75 * z75);
        assert!((fp_cdf_quadrature(1.0, m).unwrap() - 0.5).abs() < 1e-9);
        assert!((m - 2.198).abs() < 1e-3);
    }
}
