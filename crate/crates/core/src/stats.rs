//! Ensemble summaries and goodness-of-fit tests.

use crate::error::{Error, Result};
use serde::Serialize;

/// Sample mean with standard deviation and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
}

impl MeanEstimate {
    /// Two-pass estimate; `sd` uses the `n - 1` denominator.
    pub fn from_slice(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { n, mean: f64::NAN, sd: f64::NAN, se: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { n, mean, sd: 0.0, se: 0.0 };
        }
        let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        Self { n, mean, sd, se: sd / (n as f64).sqrt() }
    }

    /// `(mean - other.mean) / sqrt(se² + other.se²)`.
    pub fn z_against(&self, other: &MeanEstimate) -> f64 {
        (self.mean - other.mean) / pooled_se(self.se, other.se)
    }
}

pub fn pooled_se(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// Streaming accumulator (Welford), mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Running {
    pub n: usize,
    mean: f64,
    m2: f64,
}

impl Running {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, o: &Running) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * (self.n as f64) * (o.n as f64) / n as f64;
        self.n = n;
    }

    pub fn estimate(&self) -> MeanEstimate {
        if self.n == 0 {
            return MeanEstimate { n: 0, mean: f64::NAN, sd: f64::NAN, se: f64::NAN };
        }
        let sd = if self.n > 1 { (self.m2 / (self.n - 1) as f64).sqrt() } else { 0.0 };
        MeanEstimate { n: self.n, mean: self.mean, sd, se: sd / (self.n as f64).sqrt() }
    }
}

/// Sample excess-free kurtosis `m4/m2²` with its large-sample SE `sqrt(24/n)`.
pub fn kurtosis(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in xs {
        let d = (x - mean) * (x - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    (m4 / (m2 * m2), (24.0 / n).sqrt())
}

/// Empirical quantile by linear interpolation on sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < n {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[n - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub critical: f64,
    pub level: f64,
    pub p_value: f64,
    pub pass: bool,
}

/// Asymptotic Kolmogorov critical value `sqrt(-ln(α/2)/2)`.
pub fn ks_critical(level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt()
}

/// Kolmogorov survival function `Q(λ) = 2 Σ (-1)^{k-1} exp(-2k²λ²)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS test against a continuous CDF.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64, level: f64) -> Result<KsResult> {
    if samples.len() < 50 {
        return Err(Error::InsufficientData(format!("KS test needs at least 50 samples, got {}", samples.len())));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("KS level {level} must lie in (0, 1)")));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sqrt_n = n.sqrt();
    let critical = ks_critical(level) / sqrt_n;
    Ok(KsResult { n: xs.len(), statistic: d, critical, level, p_value: kolmogorov_sf(d * sqrt_n), pass: d <= critical })
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64], level: f64) -> Result<KsResult> {
    if a.len() < 50 || b.len() < 50 {
        return Err(Error::InsufficientData(format!("KS test needs at least 50 samples per side, got {} and {}", a.len(), b.len())));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let scale = ((n + m) / (n * m)).sqrt();
    let critical = ks_critical(level) * scale;
    Ok(KsResult {
        n: xs.len() + ys.len(),
        statistic: d,
        critical,
        level,
        p_value: kolmogorov_sf(d / scale),
        pass: d <= critical,
    })
}
