//! First-passage densities and hazards, two-sided exit analytics, and the
//! empirical side: Nelson–Aalen estimation and compensated counting checks.

use crate::error::{Error, Result};
use crate::numerics::{erf, erfc, normal_cdf, normal_pdf};
use serde::Serialize;
use std::f64::consts::PI;

fn check_gap(gap: f64) -> Result<()> {
    if gap > 0.0 && gap.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("gap {gap} must be positive and finite")))
    }
}

/// Density of the first passage time of Brownian motion to `gap`:
/// `γ (2π u³)^{-1/2} exp(-γ²/(2u))`, extended by 0 for `u <= 0`.
pub fn fp_density(gap: f64, u: f64) -> Result<f64> {
    check_gap(gap)?;
    if u <= 0.0 {
        return Ok(0.0);
    }
    Ok(gap / (2.0 * PI * u * u * u).sqrt() * (-gap * gap / (2.0 * u)).exp())
}

/// `F_γ(u) = 2(1 - Φ(γ/√u)) = erfc(γ/√(2u))`.
pub fn fp_cdf(gap: f64, u: f64) -> Result<f64> {
    check_gap(gap)?;
    if u <= 0.0 {
        return Ok(0.0);
    }
    Ok(erfc(gap / (2.0 * u).sqrt()))
}

/// `1 - F_γ(u) = erf(γ/√(2u))`, computed directly to keep tail accuracy.
pub fn fp_survival(gap: f64, u: f64) -> Result<f64> {
    check_gap(gap)?;
    if u <= 0.0 {
        return Ok(1.0);
    }
    Ok(erf(gap / (2.0 * u).sqrt()))
}

/// Hazard `f_γ(t - T_α) / (1 - F_γ(t - T_α))` on `t >= T_α`, 0 before.
pub fn intensity(gap: f64, t_alpha: f64, t: f64) -> Result<f64> {
    check_gap(gap)?;
    let u = t - t_alpha;
    if u <= 0.0 {
        return Ok(0.0);
    }
    let s = fp_survival(gap, u)?;
    if s < 1e-300 {
        return Err(Error::Overflow(s));
    }
    Ok(fp_density(gap, u)? / s)
}

/// `∫_{T_α}^{t} λ ds = -ln(1 - F_γ(t - T_α))`.
pub fn cumulative_intensity(gap: f64, t_alpha: f64, t: f64) -> Result<f64> {
    let s = fp_survival(gap, t - t_alpha)?;
    if s < 1e-300 {
        return Err(Error::Overflow(s));
    }
    Ok(-s.ln())
}

fn exit_series_small(a: f64, t: f64) -> (f64, f64) {
    // images: S = Σ_k (-1)^k [Φ((2k+1)a/√t) - Φ((2k-1)a/√t)]
    let rt = t.sqrt();
    let (mut s, mut dens) = (0.0, 0.0);
    for k in -12i32..=12 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let c1 = (2 * k + 1) as f64 * a;
        let c2 = (2 * k - 1) as f64 * a;
        s += sign * (normal_cdf(c1 / rt) - normal_cdf(c2 / rt));
        dens += sign * (c1 * normal_pdf(c1 / rt) - c2 * normal_pdf(c2 / rt)) / (2.0 * t * rt);
    }
    (s, dens)
}

fn exit_series_large(a: f64, t: f64) -> (f64, f64) {
    let (mut s, mut dens) = (0.0, 0.0);
    for k in 0..200 {
        let m = (2 * k + 1) as f64;
        let e = (-m * m * PI * PI * t / (8.0 * a * a)).exp();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * 4.0 / (PI * m) * e;
        dens += sign * PI / (2.0 * a * a) * m * e;
        if e < 1e-18 {
            break;
        }
    }
    (s, dens)
}

/// `P(sup_{s<=t} |B_s| < a)` and the exit-time density at `t`.
pub fn exit_survival_density(a: f64, t: f64) -> Result<(f64, f64)> {
    check_gap(a)?;
    if t <= 0.0 {
        return Ok((1.0, 0.0));
    }
    Ok(if t < a * a { exit_series_small(a, t) } else { exit_series_large(a, t) })
}

/// Hazard of the first exit of Brownian motion from `(-a, a)`.
pub fn exit_intensity(a: f64, t: f64) -> Result<f64> {
    let (s, d) = exit_survival_density(a, t)?;
    if s < 1e-300 {
        return Err(Error::Overflow(s));
    }
    Ok(d / s)
}

/// Cause-specific hazard of exiting `(-a, a)` through `+a`; half the exit
/// hazard by symmetry.
pub fn exit_intensity_upper(a: f64, t: f64) -> Result<f64> {
    Ok(0.5 * exit_intensity(a, t)?)
}

pub fn exit_cumulative_hazard(a: f64, t: f64) -> Result<f64> {
    let (s, _) = exit_survival_density(a, t)?;
    if s < 1e-300 {
        return Err(Error::Overflow(s));
    }
    Ok(-s.ln())
}

/// Intensity values on `[t_alpha, end)`; `gap` is set for single-level curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntensityCurve {
    pub t_alpha: f64,
    pub gap: Option<f64>,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Event time closing the curve, if known.
    pub end: Option<f64>,
}

impl IntensityCurve {
    pub fn new(t_alpha: f64, gap: Option<f64>, times: Vec<f64>, values: Vec<f64>, end: Option<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Alignment(format!("{} times but {} values", times.len(), values.len())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Alignment("curve times must strictly increase".into()));
        }
        for (t, v) in times.iter().zip(&values) {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::Domain(format!("intensity {v} at {t} must be finite and >= 0")));
            }
            if *t < t_alpha && *v != 0.0 {
                return Err(Error::Domain(format!("intensity {v} at {t} before the start {t_alpha}")));
            }
        }
        Ok(Self { t_alpha, gap, times, values, end })
    }

    /// Analytic first-passage intensity on `times`.
    pub fn analytic(gap: f64, t_alpha: f64, times: Vec<f64>) -> Result<Self> {
        let values = times.iter().map(|&t| intensity(gap, t_alpha, t)).collect::<Result<Vec<_>>>()?;
        Self::new(t_alpha, Some(gap), times, values, None)
    }

    pub fn zero(t_alpha: f64, times: Vec<f64>) -> Result<Self> {
        let n = times.len();
        Self::new(t_alpha, None, times, vec![0.0; n], None)
    }

    /// Running trapezoid integral from the first time.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.values.len());
        for i in 0..self.values.len() {
            if i > 0 {
                acc += 0.5 * (self.values[i] + self.values[i - 1]) * (self.times[i] - self.times[i - 1]);
            }
            out.push(acc);
        }
        out
    }
}

/// Intensity of `T ∧ R` from intensities of `T` and `R` (with `P(T = R) = 0`):
/// the pointwise sum, truncated at the earlier event time.
pub fn min_intensity(a: &IntensityCurve, b: &IntensityCurve) -> Result<IntensityCurve> {
    if a.times != b.times {
        return Err(Error::Alignment(format!(
            "curves have different grids ({} and {} points)",
            a.times.len(),
            b.times.len()
        )));
    }
    let end = match (a.end, b.end) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    };
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for (i, &t) in a.times.iter().enumerate() {
        if end.is_some_and(|e| t >= e) {
            break;
        }
        times.push(t);
        values.push(a.values[i] + b.values[i]);
    }
    IntensityCurve::new(a.t_alpha.min(b.t_alpha), None, times, values, end)
}

/// One counting-process observation: at risk on `(entry, exit]`, with an
/// event at `exit` when `observed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountingSample {
    pub entry: f64,
    pub exit: f64,
    pub observed: bool,
}

impl CountingSample {
    pub fn new(entry: f64, exit: f64, observed: bool) -> Result<Self> {
        if !(exit > entry) {
            return Err(Error::Domain(format!("exit {exit} must follow entry {entry}")));
        }
        Ok(Self { entry, exit, observed })
    }

    /// Event at `time` if it falls before `censor`, else censored there.
    pub fn censored(entry: f64, time: f64, censor: f64) -> Result<Self> {
        if time <= censor {
            Self::new(entry, time, true)
        } else {
            Self::new(entry, censor, false)
        }
    }
}

/// Cumulative hazard as a function of time elapsed since entry.
pub trait HazardModel {
    fn cumulative(&self, elapsed: f64) -> Result<f64>;
}

/// First-passage hazard of gap `gap`, multiplied by `scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstPassageHazard {
    pub gap: f64,
    pub scale: f64,
}

impl FirstPassageHazard {
    pub fn new(gap: f64) -> Self {
        Self { gap, scale: 1.0 }
    }
}

impl HazardModel for FirstPassageHazard {
    fn cumulative(&self, elapsed: f64) -> Result<f64> {
        if elapsed <= 0.0 {
            return Ok(0.0);
        }
        Ok(self.scale * cumulative_intensity(self.gap, 0.0, elapsed)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantHazard(pub f64);

impl HazardModel for ConstantHazard {
    fn cumulative(&self, elapsed: f64) -> Result<f64> {
        Ok(self.0 * elapsed.max(0.0))
    }
}

/// Two-sided exit hazard from `(-a, a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitHazard {
    pub a: f64,
}

impl HazardModel for ExitHazard {
    fn cumulative(&self, elapsed: f64) -> Result<f64> {
        exit_cumulative_hazard(self.a, elapsed)
    }
}

impl<F: Fn(f64) -> f64> HazardModel for F {
    fn cumulative(&self, elapsed: f64) -> Result<f64> {
        Ok(self(elapsed))
    }
}

/// Nelson–Aalen curve on an evaluation grid with a pointwise 95% band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HazardEstimate {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub variance: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// The risk set emptied before the end of the grid; later times are dropped.
    pub truncated: bool,
}

impl HazardEstimate {
    pub fn sup_distance(&self, reference: impl Fn(f64) -> Result<f64>) -> Result<f64> {
        let mut d: f64 = 0.0;
        for (t, v) in self.times.iter().zip(&self.values) {
            d = d.max((v - reference(*t)?).abs());
        }
        Ok(d)
    }
}

/// Nelson–Aalen estimator with delayed entry and right censoring. Tied
/// events at one time contribute `Σ_{j<d} 1/(n - j)`.
pub fn nelson_aalen(samples: &[CountingSample], grid: &[f64]) -> Result<HazardEstimate> {
    let n_events = samples.iter().filter(|s| s.observed).count();
    if n_events < 100 {
        return Err(Error::InsufficientData(format!("Nelson–Aalen needs at least 100 events, got {n_events}")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Alignment("evaluation grid must strictly increase".into()));
    }
    let mut entries: Vec<f64> = samples.iter().map(|s| s.entry).collect();
    let mut exits: Vec<f64> = samples.iter().map(|s| s.exit).collect();
    let mut events: Vec<f64> = samples.iter().filter(|s| s.observed).map(|s| s.exit).collect();
    entries.sort_by(f64::total_cmp);
    exits.sort_by(f64::total_cmp);
    events.sort_by(f64::total_cmp);
    // at risk at t: entry < t <= exit
    let at_risk = |t: f64| entries.partition_point(|&e| e < t) - exits.partition_point(|&x| x < t);
    let last_exit = *exits.last().unwrap();

    let (mut h, mut var) = (0.0, 0.0);
    let mut out = HazardEstimate {
        times: Vec::new(),
        values: Vec::new(),
        variance: Vec::new(),
        ci_low: Vec::new(),
        ci_high: Vec::new(),
        truncated: false,
    };
    let mut i = 0;
    for &t in grid {
        if t > last_exit && at_risk(t) == 0 && i == events.len() {
            out.truncated = true;
            break;
        }
        while i < events.len() && events[i] <= t {
            let te = events[i];
            let mut d = 0;
            while i < events.len() && events[i] == te {
                d += 1;
                i += 1;
            }
            let n = at_risk(te);
            for j in 0..d {
                let r = (n - j) as f64;
                h += 1.0 / r;
                var += 1.0 / (r * r);
            }
        }
        let half = 1.96 * var.sqrt();
        out.times.push(t);
        out.values.push(h);
        out.variance.push(var);
        out.ci_low.push((h - half).max(0.0));
        out.ci_high.push(h + half);
    }
    Ok(out)
}

/// Per-time mean of `N_t - Λ(t ∧ exit - entry)` with a 3-SE band. The SE
/// uses the predictable variation `E[Λ(t ∧ exit - entry)]`, which stays
/// valid while events are still rare.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompensatedCheck {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub pass: bool,
}

impl CompensatedCheck {
    pub fn worst_z(&self) -> f64 {
        self.mean
            .iter()
            .zip(&self.se)
            .map(|(m, s)| if *s > 0.0 { (m / s).abs() } else if *m == 0.0 { 0.0 } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }
}

pub fn compensated_check(samples: &[CountingSample], model: &dyn HazardModel, grid: &[f64]) -> Result<CompensatedCheck> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let n = samples.len() as f64;
    let (mut mean, mut se) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
    let mut pass = true;
    for &t in grid {
        let (mut s1, mut a) = (0.0, 0.0);
        for s in samples {
            let counted = if s.observed && s.exit <= t { 1.0 } else { 0.0 };
            let comp = model.cumulative(t.min(s.exit) - s.entry)?;
            s1 += counted - comp;
            a += comp;
        }
        let m = s1 / n;
        let e = a.sqrt() / n;
        pass &= m.abs() <= 3.0 * e;
        mean.push(m);
        se.push(e);
    }
    Ok(CompensatedCheck { times: grid.to_vec(), mean, se, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::rng::RngSpec;
    use crate::stochastics::sample_first_passages;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn density_reference_values() {
        assert!((fp_density(1.0, 1.0).unwrap() - 0.241_970_724_519_143_37).abs() < 1e-15);
        assert_eq!(fp_density(1.0, 0.0).unwrap(), 0.0);
        assert!(fp_density(1.0, 1e-4).unwrap() < 1e-300);
        assert!(fp_density(0.0, 1.0).is_err());
        assert!(fp_cdf(-1.0, 1.0).is_err());
    }

    #[test]
    fn cdf_reference_values() {
        // frozen from the quadrature oracle
        assert!((fp_cdf(1.0, 1.0).unwrap() - 0.317_310_507_862_914_1).abs() < 1e-12);
        assert_eq!(fp_cdf(1.0, -2.0).unwrap(), 0.0);
        assert!(fp_cdf(1.0, 1e12).unwrap() > 1.0 - 1e-5);
    }

    #[test]
    fn density_integrates_to_one() {
        let total = oracle::fp_mass(1.0).unwrap();
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    #[test]
    fn cdf_matches_quadrature_on_log_grid() {
        for i in 0..=60 {
            let u = 10f64.powf(-3.0 + 6.0 * i as f64 / 60.0);
            let q = oracle::fp_cdf_quadrature(1.0, u).unwrap();
            assert!((fp_cdf(1.0, u).unwrap() - q).abs() < 1e-8, "u={u}");
        }
    }

    #[test]
    fn intensity_values() {
        assert_eq!(intensity(1.0, 2.0, 2.0).unwrap(), 0.0);
        assert_eq!(intensity(1.0, 2.0, 1.0).unwrap(), 0.0);
        let v = intensity(1.0, 0.0, 1.0).unwrap();
        assert!((v - 0.354_437_452_613_603_4).abs() < 1e-12, "{v}");
        assert!(intensity(1.0, 0.0, 1e4).unwrap() < 1e-2);
        // unimodal: mode near u = γ²/3-ish, decreasing past it
        let grid: Vec<f64> = (1..4000).map(|i| i as f64 * 0.005).collect();
        let vals: Vec<f64> = grid.iter().map(|&u| intensity(1.0, 0.0, u).unwrap()).collect();
        let peak = vals.iter().cloned().fold(0.0, f64::max);
        let ipeak = vals.iter().position(|&v| v == peak).unwrap();
        assert!(ipeak > 0 && ipeak < vals.len() - 1);
        assert!(vals[ipeak..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn exit_series_agree_at_crossover() {
        for &t in &[0.5, 0.9, 1.0, 1.2, 2.0] {
            let (s1, d1) = exit_series_small(1.0, t);
            let (s2, d2) = exit_series_large(1.0, t);
            assert!((s1 - s2).abs() < 1e-12, "t={t}: {s1} {s2}");
            assert!((d1 - d2).abs() < 1e-10, "t={t}: {d1} {d2}");
        }
    }

    #[test]
    fn exit_hazard_against_quadrature_of_density() {
        for &t in &[0.25, 0.5, 1.0, 2.0] {
            let q = crate::numerics::adaptive_simpson(|s| exit_survival_density(1.0, s).unwrap().1, 1e-9, t, 1e-12).unwrap();
            let (s, _) = exit_survival_density(1.0, t).unwrap();
            assert!((1.0 - q.value - s).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn exit_hazard_is_not_twice_single_barrier() {
        // the hazard of the first exit exceeds the sum of the two marginal
        // hazards once the barriers interact
        let two = exit_cumulative_hazard(1.0, 1.0).unwrap();
        let one = cumulative_intensity(1.0, 0.0, 1.0).unwrap();
        assert!((two - 2.0 * one - 0.229).abs() < 5e-3, "{two} vs {}", 2.0 * one);
        let early = exit_cumulative_hazard(1.0, 0.25).unwrap() - 2.0 * cumulative_intensity(1.0, 0.0, 0.25).unwrap();
        assert!(early.abs() < 3e-3);
    }

    #[test]
    fn min_intensity_identity_and_alignment() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.02).collect();
        let a = IntensityCurve::analytic(1.0, 0.0, times.clone()).unwrap();
        let z = IntensityCurve::zero(0.0, times.clone()).unwrap();
        assert_eq!(min_intensity(&a, &z).unwrap().values, a.values);
        let other = IntensityCurve::zero(0.0, times[1..].to_vec()).unwrap();
        assert!(matches!(min_intensity(&a, &other), Err(Error::Alignment(_))));
        let mut c = a.clone();
        c.end = Some(0.5);
        assert!(min_intensity(&c, &a).unwrap().times.iter().all(|&t| t < 0.5));
    }

    proptest! {
        #[test]
        fn min_intensity_commutes_and_associates(xs in prop::collection::vec(0.0f64..5.0, 3 * 20)) {
            let times: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
            let mk = |k: usize| IntensityCurve::new(0.0, None, times.clone(), xs[20 * k..20 * (k + 1)].to_vec(), None).unwrap();
            let (a, b, c) = (mk(0), mk(1), mk(2));
            prop_assert_eq!(min_intensity(&a, &b).unwrap().values, min_intensity(&b, &a).unwrap().values);
            let l = min_intensity(&min_intensity(&a, &b).unwrap(), &c).unwrap();
            let r = min_intensity(&a, &min_intensity(&b, &c).unwrap()).unwrap();
            for (x, y) in l.values.iter().zip(&r.values) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn density_scaling(gap in 0.1f64..10.0, u in 1e-3f64..1e3) {
            let lhs = fp_density(gap, u).unwrap();
            let rhs = fp_density(1.0, u / (gap * gap)).unwrap() / (gap * gap);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-300));
        }
    }

    #[test]
    fn intensity_is_continuous_and_vanishes_at_start() {
        let mut prev = intensity(1.0, 0.0, 0.0).unwrap();
        assert_eq!(prev, 0.0);
        for i in 1..20_000 {
            let v = intensity(1.0, 0.0, i as f64 * 1e-3).unwrap();
            assert!((v - prev).abs() < 5e-3);
            prev = v;
        }
    }

    #[test]
    fn tied_events_step() {
        let s: Vec<CountingSample> = (0..200).map(|_| CountingSample::new(0.0, 1.0, true).unwrap()).collect();
        let na = nelson_aalen(&s, &[0.5, 1.0]).unwrap();
        let expect: f64 = (0..200).map(|j| 1.0 / (200 - j) as f64).sum();
        assert_eq!(na.values[0], 0.0);
        assert!((na.values[1] - expect).abs() < 1e-12);
    }

    #[test]
    fn nelson_aalen_errors_and_truncation() {
        let few: Vec<CountingSample> = (0..10).map(|i| CountingSample::new(0.0, 1.0 + i as f64, true).unwrap()).collect();
        assert!(matches!(nelson_aalen(&few, &[1.0]), Err(Error::InsufficientData(_))));
        let s: Vec<CountingSample> = (0..150).map(|i| CountingSample::new(0.0, 0.01 * (i + 1) as f64, true).unwrap()).collect();
        let na = nelson_aalen(&s, &[0.5, 1.0, 2.0, 3.0]).unwrap();
        assert!(na.truncated);
        assert_eq!(na.times, vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn exponential_hazard_is_linear() {
        let mut r = RngSpec::new(5, 0).rng();
        let s: Vec<CountingSample> = (0..20_000)
            .map(|_| {
                let t = -(1.0 - r.random::<f64>()).ln();
                CountingSample::censored(0.0, t, 2.0).unwrap()
            })
            .collect();
        let grid: Vec<f64> = (1..=40).map(|i| i as f64 * 0.05).collect();
        let na = nelson_aalen(&s, &grid).unwrap();
        for (i, &t) in na.times.iter().enumerate() {
            assert!(na.ci_low[i] <= t && t <= na.ci_high[i], "t={t} {}", na.values[i]);
        }
    }

    #[test]
    fn delayed_entry_is_handled() {
        // entries uniform on [0, 1], exponential(1) durations: hazard is t-free
        let mut r = RngSpec::new(6, 0).rng();
        let s: Vec<CountingSample> = (0..20_000)
            .map(|_| {
                let e = r.random::<f64>();
                let d = -(1.0 - r.random::<f64>()).ln();
                CountingSample::censored(e, e + d, 3.0).unwrap()
            })
            .collect();
        let na = nelson_aalen(&s, &[1.0, 2.0, 3.0]).unwrap();
        // on (1, 3] everyone at risk has entered, hazard rate 1
        let slope = (na.values[2] - na.values[0]) / 2.0;
        assert!((slope - 1.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn compensated_check_controls() {
        let zero: Vec<CountingSample> = (0..100).map(|_| CountingSample::new(0.0, 3.0, false).unwrap()).collect();
        let c = compensated_check(&zero, &ConstantHazard(0.0), &[1.0, 2.0]).unwrap();
        assert!(c.pass && c.mean.iter().all(|&m| m == 0.0));

        let times = sample_first_passages(1.0, 20_000, RngSpec::new(41, 0)).unwrap();
        let s: Vec<CountingSample> = times.iter().map(|&t| CountingSample::censored(0.0, t, 3.0).unwrap()).collect();
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.15).collect();
        assert!(compensated_check(&s, &FirstPassageHazard::new(1.0), &grid).unwrap().pass);
        let doubled = FirstPassageHazard { gap: 1.0, scale: 2.0 };
        let bad = compensated_check(&s, &doubled, &grid).unwrap();
        assert!(!bad.pass && bad.mean.last().unwrap() < &0.0);
    }

    #[test]
    fn nelson_aalen_error_shrinks_with_sample_size() {
        let grid: Vec<f64> = (1..=60).map(|i| i as f64 * 0.05).collect();
        let reps = 24;
        let sup_err = |n: usize, seed: u64| -> f64 {
            (0..reps)
                .map(|r| {
                    let times = sample_first_passages(1.0, n, RngSpec::new(seed, r)).unwrap();
                    let s: Vec<CountingSample> = times.iter().map(|&t| CountingSample::censored(0.0, t, 3.0).unwrap()).collect();
                    nelson_aalen(&s, &grid).unwrap().sup_distance(|t| cumulative_intensity(1.0, 0.0, t)).unwrap()
                })
                .sum::<f64>()
                / reps as f64
        };
        let ratio = sup_err(2_000, 51) / sup_err(8_000, 52);
        assert!((2.0 / 1.3..=2.0 * 1.3).contains(&ratio), "ratio {ratio}");
    }
}
