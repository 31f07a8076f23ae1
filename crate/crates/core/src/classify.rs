//! Strictness classification of `dX = σ(X) dB`, martingale defect and the
//! Krickeberg 1-norm along reducing times.
//!
//! A positive solution needs `∫_0^ε x/σ(x)² dx = ∞` (the positivity condition); it is
//! then a strict local martingale exactly when `∫_ε^∞ x/σ(x)² dx < ∞`
//! (the strictness condition).

use crate::error::{Error, Result};
use crate::numerics::adaptive_simpson;
use crate::stats::MeanEstimate;
use crate::stochastics::{Diffusion, SdeModel, Sigma};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Holds,
    Fails,
    NumericUndetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    StrictLocalMartingale,
    TrueMartingaleCandidate,
    PositivityFails,
    Undetermined,
}

impl Verdict {
    pub fn from_conditions(positivity: Condition, strictness: Condition) -> Self {
        match (positivity, strictness) {
            (Condition::Fails, _) => Verdict::PositivityFails,
            (Condition::Holds, Condition::Holds) => Verdict::StrictLocalMartingale,
            (Condition::Holds, Condition::Fails) => Verdict::TrueMartingaleCandidate,
            _ => Verdict::Undetermined,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::StrictLocalMartingale => "strict_local_martingale",
            Verdict::TrueMartingaleCandidate => "true_martingale_candidate",
            Verdict::PositivityFails => "positivity_fails",
            Verdict::Undetermined => "undetermined",
        }
    }
}

/// A one-sided integral of `x/σ(x)²`. `value` is `None` when divergent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralReport {
    pub value: Option<f64>,
    pub error: f64,
    pub divergent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrictnessVerdict {
    pub epsilon: f64,
    pub route: Route,
    pub positivity: Condition,
    pub strictness: Condition,
    pub verdict: Verdict,
    /// `∫_0^ε x/σ(x)² dx`
    pub integral_near_zero: IntegralReport,
    /// `∫_ε^∞ x/σ(x)² dx`
    pub integral_near_infinity: IntegralReport,
}

impl StrictnessVerdict {
    fn build(epsilon: f64, route: Route, near_zero: (IntegralReport, Condition), near_inf: (IntegralReport, Condition)) -> Self {
        // positivity holds when the integral at 0 diverges; strictness holds when the one at ∞ converges
        let positivity = match near_zero.1 {
            Condition::Holds => Condition::Fails,
            Condition::Fails => Condition::Holds,
            u => u,
        };
        Self {
            epsilon,
            route,
            positivity,
            strictness: near_inf.1,
            verdict: Verdict::from_conditions(positivity, near_inf.1),
            integral_near_zero: near_zero.0,
            integral_near_infinity: near_inf.0,
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("epsilon {eps} must be positive and finite")))
    }
}

/// Closed form for the power family, quadrature otherwise.
pub fn strictness_classify(model: &SdeModel, eps: f64) -> Result<StrictnessVerdict> {
    check_eps(eps)?;
    model.sigma.validate()?;
    match model.sigma {
        Sigma::Power { c, p } => Ok(power_closed_form(c, p, eps)),
        Sigma::Constant(v) => {
            if !(v > 0.0) {
                return Err(Error::Domain("sigma vanishes identically".into()));
            }
            Ok(power_closed_form(v, 0.0, eps))
        }
        Sigma::Tabulated(_) => strictness_quadrature(&model.sigma, eps),
    }
}

/// Integrand `x^{1-2p}/c²`: finite at 0 iff `p < 1`, finite at ∞ iff `p > 1`.
pub fn power_closed_form(c: f64, p: f64, eps: f64) -> StrictnessVerdict {
    let k = 2.0 - 2.0 * p;
    let near_zero = if p < 1.0 {
        (IntegralReport { value: Some(eps.powf(k) / (k * c * c)), error: 0.0, divergent: false }, Condition::Holds)
    } else {
        (IntegralReport { value: None, error: 0.0, divergent: true }, Condition::Fails)
    };
    let near_inf = if p > 1.0 {
        (IntegralReport { value: Some(eps.powf(k) / (-k * c * c)), error: 0.0, divergent: false }, Condition::Holds)
    } else {
        (IntegralReport { value: None, error: 0.0, divergent: true }, Condition::Fails)
    };
    StrictnessVerdict::build(eps, Route::ClosedForm, near_zero, near_inf)
}

const WINDOW: f64 = 8.0;
const U_CAP: f64 = 640.0;
const DIVERGENCE_THRESHOLD: f64 = 1e6;

enum Tail {
    Converged(f64, f64),
    Diverged,
    Undetermined(f64, f64),
}

/// `∫ x/σ(x)² dx` over `(0, ε]` (`toward_zero`) or `[ε, ∞)` after the
/// substitution `x = ε e^{∓u}`, integrated over windows of `u` of width 8.
fn tail_integral<D: Diffusion + ?Sized>(sigma: &D, eps: f64, toward_zero: bool) -> Result<Tail> {
    let sign = if toward_zero { -1.0 } else { 1.0 };
    let (lo, hi) = sigma.domain();
    let integrand = |u: f64| -> f64 {
        let x = eps * (sign * u).exp();
        match sigma.sigma(x) {
            Ok(s) if s > 0.0 => (x / s) * (x / s),
            Ok(_) => f64::NEG_INFINITY,
            Err(_) => f64::NAN,
        }
    };
    let (mut total, mut err) = (0.0, 0.0);
    let mut mid_increment = None;
    let mut last = 0.0;
    let mut u = 0.0;
    while u < U_CAP {
        let x_end = eps * (sign * (u + WINDOW)).exp();
        if x_end <= lo || x_end >= hi {
            return Ok(Tail::Undetermined(total, err));
        }
        let q = match adaptive_simpson(integrand, u, u + WINDOW, 1e-12 * (1.0 + total)) {
            Ok(q) => q,
            Err(_) => {
                let probe = integrand(u + WINDOW);
                if probe == f64::NEG_INFINITY {
                    return Err(Error::Domain(format!("sigma is not positive near x = {x_end}")));
                }
                if probe.is_nan() {
                    return Ok(Tail::Undetermined(total, err));
                }
                return Ok(Tail::Diverged);
            }
        };
        if q.value < 0.0 {
            return Err(Error::Domain(format!("sigma is not positive near x = {x_end}")));
        }
        total += q.value;
        err += q.error;
        if !total.is_finite() || total > DIVERGENCE_THRESHOLD {
            return Ok(Tail::Diverged);
        }
        if q.value < 1e-12 * (1.0 + total) {
            return Ok(Tail::Converged(total, err));
        }
        u += WINDOW;
        if mid_increment.is_none() && u >= U_CAP / 2.0 {
            mid_increment = Some(q.value);
        }
        last = q.value;
    }
    match mid_increment {
        Some(m) if last >= 0.5 * m => Ok(Tail::Diverged),
        _ => Ok(Tail::Undetermined(total, err)),
    }
}

fn report(t: Tail) -> (IntegralReport, Condition) {
    match t {
        Tail::Converged(v, e) => (IntegralReport { value: Some(v), error: e, divergent: false }, Condition::Holds),
        Tail::Diverged => (IntegralReport { value: None, error: 0.0, divergent: true }, Condition::Fails),
        Tail::Undetermined(v, e) => {
            (IntegralReport { value: Some(v), error: e, divergent: false }, Condition::NumericUndetermined)
        }
    }
}

/// Quadrature route for any diffusion coefficient.
pub fn strictness_quadrature<D: Diffusion + ?Sized>(sigma: &D, eps: f64) -> Result<StrictnessVerdict> {
    check_eps(eps)?;
    let s = sigma.sigma(eps)?;
    if !(s > 0.0) {
        return Err(Error::Domain(format!("sigma({eps}) = {s} is not positive")));
    }
    let near_zero = report(tail_integral(sigma, eps, true)?);
    let near_inf = report(tail_integral(sigma, eps, false)?);
    Ok(StrictnessVerdict::build(eps, Route::Quadrature, near_zero, near_inf))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DefectEstimate {
    pub t: f64,
    pub n: usize,
    pub defect: f64,
    pub se: f64,
    /// `defect > 3 SE`.
    pub positive: bool,
}

/// `x0 - mean(values)` with its standard error.
pub fn defect_estimate(values: &[f64], x0: f64, t: f64) -> Result<DefectEstimate> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!("defect needs at least 2 values, got {}", values.len())));
    }
    let m = MeanEstimate::from_slice(values);
    let defect = x0 - m.mean;
    Ok(DefectEstimate { t, n: m.n, defect, se: m.se, positive: defect > 3.0 * m.se })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KrickebergReport {
    /// `E|X_{T_n}|` per `n`.
    pub estimates: Vec<MeanEstimate>,
    /// Fraction of paths with `T_n` censored at the horizon, per `n`.
    pub censored: Vec<f64>,
    /// Largest estimate; a lower bound for the 1-norm.
    pub sup: f64,
    /// Estimates are non-decreasing within 3 pooled SE.
    pub monotone: bool,
}

/// `E|X_{T_n}|` from stopped values `stopped[path][n] = (X_{T_n}, censored)`.
pub fn krickeberg_norm(stopped: &[Vec<(f64, bool)>]) -> Result<KrickebergReport> {
    let n_levels = stopped.first().map_or(0, |v| v.len());
    if n_levels == 0 || stopped.iter().any(|v| v.len() != n_levels) {
        return Err(Error::InsufficientData("stopped values must have a common, non-zero length".into()));
    }
    if stopped.iter().all(|v| v.iter().all(|(_, c)| *c)) {
        return Err(Error::InsufficientData("every reducing time is censored".into()));
    }
    let mut estimates = Vec::with_capacity(n_levels);
    let mut censored = Vec::with_capacity(n_levels);
    for n in 0..n_levels {
        let vals: Vec<f64> = stopped.iter().map(|v| v[n].0.abs()).collect();
        estimates.push(MeanEstimate::from_slice(&vals));
        censored.push(stopped.iter().filter(|v| v[n].1).count() as f64 / stopped.len() as f64);
    }
    let sup = estimates.iter().map(|e| e.mean).fold(f64::NEG_INFINITY, f64::max);
    let monotone = estimates.windows(2).all(|w| w[1].mean >= w[0].mean - 3.0 * (w[0].se.hypot(w[1].se)));
    Ok(KrickebergReport { estimates, censored, sup, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastics::CustomSigma;

    fn power(p: f64) -> SdeModel {
        SdeModel::new(1.0, Sigma::power(1.0, p)).unwrap()
    }

    #[test]
    fn power_family_verdicts() {
        for eps in [0.1, 1.0, 10.0] {
            assert_eq!(strictness_classify(&power(2.0), eps).unwrap().verdict, Verdict::StrictLocalMartingale);
            assert_eq!(strictness_classify(&power(1.0), eps).unwrap().verdict, Verdict::TrueMartingaleCandidate);
            assert_eq!(strictness_classify(&power(0.4), eps).unwrap().verdict, Verdict::PositivityFails);
        }
        let v = strictness_classify(&power(2.0), 1.0).unwrap();
        assert_eq!((v.positivity, v.strictness), (Condition::Holds, Condition::Holds));
        assert_eq!(v.integral_near_infinity.value, Some(0.5));
    }

    #[test]
    fn closed_form_and_quadrature_agree() {
        for p in [0.4, 1.0, 1.5, 2.0, 3.0] {
            for eps in [0.1, 1.0, 10.0] {
                let s = Sigma::power(1.0, p);
                let c = power_closed_form(1.0, p, eps);
                let q = strictness_quadrature(&s, eps).unwrap();
                assert_eq!(c.verdict, q.verdict, "p={p} eps={eps}");
                assert_eq!((c.positivity, c.strictness), (q.positivity, q.strictness), "p={p} eps={eps}");
                for (a, b) in [
                    (c.integral_near_zero.value, q.integral_near_zero.value),
                    (c.integral_near_infinity.value, q.integral_near_infinity.value),
                ] {
                    if let (Some(a), Some(b)) = (a, b) {
                        assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "p={p} eps={eps}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn quadrature_on_a_custom_coefficient() {
        // σ(x) = x² + x: behaves like x at 0 (positivity holds) and x² at ∞ (strictness holds)
        let s = CustomSigma { f: |x: f64| x * x + x, df: |x: f64| 2.0 * x + 1.0, domain: (0.0, f64::INFINITY) };
        assert_eq!(strictness_quadrature(&s, 1.0).unwrap().verdict, Verdict::StrictLocalMartingale);
    }

    #[test]
    fn tabulated_without_tails_is_undetermined() {
        let m = SdeModel::new(1.0, Sigma::tabulated(vec![0.5, 1.0, 2.0], vec![0.25, 1.0, 4.0]).unwrap()).unwrap();
        assert_eq!(strictness_classify(&m, 1.0).unwrap().verdict, Verdict::Undetermined);
    }

    #[test]
    fn non_positive_sigma_is_a_domain_error() {
        let s = CustomSigma { f: |x: f64| x - 2.0, df: |_| 1.0, domain: (0.0, f64::INFINITY) };
        assert!(matches!(strictness_quadrature(&s, 1.0), Err(Error::Domain(_))));
        assert!(strictness_classify(&power(2.0), 0.0).is_err());
    }

    #[test]
    fn verdict_json_shape() {
        let v = strictness_classify(&power(2.0), 1.0).unwrap();
        let j = serde_json::to_value(&v).unwrap();
        assert_eq!(j["verdict"], "strict_local_martingale");
        assert_eq!(j["positivity"], "holds");
        assert_eq!(j["integral_near_zero"]["divergent"], true);
    }

    #[test]
    fn defect_of_constant_ensemble() {
        let d = defect_estimate(&[1.0; 1000], 1.0, 1.0).unwrap();
        assert_eq!(d.defect, 0.0);
        assert!(!d.positive);
    }

    #[test]
    fn krickeberg_constant_and_errors() {
        let stopped = vec![vec![(2.0, false), (2.0, true)]; 10];
        let r = krickeberg_norm(&stopped).unwrap();
        assert!(r.estimates.iter().all(|e| e.mean == 2.0));
        assert_eq!(r.censored, vec![0.0, 1.0]);
        assert!(r.monotone);
        assert!(krickeberg_norm(&vec![vec![(1.0, true)]; 5]).is_err());
    }
}
