use super::{sample_brownian, SamplePath, TimeGrid};
use crate::error::{Error, Result};
use crate::numerics::{adaptive_simpson, invert_increasing, Pchip};
use crate::rng::RngSpec;

/// A diffusion coefficient `σ` with its derivative and open state domain.
pub trait Diffusion {
    fn sigma(&self, x: f64) -> Result<f64>;
    fn sigma_prime(&self, x: f64) -> Result<f64>;
    /// `(lo, hi)` of the state space; `lo`/`hi` may be infinite.
    fn domain(&self) -> (f64, f64);
}

/// Built-in diffusion coefficients.
#[derive(Debug, Clone, PartialEq)]
pub enum Sigma {
    /// `σ(x) = c·x^p` on `x > 0`.
    Power { c: f64, p: f64 },
    /// `σ(x) ≡ v` on the real line (`v = 0` gives a frozen path).
    Constant(f64),
    /// Monotone-cubic interpolated table; no extrapolation.
    Tabulated(Pchip),
}

impl Sigma {
    pub fn power(c: f64, p: f64) -> Self {
        Sigma::Power { c, p }
    }

    pub fn tabulated(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if ys.iter().any(|&y| !(y > 0.0)) {
            return Err(Error::Domain("tabulated sigma must be strictly positive".into()));
        }
        Ok(Sigma::Tabulated(Pchip::new(xs, ys)?))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Sigma::Power { c, p } => {
                if !(*c > 0.0 && c.is_finite() && p.is_finite()) {
                    return Err(Error::Domain(format!("power sigma needs c > 0 and finite p (c={c}, p={p})")));
                }
            }
            Sigma::Constant(v) => {
                if !(*v >= 0.0 && v.is_finite()) {
                    return Err(Error::Domain(format!("constant sigma {v} must be finite and >= 0")));
                }
            }
            Sigma::Tabulated(_) => {}
        }
        Ok(())
    }

    /// Whether the state space is the positive half-line.
    pub fn positive_state(&self) -> bool {
        self.domain().0 >= 0.0
    }
}

impl Diffusion for Sigma {
    fn sigma(&self, x: f64) -> Result<f64> {
        match self {
            Sigma::Power { c, p } => {
                if !(x > 0.0) {
                    return Err(Error::Domain(format!("power sigma evaluated at non-positive x = {x}")));
                }
                Ok(c * x.powf(*p))
            }
            Sigma::Constant(v) => Ok(*v),
            Sigma::Tabulated(t) => t.eval(x),
        }
    }

    fn sigma_prime(&self, x: f64) -> Result<f64> {
        match self {
            Sigma::Power { c, p } => {
                if !(x > 0.0) {
                    return Err(Error::Domain(format!("power sigma evaluated at non-positive x = {x}")));
                }
                Ok(c * p * x.powf(p - 1.0))
            }
            Sigma::Constant(_) => Ok(0.0),
            Sigma::Tabulated(t) => t.derivative(x),
        }
    }

    fn domain(&self) -> (f64, f64) {
        match self {
            Sigma::Power { .. } => (0.0, f64::INFINITY),
            Sigma::Constant(_) => (f64::NEG_INFINITY, f64::INFINITY),
            Sigma::Tabulated(t) => t.range(),
        }
    }
}

/// Diffusion coefficient from arbitrary closures.
pub struct CustomSigma<F, D> {
    pub f: F,
    pub df: D,
    pub domain: (f64, f64),
}

impl<F: Fn(f64) -> f64, D: Fn(f64) -> f64> Diffusion for CustomSigma<F, D> {
    fn sigma(&self, x: f64) -> Result<f64> {
        let v = (self.f)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!("sigma({x}) is not finite")))
        }
    }
    fn sigma_prime(&self, x: f64) -> Result<f64> {
        Ok((self.df)(x))
    }
    fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

/// `dX = σ(X) dB (+ ½σσ' dt when drift is set)`, `X_0 = x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdeModel {
    pub x0: f64,
    pub sigma: Sigma,
    pub drift: bool,
}

impl SdeModel {
    pub fn new(x0: f64, sigma: Sigma) -> Result<Self> {
        let m = Self { x0, sigma, drift: false };
        m.validate()?;
        Ok(m)
    }

    pub fn with_drift(mut self) -> Self {
        self.drift = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.sigma.validate()?;
        if !self.x0.is_finite() {
            return Err(Error::Domain(format!("x0 = {} must be finite", self.x0)));
        }
        let (lo, hi) = self.sigma.domain();
        if !(self.x0 > lo && self.x0 < hi) && !(matches!(self.sigma, Sigma::Tabulated(_)) && self.x0 >= lo && self.x0 <= hi)
        {
            return Err(Error::Domain(format!("x0 = {} outside the state space ({lo}, {hi})", self.x0)));
        }
        Ok(())
    }

    /// Floor value used when an Euler step leaves the positive half-line.
    pub fn floor_value(&self) -> f64 {
        1e-12 * self.x0.abs()
    }
}

/// Driving noise for [`euler_maruyama`].
#[derive(Debug, Clone, Copy)]
pub enum Driver<'a> {
    Path(&'a SamplePath),
    Rng(RngSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EulerPath {
    pub path: SamplePath,
    /// The positivity floor was applied at least once.
    pub floored: bool,
    pub floor_events: usize,
}

/// One Euler step; returns the new state and whether the floor was applied.
#[inline]
pub fn euler_step<D: Diffusion + ?Sized>(
    sigma: &D,
    drift: bool,
    floor: Option<f64>,
    x: f64,
    db: f64,
    dt: f64,
) -> Result<(f64, bool)> {
    let s = sigma.sigma(x)?;
    let mut next = x + s * db;
    if drift {
        next += 0.5 * s * sigma.sigma_prime(x)? * dt;
    }
    match floor {
        Some(eps) if next <= 0.0 => Ok((eps, true)),
        _ => Ok((next, false)),
    }
}

pub fn euler_maruyama(model: &SdeModel, grid: TimeGrid, driver: Driver<'_>) -> Result<EulerPath> {
    model.validate()?;
    let floor = model.sigma.positive_state().then(|| model.floor_value());
    euler_maruyama_with(&model.sigma, model.x0, model.drift, floor, grid, driver)
}

pub fn euler_maruyama_with<D: Diffusion + ?Sized>(
    sigma: &D,
    x0: f64,
    drift: bool,
    floor: Option<f64>,
    grid: TimeGrid,
    driver: Driver<'_>,
) -> Result<EulerPath> {
    grid.validate()?;
    let owned;
    let b = match driver {
        Driver::Path(p) => {
            if p.grid() != &grid {
                return Err(Error::InvalidGrid("driver grid does not match the requested grid".into()));
            }
            p
        }
        Driver::Rng(spec) => {
            owned = sample_brownian(grid, spec)?;
            &owned
        }
    };
    let dt = grid.dt();
    let mut values = Vec::with_capacity(grid.steps + 1);
    let mut x = x0;
    values.push(x);
    let mut events = 0;
    for db in b.increments() {
        let (next, hit) = euler_step(sigma, drift, floor, x, db, dt)?;
        events += hit as usize;
        x = next;
        values.push(x);
    }
    Ok(EulerPath { path: SamplePath::new(grid, values)?, floored: events > 0, floor_events: events })
}

/// `h(y) = ∫_{y0}^{y} du/σ(u)` and its inverse, with a moving anchor so that
/// evaluations along a path integrate only over short intervals.
pub struct DossMap<'a, D: Diffusion + ?Sized> {
    sigma: &'a D,
    y0: f64,
    anchor: (f64, f64),
    tol: f64,
}

impl<'a, D: Diffusion + ?Sized> DossMap<'a, D> {
    pub fn new(sigma: &'a D, y0: f64) -> Result<Self> {
        let s = sigma.sigma(y0)?;
        if !(s > 0.0) {
            return Err(Error::Domain(format!("sigma({y0}) = {s} must be positive")));
        }
        Ok(Self { sigma, y0, anchor: (y0, 0.0), tol: 1e-10 })
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    fn recip(&self, u: f64) -> f64 {
        match self.sigma.sigma(u) {
            Ok(s) if s > 0.0 => 1.0 / s,
            _ => f64::NAN,
        }
    }

    /// `h(y)` integrated from the current anchor.
    pub fn h(&self, y: f64) -> Result<f64> {
        let (ya, ha) = self.anchor;
        let (lo, hi) = self.sigma.domain();
        if !(y > lo || (y == lo && lo.is_finite() && self.sigma.sigma(y).is_ok())) || y > hi {
            return Err(Error::Domain(format!("{y} outside the diffusion domain ({lo}, {hi})")));
        }
        let q = adaptive_simpson(|u| self.recip(u), ya, y, self.tol)
            .map_err(|e| Error::Domain(format!("h({y}) failed: {e}")))?;
        Ok(ha + q.value)
    }

    fn h_prime(&self, y: f64) -> Result<f64> {
        Ok(1.0 / self.sigma.sigma(y)?)
    }

    /// `h^{-1}(z)`, moving the anchor to the result.
    pub fn invert(&mut self, z: f64) -> Result<f64> {
        let (ya, ha) = self.anchor;
        if z == ha {
            return Ok(ya);
        }
        let (dlo, dhi) = self.sigma.domain();
        let mut step = ya.abs().max(1.0) * 1e-2;
        let (mut lo, mut hi) = (ya, ya);
        let mut bracketed = false;
        for _ in 0..200 {
            if z > ha {
                let cand = if dhi.is_finite() { (ya + step).min(dhi) } else { ya + step };
                let v = match self.h(cand) {
                    Ok(v) => v,
                    Err(_) => break,
                };
                lo = hi;
                hi = cand;
                if v >= z {
                    bracketed = true;
                    break;
                }
                if cand == dhi || !cand.is_finite() || cand > 1e300 {
                    break;
                }
            } else {
                let cand = if dlo.is_finite() {
                    // approach a finite lower edge geometrically
                    let c = ya - step;
                    if c <= dlo {
                        dlo + (lo - dlo) * 0.5
                    } else {
                        c
                    }
                } else {
                    ya - step
                };
                let v = match self.h(cand) {
                    Ok(v) => v,
                    Err(_) => break,
                };
                hi = lo;
                lo = cand;
                if v <= z {
                    bracketed = true;
                    break;
                }
                if (dlo.is_finite() && cand - dlo < 1e-300) || cand < -1e300 {
                    break;
                }
            }
            step *= 2.0;
        }
        if !bracketed {
            return Err(Error::Range(format!(
                "h^-1 target {z} outside the computed range of h (searched from y = {ya} towards {})",
                if z > ha { hi } else { lo }
            )));
        }
        let y = invert_increasing(|y| self.h(y), |y| self.h_prime(y), z, lo, hi, self.tol)?;
        let hy = self.h(y)?;
        self.anchor = (y, hy);
        Ok(y)
    }
}

/// Pathwise Doss solution `Y_t = h^{-1}(B_t - B_0 + h(Y_0))` of the
/// drift-corrected equation `dY = ½σσ'(Y) dt + σ(Y) dB`.
pub fn doss_solve(model: &SdeModel, grid: TimeGrid, driver: &SamplePath) -> Result<SamplePath> {
    model.validate()?;
    if !model.drift {
        return Err(Error::Domain("the Doss representation solves the drift-corrected equation; set the drift flag".into()));
    }
    doss_solve_with(&model.sigma, model.x0, grid, driver)
}

pub fn doss_solve_with<D: Diffusion + ?Sized>(sigma: &D, y0: f64, grid: TimeGrid, driver: &SamplePath) -> Result<SamplePath> {
    if driver.grid() != &grid {
        return Err(Error::InvalidGrid("driver grid does not match the requested grid".into()));
    }
    let mut map = DossMap::new(sigma, y0)?;
    let b0 = driver.initial();
    let mut out = Vec::with_capacity(grid.steps + 1);
    for &b in driver.values() {
        out.push(map.invert(b - b0)?);
    }
    SamplePath::new(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::MeanEstimate;

    #[test]
    fn zero_sigma_freezes_path() {
        let m = SdeModel::new(1.5, Sigma::Constant(0.0)).unwrap();
        let g = TimeGrid::new(0.0, 1.0, 32).unwrap();
        let p = euler_maruyama(&m, g, Driver::Rng(RngSpec::new(1, 2))).unwrap();
        assert!(p.path.values().iter().all(|&v| v == 1.5));
        assert!(!p.floored);
    }

    #[test]
    fn model_validation() {
        assert!(SdeModel::new(1.0, Sigma::power(0.0, 2.0)).is_err());
        assert!(SdeModel::new(-1.0, Sigma::power(1.0, 2.0)).is_err());
        assert!(SdeModel::new(1.0, Sigma::Constant(-1.0)).is_err());
        assert!(Sigma::tabulated(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn tabulated_sigma_refuses_extrapolation() {
        let s = Sigma::tabulated(vec![0.5, 1.0, 2.0], vec![0.5, 1.0, 4.0]).unwrap();
        assert!(s.sigma(0.49).is_err());
        assert!(s.sigma(2.01).is_err());
        assert!((s.sigma(1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn driver_grid_must_match() {
        let m = SdeModel::new(1.0, Sigma::power(1.0, 1.0)).unwrap();
        let g = TimeGrid::new(0.0, 1.0, 8).unwrap();
        let other = TimeGrid::new(0.0, 1.0, 16).unwrap();
        let b = sample_brownian(other, RngSpec::new(1, 1)).unwrap();
        assert!(euler_maruyama(&m, g, Driver::Path(&b)).is_err());
    }

    #[test]
    fn geometric_case_is_a_martingale() {
        // σ(x) = x, x0 = 1: exact solution exp(B_t - t/2) has mean 1
        let m = SdeModel::new(1.0, Sigma::power(1.0, 1.0)).unwrap();
        let g = TimeGrid::new(0.0, 1.0, 256).unwrap();
        let n = 20_000;
        let mut euler = Vec::with_capacity(n);
        let mut exact = Vec::with_capacity(n);
        for i in 0..n as u64 {
            let b = sample_brownian(g, RngSpec::new(21, i)).unwrap();
            let p = euler_maruyama(&m, g, Driver::Path(&b)).unwrap();
            euler.push(p.path.terminal());
            exact.push((b.terminal() - 0.5).exp());
        }
        let e = MeanEstimate::from_slice(&euler);
        let x = MeanEstimate::from_slice(&exact);
        assert!((e.mean - 1.0).abs() < 3.0 * e.se, "{e:?}");
        assert!((x.mean - 1.0).abs() < 3.0 * x.se, "{x:?}");
    }

    #[test]
    fn inverse_bessel_euler_matches_finer_step_and_loses_mass() {
        let m = SdeModel::new(1.0, Sigma::power(1.0, 2.0)).unwrap();
        let n = 20_000;
        let run = |steps: usize, seed: u64| {
            let g = TimeGrid::new(0.0, 1.0, steps).unwrap();
            let mut vals = Vec::with_capacity(n);
            let mut floored = 0;
            for i in 0..n as u64 {
                let p = euler_maruyama(&m, g, Driver::Rng(RngSpec::new(seed, i))).unwrap();
                if p.floored {
                    floored += 1;
                } else {
                    vals.push(p.path.terminal());
                }
            }
            (MeanEstimate::from_slice(&vals), floored)
        };
        let (coarse, f1) = run(1024, 31);
        let (fine, f2) = run(4096, 32);
        assert!(f1.max(f2) < n / 50, "floor events {f1} {f2}");
        let pooled = (coarse.se.powi(2) + fine.se.powi(2)).sqrt();
        assert!((coarse.mean - fine.mean).abs() < 3.0 * pooled, "{coarse:?} vs {fine:?}");
        assert!(coarse.mean < 1.0 - 3.0 * coarse.se);
    }

    #[test]
    fn doss_identity_for_unit_sigma() {
        let m = SdeModel::new(0.0, Sigma::Constant(1.0)).unwrap().with_drift();
        let g = TimeGrid::new(0.0, 1.0, 64).unwrap();
        let b = sample_brownian(g, RngSpec::new(8, 8)).unwrap();
        let y = doss_solve(&m, g, &b).unwrap();
        for (a, c) in y.values().iter().zip(b.values()) {
            assert!((a - c).abs() < 1e-9);
        }
    }

    #[test]
    fn doss_requires_drift_flag() {
        let m = SdeModel::new(1.0, Sigma::power(1.0, 1.0)).unwrap();
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let b = sample_brownian(g, RngSpec::new(8, 8)).unwrap();
        assert!(doss_solve(&m, g, &b).is_err());
    }

    #[test]
    fn exponential_sigma_round_trip() {
        // σ(x) = e^x: h(y) = e^{-y0} - e^{-y}
        let s = CustomSigma { f: |x: f64| x.exp(), df: |x: f64| x.exp(), domain: (f64::NEG_INFINITY, f64::INFINITY) };
        let y0 = 0.3;
        let y0_: f64 = y0;
        let mut map = DossMap::new(&s, y0).unwrap();
        for &y in &[-2.0, -0.5, 0.0, 0.3, 0.9, 1.7] {
            let h = map.h(y).unwrap();
            assert!((h - ((-y0_).exp() - (-y).exp())).abs() < 1e-9, "h({y})");
            let back = map.invert(h).unwrap();
            assert!((back - y).abs() < 1e-10, "round trip {y} -> {back}");
        }
        // h is bounded above by e^{-y0}
        let sup = (-y0).exp();
        assert!(matches!(map.invert(sup + 0.1), Err(Error::Range(_))));
    }

    #[test]
    fn doss_matches_closed_form_for_linear_sigma() {
        // σ(x) = x with drift: Y = y0 exp(B)
        let m = SdeModel::new(2.0, Sigma::power(1.0, 1.0)).unwrap().with_drift();
        let g = TimeGrid::new(0.0, 1.0, 128).unwrap();
        let b = sample_brownian(g, RngSpec::new(9, 1)).unwrap();
        let y = doss_solve(&m, g, &b).unwrap();
        for (yv, bv) in y.values().iter().zip(b.values()) {
            assert!((yv - 2.0 * bv.exp()).abs() < 1e-8 * yv.abs().max(1.0));
        }
    }

    #[test]
    fn euler_with_drift_converges_to_doss() {
        // strong order 1/2: RMS sup-norm error shrinks by ~sqrt(2) per halving.
        let m = SdeModel::new(1.0, Sigma::power(1.0, 1.0)).unwrap().with_drift();
        let fine = TimeGrid::new(0.0, 1.0, 1 << 14).unwrap();
        let n_paths = 40;
        let levels = [8usize, 10, 12, 14];
        let mut rms = vec![0.0; levels.len()];
        for s in 0..n_paths {
            let b = sample_brownian(fine, RngSpec::new(77, s)).unwrap();
            let exact = doss_solve(&m, fine, &b).unwrap();
            for (li, &lv) in levels.iter().enumerate() {
                let stride = 1usize << (14 - lv);
                let g = TimeGrid::new(0.0, 1.0, 1 << lv).unwrap();
                let coarse_b = SamplePath::new(g, b.values().iter().step_by(stride).copied().collect()).unwrap();
                let e = euler_maruyama(&m, g, Driver::Path(&coarse_b)).unwrap();
                let sup = e
                    .path
                    .values()
                    .iter()
                    .zip(exact.values().iter().step_by(stride))
                    .map(|(a, c)| (a - c).abs())
                    .fold(0.0, f64::max);
                rms[li] += sup * sup / n_paths as f64;
            }
        }
        let rms: Vec<f64> = rms.iter().map(|v| v.sqrt()).collect();
        // three quartering steps (two halvings each): ratio per halving
        let per_halving = (rms[0] / rms[3]).powf(1.0 / 6.0);
        assert!(per_halving >= 2f64.sqrt() * 0.9, "rms {rms:?}, ratio {per_halving}");
        for w in rms.windows(2) {
            assert!(w[1] < w[0]);
        }
    }
}
