//! Path samplers: Brownian motion, Bessel(3) and its reciprocal, the
//! driftless diffusion family `dX = σ(X) dB` (Euler scheme), the Doss
//! pathwise solution of the drift-corrected equation, and exact first
//! passage times of Brownian motion.

mod sde;

pub use sde::{
    doss_solve, doss_solve_with, euler_maruyama, euler_maruyama_with, euler_step, CustomSigma, Diffusion, DossMap,
    Driver, EulerPath, SdeModel, Sigma,
};

use crate::error::{Error, Result};
use crate::rng::{RngSpec, StreamRng};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Uniform time grid `t_start + k Δt`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, horizon: f64, steps: usize) -> Result<Self> {
        let g = Self { t_start, horizon, steps };
        g.validate()?;
        Ok(g)
    }

    /// Grid on `[0, horizon]` with step `dt` (rounded to a whole number of steps).
    pub fn with_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidGrid(format!("step {dt} must be positive")));
        }
        Self::new(0.0, horizon, (horizon / dt).round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidGrid("steps must be at least 1".into()));
        }
        if !(self.t_start >= 0.0 && self.t_start.is_finite()) {
            return Err(Error::InvalidGrid(format!("t_start {} must be finite and >= 0", self.t_start)));
        }
        if !(self.horizon > self.t_start && self.horizon.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "horizon {} must be finite and exceed t_start {}",
                self.horizon, self.t_start
            )));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        (self.horizon - self.t_start) / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            self.t_start + k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// Grid index nearest to `t` (clamped to the grid).
    pub fn nearest_index(&self, t: f64) -> usize {
        let k = ((t - self.t_start) / self.dt()).round();
        (k.max(0.0) as usize).min(self.steps)
    }

    /// Smallest grid index whose time is `>= t` (up to rounding).
    pub fn ceil_index(&self, t: f64) -> usize {
        let k = ((t - self.t_start) / self.dt() - 1e-9).ceil();
        (k.max(0.0) as usize).min(self.steps)
    }
}

/// A sampled continuous path on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.steps + 1 {
            return Err(Error::InvalidPath(format!(
                "expected {} values for {} steps, got {}",
                grid.steps + 1,
                grid.steps,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPath(format!("non-finite value at index {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.steps + 1])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn initial(&self) -> f64 {
        self.values[0]
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn at_time(&self, t: f64) -> f64 {
        self.values[self.grid.nearest_index(t)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }
}

/// Standard Brownian motion started at 0 on `grid`.
pub fn sample_brownian(grid: TimeGrid, rng: RngSpec) -> Result<SamplePath> {
    grid.validate()?;
    let mut r = rng.rng();
    let sd = grid.dt().sqrt();
    let mut values = Vec::with_capacity(grid.steps + 1);
    let mut b = 0.0;
    values.push(b);
    for _ in 0..grid.steps {
        let z: f64 = r.sample(StandardNormal);
        b += sd * z;
        values.push(b);
    }
    SamplePath::new(grid, values)
}

/// Exact stepper for a 3-dimensional Brownian motion started at `(r0, 0, 0)`.
///
/// Besides the modulus it reports the increment `u·ΔW` of the radial
/// driving Brownian motion, where `u = W/|W|` is taken at the start of the
/// step. Given the past, that increment is exactly `N(0, Δt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bessel3Stepper {
    pub w: [f64; 3],
}

impl Bessel3Stepper {
    pub fn new(r0: f64) -> Self {
        Self { w: [r0, 0.0, 0.0] }
    }

    pub fn radius(&self) -> f64 {
        (self.w[0] * self.w[0] + self.w[1] * self.w[1] + self.w[2] * self.w[2]).sqrt()
    }

    /// Advance one step of standard deviation `sd`; returns the radial
    /// Brownian increment.
    pub fn step(&mut self, rng: &mut StreamRng, sd: f64) -> f64 {
        let r = self.radius();
        let mut radial = 0.0;
        for c in 0..3 {
            let dw = sd * rng.sample::<f64, _>(StandardNormal);
            radial += self.w[c] / r * dw;
            self.w[c] += dw;
        }
        radial
    }
}

/// Bessel(3) process `|W_t|` for a 3-d Brownian motion started at `(r0, 0, 0)`.
pub fn sample_bessel3(grid: TimeGrid, r0: f64, rng: RngSpec) -> Result<SamplePath> {
    Ok(sample_bessel3_coupled(grid, r0, rng)?.0)
}

/// Bessel(3) path together with a Brownian driver `B = -β`, where `β` is
/// the radial Brownian motion of `R = |W|`. With this sign the reciprocal
/// `X = 1/R` satisfies `dX = X² dB`.
pub fn sample_bessel3_coupled(grid: TimeGrid, r0: f64, rng: RngSpec) -> Result<(SamplePath, SamplePath)> {
    grid.validate()?;
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::Domain(format!("Bessel start r0 = {r0} must be positive")));
    }
    let mut r = rng.rng();
    let sd = grid.dt().sqrt();
    let mut st = Bessel3Stepper::new(r0);
    let mut radii = Vec::with_capacity(grid.steps + 1);
    let mut driver = Vec::with_capacity(grid.steps + 1);
    radii.push(r0);
    driver.push(0.0);
    let mut b = 0.0;
    for _ in 0..grid.steps {
        b -= st.step(&mut r, sd);
        radii.push(st.radius());
        driver.push(b);
    }
    Ok((SamplePath::new(grid, radii)?, SamplePath::new(grid, driver)?))
}

/// Pointwise reciprocal of a strictly positive path.
pub fn inverse_path(path: &SamplePath) -> Result<SamplePath> {
    if let Some(k) = path.values().iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("value {} at index {k} is not positive", path.values()[k])));
    }
    path.map(|v| 1.0 / v)
}

/// Exact first passage time of standard Brownian motion to level `gap > 0`,
/// drawn as `gap² / Z²` with `Z` standard normal.
pub fn first_passage_from<R: Rng + ?Sized>(gap: f64, rng: &mut R) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z != 0.0 {
            return gap * gap / (z * z);
        }
    }
}

pub fn sample_first_passage_exact(gap: f64, rng: RngSpec) -> Result<f64> {
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::Domain(format!("passage gap {gap} must be positive")));
    }
    Ok(first_passage_from(gap, &mut rng.rng()))
}

/// `n` exact passage times drawn from one stream.
pub fn sample_first_passages(gap: f64, n: usize, rng: RngSpec) -> Result<Vec<f64>> {
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::Domain(format!("passage gap {gap} must be positive")));
    }
    let mut r = rng.rng();
    Ok((0..n).map(|_| first_passage_from(gap, &mut r)).collect())
}
