//! Optional projection of a continuous strict local martingale onto the
//! filtration generated by first-passage events, estimated by conditioning
//! on the discretized event history across a simulated ensemble.

mod engine;
mod exact;
mod jumps;

pub use engine::{
    run_engine, CadlagProjection, CurvePoint, EngineOutput, EngineSpec, FrozenCurve, JumpMark, OffEventMove, PathObserver, ProjectionSummary,
};
pub use exact::{capture_states, conditional_from_states, project_conditional_exact, CapturedState, ConditionalEstimate};
pub use jumps::{extract_jumps, jump_localization, reducing_times, stopped, JumpLocalization, JumpRecord, ReducingTime};

use crate::error::{Error, Result};
use crate::filtration::{Direction, LevelSet, PassageDetector, PassageEvent};
use crate::rng::{purpose, RngSpec, StreamRng};
use crate::stochastics::{euler_step, Bessel3Stepper, SamplePath, SdeModel, Sigma, TimeGrid};
use serde::{Deserialize, Serialize};

/// The continuous process `X` together with its Brownian driver `B`.
#[derive(Debug, Clone, PartialEq)]
pub enum CoupledModel {
    /// `X = 1/|W|`, `W` a 3-d Brownian motion from `(r0, 0, 0)`; exact on
    /// the grid. The driver is minus the radial Brownian motion, so
    /// `dX = X² dB`.
    InverseBessel3 { r0: f64 },
    /// Euler scheme for `dX = σ(X) dB`, with the positivity floor.
    Sde(SdeModel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelState {
    Bessel(Bessel3Stepper),
    Euler(f64),
}

impl CoupledModel {
    pub fn inverse_bessel(x0: f64) -> Result<Self> {
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(Error::Domain(format!("x0 = {x0} must be positive")));
        }
        Ok(CoupledModel::InverseBessel3 { r0: 1.0 / x0 })
    }

    pub fn x0(&self) -> f64 {
        match self {
            CoupledModel::InverseBessel3 { r0 } => 1.0 / r0,
            CoupledModel::Sde(m) => m.x0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CoupledModel::InverseBessel3 { r0 } if !(*r0 > 0.0 && r0.is_finite()) => {
                Err(Error::Domain(format!("Bessel start {r0} must be positive")))
            }
            CoupledModel::Sde(m) => m.validate(),
            _ => Ok(()),
        }
    }

    /// The diffusion coefficient of `X`.
    pub fn sigma(&self) -> Sigma {
        match self {
            CoupledModel::InverseBessel3 { .. } => Sigma::power(1.0, 2.0),
            CoupledModel::Sde(m) => m.sigma.clone(),
        }
    }

    pub fn initial_state(&self) -> ModelState {
        match self {
            CoupledModel::InverseBessel3 { r0 } => ModelState::Bessel(Bessel3Stepper::new(*r0)),
            CoupledModel::Sde(m) => ModelState::Euler(m.x0),
        }
    }

    pub fn value(&self, state: &ModelState) -> f64 {
        match state {
            ModelState::Bessel(s) => 1.0 / s.radius(),
            ModelState::Euler(x) => *x,
        }
    }

    /// Advance one step; returns `(ΔB, X_next, floored)`.
    #[inline]
    pub fn step(&self, state: &mut ModelState, rng: &mut StreamRng, dt: f64) -> Result<(f64, f64, bool)> {
        match (self, state) {
            (CoupledModel::InverseBessel3 { .. }, ModelState::Bessel(s)) => {
                let db = -s.step(rng, dt.sqrt());
                Ok((db, 1.0 / s.radius(), false))
            }
            (CoupledModel::Sde(m), ModelState::Euler(x)) => {
                let db = dt.sqrt() * rand::Rng::sample::<f64, _>(rng, rand_distr::StandardNormal);
                let floor = m.sigma.positive_state().then(|| m.floor_value());
                let (next, hit) = euler_step(&m.sigma, m.drift, floor, *x, db, dt)?;
                *x = next;
                Ok((db, next, hit))
            }
            _ => Err(Error::Integrity("model state does not match the model".into())),
        }
    }
}

/// Which process the levels are placed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelsOn {
    /// The Brownian driver (levels relative to `B_0 = 0`).
    Driver,
    /// `X` itself (levels must lie above `x0`).
    Process,
}

/// One event seen by an observer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservedEvent {
    pub step: usize,
    pub time: f64,
    /// Identifies the event type in conditioning keys.
    pub label: u32,
    pub level: f64,
    pub direction: Direction,
    pub alpha: f64,
    pub beta: f64,
}

const DOWN_LABEL: u32 = 1 << 16;

/// Passage-event observer on the driver or on `X`.
#[derive(Debug, Clone)]
pub struct PassageObserver {
    detector: PassageDetector,
    levels: LevelSet,
    on: LevelsOn,
    /// Strictly increasing map applied to `X` before detection.
    transform: Option<Sigma>,
    x0: f64,
    scratch: Vec<PassageEvent>,
}

/// Doss map `h(y) = ∫_{x0}^y du/σ(u)` in closed form for the power family.
fn power_h(c: f64, p: f64, x0: f64, y: f64) -> f64 {
    if p == 1.0 {
        (y / x0).ln() / c
    } else {
        (y.powf(1.0 - p) - x0.powf(1.0 - p)) / (c * (1.0 - p))
    }
}

impl PassageObserver {
    pub fn new(model: &CoupledModel, levels: &LevelSet, on: LevelsOn, bridge: Option<RngSpec>) -> Result<Self> {
        let x0 = model.x0();
        let (det, transform) = match on {
            LevelsOn::Driver => (PassageDetector::new(levels, 0.0, bridge)?, None),
            LevelsOn::Process => match model.sigma() {
                // on h(X) the noise has unit variance, so the bridge correction applies
                Sigma::Power { c, p } => {
                    if let Some(&l) = levels.levels().first() {
                        if !(l > x0) {
                            return Err(Error::InvalidLevels(format!("level {l} on X is not above x0 = {x0}")));
                        }
                    }
                    let hl = LevelSet::new(levels.levels().iter().map(|&l| power_h(c, p, x0, l)).collect())?;
                    (PassageDetector::new(&hl, 0.0, bridge)?, Some(Sigma::Power { c, p }))
                }
                // local variance is not constant here, so no bridge correction
                _ => (PassageDetector::new(levels, x0, None)?, None),
            },
        };
        if on == LevelsOn::Process && levels.two_sided() {
            return Err(Error::InvalidLevels("two-sided levels are supported on the driver only".into()));
        }
        Ok(Self { detector: det, levels: levels.clone(), on, transform, x0, scratch: Vec::new() })
    }

    fn map(&self, x: f64) -> f64 {
        match self.transform {
            Some(Sigma::Power { c, p }) => power_h(c, p, self.x0, x.max(f64::MIN_POSITIVE)),
            _ => x,
        }
    }

    pub fn detector(&self) -> &PassageDetector {
        &self.detector
    }

    pub fn reseed_bridge(&mut self, bridge: RngSpec) {
        self.detector.reseed_bridge(bridge);
    }
}

impl PathObserver for PassageObserver {
    fn observe(&mut self, k: usize, t0: f64, dt: f64, b: (f64, f64), x: (f64, f64), out: &mut Vec<ObservedEvent>) {
        if self.detector.done() {
            return;
        }
        let (v0, v1) = match self.on {
            LevelsOn::Driver => b,
            LevelsOn::Process => (self.map(x.0), self.map(x.1)),
        };
        let (up0, down0) = (self.detector.reached_up(), self.detector.reached_down());
        self.scratch.clear();
        self.detector.step(k, t0, dt, v0, v1, &mut self.scratch);
        let (mut iu, mut id) = (up0, down0);
        for e in &self.scratch {
            let (label, level, alpha) = match e.direction {
                Direction::Up => {
                    let i = iu;
                    iu += 1;
                    (i as u32, self.levels.levels()[i], if i == 0 { 0.0 } else { self.levels.levels()[i - 1] })
                }
                Direction::Down => {
                    let i = id;
                    id += 1;
                    (DOWN_LABEL + i as u32, self.levels.lower()[i], if i == 0 { 0.0 } else { self.levels.lower()[i - 1] })
                }
            };
            out.push(ObservedEvent { step: k, time: e.time, label, level, direction: e.direction, alpha, beta: level });
        }
    }
}

/// A discretized event-history prefix: `(label, time bucket)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConditioningKey {
    pub tokens: Vec<(u32, u32)>,
    pub bucket_steps: usize,
}

impl ConditioningKey {
    pub fn bucket(step: usize, bucket_steps: usize) -> u32 {
        (step.saturating_sub(1) / bucket_steps) as u32
    }

    /// Key of an event history up to grid step `k`.
    pub fn from_events(events: &[ObservedEvent], k: usize, bucket_steps: usize) -> Self {
        let tokens = events.iter().filter(|e| e.step <= k).map(|e| (e.label, Self::bucket(e.step, bucket_steps))).collect();
        Self { tokens, bucket_steps }
    }

    /// Grid steps covered by the bucket of the last token.
    pub fn last_bucket_steps(&self) -> Option<(usize, usize)> {
        self.tokens.last().map(|&(_, b)| {
            let lo = b as usize * self.bucket_steps + 1;
            (lo, lo + self.bucket_steps - 1)
        })
    }
}

/// Parameters of an ensemble projection run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSpec {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub eval_times: Vec<f64>,
    pub bucket_steps: usize,
    pub min_occupancy: usize,
    pub noise_threshold: f64,
    pub bridge: bool,
    pub levels_on: LevelsOn,
    pub trace_paths: usize,
    pub frozen_at: Option<f64>,
    pub rng: RngSpec,
}

impl ProjectionSpec {
    pub fn new(grid: TimeGrid, n_paths: usize, eval_times: Vec<f64>, rng: RngSpec) -> Self {
        Self {
            grid,
            n_paths,
            eval_times,
            bucket_steps: 8,
            min_occupancy: 30,
            noise_threshold: 0.4,
            bridge: true,
            levels_on: LevelsOn::Driver,
            trace_paths: 0,
            frozen_at: None,
            rng,
        }
    }

    pub fn engine_spec(&self) -> EngineSpec {
        EngineSpec {
            grid: self.grid,
            n_paths: self.n_paths,
            eval_times: self.eval_times.clone(),
            bucket_steps: self.bucket_steps,
            min_occupancy: self.min_occupancy,
            record_floor: self.noise_threshold,
            trace_paths: self.trace_paths,
            frozen_at: self.frozen_at,
            rng: self.rng,
        }
    }
}

/// Ensemble projection of `model` onto the passage filtration of `levels`.
pub fn project_ensemble(model: &CoupledModel, levels: &LevelSet, spec: &ProjectionSpec) -> Result<EngineOutput> {
    model.validate()?;
    let on = spec.levels_on;
    let bridge = spec.bridge;
    // validate once up front so the error is not per-path
    PassageObserver::new(model, levels, on, None)?;
    run_engine(model, &spec.engine_spec(), |stream| {
        let b = bridge.then(|| spec.rng.with_stream(stream).substream(purpose::BRIDGE));
        PassageObserver::new(model, levels, on, b)
    })
}

/// One stream simulated on its own, with the same draws as in [`run_engine`].
#[derive(Debug, Clone, PartialEq)]
pub struct StreamPath {
    pub driver: SamplePath,
    pub x: SamplePath,
    pub floored: bool,
    pub events: Vec<ObservedEvent>,
}

pub fn simulate_stream<O: PathObserver>(model: &CoupledModel, grid: TimeGrid, rng: RngSpec, mut observer: Option<O>) -> Result<StreamPath> {
    model.validate()?;
    grid.validate()?;
    let dt = grid.dt();
    let mut r = rng.rng();
    let mut state = model.initial_state();
    let (mut b, mut x) = (vec![0.0; grid.steps + 1], vec![model.x0(); grid.steps + 1]);
    let mut floored = false;
    let mut events = Vec::new();
    for k in 1..=grid.steps {
        let (db, xn, hit) = model.step(&mut state, &mut r, dt)?;
        b[k] = b[k - 1] + db;
        x[k] = xn;
        floored |= hit;
        if let Some(o) = observer.as_mut() {
            o.observe(k, grid.time(k - 1), dt, (b[k - 1], b[k]), (x[k - 1], x[k]), &mut events);
        }
    }
    Ok(StreamPath { driver: SamplePath::new(grid, b)?, x: SamplePath::new(grid, x)?, floored, events })
}

#[cfg(test)]
mod tests;
