//! Penny-grid observation and transaction-time masking.

use crate::error::{Error, Result};
use crate::filtration::{detect_passages, Direction, LevelSet, ObservationRecord};
use crate::projection::{run_engine, CoupledModel, EngineOutput, ObservedEvent, PathObserver, ProjectionSpec};
use crate::rng::{purpose, RngSpec};
use crate::stats::pooled_se;
use crate::stochastics::{SamplePath, TimeGrid};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Price lattice `anchor + k·tick`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickGrid {
    pub tick: f64,
    #[serde(default)]
    pub anchor: f64,
}

impl TickGrid {
    pub fn new(tick: f64, anchor: f64) -> Result<Self> {
        let g = Self { tick, anchor };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tick > 0.0 && self.tick.is_finite() && self.anchor.is_finite()) {
            return Err(Error::config("tick", format!("tick {} must be positive and finite", self.tick)));
        }
        Ok(())
    }

    pub fn level(&self, k: i64) -> f64 {
        self.anchor + k as f64 * self.tick
    }

    /// Smallest lattice index strictly above `x`.
    pub fn index_above(&self, x: f64) -> i64 {
        let mut k = ((x - self.anchor) / self.tick).floor() as i64;
        while self.level(k) <= x {
            k += 1;
        }
        while self.level(k - 1) > x {
            k -= 1;
        }
        k
    }

    /// Largest lattice index strictly below `x`.
    pub fn index_below(&self, x: f64) -> i64 {
        let mut k = ((x - self.anchor) / self.tick).ceil() as i64;
        while self.level(k) >= x {
            k -= 1;
        }
        while self.level(k + 1) < x {
            k += 1;
        }
        k
    }
}

/// First passages of `path` through every tick level in its range.
pub fn tick_observe(path: &SamplePath, grid: &TickGrid) -> Result<ObservationRecord> {
    grid.validate()?;
    let v = path.values();
    let x0 = v[0];
    let (lo, hi) = v.iter().fold((x0, x0), |(a, b), &x| (a.min(x), b.max(x)));
    let up: Vec<f64> = (grid.index_above(x0)..).map(|k| grid.level(k)).take_while(|&l| l <= hi).collect();
    let down: Vec<f64> = (0..).map(|i| grid.level(grid.index_below(x0) - i)).take_while(|&l| l >= lo).collect();
    // lattice levels are monotone by construction; lower ones may be positive
    detect_passages(path, &LevelSet::unchecked(up, down), None)
}

const TICK_DOWN: u32 = 1 << 31;

/// Streaming tick-lattice observer on `X`.
#[derive(Debug, Clone)]
pub struct TickObserver {
    grid: TickGrid,
    next_up: i64,
    next_down: i64,
    start_up: i64,
    start_down: i64,
}

impl TickObserver {
    pub fn new(grid: TickGrid, x0: f64) -> Result<Self> {
        grid.validate()?;
        let (u, d) = (grid.index_above(x0), grid.index_below(x0));
        Ok(Self { grid, next_up: u, next_down: d, start_up: u, start_down: d })
    }
}

impl PathObserver for TickObserver {
    fn observe(&mut self, k: usize, t0: f64, dt: f64, _b: (f64, f64), x: (f64, f64), out: &mut Vec<ObservedEvent>) {
        let mut hits: Vec<(i64, Direction)> = Vec::new();
        while self.grid.level(self.next_up) <= x.1 {
            hits.push((self.next_up, Direction::Up));
            self.next_up += 1;
        }
        while self.grid.level(self.next_down) >= x.1 {
            hits.push((self.next_down, Direction::Down));
            self.next_down -= 1;
        }
        let m = hits.len();
        for (j, (i, d)) in hits.into_iter().enumerate() {
            let (label, alpha) = match d {
                Direction::Up => ((i - self.start_up) as u32, self.grid.level(i - 1)),
                Direction::Down => (TICK_DOWN | (self.start_down - i) as u32, self.grid.level(i + 1)),
            };
            let level = self.grid.level(i);
            let time = t0 + dt * (j + 1) as f64 / (m + 1) as f64;
            out.push(ObservedEvent { step: k, time, label, level, direction: d, alpha, beta: level });
        }
    }
}

/// Ensemble projection of `model` onto the tick-passage filtration of `X`.
pub fn project_ticks(model: &CoupledModel, grid: TickGrid, spec: &ProjectionSpec) -> Result<EngineOutput> {
    let x0 = model.x0();
    TickObserver::new(grid, x0)?;
    run_engine(model, &spec.engine_spec(), |_| TickObserver::new(grid, x0))
}

/// Inter-arrival law of the transaction times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RenewalSpec {
    Exponential { rate: f64 },
    /// Piecewise-linear inverse CDF through `(probability, value)` knots
    /// from probability 0 to 1.
    Table { knots: Vec<(f64, f64)> },
}

impl RenewalSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            RenewalSpec::Exponential { rate } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(Error::config("renewal.rate", format!("{rate} must be positive")));
                }
            }
            RenewalSpec::Table { knots } => {
                if knots.len() < 2 {
                    return Err(Error::config("renewal.knots", "need at least two knots"));
                }
                if knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
                    return Err(Error::config("renewal.knots", "probabilities must run from 0 to 1"));
                }
                if knots[0].1 < 0.0 || !knots.iter().all(|k| k.1.is_finite()) {
                    return Err(Error::config("renewal.knots", "values must be finite and >= 0"));
                }
                // strictly increasing values keep the law atomless
                if knots.windows(2).any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1)) {
                    return Err(Error::config("renewal.knots", "knots must be strictly increasing in both coordinates"));
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let u: f64 = rng.random();
            let x = match self {
                RenewalSpec::Exponential { rate } => -(1.0 - u).ln() / rate,
                RenewalSpec::Table { knots } => {
                    let i = knots.partition_point(|k| k.0 <= u).clamp(1, knots.len() - 1);
                    let (a, b) = (knots[i - 1], knots[i]);
                    a.1 + (u - a.0) / (b.0 - a.0) * (b.1 - a.1)
                }
            };
            if x > 0.0 {
                return x;
            }
        }
    }
}

/// Renewal times in `(0, horizon]` for one path.
pub fn renewal_times(renewal: &RenewalSpec, horizon: f64, rng: RngSpec) -> Result<Vec<f64>> {
    renewal.validate()?;
    let mut r = rng.substream(purpose::RENEWAL).rng();
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += renewal.sample(&mut r);
        if t > horizon {
            return Ok(out);
        }
        out.push(t);
    }
}

/// Predictable weight `H_t`, evaluated at the left end of each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weight {
    Constant { value: f64 },
    Affine { a: f64, b: f64 },
}

impl Default for Weight {
    fn default() -> Self {
        Weight::Constant { value: 1.0 }
    }
}

impl Weight {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Weight::Constant { value } => value,
            Weight::Affine { a, b } => a + b * t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Weight::Constant { value } => value.is_finite(),
            Weight::Affine { a, b } => a.is_finite() && b.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config("weight", "coefficients must be finite"))
        }
    }
}

/// `J_k` for the step `(t_{k-1}, t_k]`: 1 iff an odd number of renewals
/// happened by `t_{k-1}`.
fn mask_bit(taus: &[f64], t_left: f64) -> bool {
    taus.partition_point(|&t| t <= t_left) % 2 == 1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskedObservation {
    pub grid: TimeGrid,
    /// `Y` on the grid.
    pub y: Vec<f64>,
    /// `J` per step (`j[k-1]` applies to `(t_{k-1}, t_k]`).
    pub j: Vec<bool>,
    pub taus: Vec<f64>,
    pub weight: Weight,
}

impl MaskedObservation {
    /// `(Σ ΔY², Σ H² J Δt)`.
    pub fn quadratic_variation(&self) -> (f64, f64) {
        let dt = self.grid.dt();
        let mut qv = 0.0;
        let mut integral = 0.0;
        for k in 1..self.y.len() {
            let d = self.y[k] - self.y[k - 1];
            qv += d * d;
            if self.j[k - 1] {
                let h = self.weight.at(self.grid.time(k - 1));
                integral += h * h * dt;
            }
        }
        (qv, integral)
    }
}

/// `Y = ∫ H J dB` on the grid of `driver`, with fresh renewal times.
pub fn mask_transactions(driver: &SamplePath, weight: Weight, renewal: &RenewalSpec, rng: RngSpec) -> Result<MaskedObservation> {
    weight.validate()?;
    let grid = *driver.grid();
    let taus = renewal_times(renewal, grid.horizon, rng)?;
    Ok(mask_with_times(driver, weight, taus))
}

/// As [`mask_transactions`] with given renewal times.
pub fn mask_with_times(driver: &SamplePath, weight: Weight, taus: Vec<f64>) -> MaskedObservation {
    let grid = *driver.grid();
    let b = driver.values();
    let mut y = Vec::with_capacity(b.len());
    let mut j = Vec::with_capacity(b.len() - 1);
    y.push(0.0);
    for k in 1..b.len() {
        let t = grid.time(k - 1);
        let on = mask_bit(&taus, t);
        j.push(on);
        let prev = y[k - 1];
        y.push(if on { prev + weight.at(t) * (b[k] - b[k - 1]) } else { prev });
    }
    MaskedObservation { grid, y, j, taus, weight }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QvReport {
    pub qv: f64,
    pub integral: f64,
    pub relative_error: f64,
    pub paths: usize,
}

/// Quadratic variation pooled over an ensemble of masked observations.
pub fn qv_check(obs: &[MaskedObservation]) -> Result<QvReport> {
    let (mut qv, mut integral) = (0.0, 0.0);
    for o in obs {
        let (a, b) = o.quadratic_variation();
        qv += a;
        integral += b;
    }
    if !(integral > 0.0) {
        return Err(Error::InsufficientData("no time with J = 1 in the ensemble".into()));
    }
    Ok(QvReport { qv, integral, relative_error: (qv - integral).abs() / integral, paths: obs.len() })
}

const Y_BINS: i64 = 4096;

/// Key label for renewal `i` (0-based) observed with `Y` in bin `bin`.
pub fn renewal_label(i: usize, bin: i64) -> u32 {
    (i as u32) * Y_BINS as u32 + (bin + Y_BINS / 2).clamp(0, Y_BINS - 1) as u32
}

/// Renewal index (0-based) carried by a label.
pub fn renewal_index(label: u32) -> usize {
    (label / Y_BINS as u32) as usize
}

/// Observer revealing, at each renewal time, its index and the bin of `Y`.
#[derive(Debug, Clone)]
pub struct MaskObserver {
    taus: Vec<f64>,
    next: usize,
    y: f64,
    weight: Weight,
    y_bin: f64,
}

impl MaskObserver {
    pub fn new(taus: Vec<f64>, weight: Weight, y_bin: f64) -> Self {
        Self { taus, next: 0, y: 0.0, weight, y_bin }
    }

    pub fn y(&self) -> f64 {
        self.y
    }
}

impl PathObserver for MaskObserver {
    fn observe(&mut self, k: usize, t0: f64, dt: f64, b: (f64, f64), _x: (f64, f64), out: &mut Vec<ObservedEvent>) {
        if mask_bit(&self.taus, t0) {
            self.y += self.weight.at(t0) * (b.1 - b.0);
        }
        let t1 = t0 + dt;
        while self.next < self.taus.len() && self.taus[self.next] <= t1 {
            let bin = (self.y / self.y_bin).floor() as i64;
            let label = renewal_label(self.next, bin);
            let level = (bin as f64 + 0.5) * self.y_bin;
            // J on the steps after τ_i is already fixed by the count at τ_i
            let direction = if self.next.is_multiple_of(2) { Direction::Up } else { Direction::Down };
            out.push(ObservedEvent { step: k, time: self.taus[self.next], label, level, direction, alpha: self.y, beta: level });
            self.next += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub renewal: RenewalSpec,
    #[serde(default)]
    pub weight: Weight,
    /// Width of the `Y` bins in the conditioning key.
    pub y_bin: f64,
}

impl MarketSpec {
    pub fn validate(&self) -> Result<()> {
        self.renewal.validate()?;
        self.weight.validate()?;
        if !(self.y_bin > 0.0 && self.y_bin.is_finite()) {
            return Err(Error::config("y_bin", "must be positive"));
        }
        Ok(())
    }
}

/// Above-threshold moves of `M` attributed to renewal times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketJumpReport {
    pub threshold: f64,
    pub total_mass: f64,
    /// Mass within one step of a renewal ending a blackout (`τ_1, τ_3, ...`).
    pub blackout_end_mass: f64,
    /// Mass within one step of a renewal starting one (`τ_2, τ_4, ...`).
    pub blackout_start_mass: f64,
    pub blackout_end_fraction: f64,
    pub blackout_start_fraction: f64,
    /// Mass per 1-based renewal index (only the nearest renewal counts).
    pub mass_by_index: Vec<f64>,
    pub moves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyProjection {
    pub output: EngineOutput,
    pub jumps: MarketJumpReport,
}

/// Projection of `model` onto the information revealed at the renewal times.
pub fn family_project(model: &CoupledModel, market: &MarketSpec, spec: &ProjectionSpec) -> Result<FamilyProjection> {
    market.validate()?;
    let horizon = spec.grid.horizon;
    let out = run_engine(model, &spec.engine_spec(), |s| {
        let taus = renewal_times(&market.renewal, horizon, spec.rng.with_stream(s))?;
        Ok(MaskObserver::new(taus, market.weight, market.y_bin))
    })?;
    let jumps = attribute_jumps(&out, spec.noise_threshold)?;
    Ok(FamilyProjection { output: out, jumps })
}

/// Attribute above-threshold moves of `M` (confident ones only) to the
/// nearest renewal of the same path within one grid step.
pub fn attribute_jumps(out: &EngineOutput, threshold: f64) -> Result<MarketJumpReport> {
    if threshold < out.record_floor || out.off_event_moves.len() < out.off_event_count {
        return Err(Error::Domain(format!("threshold {threshold} below the recorded floor {}", out.record_floor)));
    }
    let mut moves: Vec<(usize, usize, f64)> = Vec::new();
    for p in &out.paths {
        for j in p.jumps.iter().filter(|j| j.confident && j.delta().abs() > threshold) {
            moves.push((p.stream_id as usize, j.step, j.delta().abs()));
        }
    }
    for m in out.off_event_moves.iter().filter(|m| m.delta.abs() > threshold) {
        moves.push((m.stream_id as usize, m.step, m.delta.abs()));
    }
    let mut rep = MarketJumpReport {
        threshold,
        total_mass: 0.0,
        blackout_end_mass: 0.0,
        blackout_start_mass: 0.0,
        blackout_end_fraction: 0.0,
        blackout_start_fraction: 0.0,
        mass_by_index: Vec::new(),
        moves: moves.len(),
    };
    for (s, step, mass) in moves {
        rep.total_mass += mass;
        let nearest = out.paths[s]
            .events
            .iter()
            .filter(|e| e.step.abs_diff(step) <= 1)
            .min_by_key(|e| e.step.abs_diff(step));
        if let Some(e) = nearest {
            let i = renewal_index(e.label);
            if rep.mass_by_index.len() <= i {
                rep.mass_by_index.resize(i + 1, 0.0);
            }
            rep.mass_by_index[i] += mass;
            if i.is_multiple_of(2) {
                rep.blackout_end_mass += mass;
            } else {
                rep.blackout_start_mass += mass;
            }
        }
    }
    if rep.total_mass > 0.0 {
        rep.blackout_end_fraction = rep.blackout_end_mass / rep.total_mass;
        rep.blackout_start_fraction = rep.blackout_start_mass / rep.total_mass;
    }
    Ok(rep)
}

/// Held-out `M` against `X` at evaluation index `i`: `(mean M, mean X, z)`.
pub fn tower_z(out: &EngineOutput, i: usize) -> (f64, f64, f64) {
    let (m, x) = out.held_out_tower(i);
    (m.mean, x.mean, (m.mean - x.mean) / pooled_se(m.se, x.se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::MeanEstimate;
    use crate::stochastics::sample_brownian;
    use proptest::prelude::*;

    fn ramp(a: f64, b: f64, steps: usize) -> SamplePath {
        let grid = TimeGrid::new(0.0, 1.0, steps).unwrap();
        SamplePath::new(grid, (0..=steps).map(|k| a + (b - a) * k as f64 / steps as f64).collect()).unwrap()
    }

    #[test]
    fn ramp_crosses_two_pennies() {
        let rec = tick_observe(&ramp(1.0, 1.025, 100), &TickGrid::new(0.01, 0.0).unwrap()).unwrap();
        let lv: Vec<f64> = rec.events().iter().map(|e| e.level).collect();
        assert_eq!(lv.len(), 2);
        assert!((lv[0] - 1.01).abs() < 1e-12 && (lv[1] - 1.02).abs() < 1e-12);
        assert!(rec.events().iter().all(|e| e.direction == Direction::Up));
    }

    #[test]
    fn positive_prices_see_lower_ticks() {
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let p = SamplePath::new(g, vec![1.0, 0.8, 0.6, 1.3, 1.1]).unwrap();
        let rec = tick_observe(&p, &TickGrid::new(0.25, 1.0).unwrap()).unwrap();
        let got: Vec<(f64, Direction)> = rec.events().iter().map(|e| (e.level, e.direction)).collect();
        assert_eq!(got, vec![(0.75, Direction::Down), (1.25, Direction::Up)]);
    }

    #[test]
    fn path_inside_one_cell_is_unobserved() {
        let rec = tick_observe(&ramp(1.001, 1.009, 50), &TickGrid::new(0.01, 0.0).unwrap()).unwrap();
        assert!(rec.is_empty());
    }

    #[test]
    fn invalid_tick_is_rejected() {
        assert!(TickGrid::new(0.0, 0.0).is_err());
        assert!(TickGrid::new(-0.01, 0.0).is_err());
    }

    #[test]
    fn brownian_price_records_are_consistent_and_grow() {
        let tick = TickGrid::new(0.01, 0.0).unwrap();
        let long = sample_brownian(TimeGrid::new(0.0, 4.0, 4096).unwrap(), RngSpec::new(3, 0)).unwrap();
        let short_vals = long.values()[..=1024].to_vec();
        let short = SamplePath::new(TimeGrid::new(0.0, 1.0, 1024).unwrap(), short_vals).unwrap();
        let (a, b) = (tick_observe(&short, &tick).unwrap(), tick_observe(&long, &tick).unwrap());
        assert!(b.events().len() >= a.events().len() && !a.is_empty());
        for w in b.events().windows(2) {
            assert!(w[1].time > w[0].time);
            assert!(!(w[1].level == w[0].level && w[1].direction == w[0].direction));
        }
    }

    #[test]
    fn finer_ticks_see_a_level_no_later() {
        let p = sample_brownian(TimeGrid::new(0.0, 2.0, 2048).unwrap(), RngSpec::new(4, 0)).unwrap();
        let level = 0.3;
        let mut prev = f64::INFINITY;
        for k in 0..6 {
            let tick = TickGrid::new(0.4 / 2f64.powi(k), 0.0).unwrap();
            let rec = tick_observe(&p, &tick).unwrap();
            let t = rec
                .events()
                .iter()
                .find(|e| e.direction == Direction::Up && e.level >= level - 1e-12)
                .map_or(f64::INFINITY, |e| e.time);
            assert!(t <= prev + 1e-12, "tick {}: {t} after {prev}", tick.tick);
            prev = t;
        }
    }

    #[test]
    fn streaming_tick_observer_matches_the_path_version() {
        let grid = TimeGrid::new(0.0, 1.0, 512).unwrap();
        let p = sample_brownian(grid, RngSpec::new(5, 0)).unwrap().map(|b| 1.0 + b).unwrap();
        let tick = TickGrid::new(0.05, 0.0).unwrap();
        let rec = tick_observe(&p, &tick).unwrap();
        let mut obs = TickObserver::new(tick, 1.0).unwrap();
        let mut ev = Vec::new();
        let v = p.values();
        for k in 1..v.len() {
            obs.observe(k, grid.time(k - 1), grid.dt(), (0.0, 0.0), (v[k - 1], v[k]), &mut ev);
        }
        assert_eq!(ev.len(), rec.events().len());
        for (a, b) in ev.iter().zip(rec.events()) {
            assert_eq!((a.step, a.direction), (b.step, b.direction));
            assert!((a.level - b.level).abs() < 1e-12);
        }
    }

    #[test]
    fn late_first_renewal_reveals_nothing() {
        let grid = TimeGrid::new(0.0, 1.0, 256).unwrap();
        let b = sample_brownian(grid, RngSpec::new(6, 0)).unwrap();
        let renewal = RenewalSpec::Table { knots: vec![(0.0, 5.0), (1.0, 6.0)] };
        let m = mask_transactions(&b, Weight::default(), &renewal, RngSpec::new(6, 0)).unwrap();
        assert!(m.taus.is_empty());
        assert!(m.y.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn full_window_reveals_the_driver() {
        let grid = TimeGrid::new(0.0, 1.0, 256).unwrap();
        let b = sample_brownian(grid, RngSpec::new(7, 0)).unwrap();
        let m = mask_with_times(&b, Weight::default(), vec![1e-9]);
        // J switches on after the first step
        for k in 1..=256 {
            assert!((m.y[k] - (b.values()[k] - b.values()[1])).abs() < 1e-12);
        }
        let m = mask_with_times(&b, Weight::default(), vec![0.0]);
        assert!(m.j.iter().all(|&j| j));
        for k in 0..=256 {
            assert!((m.y[k] - b.values()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn y_is_frozen_during_blackouts() {
        let grid = TimeGrid::new(0.0, 2.0, 2048).unwrap();
        let b = sample_brownian(grid, RngSpec::new(8, 0)).unwrap();
        let m = mask_transactions(&b, Weight::Affine { a: 1.0, b: 0.5 }, &RenewalSpec::Exponential { rate: 2.0 }, RngSpec::new(8, 0)).unwrap();
        assert!(m.j.iter().any(|&j| j) && m.j.iter().any(|&j| !j));
        for k in 1..m.y.len() {
            if !m.j[k - 1] {
                assert_eq!(m.y[k].to_bits(), m.y[k - 1].to_bits());
            }
            let n = m.taus.partition_point(|&t| t <= grid.time(k - 1));
            assert_eq!(m.j[k - 1], n % 2 == 1);
        }
    }

    #[test]
    fn pooled_quadratic_variation_matches_the_clock() {
        let grid = TimeGrid::with_step(2.0, 2f64.powi(-12)).unwrap();
        let obs: Vec<MaskedObservation> = (0..200)
            .map(|s| {
                let b = sample_brownian(grid, RngSpec::new(9, s)).unwrap();
                mask_transactions(&b, Weight::default(), &RenewalSpec::Exponential { rate: 2.0 }, RngSpec::new(9, s)).unwrap()
            })
            .collect();
        let r = qv_check(&obs).unwrap();
        assert!(r.relative_error < 0.02, "{r:?}");
    }

    #[test]
    fn renewal_validation() {
        assert!(RenewalSpec::Exponential { rate: 0.0 }.validate().is_err());
        assert!(RenewalSpec::Table { knots: vec![(0.0, 1.0), (1.0, 1.0)] }.validate().is_err());
        assert!(RenewalSpec::Table { knots: vec![(0.1, 1.0), (1.0, 2.0)] }.validate().is_err());
        assert!(RenewalSpec::Table { knots: vec![(0.0, 0.0), (1.0, 2.0)] }.validate().is_ok());
    }

    #[test]
    fn table_renewals_follow_the_inverse_cdf() {
        let r = RenewalSpec::Table { knots: vec![(0.0, 0.0), (0.5, 1.0), (1.0, 3.0)] };
        let mut rng = RngSpec::new(10, 0).rng();
        let xs: Vec<f64> = (0..20_000).map(|_| r.sample(&mut rng)).collect();
        let below = xs.iter().filter(|&&x| x <= 1.0).count() as f64 / xs.len() as f64;
        assert!((below - 0.5).abs() < 0.02);
        let m = MeanEstimate::from_slice(&xs);
        // mean of the mixture U(0,1)/2 + U(1,3)/2 = 0.25 + 1.0
        assert!((m.mean - 1.25).abs() < 4.0 * m.se);
    }

    #[test]
    fn no_renewals_give_the_unconditional_mean() {
        let model = CoupledModel::inverse_bessel(1.0).unwrap();
        let market = MarketSpec { renewal: RenewalSpec::Table { knots: vec![(0.0, 5.0), (1.0, 6.0)] }, weight: Weight::default(), y_bin: 0.5 };
        let spec = ProjectionSpec::new(TimeGrid::new(0.0, 1.0, 64).unwrap(), 2000, vec![1.0], RngSpec::new(11, 0));
        let fp = family_project(&model, &market, &spec).unwrap();
        let m0 = fp.output.paths[0].m_eval[0];
        assert!(fp.output.paths.iter().all(|p| p.m_eval[0] == m0 && p.events.is_empty()));
        assert!((fp.output.summary.mean_x[0].mean - m0).abs() < 1e-12);
        assert_eq!(fp.jumps.total_mass, 0.0);
    }

    #[test]
    fn label_round_trip() {
        for i in [0usize, 1, 7, 100] {
            for bin in [-3000i64, -5, 0, 4, 3000] {
                assert_eq!(renewal_index(renewal_label(i, bin)), i);
            }
        }
    }

    proptest! {
        #[test]
        fn tick_indices_bracket(x in -100.0f64..100.0, tick in 0.001f64..3.0, anchor in -1.0f64..1.0) {
            let g = TickGrid::new(tick, anchor).unwrap();
            let (u, d) = (g.index_above(x), g.index_below(x));
            prop_assert!(g.level(u) > x && g.level(u - 1) <= x);
            prop_assert!(g.level(d) < x && g.level(d + 1) >= x);
        }
    }
}
