//! Level sets, first-passage detection and the structure of the filtration
//! generated by passage times.

use crate::error::{Error, Result};
use crate::rng::{RngSpec, StreamRng};
use crate::stochastics::SamplePath;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A finite level set. Upper levels are strictly increasing and positive;
/// optional lower levels are strictly decreasing and negative (down-passages).
///
/// `limit_from_below[i]` declares that `levels[i]` is the limit of an
/// increasing sequence of levels that the finite representation truncates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSet {
    levels: Vec<f64>,
    limit_from_below: Vec<bool>,
    lower: Vec<f64>,
}

impl LevelSet {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        let n = levels.len();
        Self::with_accumulation(levels, vec![false; n])
    }

    pub fn empty() -> Self {
        Self { levels: Vec::new(), limit_from_below: Vec::new(), lower: Vec::new() }
    }

    pub fn with_accumulation(levels: Vec<f64>, limit_from_below: Vec<bool>) -> Result<Self> {
        if levels.len() != limit_from_below.len() {
            return Err(Error::InvalidLevels(format!(
                "{} levels but {} accumulation flags",
                levels.len(),
                limit_from_below.len()
            )));
        }
        for (i, &l) in levels.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidLevels(format!("level {l} at index {i} must be positive and finite")));
            }
            if i > 0 && !(l > levels[i - 1]) {
                return Err(Error::InvalidLevels(format!(
                    "levels must be strictly increasing: {} then {l} at index {i}",
                    levels[i - 1]
                )));
            }
        }
        Ok(Self { levels, limit_from_below, lower: Vec::new() })
    }

    /// Add mirrored lower levels (strictly decreasing, negative).
    pub fn with_lower(mut self, lower: Vec<f64>) -> Result<Self> {
        for (i, &l) in lower.iter().enumerate() {
            if !(l < 0.0 && l.is_finite()) {
                return Err(Error::InvalidLevels(format!("lower level {l} at index {i} must be negative and finite")));
            }
            if i > 0 && !(l < lower[i - 1]) {
                return Err(Error::InvalidLevels(format!(
                    "lower levels must be strictly decreasing: {} then {l} at index {i}",
                    lower[i - 1]
                )));
            }
        }
        self.lower = lower;
        Ok(self)
    }

    /// Upper levels `a` and lower levels `-a`.
    pub fn symmetric(levels: Vec<f64>) -> Result<Self> {
        let lower = levels.iter().map(|l| -l).collect();
        Self::new(levels)?.with_lower(lower)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn limit_from_below(&self) -> &[bool] {
        &self.limit_from_below
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty() && self.lower.is_empty()
    }

    pub fn two_sided(&self) -> bool {
        !self.lower.is_empty()
    }

    pub fn index_of(&self, level: f64) -> Option<usize> {
        self.levels.iter().position(|&l| l == level)
    }

    /// Shift every level by `by` (levels relative to a start value).
    pub fn shifted(&self, by: f64) -> Result<Self> {
        let up = Self::with_accumulation(self.levels.iter().map(|l| l + by).collect(), self.limit_from_below.clone());
        let up = up.map_err(|e| Error::InvalidLevels(format!("shift by {by}: {e}")))?;
        Ok(Self { lower: self.lower.iter().map(|l| l + by).collect(), ..up })
    }

    pub(crate) fn unchecked(levels: Vec<f64>, lower: Vec<f64>) -> Self {
        let n = levels.len();
        Self { levels, limit_from_below: vec![false; n], lower }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassageEvent {
    pub level: f64,
    pub time: f64,
    pub direction: Direction,
    /// Grid step `k` such that the crossing happened in `(t_{k-1}, t_k]`.
    pub step: usize,
}

/// Time-ordered passage events on `[start, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    events: Vec<PassageEvent>,
    start: f64,
    horizon: f64,
}

impl ObservationRecord {
    pub fn new(events: Vec<PassageEvent>, start: f64, horizon: f64) -> Result<Self> {
        for (i, e) in events.iter().enumerate() {
            if !(e.time >= start && e.time <= horizon) {
                return Err(Error::Integrity(format!("event time {} outside [{start}, {horizon}]", e.time)));
            }
            if i > 0 && !(e.time > events[i - 1].time) {
                return Err(Error::Integrity(format!(
                    "event times must strictly increase: {} then {}",
                    events[i - 1].time, e.time
                )));
            }
        }
        Ok(Self { events, start, horizon })
    }

    pub fn empty(start: f64, horizon: f64) -> Self {
        Self { events: Vec::new(), start, horizon }
    }

    pub fn events(&self) -> &[PassageEvent] {
        &self.events
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// First up-passage time of `level`, if recorded.
    pub fn passage_time(&self, level: f64, direction: Direction) -> Option<f64> {
        self.events.iter().find(|e| e.level == level && e.direction == direction).map(|e| e.time)
    }

    /// Events with time `<= t`.
    pub fn prefix(&self, t: f64) -> &[PassageEvent] {
        let n = self.events.partition_point(|e| e.time <= t);
        &self.events[..n]
    }
}

/// Streaming first-passage detector for one path.
///
/// With bridge correction, a level `a` not reached at either end of a step
/// is declared crossed with the Brownian-bridge probability
/// `exp(-2(a - x_k)(a - x_{k+1}) / (v Δt))`, `v` the local variance
/// (1 for a standard Brownian path).
#[derive(Debug, Clone)]
pub struct PassageDetector {
    up: Vec<f64>,
    down: Vec<f64>,
    next_up: usize,
    next_down: usize,
    bridge: Option<StreamRng>,
    variance: f64,
}

impl PassageDetector {
    pub fn new(levels: &LevelSet, x0: f64, bridge: Option<RngSpec>) -> Result<Self> {
        if let Some(&l) = levels.levels.first() {
            if !(l > x0) {
                return Err(Error::InvalidLevels(format!("upper level {l} is not above the start value {x0}")));
            }
        }
        if let Some(&l) = levels.lower.first() {
            if !(l < x0) {
                return Err(Error::InvalidLevels(format!("lower level {l} is not below the start value {x0}")));
            }
        }
        Ok(Self {
            up: levels.levels.clone(),
            down: levels.lower.clone(),
            next_up: 0,
            next_down: 0,
            bridge: bridge.map(|s| s.rng()),
            variance: 1.0,
        })
    }

    /// Local variance per unit time used by the bridge correction.
    pub fn with_variance(mut self, v: f64) -> Self {
        self.variance = v;
        self
    }

    /// Replace the bridge stream, if bridge correction is on.
    pub fn reseed_bridge(&mut self, bridge: RngSpec) {
        if self.bridge.is_some() {
            self.bridge = Some(bridge.rng());
        }
    }

    pub fn done(&self) -> bool {
        self.next_up == self.up.len() && self.next_down == self.down.len()
    }

    /// Index of the next unreached upper level (= number reached so far).
    pub fn reached_up(&self) -> usize {
        self.next_up
    }

    pub fn reached_down(&self) -> usize {
        self.next_down
    }

    /// Process step `k-1 → k` over `[t0, t0 + dt]`, appending events to `out`.
    /// Returns the number of events appended.
    pub fn step(&mut self, k: usize, t0: f64, dt: f64, x0: f64, x1: f64, out: &mut Vec<PassageEvent>) -> usize {
        let mut ups: Vec<f64> = Vec::new();
        let mut downs: Vec<f64> = Vec::new();
        while self.next_up < self.up.len() && x1 >= self.up[self.next_up] {
            ups.push(self.up[self.next_up]);
            self.next_up += 1;
        }
        while self.next_down < self.down.len() && x1 <= self.down[self.next_down] {
            downs.push(self.down[self.next_down]);
            self.next_down += 1;
        }
        if let Some(rng) = self.bridge.as_mut() {
            // one uniform per side and step: the bridge maximum exceeds `a`
            // with probability p_a, so {a crossed} = {u < p_a} is exact and
            // does not depend on which other levels are present
            let (u_up, u_down): (f64, f64) = (rng.random(), rng.random());
            let scale = 2.0 / (self.variance * dt);
            while self.next_up < self.up.len() {
                let a = self.up[self.next_up];
                if u_up < (-scale * (a - x0) * (a - x1)).exp() {
                    ups.push(a);
                    self.next_up += 1;
                } else {
                    break;
                }
            }
            while self.next_down < self.down.len() {
                let a = self.down[self.next_down];
                if u_down < (-scale * (x0 - a) * (x1 - a)).exp() {
                    downs.push(a);
                    self.next_down += 1;
                } else {
                    break;
                }
            }
        }
        let m = ups.len() + downs.len();
        if m == 0 {
            return 0;
        }
        // the side the path ends on is reached last
        let (first, second) = if x1 >= x0 {
            (downs.iter().map(|&l| (l, Direction::Down)).collect::<Vec<_>>(), ups.iter().map(|&l| (l, Direction::Up)).collect::<Vec<_>>())
        } else {
            (ups.iter().map(|&l| (l, Direction::Up)).collect(), downs.iter().map(|&l| (l, Direction::Down)).collect())
        };
        for (j, (level, direction)) in first.into_iter().chain(second).enumerate() {
            let time = t0 + dt * (j + 1) as f64 / (m + 1) as f64;
            out.push(PassageEvent { level, time, direction, step: k });
        }
        m
    }
}

/// First-passage events of `path` through `levels`.
///
/// A crossing in step `(t_{k-1}, t_k]` is reported at the step midpoint;
/// several crossings in one step are spread evenly inside it.
pub fn detect_passages(path: &SamplePath, levels: &LevelSet, bridge: Option<RngSpec>) -> Result<ObservationRecord> {
    let grid = *path.grid();
    let dt = grid.dt();
    let v = path.values();
    let mut det = PassageDetector::new(levels, v[0], bridge)?;
    let mut events = Vec::new();
    for k in 1..v.len() {
        if det.done() {
            break;
        }
        det.step(k, grid.time(k - 1), dt, v[k - 1], v[k], &mut events);
    }
    ObservationRecord::new(events, grid.t_start, grid.horizon)
}

/// Detection after a strictly increasing transform `h` applied to path and
/// levels (for instance the Doss map of a diffusion, which makes the bridge
/// correction exact to first order). Reported levels are the originals.
pub fn detect_passages_transformed(
    path: &SamplePath,
    levels: &LevelSet,
    h: impl Fn(f64) -> Result<f64>,
    bridge: Option<RngSpec>,
) -> Result<ObservationRecord> {
    let hp = SamplePath::new(*path.grid(), path.values().iter().map(|&x| h(x)).collect::<Result<Vec<_>>>()?)?;
    let up = levels.levels.iter().map(|&x| h(x)).collect::<Result<Vec<_>>>()?;
    let down = levels.lower.iter().map(|&x| h(x)).collect::<Result<Vec<_>>>()?;
    let rec = detect_passages(&hp, &LevelSet::unchecked(up.clone(), down.clone()), bridge)?;
    let back = |e: &PassageEvent| {
        let (src, dst) = match e.direction {
            Direction::Up => (&up, &levels.levels),
            Direction::Down => (&down, &levels.lower),
        };
        let i = src.iter().position(|&l| l == e.level).expect("transformed level");
        PassageEvent { level: dst[i], ..*e }
    };
    ObservationRecord::new(rec.events.iter().map(back).collect(), rec.start, rec.horizon)
}

/// A left-isolated level `beta` and its predecessor `alpha` (0 if none).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsolatedLevel {
    pub beta: f64,
    pub alpha: f64,
}

/// Levels `β` with `sup{α ∈ Λ : α < β} < β`. A level flagged as a limit
/// from below is not isolated.
pub fn left_isolated(levels: &LevelSet) -> Vec<IsolatedLevel> {
    levels
        .levels
        .iter()
        .enumerate()
        .filter(|(i, _)| !levels.limit_from_below[*i])
        .map(|(i, &beta)| IsolatedLevel { beta, alpha: if i == 0 { 0.0 } else { levels.levels[i - 1] } })
        .collect()
}

/// The filtration jumps from `s` (passage of `alpha`, or the record start)
/// to `t_beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpInterval {
    pub s: f64,
    pub t_beta: f64,
    pub alpha: f64,
    pub beta: f64,
}

pub fn filtration_jump_intervals(record: &ObservationRecord, levels: &LevelSet) -> Result<Vec<JumpInterval>> {
    let mut out = Vec::new();
    for iso in left_isolated(levels) {
        let Some(t_beta) = record.passage_time(iso.beta, Direction::Up) else {
            continue;
        };
        let s = if levels.index_of(iso.beta) == Some(0) {
            record.start
        } else {
            match record.passage_time(iso.alpha, Direction::Up) {
                Some(t) if t < t_beta => t,
                Some(t) => {
                    return Err(Error::Integrity(format!(
                        "level {} reached at {t_beta} before its predecessor {} at {t}",
                        iso.beta, iso.alpha
                    )))
                }
                None => {
                    return Err(Error::Integrity(format!(
                        "level {} reached at {t_beta} but predecessor {} never reached",
                        iso.beta, iso.alpha
                    )))
                }
            }
        };
        out.push(JumpInterval { s, t_beta, alpha: iso.alpha, beta: iso.beta });
    }
    out.sort_by(|a, b| a.t_beta.total_cmp(&b.t_beta));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverKind {
    Brownian,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Accessibility {
    TotallyInaccessible,
    Predictable,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InaccessibilityVerdict {
    pub class: Accessibility,
    pub reason: String,
}

/// Classify the passage time of `beta` in the passage-time filtration.
pub fn classify_inaccessible(beta: f64, levels: &LevelSet, driver: DriverKind) -> Result<InaccessibilityVerdict> {
    let i = levels.index_of(beta).ok_or_else(|| Error::Domain(format!("{beta} is not a level of the set")))?;
    if levels.limit_from_below[i] {
        return Ok(InaccessibilityVerdict {
            class: Accessibility::Predictable,
            reason: format!("{beta} is declared a limit of levels increasing to it; their passage times announce it"),
        });
    }
    let alpha = if i == 0 { 0.0 } else { levels.levels[i - 1] };
    match driver {
        DriverKind::Brownian => Ok(InaccessibilityVerdict {
            class: Accessibility::TotallyInaccessible,
            reason: format!("{beta} is left-isolated (predecessor {alpha}) and the Brownian passage law is continuous"),
        }),
        DriverKind::Other => Ok(InaccessibilityVerdict {
            class: Accessibility::Undetermined,
            reason: format!("{beta} is left-isolated but there is no continuity certificate for the driver"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastics::{sample_brownian, TimeGrid};
    use proptest::prelude::*;

    fn ramp(from: f64, to: f64, steps: usize) -> SamplePath {
        let g = TimeGrid::new(0.0, 1.0, steps).unwrap();
        SamplePath::new(g, (0..=steps).map(|k| from + (to - from) * k as f64 / steps as f64).collect()).unwrap()
    }

    #[test]
    fn level_set_validation() {
        assert!(LevelSet::new(vec![2.0, 1.0]).is_err());
        assert!(LevelSet::new(vec![1.0, 1.0]).is_err());
        assert!(LevelSet::new(vec![0.0, 1.0]).is_err());
        assert!(LevelSet::new(vec![1.0]).unwrap().with_lower(vec![-1.0, -0.5]).is_err());
        assert!(LevelSet::with_accumulation(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn ramp_crosses_at_midpoint() {
        let p = ramp(0.0, 2.0, 64);
        let rec = detect_passages(&p, &LevelSet::new(vec![1.0]).unwrap(), None).unwrap();
        assert_eq!(rec.events().len(), 1);
        let e = rec.events()[0];
        assert_eq!(e.direction, Direction::Up);
        assert!((e.time - 0.5).abs() <= 1.0 / 64.0);
    }

    #[test]
    fn constant_path_has_no_events() {
        let g = TimeGrid::new(0.0, 1.0, 16).unwrap();
        let p = SamplePath::constant(g, 0.0).unwrap();
        let rec = detect_passages(&p, &LevelSet::new(vec![1.0]).unwrap(), Some(RngSpec::new(1, 1))).unwrap();
        assert!(rec.is_empty());
    }

    #[test]
    fn levels_must_lie_above_start() {
        let p = ramp(1.5, 2.0, 8);
        assert!(matches!(detect_passages(&p, &LevelSet::new(vec![1.0]).unwrap(), None), Err(Error::InvalidLevels(_))));
    }

    #[test]
    fn several_levels_in_one_step_get_distinct_times() {
        let p = ramp(0.0, 4.0, 1);
        let rec = detect_passages(&p, &LevelSet::new(vec![1.0, 2.0, 3.0]).unwrap(), None).unwrap();
        let t: Vec<f64> = rec.events().iter().map(|e| e.time).collect();
        assert_eq!(t, vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn down_passages_by_mirroring() {
        let p = ramp(0.0, -2.0, 32);
        let ls = LevelSet::symmetric(vec![1.0]).unwrap();
        let rec = detect_passages(&p, &ls, None).unwrap();
        assert_eq!(rec.events().len(), 1);
        assert_eq!((rec.events()[0].level, rec.events()[0].direction), (-1.0, Direction::Down));
    }

    #[test]
    fn left_isolation() {
        let ls = LevelSet::new(vec![1.0, 2.0, 3.0]).unwrap();
        let got: Vec<(f64, f64)> = left_isolated(&ls).iter().map(|i| (i.beta, i.alpha)).collect();
        assert_eq!(got, vec![(1.0, 0.0), (2.0, 1.0), (3.0, 2.0)]);
        let single = LevelSet::new(vec![0.5]).unwrap();
        assert_eq!(left_isolated(&single), vec![IsolatedLevel { beta: 0.5, alpha: 0.0 }]);
    }

    #[test]
    fn accumulation_point_is_not_isolated() {
        // {1 - 1/n : 2 <= n <= 10^4} ∪ {1}; n = 1 would give the non-positive level 0
        let mut lv: Vec<f64> = (2..=10_000).map(|n| 1.0 - 1.0 / n as f64).collect();
        lv.push(1.0);
        let mut flags = vec![false; lv.len()];
        *flags.last_mut().unwrap() = true;
        let ls = LevelSet::with_accumulation(lv, flags).unwrap();
        assert!(left_isolated(&ls).iter().all(|i| i.beta != 1.0));
        let v = classify_inaccessible(1.0, &ls, DriverKind::Brownian).unwrap();
        assert_eq!(v.class, Accessibility::Predictable);
    }

    #[test]
    fn inaccessibility_classes() {
        let ls = LevelSet::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(classify_inaccessible(2.0, &ls, DriverKind::Brownian).unwrap().class, Accessibility::TotallyInaccessible);
        let u = classify_inaccessible(2.0, &ls, DriverKind::Other).unwrap();
        assert_eq!(u.class, Accessibility::Undetermined);
        assert!(u.reason.contains("no continuity certificate"));
        assert!(classify_inaccessible(1.5, &ls, DriverKind::Brownian).is_err());
    }

    #[test]
    fn jump_intervals_from_record() {
        let ls = LevelSet::new(vec![1.0, 2.0]).unwrap();
        let ev = |level, time| PassageEvent { level, time, direction: Direction::Up, step: 0 };
        let rec = ObservationRecord::new(vec![ev(1.0, 0.8), ev(2.0, 3.1)], 0.0, 5.0).unwrap();
        let iv = filtration_jump_intervals(&rec, &ls).unwrap();
        assert_eq!(
            iv,
            vec![
                JumpInterval { s: 0.0, t_beta: 0.8, alpha: 0.0, beta: 1.0 },
                JumpInterval { s: 0.8, t_beta: 3.1, alpha: 1.0, beta: 2.0 },
            ]
        );
        assert!(filtration_jump_intervals(&ObservationRecord::empty(0.0, 1.0), &ls).unwrap().is_empty());
        let bad = ObservationRecord::new(vec![ev(2.0, 0.5)], 0.0, 5.0).unwrap();
        assert!(matches!(filtration_jump_intervals(&bad, &ls), Err(Error::Integrity(_))));
    }

    #[test]
    fn record_rejects_unordered_events() {
        let ev = |time| PassageEvent { level: 1.0, time, direction: Direction::Up, step: 0 };
        assert!(ObservationRecord::new(vec![ev(0.5), ev(0.5)], 0.0, 1.0).is_err());
        assert!(ObservationRecord::new(vec![ev(2.0)], 0.0, 1.0).is_err());
    }

    #[test]
    fn intervals_are_strict_on_brownian_paths() {
        let g = TimeGrid::new(0.0, 10.0, 2560).unwrap();
        let ls = LevelSet::new(vec![1.0, 2.0]).unwrap();
        for i in 0..10_000u64 {
            let b = sample_brownian(g, RngSpec::new(17, i)).unwrap();
            let rec = detect_passages(&b, &ls, Some(RngSpec::new(17, i).substream(crate::rng::purpose::BRIDGE))).unwrap();
            for iv in filtration_jump_intervals(&rec, &ls).unwrap() {
                assert!(iv.s < iv.t_beta && iv.alpha < iv.beta);
            }
        }
    }

    #[test]
    fn uncorrected_detection_is_late() {
        use crate::stats::MeanEstimate;
        let g = TimeGrid::new(0.0, 4.0, 256).unwrap();
        let ls = LevelSet::new(vec![0.5]).unwrap();
        let (mut raw, mut cor) = (Vec::new(), Vec::new());
        for i in 0..20_000u64 {
            let spec = RngSpec::new(23, i);
            let b = sample_brownian(g, spec).unwrap();
            let r0 = detect_passages(&b, &ls, None).unwrap();
            let r1 = detect_passages(&b, &ls, Some(spec.substream(crate::rng::purpose::BRIDGE))).unwrap();
            // censor at the horizon so both samples cover every path
            raw.push(r0.passage_time(0.5, Direction::Up).unwrap_or(4.0));
            cor.push(r1.passage_time(0.5, Direction::Up).unwrap_or(4.0));
        }
        let (a, b) = (MeanEstimate::from_slice(&raw), MeanEstimate::from_slice(&cor));
        // paired: the corrected time never exceeds the raw one
        assert!(raw.iter().zip(&cor).all(|(r, c)| c <= r));
        let diffs: Vec<f64> = raw.iter().zip(&cor).map(|(r, c)| r - c).collect();
        let d = MeanEstimate::from_slice(&diffs);
        assert!(d.mean > 3.0 * d.se, "{a:?} {b:?} {d:?}");
    }

    proptest! {
        #[test]
        fn enlarging_levels_keeps_existing_events(seed in 0u64..200, extra in 0.05f64..3.0, bridge in any::<bool>()) {
            let g = TimeGrid::new(0.0, 2.0, 128).unwrap();
            let b = sample_brownian(g, RngSpec::new(seed, 0)).unwrap();
            let small = LevelSet::new(vec![0.5, 1.0]).unwrap();
            let mut lv = vec![0.5, 1.0, extra];
            lv.sort_by(f64::total_cmp);
            lv.dedup();
            let big = LevelSet::new(lv).unwrap();
            let br = bridge.then(|| RngSpec::new(seed, 9));
            let r1 = detect_passages(&b, &small, br).unwrap();
            let r2 = detect_passages(&b, &big, br).unwrap();
            for e in r1.events() {
                let t2 = r2.passage_time(e.level, e.direction).unwrap();
                // same step; only the spread inside a shared step may move
                let e2 = r2.events().iter().find(|x| x.level == e.level).unwrap();
                prop_assert_eq!(e2.step, e.step);
                prop_assert!((t2 - e.time).abs() < g.dt());
            }
        }

        #[test]
        fn records_are_strictly_ordered(seed in 0u64..200) {
            let g = TimeGrid::new(0.0, 4.0, 256).unwrap();
            let b = sample_brownian(g, RngSpec::new(seed, 1)).unwrap();
            let ls = LevelSet::symmetric(vec![0.25, 0.5, 1.0]).unwrap();
            let r = detect_passages(&b, &ls, Some(RngSpec::new(seed, 2))).unwrap();
            for w in r.events().windows(2) {
                prop_assert!(w[1].time > w[0].time);
            }
        }
    }
}
