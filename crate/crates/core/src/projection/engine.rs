//! Step-synchronous ensemble engine.
//!
//! All paths advance one grid step in parallel; the conditioning keys and
//! group sums are then updated sequentially in stream order, so every
//! output is independent of the worker count.

use super::{CoupledModel, ModelState, ObservedEvent};
use crate::error::{Error, Result};
use crate::rng::{RngSpec, StreamRng};
use crate::stats::{MeanEstimate, Running};
use crate::stochastics::TimeGrid;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

/// Per-path event source driving the conditioning keys.
pub trait PathObserver: Send {
    /// Inspect step `k` over `[t0, t0 + dt]` with driver values `b` and
    /// process values `x` at both ends; push any events.
    fn observe(&mut self, k: usize, t0: f64, dt: f64, b: (f64, f64), x: (f64, f64), out: &mut Vec<ObservedEvent>);
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineSpec {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub eval_times: Vec<f64>,
    pub bucket_steps: usize,
    pub min_occupancy: usize,
    /// Off-event moves of `M` smaller than this are not stored.
    pub record_floor: f64,
    /// Keep full `M` and `X` traces for the first streams.
    pub trace_paths: usize,
    /// Freeze keys at this time and follow the frozen groups.
    pub frozen_at: Option<f64>,
    pub rng: RngSpec,
}

impl EngineSpec {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.n_paths == 0 {
            return Err(Error::config("n_paths", "must be at least 1"));
        }
        if self.bucket_steps == 0 {
            return Err(Error::config("bucket_steps", "must be at least 1"));
        }
        if self.min_occupancy == 0 {
            return Err(Error::config("min_occupancy", "must be at least 1"));
        }
        if !(self.record_floor >= 0.0) {
            return Err(Error::config("noise_threshold", "must be >= 0"));
        }
        for &t in &self.eval_times {
            if !(t >= self.grid.t_start && t <= self.grid.horizon) {
                return Err(Error::config(
                    "eval_times",
                    format!("{t} outside [{}, {}]", self.grid.t_start, self.grid.horizon),
                ));
            }
        }
        if self.eval_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("eval_times", "must be strictly increasing"));
        }
        if let Some(s) = self.frozen_at {
            if !(s >= self.grid.t_start && s <= self.grid.horizon) {
                return Err(Error::config("frozen_at", format!("{s} outside the grid")));
            }
        }
        Ok(())
    }
}

/// Jump of `M` on one path at a step carrying events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpMark {
    pub step: usize,
    /// Time of the last event in the step.
    pub time: f64,
    pub alpha: f64,
    pub beta: f64,
    pub label: u32,
    /// `M` at the previous grid time (left limit).
    pub left: f64,
    /// `M` right after the event.
    pub right: f64,
    /// `M` at the previous event (or at the start).
    pub at_previous_event: f64,
    /// Both groups met the occupancy minimum.
    pub confident: bool,
}

impl JumpMark {
    pub fn delta(&self) -> f64 {
        self.right - self.left
    }

    pub fn delta_from_previous_event(&self) -> f64 {
        self.right - self.at_previous_event
    }
}

/// Change of `M` on a path between steps without events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OffEventMove {
    pub stream_id: u64,
    pub step: usize,
    pub delta: f64,
}

/// One path's view of the projection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CadlagProjection {
    pub stream_id: u64,
    pub x_eval: Vec<f64>,
    /// In-sample group mean at each evaluation time.
    pub m_eval: Vec<f64>,
    pub confident: Vec<bool>,
    /// Group mean over the other half of the ensemble (held out).
    pub m_held_out: Vec<Option<f64>>,
    pub events: Vec<ObservedEvent>,
    pub jumps: Vec<JumpMark>,
    pub floored: bool,
}

/// `E[X_t | key at s]` for one group frozen at `s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrozenCurve {
    pub size: usize,
    pub times: Vec<f64>,
    pub means: Vec<MeanEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionSummary {
    pub eval_times: Vec<f64>,
    pub mean_x: Vec<MeanEstimate>,
    /// `M` over paths whose group meets the occupancy minimum.
    pub mean_m: Vec<MeanEstimate>,
    /// `X` over the same paths.
    pub mean_x_confident: Vec<MeanEstimate>,
    pub confident_fraction: Vec<f64>,
    pub groups: Vec<usize>,
    pub floored_paths: usize,
}

/// Ensemble means at one grid time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub time: f64,
    pub x: MeanEstimate,
    /// `M` over paths whose group meets the occupancy minimum.
    pub m: MeanEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineOutput {
    pub grid: TimeGrid,
    pub x0: f64,
    pub eval_steps: Vec<usize>,
    pub paths: Vec<CadlagProjection>,
    pub off_event_moves: Vec<OffEventMove>,
    /// Number of confident off-event moves above the record floor.
    pub off_event_count: usize,
    pub record_floor: f64,
    pub traces: Vec<(u64, Vec<f64>, Vec<f64>)>,
    pub frozen: Vec<FrozenCurve>,
    pub curve: Vec<CurvePoint>,
    pub summary: ProjectionSummary,
    pub bucket_steps: usize,
    pub min_occupancy: usize,
}

struct PathSim<O> {
    stream: u64,
    rng: StreamRng,
    state: ModelState,
    b: f64,
    x: f64,
    floored: bool,
    observer: O,
    events: Vec<ObservedEvent>,
    new_events: usize,
    group: u32,
    m_prev: f64,
    conf_prev: bool,
    m_last_event: f64,
    x_eval: Vec<f64>,
    m_eval: Vec<f64>,
    conf_eval: Vec<bool>,
    held_out: Vec<Option<f64>>,
    jumps: Vec<JumpMark>,
    frozen_group: u32,
    error: Option<Error>,
}

const NO_GROUP: u32 = u32::MAX;

pub fn run_engine<O, F>(model: &CoupledModel, spec: &EngineSpec, make_observer: F) -> Result<EngineOutput>
where
    O: PathObserver,
    F: Fn(u64) -> Result<O> + Sync,
{
    spec.validate()?;
    model.validate()?;
    let grid = spec.grid;
    let dt = grid.dt();
    let x0 = model.x0();
    let eval_steps: Vec<usize> = spec.eval_times.iter().map(|&t| grid.nearest_index(t)).collect();
    let frozen_step = spec.frozen_at.map(|s| grid.nearest_index(s));

    let mut paths: Vec<PathSim<O>> = (0..spec.n_paths as u64)
        .map(|s| {
            Ok(PathSim {
                stream: s,
                rng: spec.rng.with_stream(s).rng(),
                state: model.initial_state(),
                b: 0.0,
                x: x0,
                floored: false,
                observer: make_observer(s)?,
                events: Vec::new(),
                new_events: 0,
                group: 0,
                m_prev: x0,
                conf_prev: spec.n_paths >= spec.min_occupancy,
                m_last_event: x0,
                x_eval: Vec::with_capacity(eval_steps.len()),
                m_eval: Vec::with_capacity(eval_steps.len()),
                conf_eval: Vec::with_capacity(eval_steps.len()),
                held_out: Vec::with_capacity(eval_steps.len()),
                jumps: Vec::new(),
                frozen_group: NO_GROUP,
                error: None,
            })
        })
        .collect::<Result<_>>()?;

    let mut intern: HashMap<(u32, u32, u32), u32> = HashMap::new();
    let mut n_groups: usize = 1;
    let mut sums: Vec<f64> = vec![0.0; 1];
    let mut counts: Vec<u32> = vec![0; 1];
    let mut off_moves = Vec::new();
    let mut off_count = 0usize;
    let n_trace = spec.trace_paths.min(spec.n_paths);
    let mut traces: Vec<(u64, Vec<f64>, Vec<f64>)> =
        (0..n_trace as u64).map(|s| (s, Vec::with_capacity(grid.steps + 1), Vec::with_capacity(grid.steps + 1))).collect();
    // frozen groups: key id at the freeze step -> running stats per eval time
    let mut frozen_ids: HashMap<u32, usize> = HashMap::new();
    let mut frozen_stats: Vec<(usize, Vec<f64>, Vec<Running>)> = Vec::new();

    let mut summary = ProjectionSummary {
        eval_times: eval_steps.iter().map(|&k| grid.time(k)).collect(),
        mean_x: Vec::new(),
        mean_m: Vec::new(),
        mean_x_confident: Vec::new(),
        confident_fraction: Vec::new(),
        groups: Vec::new(),
        floored_paths: 0,
    };

    let mut handle_eval = |k: usize, paths: &mut [PathSim<O>], sums: &[f64], counts: &[u32], n_groups: usize| {
        // held-out sums by fold (stream parity)
        let mut fold_sum = vec![[0.0f64; 2]; n_groups];
        let mut fold_cnt = vec![[0u32; 2]; n_groups];
        for p in paths.iter() {
            if !p.floored {
                let f = (p.stream & 1) as usize;
                fold_sum[p.group as usize][f] += p.x;
                fold_cnt[p.group as usize][f] += 1;
            }
        }
        let (mut rx, mut rm, mut rxc) = (Running::default(), Running::default(), Running::default());
        let mut n_conf = 0usize;
        for p in paths.iter_mut() {
            let g = p.group as usize;
            let conf = !p.floored && counts[g] as usize >= spec.min_occupancy;
            let m = if counts[g] > 0 { sums[g] / counts[g] as f64 } else { f64::NAN };
            p.x_eval.push(p.x);
            p.m_eval.push(m);
            p.conf_eval.push(conf);
            let other = 1 - (p.stream & 1) as usize;
            let ho = (!p.floored && fold_cnt[g][other] as usize >= spec.min_occupancy)
                .then(|| fold_sum[g][other] / fold_cnt[g][other] as f64);
            p.held_out.push(ho);
            if !p.floored {
                rx.push(p.x);
            }
            if conf {
                n_conf += 1;
                rm.push(m);
                rxc.push(p.x);
            }
        }
        let _ = k;
        summary.mean_x.push(rx.estimate());
        summary.mean_m.push(rm.estimate());
        summary.mean_x_confident.push(rxc.estimate());
        summary.confident_fraction.push(n_conf as f64 / paths.len() as f64);
        summary.groups.push(counts.iter().filter(|&&c| c > 0).count());
    };

    let mut curve = Vec::with_capacity(grid.steps + 1);
    let point = |k: usize, paths: &[PathSim<O>]| {
        let (mut rx, mut rm) = (Running::default(), Running::default());
        for p in paths.iter().filter(|p| !p.floored) {
            rx.push(p.x);
            if p.conf_prev {
                rm.push(p.m_prev);
            }
        }
        CurvePoint { time: grid.time(k), x: rx.estimate(), m: rm.estimate() }
    };
    curve.push(point(0, &paths));

    // step 0
    counts[0] = spec.n_paths as u32;
    sums[0] = x0 * spec.n_paths as f64;
    for (i, tr) in traces.iter_mut().enumerate() {
        tr.1.push(x0);
        tr.2.push(paths[i].x);
    }
    for _ in eval_steps.iter().filter(|&&e| e == 0) {
        handle_eval(0, &mut paths, &sums, &counts, n_groups);
    }
    if frozen_step == Some(0) {
        for p in paths.iter_mut() {
            p.frozen_group = 0;
        }
        frozen_ids.insert(0, 0);
        frozen_stats.push((spec.n_paths, Vec::new(), Vec::new()));
    }

    for k in 1..=grid.steps {
        let t0 = grid.time(k - 1);
        paths.par_iter_mut().for_each(|p| {
            if p.error.is_some() {
                return;
            }
            let (xa, ba) = (p.x, p.b);
            match model.step(&mut p.state, &mut p.rng, dt) {
                Ok((db, x, hit)) => {
                    p.b += db;
                    p.x = x;
                    p.floored |= hit;
                }
                Err(e) => {
                    p.error = Some(e);
                    return;
                }
            }
            let before = p.events.len();
            p.observer.observe(k, t0, dt, (ba, p.b), (xa, p.x), &mut p.events);
            p.new_events = p.events.len() - before;
        });
        if let Some(e) = paths.iter().find_map(|p| p.error.clone()) {
            return Err(e);
        }

        // intern new keys in stream order
        for p in paths.iter_mut() {
            for i in p.events.len() - p.new_events..p.events.len() {
                let e = p.events[i];
                let bucket = super::ConditioningKey::bucket(e.step, spec.bucket_steps);
                let id = *intern.entry((p.group, e.label, bucket)).or_insert_with(|| {
                    n_groups += 1;
                    (n_groups - 1) as u32
                });
                p.group = id;
            }
        }
        if sums.len() < n_groups {
            sums.resize(n_groups, 0.0);
            counts.resize(n_groups, 0);
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        for p in paths.iter() {
            if !p.floored {
                sums[p.group as usize] += p.x;
                counts[p.group as usize] += 1;
            }
        }

        for p in paths.iter_mut() {
            let g = p.group as usize;
            let m = if counts[g] > 0 { sums[g] / counts[g] as f64 } else { f64::NAN };
            let conf = !p.floored && counts[g] as usize >= spec.min_occupancy;
            if p.new_events > 0 {
                let last = p.events[p.events.len() - 1];
                p.jumps.push(JumpMark {
                    step: k,
                    time: last.time,
                    alpha: p.events[p.events.len() - p.new_events].alpha,
                    beta: last.beta,
                    label: last.label,
                    left: p.m_prev,
                    right: m,
                    at_previous_event: p.m_last_event,
                    confident: conf && p.conf_prev,
                });
                p.m_last_event = m;
            } else if conf && p.conf_prev {
                let d = m - p.m_prev;
                if d.abs() > spec.record_floor {
                    off_count += 1;
                    if off_moves.len() < 1_000_000 {
                        off_moves.push(OffEventMove { stream_id: p.stream, step: k, delta: d });
                    }
                }
            }
            p.m_prev = m;
            p.conf_prev = conf;
        }
        curve.push(point(k, &paths));
        for (i, tr) in traces.iter_mut().enumerate() {
            tr.1.push(paths[i].m_prev);
            tr.2.push(paths[i].x);
        }

        if frozen_step == Some(k) {
            for p in paths.iter_mut() {
                if !p.floored && counts[p.group as usize] as usize >= spec.min_occupancy {
                    let next = frozen_ids.len();
                    let slot = *frozen_ids.entry(p.group).or_insert(next);
                    if slot == frozen_stats.len() {
                        frozen_stats.push((counts[p.group as usize] as usize, Vec::new(), Vec::new()));
                    }
                    p.frozen_group = slot as u32;
                }
            }
        }
        if let Some(fs) = frozen_step {
            if k >= fs && eval_steps.contains(&k) {
                for st in frozen_stats.iter_mut() {
                    st.1.push(grid.time(k));
                    st.2.push(Running::default());
                }
                for p in paths.iter() {
                    if p.frozen_group != NO_GROUP && !p.floored {
                        frozen_stats[p.frozen_group as usize].2.last_mut().unwrap().push(p.x);
                    }
                }
            }
        }
        for _ in eval_steps.iter().filter(|&&e| e == k) {
            handle_eval(k, &mut paths, &sums, &counts, n_groups);
        }
    }

    summary.floored_paths = paths.iter().filter(|p| p.floored).count();
    let frozen = frozen_stats
        .into_iter()
        .map(|(size, times, runs)| FrozenCurve { size, times, means: runs.iter().map(|r| r.estimate()).collect() })
        .collect();
    let out_paths = paths
        .into_iter()
        .map(|p| CadlagProjection {
            stream_id: p.stream,
            x_eval: p.x_eval,
            m_eval: p.m_eval,
            confident: p.conf_eval,
            m_held_out: p.held_out,
            events: p.events,
            jumps: p.jumps,
            floored: p.floored,
        })
        .collect();
    Ok(EngineOutput {
        grid,
        x0,
        eval_steps,
        paths: out_paths,
        off_event_moves: off_moves,
        off_event_count: off_count,
        record_floor: spec.record_floor,
        traces,
        frozen,
        curve,
        summary,
        bucket_steps: spec.bucket_steps,
        min_occupancy: spec.min_occupancy,
    })
}

impl EngineOutput {
    /// Held-out tower check at evaluation index `i`: mean of the held-out
    /// `M` against the mean of `X` over the paths where it is defined.
    pub fn held_out_tower(&self, i: usize) -> (MeanEstimate, MeanEstimate) {
        let (mut m, mut x) = (Vec::new(), Vec::new());
        for p in &self.paths {
            if let Some(v) = p.m_held_out[i] {
                m.push(v);
                x.push(p.x_eval[i]);
            }
        }
        (MeanEstimate::from_slice(&m), MeanEstimate::from_slice(&x))
    }

    /// Sample variance of `X_t - M_t` (held out) at evaluation index `i`.
    pub fn residual_variance(&self, i: usize) -> MeanEstimate {
        let r: Vec<f64> = self
            .paths
            .iter()
            .filter_map(|p| p.m_held_out[i].map(|m| (p.x_eval[i] - m) * (p.x_eval[i] - m)))
            .collect();
        MeanEstimate::from_slice(&r)
    }
}

impl EngineOutput {
    /// Mean of `X` at evaluation index `i` over paths whose history up to
    /// that time has key `key`.
    pub fn group_mean(&self, key: &super::ConditioningKey, i: usize) -> MeanEstimate {
        let k = self.eval_steps[i];
        let xs: Vec<f64> = self
            .paths
            .iter()
            .filter(|p| !p.floored && super::ConditioningKey::from_events(&p.events, k, key.bucket_steps) == *key)
            .map(|p| p.x_eval[i])
            .collect();
        MeanEstimate::from_slice(&xs)
    }
}
