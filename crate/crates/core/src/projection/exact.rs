//! Nested rejection estimator of `E[X_t | key]`.

use super::{ConditioningKey, CoupledModel, ModelState, ObservedEvent, PassageObserver, PathObserver, ProjectionSpec};
use crate::error::{Error, Result};
use crate::filtration::LevelSet;
use crate::rng::{purpose, RngSpec};
use crate::stochastics::TimeGrid;
use rayon::prelude::*;
use serde::Serialize;

/// Full simulation state of one outer path at the step of its last event.
#[derive(Debug, Clone)]
pub struct CapturedState {
    pub stream_id: u64,
    pub step: usize,
    pub state: ModelState,
    pub b: f64,
    pub x: f64,
    pub observer: PassageObserver,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalEstimate {
    pub t: f64,
    pub mean: f64,
    /// Cluster standard error over captured states.
    pub se: f64,
    pub states: usize,
    pub accepted: usize,
    pub acceptance_rate: f64,
}

fn tokens_prefix(events: &[ObservedEvent], key: &ConditioningKey) -> Option<bool> {
    if events.len() > key.tokens.len() {
        return None;
    }
    for (e, tok) in events.iter().zip(&key.tokens) {
        if (e.label, ConditioningKey::bucket(e.step, key.bucket_steps)) != *tok {
            return None;
        }
    }
    Some(events.len() == key.tokens.len())
}

/// Simulate `spec.n_paths` outer paths (same streams as the ensemble
/// estimator) and keep the state of those whose history matches `key`.
pub fn capture_states(
    model: &CoupledModel,
    levels: &LevelSet,
    spec: &ProjectionSpec,
    key: &ConditioningKey,
) -> Result<Vec<CapturedState>> {
    model.validate()?;
    spec.grid.validate()?;
    if key.bucket_steps != spec.bucket_steps {
        return Err(Error::config("bucket_steps", "key and spec bucket widths differ"));
    }
    let grid = spec.grid;
    let dt = grid.dt();
    let on = spec.levels_on;
    let last_step = key.last_bucket_steps().map_or(0, |(_, hi)| hi).min(grid.steps);
    let found: Vec<Result<Option<CapturedState>>> = (0..spec.n_paths as u64)
        .into_par_iter()
        .map(|s| {
            let rs = spec.rng.with_stream(s);
            let mut obs = PassageObserver::new(model, levels, on, spec.bridge.then(|| rs.substream(purpose::BRIDGE)))?;
            let mut rng = rs.rng();
            let mut state = model.initial_state();
            let (mut b, mut x) = (0.0, model.x0());
            let mut events = Vec::new();
            if key.tokens.is_empty() {
                return Ok(Some(CapturedState { stream_id: s, step: 0, state, b, x, observer: obs }));
            }
            for k in 1..=last_step {
                let (xa, ba) = (x, b);
                let (db, xn, _) = model.step(&mut state, &mut rng, dt)?;
                b += db;
                x = xn;
                let before = events.len();
                obs.observe(k, grid.time(k - 1), dt, (ba, b), (xa, x), &mut events);
                if events.len() > before {
                    match tokens_prefix(&events, key) {
                        None => return Ok(None),
                        Some(true) => {
                            return Ok(Some(CapturedState { stream_id: s, step: k, state, b, x, observer: obs }));
                        }
                        Some(false) => {}
                    }
                }
            }
            Ok(None)
        })
        .collect();
    let mut out = Vec::new();
    for r in found {
        if let Some(c) = r? {
            out.push(c);
        }
    }
    Ok(out)
}

/// Continue each captured state `m_inner` times up to `t`, rejecting any
/// continuation with a further event, and average `X_t`.
pub fn conditional_from_states(
    model: &CoupledModel,
    grid: TimeGrid,
    states: &[CapturedState],
    t: f64,
    m_inner: usize,
    rng: RngSpec,
) -> Result<ConditionalEstimate> {
    grid.validate()?;
    if !(t >= grid.t_start && t <= grid.horizon) {
        return Err(Error::Domain(format!("t = {t} outside the grid")));
    }
    if m_inner == 0 {
        return Err(Error::config("m_inner", "must be at least 1"));
    }
    let kt = grid.nearest_index(t);
    let usable: Vec<&CapturedState> = states.iter().filter(|c| c.step <= kt).collect();
    if usable.is_empty() {
        return Err(Error::InsufficientData("no captured state before t".into()));
    }
    if usable.iter().all(|c| c.step == kt) {
        let xs: Vec<f64> = usable.iter().map(|c| c.x).collect();
        let m = crate::stats::MeanEstimate::from_slice(&xs);
        return Ok(ConditionalEstimate {
            t,
            mean: m.mean,
            se: m.se,
            states: xs.len(),
            accepted: xs.len(),
            acceptance_rate: 1.0,
        });
    }
    let dt = grid.dt();
    let inner = rng.substream(purpose::INNER);
    let per_state: Vec<Result<(usize, f64)>> = usable
        .par_iter()
        .map(|c| {
            let (mut acc, mut sum) = (0usize, 0.0);
            let mut events = Vec::new();
            for j in 0..m_inner as u64 {
                let id = c.stream_id.wrapping_mul(m_inner as u64).wrapping_add(j);
                let rs = inner.with_stream(id);
                let mut r = rs.rng();
                let mut obs = c.observer.clone();
                obs.reseed_bridge(rs.substream(purpose::BRIDGE));
                let mut state = c.state;
                let (mut b, mut x) = (c.b, c.x);
                events.clear();
                let mut rejected = false;
                for k in c.step + 1..=kt {
                    let (xa, ba) = (x, b);
                    let (db, xn, _) = model.step(&mut state, &mut r, dt)?;
                    b += db;
                    x = xn;
                    obs.observe(k, grid.time(k - 1), dt, (ba, b), (xa, x), &mut events);
                    if !events.is_empty() {
                        rejected = true;
                        break;
                    }
                }
                if !rejected {
                    acc += 1;
                    sum += x;
                }
            }
            Ok((acc, sum))
        })
        .collect();
    let mut clusters = Vec::with_capacity(per_state.len());
    for r in per_state {
        clusters.push(r?);
    }
    let accepted: usize = clusters.iter().map(|c| c.0).sum();
    let total = clusters.len() * m_inner;
    let rate = accepted as f64 / total as f64;
    if rate < 1e-3 {
        return Err(Error::RejectionInefficient { rate });
    }
    let sum: f64 = clusters.iter().map(|c| c.1).sum();
    let mean = sum / accepted as f64;
    let n = clusters.len() as f64;
    let se = if clusters.len() > 1 {
        let ss: f64 = clusters.iter().map(|&(a, s)| (s - mean * a as f64).powi(2)).sum();
        (n / (n - 1.0) * ss).sqrt() / accepted as f64
    } else {
        f64::NAN
    };
    Ok(ConditionalEstimate { t, mean, se, states: clusters.len(), accepted, acceptance_rate: rate })
}

/// `E[X_t | key]` by capture and rejection; outer paths use `spec.rng`,
/// continuations an independent substream of it.
pub fn project_conditional_exact(
    model: &CoupledModel,
    levels: &LevelSet,
    spec: &ProjectionSpec,
    key: &ConditioningKey,
    t: f64,
    m_inner: usize,
) -> Result<ConditionalEstimate> {
    if !(t < spec.grid.horizon || t == spec.grid.horizon && spec.grid.steps > 0) {
        return Err(Error::Domain(format!("t = {t} beyond the horizon")));
    }
    let states = capture_states(model, levels, spec, key)?;
    conditional_from_states(model, spec.grid, &states, t, m_inner, spec.rng)
}
