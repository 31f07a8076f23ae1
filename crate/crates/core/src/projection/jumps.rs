//! Jump extraction and reducing times.

use super::{CadlagProjection, EngineOutput};
use crate::error::{Error, Result};
use crate::filtration::{Direction, ObservationRecord};
use crate::stochastics::SamplePath;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpRecord {
    pub stream_id: u64,
    pub t_beta: f64,
    pub step: usize,
    pub alpha: f64,
    pub beta: f64,
    pub delta_m: f64,
    /// `M` right after the previous event; `delta_m` measured from here
    /// instead of from the left limit.
    pub m_at_previous_event: f64,
}

/// Confident jumps of one path with `|ΔM| > threshold`.
pub fn extract_jumps(proj: &CadlagProjection, threshold: f64) -> Vec<JumpRecord> {
    proj.jumps
        .iter()
        .filter(|j| j.confident && j.delta().abs() > threshold)
        .map(|j| JumpRecord {
            stream_id: proj.stream_id,
            t_beta: j.time,
            step: j.step,
            alpha: j.alpha,
            beta: j.beta,
            delta_m: j.delta(),
            m_at_previous_event: j.at_previous_event,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpLocalization {
    pub threshold: f64,
    /// Moves at a step carrying an event of the same path.
    pub at_events: usize,
    /// Moves one step away from such a step.
    pub near_events: usize,
    pub off_events: usize,
    /// `off / (at + near + off)`.
    pub off_fraction: f64,
    /// Mean of `|M_{T-} - M_S|` over confident jumps: zero when `M` does
    /// not move between events.
    pub mean_left_gap: f64,
}

/// Split above-threshold moves of `M` into those at event steps and the rest.
pub fn jump_localization(out: &EngineOutput, threshold: f64) -> Result<JumpLocalization> {
    if threshold < out.record_floor {
        return Err(Error::Domain(format!(
            "threshold {threshold} below the recorded floor {}",
            out.record_floor
        )));
    }
    if out.off_event_moves.len() < out.off_event_count {
        return Err(Error::InsufficientData("off-event move store was truncated".into()));
    }
    let mut at = 0usize;
    let (mut gap, mut n_conf) = (0.0, 0usize);
    for p in &out.paths {
        for j in p.jumps.iter().filter(|j| j.confident) {
            n_conf += 1;
            gap += (j.left - j.at_previous_event).abs();
            if j.delta().abs() > threshold {
                at += 1;
            }
        }
    }
    let (mut near, mut off) = (0usize, 0usize);
    for m in out.off_event_moves.iter().filter(|m| m.delta.abs() > threshold) {
        let own = &out.paths[m.stream_id as usize].events;
        if own.iter().any(|e| e.step.abs_diff(m.step) <= 1) {
            near += 1;
        } else {
            off += 1;
        }
    }
    let total = at + near + off;
    Ok(JumpLocalization {
        threshold,
        at_events: at,
        near_events: near,
        off_events: off,
        off_fraction: if total == 0 { 0.0 } else { off as f64 / total as f64 },
        mean_left_gap: if n_conf == 0 { 0.0 } else { gap / n_conf as f64 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReducingTime {
    pub alpha: f64,
    pub time: f64,
    pub censored: bool,
}

/// `T_n = min(up-passage of α_n, down-passage of -α_n)`, censored at the
/// record horizon when neither is recorded.
pub fn reducing_times(record: &ObservationRecord, alphas: &[f64]) -> Result<Vec<ReducingTime>> {
    if alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) || alphas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidLevels("alphas must be positive and strictly increasing".into()));
    }
    let mut out = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let up = record.passage_time(a, Direction::Up);
        let down = record.passage_time(-a, Direction::Down);
        let rt = match (up, down) {
            (None, None) => ReducingTime { alpha: a, time: record.horizon(), censored: true },
            (u, d) => ReducingTime {
                alpha: a,
                time: u.unwrap_or(f64::INFINITY).min(d.unwrap_or(f64::INFINITY)),
                censored: false,
            },
        };
        if let Some(prev) = out.last().map(|r: &ReducingTime| r.time) {
            if rt.time < prev {
                return Err(Error::Integrity(format!("T_n decreases at alpha = {a}: record lacks an inner level")));
            }
        }
        out.push(rt);
    }
    Ok(out)
}

/// Supremum of `path` over grid times `<= T` and its value at the last
/// such time.
pub fn stopped(path: &SamplePath, rt: &ReducingTime) -> (f64, f64) {
    let g = path.grid();
    let kc = g.ceil_index(rt.time).min(g.steps);
    let kf = if g.time(kc) <= rt.time { kc } else { kc - 1 };
    let v = path.values();
    (v[..=kf].iter().copied().fold(f64::NEG_INFINITY, f64::max), v[kf])
}
