//! CSV and SVG outputs.
//!
//! CSV files use `.` decimals, LF line endings and a header row; floats are
//! written in Rust's shortest round-trip form, so equal runs give equal bytes.

mod svg;

pub use svg::{Chart, Series};

use crate::compensator::HazardEstimate;
use crate::error::{Error, Result};
use crate::filtration::ObservationRecord;
use crate::market::MaskedObservation;
use crate::projection::{EngineOutput, JumpRecord};
use crate::stochastics::SamplePath;
use std::fs::File;
use std::io::Write;
use std::path::Path;

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Table writer over any sink.
pub struct Table<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> Table<W> {
    pub fn new(sink: W, header: &[&str]) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
        inner.write_record(header).map_err(csv_err)?;
        Ok(Self { inner })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.inner.write_record(fields).map_err(csv_err)
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn create(path: &Path, header: &[&str]) -> Result<Table<File>> {
    let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Table::new(f, header)
}

fn s<T: ToString>(v: T) -> String {
    v.to_string()
}

pub fn write_observations<W: Write>(sink: W, records: &[(u64, &ObservationRecord)]) -> Result<()> {
    let mut t = Table::new(sink, &["stream_id", "level", "time", "direction"])?;
    for (id, rec) in records {
        for e in rec.events() {
            t.row(&[s(id), s(e.level), s(e.time), s(e.direction.as_str())])?;
        }
    }
    t.finish()
}

/// Long format: one row per stream and grid time.
pub fn write_paths<W: Write>(sink: W, paths: &[(u64, &SamplePath, &SamplePath)]) -> Result<()> {
    let mut t = Table::new(sink, &["stream_id", "time", "driver", "x"])?;
    for (id, b, x) in paths {
        let g = b.grid();
        for (k, (bv, xv)) in b.values().iter().zip(x.values()).enumerate() {
            t.row(&[s(id), s(g.time(k)), s(bv), s(xv)])?;
        }
    }
    t.finish()
}

fn flag(confident: bool, floored: bool) -> &'static str {
    if floored {
        "floored"
    } else if confident {
        "ok"
    } else {
        "low_occupancy"
    }
}

pub fn write_projection<W: Write>(sink: W, out: &EngineOutput) -> Result<()> {
    let mut t = Table::new(sink, &["stream_id", "time", "M_value", "flag"])?;
    for p in &out.paths {
        for (i, &k) in out.eval_steps.iter().enumerate() {
            t.row(&[s(p.stream_id), s(out.grid.time(k)), s(p.m_eval[i]), s(flag(p.confident[i], p.floored))])?;
        }
    }
    t.finish()
}

pub fn write_jumps<W: Write>(sink: W, jumps: &[JumpRecord]) -> Result<()> {
    let mut t = Table::new(sink, &["stream_id", "T_beta", "alpha", "beta", "delta_M"])?;
    for j in jumps {
        t.row(&[s(j.stream_id), s(j.t_beta), s(j.alpha), s(j.beta), s(j.delta_m)])?;
    }
    t.finish()
}

/// Ensemble means of `X` and `M` per evaluation time.
pub fn write_summary<W: Write>(sink: W, out: &EngineOutput) -> Result<()> {
    let mut t = Table::new(
        sink,
        &["time", "mean_x", "se_x", "mean_m", "se_m", "mean_x_confident", "confident_fraction", "groups"],
    )?;
    let sm = &out.summary;
    for i in 0..sm.eval_times.len() {
        t.row(&[
            s(sm.eval_times[i]),
            s(sm.mean_x[i].mean),
            s(sm.mean_x[i].se),
            s(sm.mean_m[i].mean),
            s(sm.mean_m[i].se),
            s(sm.mean_x_confident[i].mean),
            s(sm.confident_fraction[i]),
            s(sm.groups[i]),
        ])?;
    }
    t.finish()
}

/// `time, value, ci_low, ci_high`.
pub fn write_curve<W: Write>(sink: W, times: &[f64], values: &[f64], ci: Option<(&[f64], &[f64])>) -> Result<()> {
    if times.len() != values.len() || ci.is_some_and(|(l, h)| l.len() != times.len() || h.len() != times.len()) {
        return Err(Error::Alignment("curve columns differ in length".into()));
    }
    let mut t = Table::new(sink, &["time", "value", "ci_low", "ci_high"])?;
    for i in 0..times.len() {
        let (lo, hi) = ci.map_or((values[i], values[i]), |(l, h)| (l[i], h[i]));
        t.row(&[s(times[i]), s(values[i]), s(lo), s(hi)])?;
    }
    t.finish()
}

pub fn write_hazard<W: Write>(sink: W, h: &HazardEstimate) -> Result<()> {
    write_curve(sink, &h.times, &h.values, Some((&h.ci_low, &h.ci_high)))
}

pub fn write_masked<W: Write>(sink: W, obs: &[(u64, &MaskedObservation)]) -> Result<()> {
    let mut t = Table::new(sink, &["stream_id", "time", "y", "j"])?;
    for (id, o) in obs {
        for k in 0..o.y.len() {
            let j = if k == 0 { false } else { o.j[k - 1] };
            t.row(&[s(id), s(o.grid.time(k)), s(o.y[k]), s(j as u8)])?;
        }
    }
    t.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::{Direction, PassageEvent};

    #[test]
    fn csv_is_lf_terminated_with_a_header() {
        let ev = PassageEvent { level: 1.0, time: 0.5, direction: Direction::Up, step: 3 };
        let rec = ObservationRecord::new(vec![ev], 0.0, 1.0).unwrap();
        let mut buf = Vec::new();
        write_observations(&mut buf, &[(7, &rec)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "stream_id,level,time,direction\n7,1,0.5,up\n");
    }

    #[test]
    fn curve_columns_must_align() {
        let mut buf = Vec::new();
        assert!(write_curve(&mut buf, &[0.0, 1.0], &[0.0], None).is_err());
        let mut buf = Vec::new();
        write_curve(&mut buf, &[0.0], &[0.25], None).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "time,value,ci_low,ci_high\n0,0.25,0.25,0.25\n");
    }
}
