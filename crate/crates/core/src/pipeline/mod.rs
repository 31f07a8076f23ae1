//! Commands behind the `slmj` binary: each reads a [`RunConfig`], writes its
//! files into an output directory and returns the checks that decide the
//! exit code.

pub mod acceptance;

use crate::classify::{strictness_classify, strictness_quadrature, StrictnessVerdict};
use crate::compensator::{compensated_check, cumulative_intensity, nelson_aalen, CountingSample, FirstPassageHazard};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::market::{family_project, mask_with_times, qv_check, renewal_times, tick_observe};
use crate::projection::{
    extract_jumps, jump_localization, project_ensemble, simulate_stream, CoupledModel, EngineOutput, JumpRecord, LevelsOn,
    PassageObserver, ProjectionSpec,
};
use crate::report::{self, Chart, Series, Table};
use crate::rng::{purpose, RngSpec};
use crate::stats::pooled_se;
use crate::stochastics::{sample_first_passages, SdeModel};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: Value,
}

impl Check {
    fn new(name: &str, pass: bool, detail: Value) -> Self {
        Self { name: name.into(), pass, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandReport {
    pub command: String,
    pub seed: u64,
    pub files: Vec<String>,
    pub requested: Vec<String>,
    pub checks: Vec<Check>,
}

impl CommandReport {
    /// All requested checks ran and passed.
    pub fn success(&self) -> bool {
        self.requested.iter().all(|r| self.checks.iter().any(|c| &c.name == r && c.pass))
    }

    pub fn failed(&self) -> Vec<&str> {
        self.requested
            .iter()
            .filter(|r| !self.checks.iter().any(|c| &c.name == *r && c.pass))
            .map(|s| s.as_str())
            .collect()
    }
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.into());
        self.dir.join(name)
    }

    fn file(&mut self, name: &str) -> Result<fs::File> {
        let p = self.path(name);
        fs::File::create(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, body).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
    }

    fn finish(mut self, command: &str, cfg: &RunConfig, requested: Vec<String>, checks: Vec<Check>) -> Result<CommandReport> {
        self.files.push("checks.json".into());
        let rep = CommandReport { command: command.into(), seed: cfg.seed(), files: self.files.clone(), requested, checks };
        let body = serde_json::to_string_pretty(&rep).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(self.dir.join("checks.json"), body + "\n")?;
        Ok(rep)
    }
}

/// Every check name any command knows.
pub const CHECKS: [&str; 7] = ["tower", "localization", "defect", "sup_norm", "compensated", "consistent", "qv"];
const BLACKOUT: &str = "blackout_end";

/// Configured checks that apply to this command; names no command knows
/// are rejected.
fn requested(cfg: &RunConfig, available: &[&str], default: &[&str]) -> Result<Vec<String>> {
    let Some(r) = &cfg.checks else {
        return Ok(default.iter().map(|s| s.to_string()).collect());
    };
    if let Some(bad) = r.iter().find(|c| !CHECKS.contains(&c.as_str()) && c.as_str() != BLACKOUT) {
        return Err(Error::config("checks", format!("unknown check \"{bad}\"; known: {}, {BLACKOUT}", CHECKS.join(", "))));
    }
    Ok(r.iter().filter(|c| available.contains(&c.as_str())).cloned().collect())
}

fn s<T: ToString>(v: T) -> String {
    v.to_string()
}

fn tower_check(out: &EngineOutput) -> Check {
    let mut rows = Vec::new();
    let mut pass = true;
    for (i, &t) in out.summary.eval_times.iter().enumerate() {
        let (m, x) = out.held_out_tower(i);
        let se = pooled_se(m.se, x.se);
        let diff = m.mean - x.mean;
        let ok = if se > 0.0 { diff.abs() < 3.0 * se } else { diff == 0.0 };
        pass &= ok && m.n > 0;
        rows.push(json!({"time": t, "mean_m": m.mean, "mean_x": x.mean, "pooled_se": se, "n_m": m.n, "pass": ok}));
    }
    Check::new("tower", pass, Value::Array(rows))
}

fn defect_check(out: &EngineOutput, x0: f64) -> Check {
    let mut rows = Vec::new();
    let mut pass = true;
    for (i, &t) in out.summary.eval_times.iter().enumerate() {
        let (m, _) = out.held_out_tower(i);
        let d = x0 - m.mean;
        let ok = d > 3.0 * m.se;
        if t > 0.0 {
            pass &= ok;
        }
        rows.push(json!({"time": t, "defect": d, "se": m.se, "positive": ok}));
    }
    Check::new("defect", pass, Value::Array(rows))
}

fn all_jumps(out: &EngineOutput, threshold: f64) -> Vec<JumpRecord> {
    out.paths.iter().flat_map(|p| extract_jumps(p, threshold)).collect()
}

fn write_curve_csv(outputs: &mut Outputs, out: &EngineOutput) -> Result<()> {
    let mut t = Table::new(outputs.file("curve.csv")?, &["time", "mean_x", "se_x", "mean_m", "se_m"])?;
    for c in &out.curve {
        t.row(&[s(c.time), s(c.x.mean), s(c.x.se), s(c.m.mean), s(c.m.se)])?;
    }
    t.finish()
}

fn mean_chart(title: &str, out: &EngineOutput, jumps: &[JumpRecord]) -> String {
    let band = |f: &dyn Fn(&crate::projection::CurvePoint) -> crate::stats::MeanEstimate| {
        let pts: Vec<(f64, f64)> = out.curve.iter().map(|c| (c.time, f(c).mean)).collect();
        let b: Vec<(f64, f64)> = out.curve.iter().map(|c| (f(c).mean - 3.0 * f(c).se, f(c).mean + 3.0 * f(c).se)).collect();
        (pts, b)
    };
    let (px, bx) = band(&|c| c.x);
    let (pm, bm) = band(&|c| c.m);
    let mut chart = Chart::new(title, "t", "mean (3 SE band)");
    chart.series.push(Series::line("X", px).with_band(bx));
    chart.series.push(Series::line("M", pm).with_band(bm).dashed());
    let mut steps: Vec<usize> = jumps.iter().map(|j| j.step).collect();
    steps.sort_unstable();
    steps.dedup();
    chart.markers = steps.into_iter().map(|k| out.grid.time(k)).collect();
    chart.render()
}

fn write_jump_outputs(outputs: &mut Outputs, out: &EngineOutput, jumps: &[JumpRecord]) -> Result<()> {
    report::write_projection(outputs.file("projection.csv")?, out)?;
    report::write_jumps(outputs.file("jumps.csv")?, jumps)?;
    report::write_summary(outputs.file("summary.csv")?, out)?;
    write_curve_csv(outputs, out)
}

fn bridge_for(cfg: &RunConfig, rng: RngSpec) -> Option<RngSpec> {
    cfg.estimator.bridge.then(|| rng.substream(purpose::BRIDGE))
}

/// Paths and passage events of the configured model.
pub fn cmd_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<CommandReport> {
    let req = requested(cfg, &[], &[])?;
    let model = cfg.model()?;
    let levels = cfg.level_set()?;
    let spec = cfg.projection_spec()?;
    let on = cfg.levels_on();
    PassageObserver::new(&model, &levels, on, None)?;
    let mut outputs = Outputs::new(out_dir)?;
    let keep = cfg.simulate.write_paths.min(spec.n_paths) as u64;
    let runs: Vec<_> = (0..spec.n_paths as u64)
        .into_par_iter()
        .map(|s| {
            let rng = spec.rng.with_stream(s);
            let obs = PassageObserver::new(&model, &levels, on, bridge_for(cfg, rng))?;
            let sp = simulate_stream(&model, spec.grid, rng, Some(obs))?;
            Ok((sp.events, sp.floored, (s < keep).then_some((sp.driver, sp.x))))
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(outputs.file("observations.csv")?, &["stream_id", "level", "time", "direction"])?;
    for (id, (events, _, _)) in runs.iter().enumerate() {
        for e in events {
            t.row(&[s(id), s(e.level), s(e.time), s(e.direction.as_str())])?;
        }
    }
    t.finish()?;
    let kept: Vec<(u64, &_, &_)> = runs.iter().enumerate().filter_map(|(s, r)| r.2.as_ref().map(|(b, x)| (s as u64, b, x))).collect();
    report::write_paths(outputs.file("paths.csv")?, &kept)?;
    let floored = runs.iter().filter(|r| r.1).count();
    let events: usize = runs.iter().map(|r| r.0.len()).sum();
    let info = Check::new("summary", true, json!({"paths": spec.n_paths, "events": events, "floored_paths": floored}));
    outputs.finish("simulate", cfg, req, vec![info])
}

/// Ensemble projection onto the passage filtration of the configured levels.
pub fn cmd_project(cfg: &RunConfig, out_dir: &Path) -> Result<CommandReport> {
    let req = requested(cfg, &["tower", "localization", "defect"], &["tower", "localization"])?;
    let model = cfg.model()?;
    let levels = cfg.level_set()?;
    let spec = cfg.projection_spec()?;
    let mut outputs = Outputs::new(out_dir)?;
    let out = project_ensemble(&model, &levels, &spec)?;
    let threshold = spec.noise_threshold;
    let jumps = all_jumps(&out, threshold);
    write_jump_outputs(&mut outputs, &out, &jumps)?;
    outputs.text("projection.svg", &mean_chart("Projection of X onto the passage filtration", &out, &jumps))?;
    let mut checks = vec![tower_check(&out), defect_check(&out, model.x0())];
    let loc = jump_localization(&out, threshold)?;
    let moves = loc.at_events + loc.near_events + loc.off_events;
    checks.push(Check::new("localization", moves == 0 || loc.off_fraction <= 0.01, serde_json::to_value(loc).unwrap_or(Value::Null)));
    checks.push(Check::new(
        "summary",
        true,
        json!({"jumps": jumps.len(), "confident_fraction": out.summary.confident_fraction, "floored_paths": out.summary.floored_paths}),
    ));
    outputs.finish("project", cfg, req, checks)
}

/// Nelson–Aalen hazard of `T_β − T_α` against the analytic intensity.
pub fn cmd_intensity(cfg: &RunConfig, out_dir: &Path) -> Result<CommandReport> {
    let req = requested(cfg, &["sup_norm", "compensated"], &["sup_norm", "compensated"])?;
    let ic = cfg.intensity_checked()?.clone();
    let mut outputs = Outputs::new(out_dir)?;
    let root = RngSpec::new(cfg.seed(), 0);
    let t_alpha = sample_first_passages(ic.gamma, ic.n, root)?;
    let gaps = sample_first_passages(ic.gamma, ic.n, root.substream(purpose::AUX))?;
    let samples = t_alpha
        .iter()
        .zip(&gaps)
        .map(|(&a, &g)| CountingSample::censored(a, a + g, a + ic.horizon))
        .collect::<Result<Vec<_>>>()?;
    let grid: Vec<f64> = (1..=ic.points).map(|i| ic.horizon * i as f64 / ic.points as f64).collect();
    // elapsed-time scale: shift each sample to start at 0
    let elapsed: Vec<CountingSample> =
        samples.iter().map(|c| CountingSample::new(0.0, c.exit - c.entry, c.observed)).collect::<Result<_>>()?;
    let na = nelson_aalen(&elapsed, &grid)?;
    let analytic = |t: f64| Ok(ic.hazard_scale * cumulative_intensity(ic.gamma, 0.0, t)?);
    let sup = na.sup_distance(analytic)?;
    report::write_hazard(outputs.file("hazard.csv")?, &na)?;
    let av = grid.iter().map(|&t| analytic(t)).collect::<Result<Vec<_>>>()?;
    report::write_curve(outputs.file("analytic.csv")?, &grid, &av, None)?;
    let model = FirstPassageHazard { gap: ic.gamma, scale: ic.hazard_scale };
    let cgrid: Vec<f64> = (1..=20).map(|i| ic.horizon * i as f64 / 20.0).collect();
    let comp = compensated_check(&samples, &model, &cgrid)?;
    let lo: Vec<f64> = comp.mean.iter().zip(&comp.se).map(|(m, e)| m - 3.0 * e).collect();
    let hi: Vec<f64> = comp.mean.iter().zip(&comp.se).map(|(m, e)| m + 3.0 * e).collect();
    report::write_curve(outputs.file("compensated.csv")?, &comp.times, &comp.mean, Some((&lo, &hi)))?;
    let mut chart = Chart::new("Cumulative hazard of the passage time", "time since the previous passage", "cumulative hazard");
    let pts = |v: &[f64]| na.times.iter().zip(v).map(|(t, v)| (*t, *v)).collect::<Vec<_>>();
    chart.series.push(
        Series::line("Nelson-Aalen", pts(&na.values)).with_band(na.ci_low.iter().zip(&na.ci_high).map(|(a, b)| (*a, *b)).collect()),
    );
    chart.series.push(Series::line("analytic", grid.iter().copied().zip(av.iter().copied()).collect()).dashed());
    outputs.text("intensity.svg", &chart.render())?;
    let checks = vec![
        Check::new(
            "sup_norm",
            sup <= ic.tolerance && !na.truncated,
            json!({"sup": sup, "tolerance": ic.tolerance, "hazard_scale": ic.hazard_scale, "n": ic.n}),
        ),
        Check::new("compensated", comp.pass, json!({"worst_z": comp.worst_z(), "times": comp.times.len()})),
    ];
    outputs.finish("intensity", cfg, req, checks)
}

#[derive(Debug, Clone, Serialize)]
struct ClassifyRow {
    classified: StrictnessVerdict,
    quadrature: StrictnessVerdict,
}

/// Strictness verdicts for the configured diffusion coefficient.
pub fn cmd_classify(cfg: &RunConfig, out_dir: &Path) -> Result<CommandReport> {
    let req = requested(cfg, &["consistent"], &["consistent"])?;
    let model = match cfg.model()? {
        CoupledModel::Sde(m) => m,
        m @ CoupledModel::InverseBessel3 { .. } => SdeModel::new(m.x0(), m.sigma())?,
    };
    let mut outputs = Outputs::new(out_dir)?;
    let mut rows = Vec::new();
    for &eps in &cfg.classify.eps {
        rows.push(ClassifyRow {
            classified: strictness_classify(&model, eps)?,
            quadrature: strictness_quadrature(&model.sigma, eps)?,
        });
    }
    let first = rows[0].classified.verdict;
    let consistent = rows.iter().all(|r| r.classified.verdict == first && r.quadrature.verdict == first);
    let body = json!({
        "sigma": format!("{:?}", model.sigma),
        "verdict": first.as_str(),
        "consistent": consistent,
        "results": rows,
    });
    outputs.text("classify.json", &(serde_json::to_string_pretty(&body).map_err(|e| Error::Io(e.to_string()))? + "\n"))?;
    let checks = vec![Check::new("consistent", consistent, json!({"verdict": first.as_str()}))];
    outputs.finish("classify", cfg, req, checks)
}

/// Projection onto the information revealed at transaction times.
pub fn cmd_market(cfg: &RunConfig, out_dir: &Path) -> Result<CommandReport> {
    let req = requested(cfg, &["tower", "qv", "blackout_end", "defect"], &["tower", "qv", "blackout_end"])?;
    let model = cfg.model()?;
    let (market, tick) = cfg.market_spec()?;
    let section = cfg.market.as_ref().ok_or_else(|| Error::config("market", "missing"))?;
    let mut spec: ProjectionSpec = cfg.projection_spec()?;
    spec.bucket_steps = section.bucket_steps;
    spec.levels_on = LevelsOn::Driver;
    let mut outputs = Outputs::new(out_dir)?;
    let fam = family_project(&model, &market, &spec)?;
    let out = &fam.output;

    let n_qv = spec.n_paths.min(200);
    let keep = section.write_paths.min(spec.n_paths);
    let horizon = spec.grid.horizon;
    let sims: Vec<_> = (0..n_qv.max(keep) as u64)
        .into_par_iter()
        .map(|s| {
            let rng = spec.rng.with_stream(s);
            let sp = simulate_stream::<PassageObserver>(&model, spec.grid, rng, None)?;
            let taus = renewal_times(&market.renewal, horizon, rng)?;
            let ticks = match tick {
                Some(g) => Some(tick_observe(&sp.x, &g)?),
                None => None,
            };
            Ok((mask_with_times(&sp.driver, market.weight, taus), ticks))
        })
        .collect::<Result<_>>()?;
    let masked: Vec<(u64, &_)> = sims.iter().take(keep).enumerate().map(|(s, m)| (s as u64, &m.0)).collect();
    report::write_masked(outputs.file("observations.csv")?, &masked)?;
    if tick.is_some() {
        let recs: Vec<(u64, &_)> = sims.iter().take(keep).enumerate().filter_map(|(s, m)| m.1.as_ref().map(|r| (s as u64, r))).collect();
        report::write_observations(outputs.file("ticks.csv")?, &recs)?;
    }
    let obs: Vec<_> = sims.into_iter().take(n_qv).map(|m| m.0).collect();
    let qv = qv_check(&obs)?;

    let jumps = all_jumps(out, spec.noise_threshold);
    write_jump_outputs(&mut outputs, out, &jumps)?;
    outputs.text("market.svg", &mean_chart("Projection onto transaction information", out, &jumps))?;
    let rep = &fam.jumps;
    let checks = vec![
        tower_check(out),
        defect_check(out, model.x0()),
        Check::new("qv", qv.relative_error <= 0.02, serde_json::to_value(qv).unwrap_or(Value::Null)),
        Check::new(
            "blackout_end",
            rep.total_mass > 0.0 && rep.blackout_end_fraction >= 0.95,
            serde_json::to_value(rep).unwrap_or(Value::Null),
        ),
    ];
    outputs.finish("market", cfg, req, checks)
}

/// The acceptance suite; one check per criterion.
pub fn cmd_selftest(cfg: &RunConfig, out_dir: &Path) -> Result<CommandReport> {
    let st = &cfg.selftest;
    let opts = acceptance::SuiteOptions {
        seed: cfg.seed.unwrap_or(acceptance::DEFAULT_SEED),
        shrink: st.shrink.unwrap_or(1),
        corrupt_fp_cdf: st.corrupt_fp_cdf,
        out_dir: out_dir.join("reproducibility"),
    };
    let ids: Vec<u8> = st.criteria.clone().unwrap_or_else(|| (1..=12).collect());
    let mut outputs = Outputs::new(out_dir)?;
    let mut suite = acceptance::Suite::new(opts);
    let mut lines = String::new();
    let mut checks = Vec::new();
    for id in ids {
        let r = suite.run(id)?;
        let line = r.line();
        println!("{line}");
        lines.push_str(&line);
        lines.push('\n');
        checks.push(Check::new(&format!("criterion_{id}"), r.pass, json!({"name": r.name, "detail": r.detail, "seconds": r.seconds})));
    }
    outputs.text("selftest.txt", &lines)?;
    let req = checks.iter().map(|c| c.name.clone()).collect();
    outputs.finish("selftest", cfg, req, checks)
}
