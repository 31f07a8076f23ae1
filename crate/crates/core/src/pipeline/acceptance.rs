//! Acceptance criteria as runnable checks.
//!
//! Every criterion returns a [`CriterionResult`]; two of them fail by
//! construction (see [`CriterionResult::documented`]).

use super::{cmd_project, Check};
use crate::classify::{defect_estimate, strictness_classify, strictness_quadrature, Verdict};
use crate::compensator::{
    compensated_check, cumulative_intensity, exit_cumulative_hazard, fp_cdf, nelson_aalen, CountingSample, FirstPassageHazard,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::filtration::{Direction, LevelSet, PassageDetector};
use crate::market::{family_project, mask_transactions, qv_check, MarketSpec, RenewalSpec, Weight};
use crate::oracle;
use crate::projection::{jump_localization, project_ensemble, CoupledModel, EngineOutput, ProjectionSpec};
use crate::rng::{purpose, RngSpec};
use crate::stats::{ks_test, ks_two_sample, pooled_se, MeanEstimate};
use crate::stochastics::{sample_brownian, sample_first_passages, Bessel3Stepper, SdeModel, Sigma, TimeGrid};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const DEFAULT_SEED: u64 = 7;

/// Off-event thresholds reported next to the localization criterion.
pub const THRESHOLD_TABLE: [f64; 5] = [0.05, 0.1, 0.2, 0.3, 0.4];

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Divide every ensemble size by this.
    pub shrink: usize,
    /// Scale the time argument of the first-passage CDF used by the checks.
    pub corrupt_fp_cdf: bool,
    /// Scratch directory for the reproducibility runs.
    pub out_dir: PathBuf,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { seed: DEFAULT_SEED, shrink: 1, corrupt_fp_cdf: false, out_dir: std::env::temp_dir().join("slmj-acceptance") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    /// For criteria known to be unattainable: whether the failure has the
    /// expected shape. `None` for all others.
    pub documented: Option<bool>,
    pub detail: Value,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let status = match (self.pass, self.documented) {
            (true, _) => "PASS",
            (false, Some(true)) => "FAIL (documented: unattainable as stated)",
            (false, _) => "FAIL",
        };
        format!("criterion {:>2} {:<34} {status} [{:.1} s] {}", self.id, self.name, self.seconds, self.detail)
    }

    /// Passed, or failed exactly as documented.
    pub fn acceptable(&self) -> bool {
        self.pass || self.documented == Some(true)
    }
}

pub const NAMES: [&str; 12] = [
    "first-passage law",
    "bridge-corrected detection",
    "strictness classifier",
    "inverse Bessel defect",
    "projection tower property",
    "strictness survives projection",
    "jump localization",
    "intensity formula",
    "two-sided additivity",
    "compensated martingale",
    "transaction family",
    "reproducibility",
];

/// Runtime limits in seconds, where one is set.
fn limit(id: u8) -> Option<f64> {
    match id {
        1 => Some(30.0),
        2 => Some(120.0),
        3 => Some(1.0),
        4 | 8 => Some(60.0),
        5 => Some(300.0),
        _ => None,
    }
}

pub struct Suite {
    opts: SuiteOptions,
    reference: Option<(EngineOutput, f64)>,
    passage_samples: Option<Vec<CountingSample>>,
}

/// Reference projection: inverse Bessel from 1, levels {1, 2} on the driver.
pub fn reference_config(seed: u64, n_paths: usize) -> Value {
    json!({
        "schema": crate::config::SCHEMA,
        "model": {"kind": "inverse_bessel", "x0": 1.0},
        "levels": {"on": "driver", "upper": [1.0, 2.0]},
        "grid": {"horizon": 2.0, "dt": 0.00390625},
        "n_paths": n_paths,
        "eval_times": [0.5, 1.0, 2.0],
        "estimator": {"bucket_steps": 8, "min_occupancy": 30, "noise_threshold": 0.4, "bridge": true, "trace_paths": 0},
        "seed": seed
    })
}

fn cfg_from(v: &Value) -> Result<RunConfig> {
    RunConfig::from_json(&v.to_string())
}

impl Suite {
    pub fn new(opts: SuiteOptions) -> Self {
        Self { opts, reference: None, passage_samples: None }
    }

    fn n(&self, full: usize) -> usize {
        (full / self.opts.shrink).max(1000.min(full))
    }

    fn root(&self) -> RngSpec {
        RngSpec::new(self.opts.seed, 0)
    }

    /// The first-passage CDF as seen by the checks.
    fn cdf(&self, gap: f64, u: f64) -> f64 {
        let u = if self.opts.corrupt_fp_cdf { 1.1 * u } else { u };
        fp_cdf(gap, u).unwrap_or(f64::NAN)
    }

    pub fn run(&mut self, id: u8) -> Result<CriterionResult> {
        let start = Instant::now();
        let (pass, documented, detail) = match id {
            1 => self.first_passage_law()?,
            2 => self.bridge_detection()?,
            3 => self.classifier()?,
            4 => self.bessel_defect()?,
            5 => self.tower()?,
            6 => self.projected_defect()?,
            7 => self.localization()?,
            8 => self.intensity()?,
            9 => self.additivity()?,
            10 => self.compensated()?,
            11 => self.family()?,
            12 => self.reproducibility()?,
            _ => return Err(Error::config("selftest.criteria", format!("no criterion {id}"))),
        };
        let seconds = start.elapsed().as_secs_f64();
        let in_time = limit(id).is_none_or(|l| seconds < l);
        let mut detail = detail;
        if let Some(l) = limit(id) {
            detail["runtime_limit_s"] = json!(l);
        }
        Ok(CriterionResult { id, name: NAMES[id as usize - 1].into(), pass: pass && in_time, documented, detail, seconds })
    }

    fn first_passage_law(&self) -> Result<(bool, Option<bool>, Value)> {
        let xs = sample_first_passages(1.0, self.n(100_000), self.root())?;
        let ks = ks_test(&xs, |u| self.cdf(1.0, u), 0.01)?;
        let mut worst: f64 = 0.0;
        for i in 0..=60 {
            let u = 10f64.powf(-3.0 + 6.0 * i as f64 / 60.0);
            worst = worst.max((self.cdf(1.0, u) - oracle::fp_cdf_quadrature(1.0, u)?).abs());
        }
        let pass = ks.pass && worst <= 1e-8;
        Ok((pass, None, json!({"ks": ks.statistic, "critical": ks.critical, "p": ks.p_value, "quadrature_max_abs": worst})))
    }

    fn bridge_detection(&self) -> Result<(bool, Option<bool>, Value)> {
        let n = self.n(10_000);
        let horizon = 20.0;
        let steps = 20 * 1024;
        let dt = horizon / steps as f64;
        let levels = LevelSet::new(vec![1.0])?;
        let root = self.root();
        let detected: Vec<Option<f64>> = (0..n as u64)
            .into_par_iter()
            .map(|s| {
                let mut rng = root.with_stream(s).rng();
                let mut det = PassageDetector::new(&levels, 0.0, Some(root.with_stream(s).substream(purpose::BRIDGE)))?;
                let mut out = Vec::new();
                let mut b = 0.0;
                for k in 1..=steps {
                    let b1 = b + dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
                    if det.step(k, (k - 1) as f64 * dt, dt, b, b1, &mut out) > 0 {
                        return Ok(Some(out[0].time));
                    }
                    b = b1;
                }
                Ok(None)
            })
            .collect::<Result<_>>()?;
        let hits: Vec<f64> = detected.iter().flatten().copied().collect();
        let exact: Vec<f64> = sample_first_passages(1.0, 10 * n, root.substream(purpose::AUX))?.into_iter().filter(|&t| t <= horizon).collect();
        let ks = ks_two_sample(&hits, &exact, 0.01)?;
        // censoring rate against the exact law
        let p_hit = self.cdf(1.0, horizon);
        let rate = hits.len() as f64 / n as f64;
        let se = (p_hit * (1.0 - p_hit) / n as f64).sqrt();
        let pass = ks.pass && (rate - p_hit).abs() < 3.0 * se;
        Ok((pass, None, json!({"ks": ks.statistic, "critical": ks.critical, "detected": hits.len(), "hit_rate": rate, "exact_hit_rate": p_hit})))
    }

    fn classifier(&self) -> Result<(bool, Option<bool>, Value)> {
        let cases = [
            (2.0, Verdict::StrictLocalMartingale),
            (1.0, Verdict::TrueMartingaleCandidate),
            (0.4, Verdict::PositivityFails),
        ];
        let mut pass = true;
        let mut rows = Vec::new();
        for (p, want) in cases {
            let model = SdeModel::new(1.0, Sigma::power(1.0, p))?;
            for eps in [0.1, 1.0, 10.0] {
                let v = strictness_classify(&model, eps)?.verdict;
                let q = strictness_quadrature(&model.sigma, eps)?.verdict;
                pass &= v == want && q == want;
                rows.push(json!({"p": p, "eps": eps, "verdict": v.as_str(), "quadrature": q.as_str()}));
            }
        }
        Ok((pass, None, json!({"cases": rows})))
    }

    fn bessel_defect(&self) -> Result<(bool, Option<bool>, Value)> {
        let n = self.n(100_000);
        let root = self.root();
        let xs: Vec<f64> = (0..n as u64)
            .into_par_iter()
            .map(|s| {
                let mut st = Bessel3Stepper::new(1.0);
                st.step(&mut root.with_stream(s).rng(), 1.0);
                1.0 / st.radius()
            })
            .collect();
        let closed = oracle::inverse_bessel_mean(1.0, 1.0);
        let quad = oracle::inverse_bessel_mean_quadrature(1.0, 1.0)?;
        let m = MeanEstimate::from_slice(&xs);
        let d = defect_estimate(&xs, 1.0, 1.0)?;
        let pass = (m.mean - closed).abs() < 3.0 * m.se && (closed - quad).abs() < 1e-8 && d.positive;
        Ok((pass, None, json!({"mean": m.mean, "se": m.se, "closed_form": closed, "quadrature": quad, "defect": d.defect})))
    }

    fn reference(&mut self) -> Result<&EngineOutput> {
        if self.reference.is_none() {
            let cfg = cfg_from(&reference_config(self.opts.seed, self.n(100_000)))?;
            let mut spec: ProjectionSpec = cfg.projection_spec()?;
            // record small moves too, for the threshold table
            spec.noise_threshold = THRESHOLD_TABLE[0];
            let t = Instant::now();
            let out = project_ensemble(&cfg.model()?, &cfg.level_set()?, &spec)?;
            self.reference = Some((out, t.elapsed().as_secs_f64()));
        }
        Ok(&self.reference.as_ref().unwrap().0)
    }

    fn tower(&mut self) -> Result<(bool, Option<bool>, Value)> {
        let out = self.reference()?;
        let mut pass = true;
        let mut rows = Vec::new();
        for (i, &t) in out.summary.eval_times.iter().enumerate() {
            let (m, x) = out.held_out_tower(i);
            let z = (m.mean - x.mean) / pooled_se(m.se, x.se);
            let in_sample = (out.summary.mean_m[i].mean - out.summary.mean_x_confident[i].mean).abs();
            pass &= z.abs() < 3.0 && in_sample < 1e-9;
            rows.push(json!({"t": t, "z": z, "held_out_m": m.mean, "x": x.mean, "in_sample_gap": in_sample}));
        }
        let secs = self.reference.as_ref().map(|r| r.1).unwrap_or(0.0);
        Ok((pass && secs < 300.0, None, json!({"times": rows, "projection_s": secs})))
    }

    fn projected_defect(&mut self) -> Result<(bool, Option<bool>, Value)> {
        let out = self.reference()?;
        let i = out.summary.eval_times.iter().position(|&t| (t - 1.0).abs() < 1e-12).ok_or_else(|| Error::Integrity("t = 1 not evaluated".into()))?;
        let (m, _) = out.held_out_tower(i);
        let d = 1.0 - m.mean;
        Ok((d > 3.0 * m.se, None, json!({"defect": d, "se": m.se, "z": d / m.se})))
    }

    fn localization(&mut self) -> Result<(bool, Option<bool>, Value)> {
        let out = self.reference()?;
        let mut table = Vec::new();
        for th in THRESHOLD_TABLE {
            let l = jump_localization(out, th)?;
            table.push(json!({"threshold": th, "off_fraction": l.off_fraction, "moves": l.at_events + l.near_events + l.off_events}));
        }
        let l = jump_localization(out, 0.4)?;
        let pass = l.off_fraction <= 0.01 && l.at_events + l.near_events > 0;
        Ok((pass, None, json!({"threshold": 0.4, "off_fraction": l.off_fraction, "table": table})))
    }

    fn passage_samples(&mut self) -> Result<&[CountingSample]> {
        if self.passage_samples.is_none() {
            let n = self.n(100_000);
            let a = sample_first_passages(1.0, n, self.root())?;
            let g = sample_first_passages(1.0, n, self.root().substream(purpose::AUX))?;
            let v = a.iter().zip(&g).map(|(&a, &g)| CountingSample::censored(a, a + g, a + 3.0)).collect::<Result<_>>()?;
            self.passage_samples = Some(v);
        }
        Ok(self.passage_samples.as_deref().unwrap())
    }

    fn intensity(&mut self) -> Result<(bool, Option<bool>, Value)> {
        let samples = self.passage_samples()?;
        let elapsed: Vec<CountingSample> =
            samples.iter().map(|c| CountingSample::new(0.0, c.exit - c.entry, c.observed)).collect::<Result<_>>()?;
        let grid: Vec<f64> = (1..=60).map(|i| 3.0 * i as f64 / 60.0).collect();
        let na = nelson_aalen(&elapsed, &grid)?;
        let sup = na.sup_distance(|t| cumulative_intensity(1.0, 0.0, t))?;
        let control = na.sup_distance(|t| Ok(2.0 * cumulative_intensity(1.0, 0.0, t)?))?;
        let pass = sup <= 0.05 && control > 0.05;
        Ok((pass, None, json!({"sup": sup, "doubled_sup": control})))
    }

    fn compensated(&mut self) -> Result<(bool, Option<bool>, Value)> {
        let samples = self.passage_samples()?;
        let grid: Vec<f64> = (1..=20).map(|i| 3.0 * i as f64 / 20.0).collect();
        let c = compensated_check(samples, &FirstPassageHazard::new(1.0), &grid)?;
        let ctl = compensated_check(samples, &FirstPassageHazard { gap: 1.0, scale: 2.0 }, &grid)?;
        Ok((c.pass && !ctl.pass, None, json!({"worst_z": c.worst_z(), "doubled_worst_z": ctl.worst_z()})))
    }

    fn additivity(&self) -> Result<(bool, Option<bool>, Value)> {
        let n = self.n(100_000);
        let horizon = 2.0;
        let steps = 2 * 1024;
        let dt = horizon / steps as f64;
        let levels = LevelSet::symmetric(vec![1.0])?;
        let root = self.root();
        let exits: Vec<Option<(f64, Direction)>> = (0..n as u64)
            .into_par_iter()
            .map(|s| {
                let mut rng = root.with_stream(s).rng();
                let mut det = PassageDetector::new(&levels, 0.0, Some(root.with_stream(s).substream(purpose::BRIDGE)))?;
                let mut out = Vec::new();
                let mut b = 0.0;
                for k in 1..=steps {
                    let b1 = b + dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
                    if det.step(k, (k - 1) as f64 * dt, dt, b, b1, &mut out) > 0 {
                        return Ok(Some((out[0].time, out[0].direction)));
                    }
                    b = b1;
                }
                Ok(None)
            })
            .collect::<Result<_>>()?;
        let sample = |keep: Option<Direction>| {
            exits
                .iter()
                .map(|e| match e {
                    Some((t, d)) => CountingSample::new(0.0, *t, keep.is_none_or(|k| k == *d)),
                    None => CountingSample::new(0.0, horizon, false),
                })
                .collect::<Result<Vec<_>>>()
        };
        let grid: Vec<f64> = (1..=80).map(|i| horizon * i as f64 / 80.0).collect();
        let total = nelson_aalen(&sample(None)?, &grid)?;
        let up = nelson_aalen(&sample(Some(Direction::Up))?, &grid)?;
        let down = nelson_aalen(&sample(Some(Direction::Down))?, &grid)?;
        let doubled = total.sup_distance(|t| Ok(2.0 * cumulative_intensity(1.0, 0.0, t)?))?;
        let at_end = total.values.last().copied().unwrap_or(f64::NAN) - 2.0 * cumulative_intensity(1.0, 0.0, horizon)?;
        let exact = total.sup_distance(|t| exit_cumulative_hazard(1.0, t))?;
        let mut causes: f64 = 0.0;
        for (i, &t) in grid.iter().enumerate() {
            causes = causes.max((up.values[i] + down.values[i] - exit_cumulative_hazard(1.0, t)?).abs());
        }
        let pass = doubled <= 0.05;
        // the analytic excess at t = 2 is 0.920
        let documented = !pass && exact <= 0.05 && causes <= 0.05 && (at_end - 0.920).abs() < 0.1;
        Ok((
            pass,
            Some(documented),
            json!({
                "sup_vs_doubled_one_sided": doubled,
                "excess_at_2": at_end,
                "sup_vs_two_sided_exact": exact,
                "sup_cause_specific_sum": causes
            }),
        ))
    }

    fn family(&self) -> Result<(bool, Option<bool>, Value)> {
        let model = CoupledModel::inverse_bessel(1.0)?;
        let market = MarketSpec { renewal: RenewalSpec::Exponential { rate: 2.0 }, weight: Weight::Constant { value: 1.0 }, y_bin: 1.0 };
        let grid = TimeGrid::with_step(2.0, 0.00390625)?;
        let mut spec = ProjectionSpec::new(grid, self.n(100_000), vec![0.5, 1.0, 2.0], self.root());
        spec.bucket_steps = 128;
        spec.noise_threshold = 0.4;
        let fam = family_project(&model, &market, &spec)?;
        let r = &fam.jumps;
        let fine = TimeGrid::with_step(2.0, 1.0 / 4096.0)?;
        let root = self.root().substream(purpose::AUX);
        let obs = (0..200u64)
            .into_par_iter()
            .map(|s| {
                let b = sample_brownian(fine, root.with_stream(s))?;
                mask_transactions(&b, market.weight, &market.renewal, root.with_stream(s))
            })
            .collect::<Result<Vec<_>>>()?;
        let qv = qv_check(&obs)?;
        let end_ok = r.total_mass > 0.0 && r.blackout_end_fraction >= 0.95;
        let qv_ok = qv.relative_error <= 0.02;
        let pass = end_ok && qv_ok;
        let documented = !end_ok && qv_ok && r.blackout_start_fraction > 0.5;
        let head: Vec<f64> = r.mass_by_index.iter().take(6).map(|m| m / r.total_mass.max(f64::MIN_POSITIVE)).collect();
        Ok((
            pass,
            Some(documented),
            json!({
                "blackout_end_fraction": r.blackout_end_fraction,
                "blackout_start_fraction": r.blackout_start_fraction,
                "mass_share_by_renewal_index": head,
                "qv_relative_error": qv.relative_error
            }),
        ))
    }

    fn reproducibility(&self) -> Result<(bool, Option<bool>, Value)> {
        let cfg = cfg_from(&reference_config(self.opts.seed, self.n(10_000)))?;
        let mut dirs = Vec::new();
        for workers in [1usize, 8] {
            let dir = self.opts.out_dir.join(format!("workers_{workers}"));
            let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| Error::Io(e.to_string()))?;
            pool.install(|| cmd_project(&cfg, &dir))?;
            dirs.push(dir);
        }
        let mut compared = Vec::new();
        let mut pass = true;
        for name in ["projection.csv", "jumps.csv", "summary.csv", "curve.csv"] {
            let same = read(&dirs[0].join(name))? == read(&dirs[1].join(name))?;
            pass &= same;
            compared.push(json!({"file": name, "identical": same}));
        }
        Ok((pass, None, json!({"files": compared})))
    }
}

fn read(p: &Path) -> Result<Vec<u8>> {
    std::fs::read(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
}

/// Results as command checks.
pub fn as_checks(results: &[CriterionResult]) -> Vec<Check> {
    results.iter().map(|r| Check::new(&format!("criterion_{}", r.id), r.pass, r.detail.clone())).collect()
}
