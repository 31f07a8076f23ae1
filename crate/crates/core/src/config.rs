//! Run configuration (JSON, versioned schema).

use crate::error::{Error, Result};
use crate::filtration::LevelSet;
use crate::market::{MarketSpec, RenewalSpec, TickGrid, Weight};
use crate::projection::{CoupledModel, LevelsOn, ProjectionSpec};
use crate::rng::RngSpec;
use crate::stochastics::{SdeModel, Sigma, TimeGrid};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const SCHEMA: &str = "slmj.run/1";

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaSection {
    pub kind: Option<String>,
    pub c: Option<f64>,
    pub p: Option<f64>,
    pub value: Option<f64>,
    pub xs: Option<Vec<f64>>,
    pub ys: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: Option<String>,
    pub x0: Option<f64>,
    pub sigma: Option<SigmaSection>,
    #[serde(default)]
    pub drift: bool,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsSection {
    pub on: Option<LevelsOn>,
    #[serde(default)]
    pub upper: Vec<f64>,
    #[serde(default)]
    pub lower: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub bucket_steps: usize,
    pub min_occupancy: usize,
    pub noise_threshold: f64,
    pub bridge: bool,
    /// Paths whose full `M` and `X` traces are plotted.
    pub trace_paths: usize,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self { bucket_steps: 8, min_occupancy: 30, noise_threshold: 0.4, bridge: true, trace_paths: 5 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntensitySection {
    pub gamma: f64,
    pub n: usize,
    pub horizon: f64,
    pub points: usize,
    /// Multiplies the analytic hazard; 2 is the negative control.
    pub hazard_scale: f64,
    pub tolerance: f64,
}

impl Default for IntensitySection {
    fn default() -> Self {
        Self { gamma: 1.0, n: 100_000, horizon: 3.0, points: 60, hazard_scale: 1.0, tolerance: 0.05 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub renewal: Option<RenewalSpec>,
    #[serde(default)]
    pub weight: Weight,
    #[serde(default = "default_y_bin")]
    pub y_bin: f64,
    pub tick: Option<TickGrid>,
    /// Time-bucket width of the market keys, in grid steps.
    #[serde(default = "default_market_bucket")]
    pub bucket_steps: usize,
    /// Paths written to the observation CSV.
    #[serde(default = "default_written")]
    pub write_paths: usize,
}

fn default_y_bin() -> f64 {
    1.0
}

fn default_market_bucket() -> usize {
    128
}

fn default_written() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifySection {
    pub eps: Vec<f64>,
}

impl Default for ClassifySection {
    fn default() -> Self {
        Self { eps: vec![0.1, 1.0, 10.0] }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Paths written in full to the path CSV.
    pub write_paths: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { write_paths: 10 }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelftestSection {
    /// Criteria to run (1-based); all when absent.
    pub criteria: Option<Vec<u8>>,
    /// Perturb the first-passage CDF used by the checks (negative control).
    pub corrupt_fp_cdf: bool,
    /// Divide ensemble sizes by this factor.
    pub shrink: Option<usize>,
}

/// The raw configuration document.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: Option<String>,
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub levels: LevelsSection,
    pub grid: Option<GridSection>,
    pub n_paths: Option<usize>,
    pub eval_times: Option<Vec<f64>>,
    #[serde(default)]
    pub estimator: EstimatorSection,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub intensity: IntensitySection,
    pub market: Option<MarketSection>,
    #[serde(default)]
    pub classify: ClassifySection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub selftest: SelftestSection,
    /// Checks whose failure makes the command exit nonzero; the command's
    /// default set when absent.
    pub checks: Option<Vec<String>>,
}

fn need<T: Clone>(v: &Option<T>, field: &str) -> Result<T> {
    v.clone().ok_or_else(|| Error::config(field, "missing"))
}

fn at(field: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Config { .. } => e,
        other => Error::config(field, other.to_string()),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        cfg.validate_sections()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Validate every section that is present.
    pub fn validate_sections(&self) -> Result<()> {
        match self.schema.as_deref() {
            None => return Err(Error::config("schema", format!("missing; expected \"{SCHEMA}\""))),
            Some(SCHEMA) => {}
            Some(s) => return Err(Error::config("schema", format!("unsupported \"{s}\"; expected \"{SCHEMA}\""))),
        }
        if self.model.is_some() {
            self.model()?;
        }
        self.level_set()?;
        if self.grid.is_some() {
            let g = self.grid()?;
            if let Some(ts) = &self.eval_times {
                for &t in ts {
                    if !(t >= g.t_start && t <= g.horizon) {
                        return Err(Error::config("eval_times", format!("{t} outside [0, {}]", g.horizon)));
                    }
                }
                if ts.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::config("eval_times", "must be strictly increasing"));
                }
            }
        }
        if self.n_paths == Some(0) {
            return Err(Error::config("n_paths", "must be at least 1"));
        }
        let e = &self.estimator;
        if e.bucket_steps == 0 {
            return Err(Error::config("estimator.bucket_steps", "must be at least 1"));
        }
        if e.min_occupancy == 0 {
            return Err(Error::config("estimator.min_occupancy", "must be at least 1"));
        }
        if !(e.noise_threshold >= 0.0) {
            return Err(Error::config("estimator.noise_threshold", "must be >= 0"));
        }
        self.intensity_checked()?;
        if self.market.is_some() {
            self.market_spec()?;
        }
        if self.classify.eps.is_empty() || self.classify.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::config("classify.eps", "need positive finite values"));
        }
        if let Some(c) = &self.selftest.criteria {
            if c.iter().any(|&i| !(1..=12).contains(&i)) {
                return Err(Error::config("selftest.criteria", "criteria are numbered 1 to 12"));
            }
        }
        if self.selftest.shrink == Some(0) {
            return Err(Error::config("selftest.shrink", "must be at least 1"));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn model(&self) -> Result<CoupledModel> {
        let m = self.model.as_ref().ok_or_else(|| Error::config("model", "missing"))?;
        let kind = need(&m.kind, "model.kind")?;
        let x0 = need(&m.x0, "model.x0")?;
        match kind.as_str() {
            "inverse_bessel" => {
                if m.sigma.is_some() {
                    return Err(Error::config("model.sigma", "not used by the inverse Bessel model"));
                }
                CoupledModel::inverse_bessel(x0).map_err(at("model.x0"))
            }
            "sde" => {
                let s = m.sigma.as_ref().ok_or_else(|| Error::config("model.sigma", "missing"))?;
                let sigma = match need(&s.kind, "model.sigma.kind")?.as_str() {
                    "power" => Sigma::power(need(&s.c, "model.sigma.c")?, need(&s.p, "model.sigma.p")?),
                    "constant" => Sigma::Constant(need(&s.value, "model.sigma.value")?),
                    "tabulated" => Sigma::tabulated(need(&s.xs, "model.sigma.xs")?, need(&s.ys, "model.sigma.ys")?)
                        .map_err(at("model.sigma"))?,
                    other => {
                        return Err(Error::config(
                            "model.sigma.kind",
                            format!("unknown \"{other}\"; expected power, constant or tabulated"),
                        ))
                    }
                };
                sigma.validate().map_err(at("model.sigma"))?;
                let mut model = SdeModel::new(x0, sigma).map_err(at("model.x0"))?;
                if m.drift {
                    model = model.with_drift();
                }
                Ok(CoupledModel::Sde(model))
            }
            other => Err(Error::config("model.kind", format!("unknown \"{other}\"; expected inverse_bessel or sde"))),
        }
    }

    pub fn levels_on(&self) -> LevelsOn {
        self.levels.on.unwrap_or(LevelsOn::Driver)
    }

    pub fn level_set(&self) -> Result<LevelSet> {
        let up = LevelSet::new(self.levels.upper.clone()).map_err(at("levels.upper"))?;
        up.with_lower(self.levels.lower.clone()).map_err(at("levels.lower"))
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        let g = self.grid.as_ref().ok_or_else(|| Error::config("grid", "missing"))?;
        let horizon = need(&g.horizon, "grid.horizon")?;
        match (g.dt, g.steps) {
            (Some(_), Some(_)) => Err(Error::config("grid", "give either dt or steps, not both")),
            (Some(dt), None) => TimeGrid::with_step(horizon, dt).map_err(at("grid.dt")),
            (None, Some(n)) => TimeGrid::new(0.0, horizon, n).map_err(at("grid.steps")),
            (None, None) => Err(Error::config("grid.dt", "missing (or give grid.steps)")),
        }
    }

    pub fn eval_times(&self) -> Result<Vec<f64>> {
        Ok(self.eval_times.clone().unwrap_or_else(|| self.grid.as_ref().and_then(|g| g.horizon).into_iter().collect()))
    }

    pub fn projection_spec(&self) -> Result<ProjectionSpec> {
        let grid = self.grid()?;
        let mut s = ProjectionSpec::new(
            grid,
            self.n_paths.unwrap_or(10_000),
            self.eval_times()?,
            RngSpec::new(self.seed(), 0),
        );
        let e = &self.estimator;
        s.bucket_steps = e.bucket_steps;
        s.min_occupancy = e.min_occupancy;
        s.noise_threshold = e.noise_threshold;
        s.bridge = e.bridge;
        s.trace_paths = e.trace_paths;
        s.levels_on = self.levels_on();
        s.engine_spec().validate()?;
        Ok(s)
    }

    pub fn intensity_checked(&self) -> Result<&IntensitySection> {
        let i = &self.intensity;
        if !(i.gamma > 0.0 && i.gamma.is_finite()) {
            return Err(Error::config("intensity.gamma", format!("{} must be positive", i.gamma)));
        }
        if i.n < 100 {
            return Err(Error::config("intensity.n", "need at least 100 samples"));
        }
        if !(i.horizon > 0.0 && i.horizon.is_finite()) {
            return Err(Error::config("intensity.horizon", "must be positive"));
        }
        if i.points < 2 {
            return Err(Error::config("intensity.points", "need at least 2"));
        }
        if !(i.hazard_scale > 0.0 && i.hazard_scale.is_finite()) {
            return Err(Error::config("intensity.hazard_scale", "must be positive"));
        }
        if !(i.tolerance > 0.0) {
            return Err(Error::config("intensity.tolerance", "must be positive"));
        }
        Ok(i)
    }

    pub fn market_spec(&self) -> Result<(MarketSpec, Option<TickGrid>)> {
        let m = self.market.as_ref().ok_or_else(|| Error::config("market", "missing"))?;
        let spec = MarketSpec {
            renewal: m.renewal.clone().unwrap_or(RenewalSpec::Exponential { rate: 2.0 }),
            weight: m.weight,
            y_bin: m.y_bin,
        };
        spec.validate().map_err(at("market"))?;
        if m.bucket_steps == 0 {
            return Err(Error::config("market.bucket_steps", "must be at least 1"));
        }
        if let Some(t) = &m.tick {
            t.validate().map_err(at("market.tick"))?;
        }
        Ok((spec, m.tick))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "schema": "slmj.run/1",
        "model": {"kind": "sde", "x0": 1.0, "sigma": {"kind": "power", "c": 1.0, "p": 2.0}},
        "levels": {"on": "driver", "upper": [1.0, 2.0]},
        "grid": {"horizon": 2.0, "dt": 0.00390625},
        "n_paths": 1000,
        "eval_times": [0.5, 1.0, 2.0],
        "seed": 7
    }"#;

    fn field(text: &str) -> String {
        match RunConfig::from_json(text).unwrap_err() {
            Error::Config { field, .. } => field,
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn base_config_is_valid() {
        let c = RunConfig::from_json(BASE).unwrap();
        let s = c.projection_spec().unwrap();
        assert_eq!(s.grid.steps, 512);
        assert_eq!(s.bucket_steps, 8);
        assert_eq!(s.min_occupancy, 30);
        assert_eq!(c.level_set().unwrap().levels(), &[1.0, 2.0]);
        assert!(matches!(c.model().unwrap(), CoupledModel::Sde(_)));
    }

    #[test]
    fn missing_sigma_names_the_field() {
        let t = BASE.replace(r#", "sigma": {"kind": "power", "c": 1.0, "p": 2.0}"#, "");
        assert_eq!(field(&t), "model.sigma");
        let t = BASE.replace(r#""c": 1.0, "#, "");
        assert_eq!(field(&t), "model.sigma.c");
    }

    #[test]
    fn unsorted_levels_are_rejected() {
        assert_eq!(field(&BASE.replace("[1.0, 2.0]", "[2.0, 1.0]")), "levels.upper");
    }

    #[test]
    fn schema_is_checked() {
        assert_eq!(field(&BASE.replace("slmj.run/1", "slmj.run/0")), "schema");
        assert_eq!(field(&BASE.replace(r#""schema": "slmj.run/1","#, "")), "schema");
    }

    #[test]
    fn other_field_errors() {
        assert_eq!(field(&BASE.replace(r#""dt": 0.00390625"#, r#""dt": -1"#)), "grid.dt");
        assert_eq!(field(&BASE.replace("[0.5, 1.0, 2.0]", "[0.5, 3.0]")), "eval_times");
        assert_eq!(field(&BASE.replace(r#""seed": 7"#, r#""seed": 7, "intensity": {"gamma": 0}"#)), "intensity.gamma");
        assert_eq!(field(&BASE.replace(r#""seed": 7"#, r#""seed": 7, "bogus": 1"#)), "<document>");
        assert_eq!(field(&BASE.replace(r#""kind": "sde""#, r#""kind": "heston""#)), "model.kind");
        assert_eq!(field(&BASE.replace(r#""n_paths": 1000"#, r#""n_paths": 0"#)), "n_paths");
    }

    #[test]
    fn inverse_bessel_model() {
        let t = BASE.replace(r#""kind": "sde", "x0": 1.0, "sigma": {"kind": "power", "c": 1.0, "p": 2.0}"#, r#""kind": "inverse_bessel", "x0": 1.0"#);
        let c = RunConfig::from_json(&t).unwrap();
        assert_eq!(c.model().unwrap(), CoupledModel::inverse_bessel(1.0).unwrap());
    }
}
