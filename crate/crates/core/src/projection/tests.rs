use super::*;
use crate::filtration::{detect_passages, ObservationRecord, PassageEvent};
use crate::stats::MeanEstimate;
use crate::stochastics::{inverse_path, sample_bessel3_coupled};
use proptest::prelude::*;

fn bessel() -> CoupledModel {
    CoupledModel::inverse_bessel(1.0).unwrap()
}

fn spec(n: usize, horizon: f64, steps: usize, eval: Vec<f64>, seed: u64) -> ProjectionSpec {
    ProjectionSpec::new(TimeGrid::new(0.0, horizon, steps).unwrap(), n, eval, RngSpec::new(seed, 0))
}

#[test]
fn empty_levels_give_the_ensemble_mean() {
    let s = spec(3000, 1.0, 64, vec![0.5, 1.0], 1);
    let out = project_ensemble(&bessel(), &LevelSet::empty(), &s).unwrap();
    for i in 0..2 {
        let m0 = out.paths[0].m_eval[i];
        assert!(out.paths.iter().all(|p| p.m_eval[i] == m0 && p.confident[i]));
        let xs: Vec<f64> = out.paths.iter().map(|p| p.x_eval[i]).collect();
        assert!((MeanEstimate::from_slice(&xs).mean - m0).abs() < 1e-12);
        assert!(out.paths.iter().all(|p| p.jumps.is_empty()));
    }
}

#[test]
fn frozen_process_has_constant_projection() {
    let model = CoupledModel::Sde(SdeModel::new(1.0, Sigma::Constant(0.0)).unwrap());
    let s = spec(500, 1.0, 64, vec![0.25, 1.0], 2);
    let out = project_ensemble(&model, &LevelSet::new(vec![0.5, 1.0]).unwrap(), &s).unwrap();
    assert!(out.paths.iter().any(|p| !p.events.is_empty()));
    for p in &out.paths {
        assert!(p.m_eval.iter().all(|&m| m == 1.0));
        assert!(extract_jumps(p, 1e-12).is_empty());
    }
}

#[test]
fn infinite_threshold_and_no_events_give_no_jumps() {
    let s = spec(2000, 1.0, 64, vec![1.0], 3);
    let out = project_ensemble(&bessel(), &LevelSet::new(vec![0.5, 1.0]).unwrap(), &s).unwrap();
    assert!(out.paths.iter().any(|p| !extract_jumps(p, 0.0).is_empty()));
    assert!(out.paths.iter().all(|p| extract_jumps(p, f64::INFINITY).is_empty()));
    assert!(out.paths.iter().filter(|p| p.events.is_empty()).all(|p| extract_jumps(p, 0.0).is_empty()));
}

#[test]
fn in_sample_tower_is_exact_and_held_out_tower_holds() {
    let s = spec(20_000, 1.0, 128, vec![0.5, 1.0], 4);
    let out = project_ensemble(&bessel(), &LevelSet::new(vec![1.0, 2.0]).unwrap(), &s).unwrap();
    for i in 0..2 {
        let (m, x) = (out.summary.mean_m[i], out.summary.mean_x_confident[i]);
        assert!((m.mean - x.mean).abs() < 1e-9);
        let (m, x) = out.held_out_tower(i);
        assert!(m.z_against(&x).abs() < 3.0, "{m:?} {x:?}");
    }
}

#[test]
fn jumps_sit_on_their_event_steps() {
    let s = spec(5000, 1.0, 128, vec![1.0], 5);
    let out = project_ensemble(&bessel(), &LevelSet::new(vec![0.5, 1.0]).unwrap(), &s).unwrap();
    for p in &out.paths {
        assert_eq!(p.jumps.len(), p.events.iter().map(|e| e.step).collect::<std::collections::BTreeSet<_>>().len());
        for j in &p.jumps {
            assert!(p.events.iter().any(|e| e.step == j.step && e.time == j.time));
            assert!(j.time > s.grid.time(j.step - 1) && j.time < s.grid.time(j.step));
        }
    }
}

#[test]
fn projection_at_a_level_on_x_equals_the_level() {
    let mut s = spec(20_000, 1.0, 256, vec![1.0], 6);
    s.levels_on = LevelsOn::Process;
    let levels = LevelSet::new(vec![1.5, 2.0]).unwrap();
    let out = project_ensemble(&bessel(), &levels, &s).unwrap();
    for (i, &beta) in levels.levels().iter().enumerate() {
        let v: Vec<f64> = out
            .paths
            .iter()
            .flat_map(|p| p.jumps.iter())
            .filter(|j| j.confident && j.label == i as u32)
            .map(|j| j.right)
            .collect();
        let m = MeanEstimate::from_slice(&v);
        assert!(m.n > 100);
        assert!((m.mean - beta).abs() < 0.03 * beta, "level {beta}: {m:?}");
    }
}

#[test]
fn process_levels_must_lie_above_the_start() {
    let mut s = spec(10, 1.0, 8, vec![], 7);
    s.levels_on = LevelsOn::Process;
    let err = project_ensemble(&bessel(), &LevelSet::new(vec![0.5]).unwrap(), &s).unwrap_err();
    assert!(matches!(err, Error::InvalidLevels(_)));
}

#[test]
fn nested_estimator_returns_the_state_value_at_capture() {
    let s = spec(400, 1.0, 64, vec![], 8);
    let levels = LevelSet::new(vec![0.25]).unwrap();
    let out = project_ensemble(&bessel(), &levels, &s).unwrap();
    let p = out.paths.iter().find(|p| !p.events.is_empty()).unwrap();
    let key = ConditioningKey::from_events(&p.events, p.events[0].step, s.bucket_steps);
    let states = capture_states(&bessel(), &levels, &s, &key).unwrap();
    let c = states.iter().find(|c| c.stream_id == p.stream_id).unwrap();
    let t = s.grid.time(c.step);
    let est = conditional_from_states(&bessel(), s.grid, std::slice::from_ref(c), t, 10, s.rng).unwrap();
    assert_eq!(est.mean, c.x);
}

#[test]
fn nested_and_ensemble_estimators_agree() {
    let levels = LevelSet::new(vec![1.0, 2.0]).unwrap();
    let s = spec(40_000, 1.0, 128, vec![0.75], 9);
    let out = project_ensemble(&bessel(), &levels, &s).unwrap();
    // first passage of 1 during steps 25..=32, i.e. (0.1875, 0.25]
    let key = ConditioningKey { tokens: vec![(0, 3)], bucket_steps: 8 };
    let ens = out.group_mean(&key, 0);
    let mut s2 = s.clone();
    s2.rng = RngSpec::new(99, 0);
    s2.n_paths = 20_000;
    let ex = project_conditional_exact(&bessel(), &levels, &s2, &key, 0.75, 8).unwrap();
    let z = (ens.mean - ex.mean) / (ens.se * ens.se + ex.se * ex.se).sqrt();
    assert!(ens.n > 100 && ex.states > 100);
    assert!(z.abs() < 3.0, "ensemble {ens:?} nested {ex:?}");
}

#[test]
fn rejection_inefficiency_is_reported() {
    // driver levels at ±1e-3: continuations almost surely cross one
    let model = CoupledModel::Sde(SdeModel::new(0.0, Sigma::Constant(1.0)).unwrap());
    let levels = LevelSet::new(vec![1e-3]).unwrap().with_lower(vec![-1e-3]).unwrap();
    let s = spec(200, 1.0, 4096, vec![], 10);
    let key = ConditioningKey { tokens: vec![], bucket_steps: 8 };
    let err = project_conditional_exact(&model, &levels, &s, &key, 1.0, 20).unwrap_err();
    assert!(matches!(err, Error::RejectionInefficient { .. }), "{err:?}");
}

#[test]
fn frozen_keys_keep_the_true_martingale_flat_and_let_the_strict_one_drift_down() {
    let eval = vec![0.25, 0.5, 0.75, 1.0];
    let levels = LevelSet::new(vec![0.5, 1.0]).unwrap();
    let mut s = spec(20_000, 1.0, 128, eval, 11);
    s.frozen_at = Some(0.25);
    let pooled = |out: &EngineOutput| {
        let (mut first, mut last) = (Vec::new(), Vec::new());
        for p in out.paths.iter().filter(|p| p.confident[0] && !p.floored) {
            first.push(p.x_eval[0]);
            last.push(p.x_eval[3]);
        }
        let d: Vec<f64> = first.iter().zip(&last).map(|(a, b)| b - a).collect();
        MeanEstimate::from_slice(&d)
    };
    let linear = CoupledModel::Sde(SdeModel::new(1.0, Sigma::power(1.0, 1.0)).unwrap());
    let out = project_ensemble(&linear, &levels, &s).unwrap();
    assert!(!out.frozen.is_empty());
    let d = pooled(&out);
    assert!((d.mean / d.se).abs() < 3.0, "{d:?}");
    for f in &out.frozen {
        assert_eq!(f.times.len(), 4);
        assert!(f.means.iter().all(|m| m.n <= f.size));
    }

    let out = project_ensemble(&bessel(), &levels, &s).unwrap();
    let d = pooled(&out);
    assert!(d.mean < 3.0 * d.se, "{d:?}");
    assert!(d.mean < 0.0);
}

#[test]
fn refining_the_levels_reduces_the_residual_variance() {
    let s = spec(20_000, 1.0, 128, vec![1.0], 12);
    let coarse = project_ensemble(&bessel(), &LevelSet::new(vec![1.0]).unwrap(), &s).unwrap();
    let fine = project_ensemble(&bessel(), &LevelSet::new(vec![0.5, 1.0]).unwrap(), &s).unwrap();
    let (a, b) = (coarse.residual_variance(0), fine.residual_variance(0));
    assert!(b.mean <= a.mean + 3.0 * a.se.hypot(b.se), "coarse {a:?} fine {b:?}");
}

#[test]
fn output_does_not_depend_on_the_worker_count() {
    let mut s = spec(3000, 1.0, 64, vec![0.5, 1.0], 13);
    s.trace_paths = 3;
    s.noise_threshold = 0.05;
    let levels = LevelSet::new(vec![0.5, 1.0]).unwrap();
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| serde_json::to_string(&project_ensemble(&bessel(), &levels, &s).unwrap()).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn reducing_time_is_the_first_exit() {
    let ev = |level, time, direction| PassageEvent { level, time, direction, step: 0 };
    let rec = ObservationRecord::new(vec![ev(1.0, 0.8, Direction::Up), ev(-1.0, 1.3, Direction::Down)], 0.0, 2.0).unwrap();
    let t = reducing_times(&rec, &[1.0]).unwrap();
    assert_eq!(t[0], ReducingTime { alpha: 1.0, time: 0.8, censored: false });
    let t = reducing_times(&ObservationRecord::empty(0.0, 2.0), &[0.5, 1.0]).unwrap();
    assert!(t.iter().all(|r| r.censored && r.time == 2.0));
    assert!(reducing_times(&rec, &[1.0, 0.5]).is_err());
}

#[test]
fn inverse_bessel_is_bounded_before_each_reducing_time() {
    let alphas = [0.25, 0.5, 0.75, 0.9];
    let levels = LevelSet::symmetric(alphas.to_vec()).unwrap();
    let grid = TimeGrid::new(0.0, 2.0, 256).unwrap();
    for s in 0..500 {
        let rs = RngSpec::new(14, s);
        let (r, b) = sample_bessel3_coupled(grid, 1.0, rs).unwrap();
        let x = inverse_path(&r).unwrap();
        let rec = detect_passages(&b, &levels, None).unwrap();
        for rt in reducing_times(&rec, &alphas).unwrap() {
            let (sup, _) = stopped(&x, &rt);
            assert!(sup <= 1.0 / (1.0 - rt.alpha) * (1.0 + 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reducing_times_increase(seed in 0u64..1_000_000, n in 1usize..6) {
        let alphas: Vec<f64> = (1..=n).map(|i| 0.3 * i as f64).collect();
        let levels = LevelSet::symmetric(alphas.clone()).unwrap();
        let grid = TimeGrid::new(0.0, 2.0, 256).unwrap();
        let b = crate::stochastics::sample_brownian(grid, RngSpec::new(seed, 0)).unwrap();
        let rec = detect_passages(&b, &levels, Some(RngSpec::new(seed, 1))).unwrap();
        let t = reducing_times(&rec, &alphas).unwrap();
        prop_assert!(t.windows(2).all(|w| w[1].time >= w[0].time));
        prop_assert!(t.windows(2).all(|w| !w[0].censored || w[1].censored));
    }

    #[test]
    fn bucket_is_monotone(a in 1usize..10_000, b in 1usize..10_000, w in 1usize..64) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(ConditioningKey::bucket(lo, w) <= ConditioningKey::bucket(hi, w));
    }
}

#[test]
fn single_stream_matches_the_ensemble() {
    let model = CoupledModel::inverse_bessel(1.0).unwrap();
    let levels = LevelSet::new(vec![0.5, 1.0]).unwrap();
    let mut spec = ProjectionSpec::new(TimeGrid::new(0.0, 1.0, 128).unwrap(), 64, vec![0.5, 1.0], RngSpec::new(3, 0));
    spec.min_occupancy = 1;
    let out = project_ensemble(&model, &levels, &spec).unwrap();
    for s in [0u64, 17, 63] {
        let obs = PassageObserver::new(&model, &levels, LevelsOn::Driver, Some(spec.rng.with_stream(s).substream(crate::rng::purpose::BRIDGE))).unwrap();
        let sp = simulate_stream(&model, spec.grid, spec.rng.with_stream(s), Some(obs)).unwrap();
        let p = &out.paths[s as usize];
        assert_eq!(sp.events, p.events);
        assert_eq!(sp.x.values()[64], p.x_eval[0]);
        assert_eq!(sp.x.terminal(), p.x_eval[1]);
    }
}
